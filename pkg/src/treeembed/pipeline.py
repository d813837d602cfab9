"""File-to-file pipeline stages and the run manifest.

Every stage reads its inputs from, and writes its outputs to, one output
directory under fixed names, so any suffix of the pipeline can be re-run
against cached artifacts. ``run_pipeline`` records a SHA-256 digest of each
stage's inputs and outputs in ``manifest.json``; a suffix run checks the
cached inputs against that record before starting.
"""
from __future__ import annotations

import hashlib
import logging
import platform
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from . import __version__, io
from .analysis import (characterize_cluster, classification_harness, confusion, direct_vectors,
                       kmeans, nearest_bands_direct, nearest_bands_embedding, purity)
from .banding import build_band_table, parse_token, token_name
from .config import PipelineConfig, derive_seed, dump_config
from .embed import band_contexts, init_model, train
from .hypercube import load_hypercube, save_hypercube
from .segments import monotone_table, tree_profile
from .synth import generate_scene
from .treex import connected_grids, extract_trees, leaf_mask
from .treevec import tree_vectors
from .vegindex import compute_all

logger = logging.getLogger(__name__)

F = {
    "cube": "scene.hdr", "payload": "scene.bsq", "truth": "ground_truth.csv",
    "trees": "trees.csv", "trees_summary": "trees.json",
    "pixels": "pixel_indices.csv",
    "segments": "segments.csv", "monotone": "monotone_histogram.csv",
    "bands": "bands.csv", "thresholds": "band_thresholds.json",
    "model": "model.json", "loss": "loss_history.csv", "embeddings": "embeddings.csv",
    "tree_vectors": "tree_vectors.csv", "direct_vectors": "direct_vectors.csv",
    "clusters_embedding": "clusters_embedding.csv", "clusters_direct": "clusters_direct.csv",
    "purity": "purity.json", "accuracy": "accuracy.csv",
    "characterization": "characterization.csv", "neighbors": "neighbors.csv",
    "config": "config.ini", "manifest": "manifest.json",
}


class StageError(RuntimeError):
    def __init__(self, stage, message):
        super().__init__(f"stage '{stage}' failed: {message}")
        self.stage = stage


def digest(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for chunk in iter(lambda: fh.read(1 << 20), b""):
            h.update(chunk)
    return h.hexdigest()


def cube_path(cfg: PipelineConfig, out: Path) -> Path:
    return Path(cfg.run.cube) if cfg.run.cube else out / F["cube"]


# stages -----------------------------------------------------------------

def stage_synth(cfg, out):
    scene = generate_scene(cfg.scene_spec())
    save_hypercube(scene.cube, out / F["cube"])
    io.write_csv(out / F["truth"], ["tree_id", "x", "y"],
                 ((c.id, x, y) for c in scene.crowns
                  for x, y in sorted(zip(c.xs.tolist(), c.ys.tolist()))))
    return scene


def stage_extract(cfg, out):
    e = cfg.extract
    cube = load_hypercube(cube_path(cfg, out))
    mask = connected_grids(leaf_mask(cube, cfg.leaf_thresholds()), e.k, e.theta_g)
    trees = extract_trees(mask, e.min_tree_pixels, e.grow_through_leaves)
    io.write_trees(trees, out / F["trees"])
    io.write_json(out / F["trees_summary"], io.tree_summary(trees))
    return trees


def stage_indices(cfg, out):
    cube = load_hypercube(cube_path(cfg, out))
    trees = io.read_trees(out / F["trees"])
    rows = [compute_all(cube, t, cfg.index_options()) for t in trees]
    io.write_pixel_indices(rows, out / F["pixels"])
    return rows


def stage_segment(cfg, out):
    trees = {t.id: t for t in io.read_trees(out / F["trees"])}
    rows = io.read_pixel_indices(out / F["pixels"])
    n = cfg.run.n_segments
    profiles = [tree_profile(trees[r.tree_id], r, n) for r in rows]
    io.write_profiles(profiles, out / F["segments"])
    io.write_monotone_table(monotone_table(profiles, n), out / F["monotone"])
    return profiles


def stage_band(cfg, out):
    table = build_band_table(io.read_profiles(out / F["segments"]))
    io.write_band_table(table, out / F["bands"], out / F["thresholds"], cfg.run.paper_sentinel)
    return table


def _load_table(out):
    return io.read_band_table(out / F["bands"], out / F["thresholds"],
                              io.read_profiles(out / F["segments"]))


def stage_train(cfg, out, epochs=None, lr=None):
    table = io.read_band_table(out / F["bands"], out / F["thresholds"])
    contexts = band_contexts(table)
    init_seed = derive_seed(cfg.run.seed, "embed-init")
    model = init_model(table.vocab_size, cfg.embed, init_seed)
    model, history = train(model, contexts, epochs=epochs, lr=lr,
                           seed=derive_seed(cfg.run.seed, "embed-train"))
    io.write_model(model, out / F["model"])
    io.write_loss_history(history, out / F["loss"])
    io.write_embeddings(model, out / F["embeddings"])
    return model, history


def stage_vectors(cfg, out):
    table = _load_table(out)
    model = io.read_model(out / F["model"])
    tau = tree_vectors(table, model)
    io.write_vectors(table.tree_ids, tau, out / F["tree_vectors"], prefix="e")
    io.write_vectors(table.tree_ids, direct_vectors(table), out / F["direct_vectors"], prefix="d")
    return tau


SPACES = {"embedding": "tree_vectors", "direct": "direct_vectors"}


def stage_cluster(cfg, out, spaces=("embedding", "direct"), k=None):
    result = {}
    for space in spaces:
        ids, X = io.read_vectors(out / F[SPACES[space]])
        a = kmeans(X, k or cfg.analysis.k, derive_seed(cfg.run.seed, f"kmeans-{space}"), ids, space)
        io.write_clusters(a, out / F[f"clusters_{space}"])
        result[space] = a
    return result


def stage_purity(cfg, out, path_a=None, path_b=None):
    a = io.read_clusters(path_a or out / F["clusters_embedding"], "embedding")
    b = io.read_clusters(path_b or out / F["clusters_direct"], "direct")
    report = {"purity": purity(a, b), "confusion": confusion(a, b).tolist(),
              "n_trees": int(a.tree_ids.size)}
    io.write_json(out / F["purity"], report)
    return report


def stage_classify(cfg, out, algorithms=None, fractions=None, repetitions=None,
                   spaces=("embedding", "direct")):
    a = cfg.analysis
    rows = []
    for space in spaces:
        ids, X = io.read_vectors(out / F[SPACES[space]])
        labels = io.read_clusters(out / F[f"clusters_{space}"]).as_dict()
        y = np.array([labels[t] for t in ids])
        for algo in algorithms or a.classifiers:
            seed = derive_seed(cfg.run.seed, f"classify-{space}-{algo}")
            for r in classification_harness(X, y, algo, fractions or a.test_fractions,
                                             repetitions or a.repetitions, seed):
                rows.append((space, algo, r.fraction, r.mean_accuracy, r.repetitions, r.skipped))
    io.write_csv(out / F["accuracy"],
                 ["space", "algorithm", "test_fraction", "mean_accuracy", "repetitions", "skipped"],
                 rows)
    return rows


def stage_characterize(cfg, out, cluster_ids=None, top_n=None):
    table = _load_table(out)
    direct = direct_vectors(table)
    clusters = io.read_clusters(out / F["clusters_embedding"]).as_dict()
    labels = np.array([clusters[int(t)] for t in table.tree_ids])
    rows = []
    for c in cluster_ids or sorted(set(labels.tolist())):
        members = np.nonzero(labels == c)[0]
        if members.size == 0:
            raise ValueError(f"cluster {c} is empty")
        for rank, r in enumerate(characterize_cluster(members, direct, table,
                                                      top_n or cfg.analysis.top_n), 1):
            rows.append((c, rank, r.label, r.segment, r.index, r.band, r.deviation))
    io.write_csv(out / F["characterization"],
                 ["cluster", "rank", "label", "segment", "index", "band", "deviation"], rows)
    return rows


def stage_nn(cfg, out, tokens=None, n=None, spaces=("embedding", "direct"), metric=None):
    a = cfg.analysis
    n = n or a.nn_n
    rows = []
    model = contexts = None
    for name in tokens or a.nn_tokens:
        tok = parse_token(name)
        for space in spaces:
            if space == "embedding":
                model = model or io.read_model(out / F["model"])
                hits = nearest_bands_embedding(model, tok, n, metric or a.nn_metric)
                q = model.E[:, tok - 1]
                scores = [float(np.linalg.norm(model.E[:, h - 1] - q)) for h in hits]
            else:
                if contexts is None:
                    contexts = band_contexts(io.read_band_table(out / F["bands"],
                                                                out / F["thresholds"]))
                hits = nearest_bands_direct(contexts, tok, n)
                scores = [float(contexts.jaccard[tok - 1, h - 1]) for h in hits]
            for rank, (h, s) in enumerate(zip(hits, scores), 1):
                rows.append((name, space, rank, token_name(h), h, s))
    io.write_csv(out / F["neighbors"], ["query", "space", "rank", "neighbor", "token", "score"], rows)
    return rows


@dataclass(frozen=True)
class Stage:
    name: str
    run: callable
    inputs: tuple
    outputs: tuple


STAGES = (
    Stage("synth", stage_synth, (), ("cube", "payload", "truth")),
    Stage("extract", stage_extract, ("cube", "payload"), ("trees", "trees_summary")),
    Stage("indices", stage_indices, ("cube", "payload", "trees"), ("pixels",)),
    Stage("segment", stage_segment, ("trees", "pixels"), ("segments", "monotone")),
    Stage("band", stage_band, ("segments",), ("bands", "thresholds")),
    Stage("train", stage_train, ("bands", "thresholds"), ("model", "loss", "embeddings")),
    Stage("vectors", stage_vectors, ("bands", "thresholds", "segments", "model"),
          ("tree_vectors", "direct_vectors")),
    Stage("cluster", stage_cluster, ("tree_vectors", "direct_vectors"),
          ("clusters_embedding", "clusters_direct")),
    Stage("purity", stage_purity, ("clusters_embedding", "clusters_direct"), ("purity",)),
    Stage("classify", stage_classify,
          ("tree_vectors", "direct_vectors", "clusters_embedding", "clusters_direct"), ("accuracy",)),
    Stage("characterize", stage_characterize,
          ("bands", "thresholds", "segments", "clusters_embedding"), ("characterization",)),
    Stage("nn", stage_nn, ("model", "bands", "thresholds"), ("neighbors",)),
)
STAGE_NAMES = tuple(s.name for s in STAGES)


def _file_for(key, cfg, out):
    if key == "cube":
        return cube_path(cfg, out)
    if key == "payload":
        return cube_path(cfg, out).with_suffix(".bsq")
    return out / F[key]


def run_pipeline(cfg: PipelineConfig, out_dir, from_stage: str | None = None) -> dict:
    """Run all stages (or those from ``from_stage`` on) and write the manifest."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    stages = [s for s in STAGES if not (s.name == "synth" and cfg.run.cube)]
    start = 0
    previous = {}
    if from_stage is not None:
        names = [s.name for s in stages]
        if from_stage not in names:
            raise ValueError(f"unknown stage {from_stage!r}; choose from {names}")
        start = names.index(from_stage)
        manifest_path = out / F["manifest"]
        if start > 0:
            if not manifest_path.exists():
                raise StageError(from_stage, "no manifest for cached stage outputs")
            previous = io.read_json(manifest_path)
    records = {k: v for k, v in previous.get("stages", {}).items()
               if k in [s.name for s in stages[:start]]}
    known = {}
    for rec in records.values():
        known.update(rec["outputs"])
    for stage in stages[start:]:
        inputs = {}
        for key in stage.inputs:
            path = _file_for(key, cfg, out)
            if not path.exists():
                raise StageError(stage.name, f"missing input {path}")
            inputs[path.name] = digest(path)
            if path.name in known and known[path.name] != inputs[path.name]:
                raise StageError(stage.name, f"cached input {path.name} changed since it was written")
        logger.info("running stage %s", stage.name)
        try:
            stage.run(cfg, out)
        except StageError:
            raise
        except Exception as exc:
            raise StageError(stage.name, f"{type(exc).__name__}: {exc}") from exc
        outputs = {_file_for(k, cfg, out).name: digest(_file_for(k, cfg, out)) for k in stage.outputs}
        known.update(outputs)
        records[stage.name] = {"inputs": inputs, "outputs": outputs}
    dump_config(cfg, out / F["config"])
    manifest = {
        "config": cfg.as_dict(),
        "seeds": {name: derive_seed(cfg.run.seed, name)
                  for name in ("synth", "embed-init", "embed-train", "kmeans-embedding",
                               "kmeans-direct")},
        "root_seed": cfg.run.seed,
        "versions": {"treeembed": __version__, "numpy": np.__version__,
                     "python": platform.python_version()},
        "deterministic_reduction": True,
        "stages": records,
    }
    io.write_json(out / F["manifest"], manifest)
    return manifest
