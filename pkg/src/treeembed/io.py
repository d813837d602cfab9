"""CSV and JSON readers/writers for every stage artifact.

Floats are written with ``repr`` so a write/read cycle is lossless. Missing
values are empty fields.
"""
from __future__ import annotations

import csv
import json
from pathlib import Path

import numpy as np

from .banding import MISSING, PAPER_SENTINEL, BandTable, apply_band_params
from .embed import EmbeddingModel
from .segments import SegmentProfile
from .treex import TreeRegion
from .vegindex import INDEX_NAMES, PixelIndexRows
from .banding import token_name


def _fmt(v) -> str:
    if isinstance(v, (float, np.floating)):
        return "" if not np.isfinite(v) else repr(float(v))
    if isinstance(v, np.integer):
        return str(int(v))
    return str(v)


def _num(s: str) -> float:
    return float(s) if s != "" else np.nan


def write_csv(path, header, rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for row in rows:
            w.writerow([_fmt(v) for v in row])
    return path


def read_csv(path) -> tuple[list[str], list[list[str]]]:
    with open(path, newline="") as fh:
        rows = list(csv.reader(fh))
    if not rows:
        raise ValueError(f"{path}: empty CSV")
    return rows[0], rows[1:]


def write_json(path, obj) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(json.dumps(obj, indent=2, sort_keys=True) + "\n")
    return path


def read_json(path):
    return json.loads(Path(path).read_text())


# trees ------------------------------------------------------------------

def write_trees(trees, path):
    return write_csv(path, ["tree_id", "x", "y"],
                     ((t.id, x, y) for t in trees for x, y in zip(t.xs.tolist(), t.ys.tolist())))


def read_trees(path) -> list[TreeRegion]:
    _, rows = read_csv(path)
    groups: dict[int, list] = {}
    for tid, x, y in rows:
        groups.setdefault(int(tid), []).append((int(x), int(y)))
    out = []
    for tid in sorted(groups):
        xs, ys = np.array(groups[tid], dtype=np.intp).T
        out.append(TreeRegion(tid, xs, ys))
    return out


def tree_summary(trees) -> dict:
    return {"tree_count": len(trees),
            "sizes": {str(t.id): t.pixel_count for t in trees}}


# pixel indices ----------------------------------------------------------

def write_pixel_indices(rows_list, path):
    def gen():
        for r in rows_list:
            for x, y, vals in zip(r.xs.tolist(), r.ys.tolist(), r.values):
                yield (r.tree_id, x, y, *vals)
    return write_csv(path, ["tree_id", "x", "y", *INDEX_NAMES], gen())


def read_pixel_indices(path) -> list[PixelIndexRows]:
    _, rows = read_csv(path)
    groups: dict[int, list] = {}
    for r in rows:
        groups.setdefault(int(r[0]), []).append(r)
    out = []
    for tid in sorted(groups):
        g = groups[tid]
        xs = np.array([int(r[1]) for r in g], dtype=np.intp)
        ys = np.array([int(r[2]) for r in g], dtype=np.intp)
        vals = np.array([[_num(v) for v in r[3:]] for r in g], dtype=float)
        out.append(PixelIndexRows(tid, xs, ys, vals))
    return out


# segment profiles -------------------------------------------------------

def write_profiles(profiles, path):
    rows = ((p.tree_id, s + 1, p.pixel_counts[s], *p.means[s])
            for p in profiles for s in range(p.n_segments))
    return write_csv(path, ["tree_id", "segment", "pixel_count", *INDEX_NAMES], rows)


def read_profiles(path) -> list[SegmentProfile]:
    _, rows = read_csv(path)
    groups: dict[int, list] = {}
    for r in rows:
        groups.setdefault(int(r[0]), []).append(r)
    out = []
    for tid in sorted(groups):
        g = sorted(groups[tid], key=lambda r: int(r[1]))
        counts = np.array([int(r[2]) for r in g])
        means = np.array([[_num(v) for v in r[3:]] for r in g], dtype=float)
        out.append(SegmentProfile(tid, counts, means))
    return out


def write_monotone_table(table, path):
    n_seg = table.shape[1]
    return write_csv(path, ["index", *[f"l{l}" for l in range(1, n_seg + 1)]],
                     ((name, *row) for name, row in zip(INDEX_NAMES, table)))


# band table -------------------------------------------------------------

def write_band_table(table: BandTable, csv_path, json_path, paper_sentinel: bool = False):
    def marker(t, s, j):
        if table.bands[t, s, j] != MISSING:
            return int(table.bands[t, s, j])
        if paper_sentinel:
            return PAPER_SENTINEL
        return "outlier" if table.outlier[t, s, j] else "missing"

    rows = ((int(tid), s + 1, INDEX_NAMES[j], marker(t, s, j))
            for t, tid in enumerate(table.tree_ids)
            for s in range(table.n_segments) for j in range(table.n_indices))
    write_csv(csv_path, ["tree_id", "segment", "index_name", "band_or_marker"], rows)
    write_json(json_path, table.thresholds_dict())


def read_band_table(csv_path, json_path, profiles=None) -> BandTable:
    """Rebuild a BandTable; normalised values need the segment profiles."""
    _, rows = read_csv(csv_path)
    params = read_json(json_path)
    # JSON keys are sorted alphabetically; restore catalog order
    names = [n for n in INDEX_NAMES if n in params]
    tree_ids = sorted({int(r[0]) for r in rows})
    n_s = max(int(r[1]) for r in rows)
    tpos = {t: k for k, t in enumerate(tree_ids)}
    bands = np.zeros((len(tree_ids), n_s, len(names)), dtype=np.int64)
    outlier = np.zeros(bands.shape, dtype=bool)
    for tid, seg, name, value in rows:
        cell = (tpos[int(tid)], int(seg) - 1, names.index(name))
        if value in ("1", "2", "3", "4"):
            bands[cell] = int(value)
        elif value != "missing":
            outlier[cell] = True
    norm_bounds = np.array([[params[n]["min"], params[n]["max"]] for n in names])
    fences = np.array([[params[n]["lb"], params[n]["ub"]] for n in names])
    thresholds = np.array([[params[n]["q1"], params[n]["q2"], params[n]["q3"]] for n in names])
    normalized = np.full(bands.shape, np.nan)
    if profiles is not None:
        by_id = {p.tree_id: p for p in profiles}
        means = np.stack([by_id[t].means for t in tree_ids])
        normalized, rebuilt = apply_band_params(means, norm_bounds, fences, thresholds)
        if not np.array_equal(rebuilt, bands):
            raise ValueError("band table does not match the segment profiles")
    return BandTable(np.array(tree_ids), bands, normalized, outlier, norm_bounds, fences, thresholds)


# model ------------------------------------------------------------------

def write_model(model: EmbeddingModel, path):
    return write_json(path, model.to_dict())


def read_model(path) -> EmbeddingModel:
    return EmbeddingModel.from_dict(read_json(path))


def write_embeddings(model: EmbeddingModel, path):
    dim = model.E.shape[0]
    rows = ((t, token_name(t) if model.n_tokens == len(INDEX_NAMES) * 4 else "", *model.E[:, t - 1])
            for t in range(1, model.n_tokens + 1))
    return write_csv(path, ["token", "name", *[f"e{d}" for d in range(dim)]], rows)


def write_loss_history(history, path):
    return write_csv(path, ["epoch", "loss"], ((e + 1, float(v)) for e, v in enumerate(history)))


# vectors and clusters ---------------------------------------------------

def write_vectors(tree_ids, vectors, path, prefix="f"):
    header = ["tree_id", *[f"{prefix}{k}" for k in range(vectors.shape[1])]]
    return write_csv(path, header, ((int(t), *v) for t, v in zip(tree_ids, vectors)))


def read_vectors(path) -> tuple[np.ndarray, np.ndarray]:
    _, rows = read_csv(path)
    ids = np.array([int(r[0]) for r in rows])
    return ids, np.array([[float(v) for v in r[1:]] for r in rows])


def write_clusters(assignment, path):
    return write_csv(path, ["tree_id", "cluster"],
                     zip(assignment.tree_ids.tolist(), assignment.labels.tolist()))


def read_clusters(path, space: str = ""):
    from .analysis import ClusterAssignment
    _, rows = read_csv(path)
    ids = np.array([int(r[0]) for r in rows])
    labels = np.array([int(r[1]) for r in rows])
    return ClusterAssignment(ids, labels, int(labels.max()), None, space)
