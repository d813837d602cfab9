import json

import numpy as np
import pytest

from treeembed import io, pipeline as pl
from treeembed.cli import main

FAST = """\
[run]
seed = 1
[embed]
embedding_dim = 8
hidden = 32
epochs = 40
[analysis]
repetitions = 3
test_fractions = 0.2, 0.4
"""


@pytest.fixture()
def fast_config(tmp_path):
    p = tmp_path / "fast.ini"
    p.write_text(FAST)
    return p


def run(config, out, *extra):
    return main(["--config", str(config), "--out-dir", str(out), *extra])


def test_full_run_writes_every_artifact(tmp_path, fast_config):
    out = tmp_path / "out"
    assert run(fast_config, out, "run") == 0
    for name in pl.F.values():
        assert (out / name).exists(), name
    manifest = json.loads((out / "manifest.json").read_text())
    assert set(manifest["stages"]) == set(pl.STAGE_NAMES)
    assert manifest["config"]["embed"]["epochs"] == 40
    assert json.loads((out / "trees.json").read_text())["tree_count"] == 10
    ids, tau = io.read_vectors(out / "tree_vectors.csv")
    assert tau.shape == (10, 5 * 21 * 8)
    assert io.read_vectors(out / "direct_vectors.csv")[1].shape == (10, 105)
    header = (out / "bands.csv").read_text().splitlines()[0]
    assert header == "tree_id,segment,index_name,band_or_marker"


def test_rerun_gives_identical_digests(tmp_path, fast_config):
    assert run(fast_config, tmp_path / "a", "run") == 0
    assert run(fast_config, tmp_path / "b", "run") == 0
    ma = json.loads((tmp_path / "a" / "manifest.json").read_text())
    mb = json.loads((tmp_path / "b" / "manifest.json").read_text())
    assert ma == mb


def test_from_stage_and_stale_cache(tmp_path, fast_config, capsys):
    out = tmp_path / "out"
    assert run(fast_config, out, "run") == 0
    before = json.loads((out / "manifest.json").read_text())
    assert run(fast_config, out, "run", "--from-stage", "vectors") == 0
    assert json.loads((out / "manifest.json").read_text()) == before
    # tamper with a cached input of the resumed stage
    with open(out / "model.json", "a") as fh:
        fh.write(" ")
    assert run(fast_config, out, "run", "--from-stage", "vectors") == 1
    assert "model.json" in capsys.readouterr().err


def test_from_stage_without_manifest(tmp_path, fast_config):
    assert run(fast_config, tmp_path / "empty", "run", "--from-stage", "band") == 1


def test_three_segments(tmp_path, fast_config):
    cfg = tmp_path / "s3.ini"
    cfg.write_text(FAST.replace("seed = 1", "seed = 1\nn_segments = 3")
                   .replace("embedding_dim = 8", "embedding_dim = 64"))
    out = tmp_path / "out"
    assert run(cfg, out, "run") == 0
    _, tau = io.read_vectors(out / "tree_vectors.csv")
    assert tau.shape[1] == 3 * 21 * 64 == 4032


def test_stage_subcommands(tmp_path, fast_config, capsys):
    out = tmp_path / "out"
    for cmd in ("synth", "extract", "indices", "segment", "band"):
        assert run(fast_config, out, cmd) == 0, cmd
    assert run(fast_config, out, "train", "--epochs", "5") == 0
    assert "after 5 epochs" in capsys.readouterr().out
    for cmd in ("vectors", "cluster", "classify", "characterize"):
        assert run(fast_config, out, cmd) == 0, cmd
    assert run(fast_config, out, "purity") == 0
    report = json.loads(capsys.readouterr().out.strip().splitlines()[-1])
    assert 0 < report["purity"] <= 1 and np.sum(report["confusion"]) == 10
    assert run(fast_config, out, "purity", str(out / "clusters_embedding.csv"),
               str(out / "clusters_embedding.csv")) == 0
    assert json.loads(capsys.readouterr().out)["purity"] == 1.0
    assert run(fast_config, out, "nn", "--token", "Low NDVI", "--n", "4") == 0
    lines = (out / "neighbors.csv").read_text().splitlines()
    assert len(lines) == 1 + 2 * 4


def test_extract_flags_change_result(tmp_path, fast_config, capsys):
    out = tmp_path / "out"
    run(fast_config, out, "synth")
    assert run(fast_config, out, "extract", "--min-tree-pixels", "100000") == 0
    assert "extracted 0 trees" in capsys.readouterr().out


def test_paper_sentinel(tmp_path, fast_config):
    out = tmp_path / "out"
    for cmd in ("synth", "extract", "indices", "segment"):
        run(fast_config, out, cmd)
    # plant an outlier so the marker appears
    profiles = io.read_profiles(out / "segments.csv")
    profiles[0].means[2, 4] = 1e6
    io.write_profiles(profiles, out / "segments.csv")
    assert run(fast_config, out, "band") == 0
    assert "outlier" in (out / "bands.csv").read_text()
    assert run(fast_config, out, "--paper-sentinel", "band") == 0
    text = (out / "bands.csv").read_text()
    assert "-1000000" in text and "outlier" not in text


def test_global_flags_before_subcommand(tmp_path, fast_config):
    out = tmp_path / "out"
    assert main(["--config", str(fast_config), "--out-dir", str(out), "--seed", "3", "synth"]) == 0
    assert (out / "scene.hdr").exists()


def test_external_cube(tmp_path, fast_config):
    run(fast_config, tmp_path / "gen", "synth")
    out = tmp_path / "out"
    assert run(fast_config, out, "extract", "--cube", str(tmp_path / "gen" / "scene.hdr")) == 0
    assert json.loads((out / "trees.json").read_text())["tree_count"] == 10


def test_missing_input_reports_error(tmp_path, fast_config, capsys):
    assert run(fast_config, tmp_path / "nothing", "segment") == 1
    assert "error" in capsys.readouterr().err


def test_bad_subcommand_exits():
    with pytest.raises(SystemExit):
        main(["frobnicate"])
