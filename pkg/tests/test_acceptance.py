"""Acceptance criteria, one test each.

Every test prints a single ``ACCEPTANCE <n> ... PASS|FAIL`` line before it
asserts. Run with ``pytest tests/test_acceptance.py -s`` (the lines are
printed even without ``-s``) or directly as ``python tests/test_acceptance.py``.
"""
import hashlib
import itertools
import math
import sys
import time
from pathlib import Path

import numpy as np
import pytest

from treeembed.analysis import (ClusterAssignment, classification_harness, confusion,
                                direct_vectors, kmeans, nearest_bands_direct, purity,
                                purity_from_confusion)
from treeembed.banding import (VOCAB_SIZE, assign_band, band_thresholds, build_band_table,
                               detect_outliers, minmax_normalize)
from treeembed.cli import main
from treeembed.embed import (EmbedConfig, band_contexts, cooccurrence_from_sets, forward,
                             gradient_check, init_model, loss, nudge_from_kink, train)
from treeembed.segments import monotone_run, tree_profile
from treeembed.synth import SceneSpec, generate_scene, gradient_indices
from treeembed.treevec import tree_vector
from treeembed.treex import find_trees
from treeembed.vegindex import compute_all

RESULTS = {}


def report(capsys, number, name, ok, detail):
    line = f"ACCEPTANCE {number} {name}: {'PASS' if ok else 'FAIL'} ({detail})"
    RESULTS[number] = ok
    if capsys is None:
        print(line)
    else:
        with capsys.disabled():
            print("\n" + line)
    return ok


# 1 ----------------------------------------------------------------------

TABLE2 = np.array([[0, 2, 15, 1], [19, 1, 0, 0], [3, 19, 2, 0], [0, 3, 1, 15]])


def test_1_table2_purity(capsys):
    la = np.repeat(np.repeat(np.arange(1, 5), 4), TABLE2.ravel())
    lb = np.repeat(np.tile(np.arange(1, 5), 4), TABLE2.ravel())
    ids = np.arange(1, 82)
    p = purity(ClusterAssignment(ids, la, 4), ClusterAssignment(ids, lb, 4))
    ok = math.isclose(p, 68 / 81) and abs(p - 0.84) <= 0.005
    assert report(capsys, 1, "purity on the 4x4 published confusion matrix", ok,
                  f"purity={p:.4f}, target 0.84 +/- 0.005")


# 2 ----------------------------------------------------------------------

def test_2_dimensions(small_scene, capsys):
    trees = find_trees(small_scene.cube)
    profiles = [tree_profile(t, compute_all(small_scene.cube, t)) for t in trees]
    table = build_band_table(profiles)
    model = init_model(table.vocab_size)
    tau = tree_vector(table, model, int(table.tree_ids[0]))
    direct = direct_vectors(table)
    contexts = band_contexts(table).incidence.shape[1]
    ok = (tau.size == 6720 and direct.shape[1] == 105 and VOCAB_SIZE == table.vocab_size == 84
          and contexts == len(trees) * 5)
    assert report(capsys, 2, "dimensional claims", ok,
                  f"tree vector {tau.size}, direct {direct.shape[1]}, vocabulary "
                  f"{table.vocab_size}, contexts {contexts} = {len(trees)} trees x 5 segments")


# 3 ----------------------------------------------------------------------

def test_3_gradient_check(capsys):
    start = time.perf_counter()
    worst = 0.0
    for seed in range(20):
        rng = np.random.default_rng(seed)
        n_tok, dim, hid = int(rng.integers(3, 7)), int(rng.integers(2, 5)), int(rng.integers(3, 9))
        model = init_model(n_tok, EmbedConfig(embedding_dim=dim, hidden=hid), seed)
        i, j = (int(t) for t in rng.integers(1, n_tok + 1, size=2))
        target = float(rng.random())
        worst = max(worst, gradient_check(nudge_from_kink(model, i, j), (i, j, target)))
    elapsed = time.perf_counter() - start
    ok = worst < 1e-4 and elapsed < 10
    assert report(capsys, 3, "gradient check on 20 shrunken models", ok,
                  f"max relative error {worst:.2e} < 1e-4, {elapsed:.2f}s < 10s")


# 4 ----------------------------------------------------------------------

def test_4_toy_training(capsys):
    start = time.perf_counter()
    toy = np.array([[1.0, 1.0, 0.0], [1.0, 1.0, 0.0], [0.0, 0.0, 1.0]])
    m0 = init_model(3, EmbedConfig(), seed=0)
    m, _ = train(m0, toy, epochs=2000, seed=0)
    l0, l1 = loss(m0, toy), loss(m, toy)
    f12, f13, f23 = forward(m, 1, 2), forward(m, 1, 3), forward(m, 2, 3)
    elapsed = time.perf_counter() - start
    ok = l1 < 0.1 * l0 and f12 > f13 and f12 > f23 and elapsed < 30
    assert report(capsys, 4, "toy training", ok,
                  f"loss {l0:.4f} -> {l1:.2e} ({l1 / l0:.2%} of initial), forward(1,2)={f12:.3f} "
                  f"> {f13:.3f}, {f23:.3f}; {elapsed:.1f}s < 30s")


# 5 ----------------------------------------------------------------------

CHAIN = [
    {"c1", "c2", "c3"},                      # a
    {"c1", "c2", "c3", "c4", "c5", "c6"},    # b
    {"c4", "c5", "c6"},                      # c
    {"d1", "d2"}, {"d1", "d2", "d3"}, {"d3", "d4"},
    {"e1", "e2"}, {"e2", "e3"}, {"e3", "e1"},
    {"f1"}, {"f1", "f2"}, {"f2", "f3"},
]


def test_5_transitivity(capsys):
    start = time.perf_counter()
    table = cooccurrence_from_sets(CHAIN)
    assert table.jaccard[0, 2] == 0 and table.jaccard[0, 1] > 0 and table.jaccard[1, 2] > 0
    passes, details = 0, []
    for seed in range(5):
        m, _ = train(init_model(table.n_tokens, EmbedConfig(), seed), table, epochs=2000, seed=seed)
        E = m.E.T
        d = {(p, q): float(np.linalg.norm(E[p] - E[q]))
             for p, q in itertools.combinations(range(table.n_tokens), 2)}
        med = float(np.median(list(d.values())))
        passes += d[0, 2] < med
        details.append(f"{d[0, 2]:.3f}/{med:.3f}")
    elapsed = time.perf_counter() - start
    ok = passes >= 4 and elapsed < 120
    assert report(capsys, 5, "contextual transitivity", ok,
                  f"{passes}/5 seeds with d(a,c) < median [{', '.join(details)}]; "
                  f"{elapsed:.1f}s < 120s")


# 6 ----------------------------------------------------------------------

def test_6_pipeline_recovery(capsys):
    start = time.perf_counter()
    scene = generate_scene(SceneSpec(seed=0, noise=0.0, gradient_strength=1.0))
    trees = find_trees(scene.cube)
    jac = []
    for crown in scene.crowns:
        truth = crown.pixels
        best = max(trees, key=lambda t: len(t.pixels & truth), default=None)
        jac.append(len(best.pixels & truth) / len(best.pixels | truth) if best else 0.0)
    keep = gradient_indices(scene)
    runs = [monotone_run(tree_profile(t, compute_all(scene.cube, t)).means[:, j])
            for t in trees for j in keep]
    elapsed = time.perf_counter() - start
    ok = (len(trees) == 10 and min(jac) >= 0.95 and len(keep) > 0 and all(r == 5 for r in runs)
          and elapsed < 60)
    assert report(capsys, 6, "pipeline recovery on a synthetic orchard", ok,
                  f"{len(trees)} trees, min Jaccard {min(jac):.3f} >= 0.95, "
                  f"{sum(r == 5 for r in runs)}/{len(runs)} runs of 5 over {len(keep)} gradient "
                  f"indices; {elapsed:.1f}s < 60s")


# 7 ----------------------------------------------------------------------

def test_7_equal_frequency_bands(capsys):
    v = np.random.default_rng(2024).random(1000)
    screened, _ = detect_outliers(minmax_normalize(v))
    bands = assign_band(screened, band_thresholds(screened))
    occ = [float((bands == b).mean()) for b in range(1, 5)]
    ok = all(abs(o - 0.25) <= 0.03 for o in occ)
    assert report(capsys, 7, "equal-frequency banding", ok,
                  "occupancy " + ", ".join(f"{o:.1%}" for o in occ) + " within 25% +/- 3%")


# 8 ----------------------------------------------------------------------

def _quartile(sorted_vals, q):
    pos = q * (len(sorted_vals) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (pos - lo) * (sorted_vals[hi] - sorted_vals[lo])


def test_8_oracle_suite(capsys):
    start = time.perf_counter()
    checks = {}
    rng = np.random.default_rng(8)

    ok = True
    for _ in range(50):
        n, ka, kb = 40, int(rng.integers(1, 6)), int(rng.integers(1, 6))
        la, lb = rng.integers(1, ka + 1, n), rng.integers(1, kb + 1, n)
        a, b = ClusterAssignment(np.arange(n), la, ka), ClusterAssignment(np.arange(n), lb, kb)
        flat = [[0] * kb for _ in range(ka)]
        for x, y in zip(la, lb):
            flat[x - 1][y - 1] += 1
        ok &= confusion(a, b).tolist() == flat
        ok &= math.isclose(purity(a, b), sum(max(r) for r in flat) / n)
    checks["confusion/purity"] = ok

    ok = True
    for _ in range(50):
        v = rng.normal(size=int(rng.integers(4, 60)))
        s = sorted(v)
        q1, q3 = _quartile(s, 0.25), _quartile(s, 0.75)
        _, (lb, ub) = detect_outliers(v)
        ok &= math.isclose(lb, q1 - 1.5 * (q3 - q1), abs_tol=1e-12)
        ok &= math.isclose(ub, q3 + 1.5 * (q3 - q1), abs_tol=1e-12)
        ok &= np.allclose(band_thresholds(v), [_quartile(s, q) for q in (0.25, 0.5, 0.75)])
    checks["quartile/fence"] = ok

    ok = True
    sets = [set(rng.choice(30, size=int(rng.integers(0, 10)), replace=False).tolist())
            for _ in range(20)]
    co = cooccurrence_from_sets(sets)
    for tok in range(1, 21):
        def jac(t):
            u = sets[tok - 1] | sets[t - 1]
            return len(sets[tok - 1] & sets[t - 1]) / len(u) if u else 0.0
        brute = sorted((t for t in range(1, 21) if t != tok), key=lambda t: (-jac(t), t))[:6]
        ok &= nearest_bands_direct(co, tok, 6) == brute
    checks["Jaccard neighbours"] = ok

    centers = rng.normal(scale=10, size=(4, 6))
    X = np.concatenate([c + rng.normal(scale=0.1, size=(20, 6)) for c in centers])
    truth = ClusterAssignment(np.arange(80), np.repeat(np.arange(1, 5), 20), 4)
    found = kmeans(X, 4, seed=0, tree_ids=np.arange(80))
    checks["k-means blobs"] = purity(found, truth) == 1.0 and purity(truth, found) == 1.0

    y = rng.integers(1, 5, size=80)
    Xn = rng.normal(size=(80, 6))
    accs = [r.mean_accuracy for algo in ("gaussian-naive-bayes", "multinomial-logistic")
            for r in classification_harness(Xn, y, algo, repetitions=20, seed=1)]
    checks["chance accuracy"] = all(abs(a - 0.25) <= 0.1 for a in accs)

    elapsed = time.perf_counter() - start
    ok = all(checks.values()) and elapsed < 120
    assert report(capsys, 8, "oracle equivalence suite", ok,
                  ", ".join(f"{k} {'ok' if v else 'MISMATCH'}" for k, v in checks.items())
                  + f"; {elapsed:.1f}s < 120s")


# 9 ----------------------------------------------------------------------

DETERMINISM_CONFIG = """\
[run]
seed = 11
[embed]
epochs = 100
[analysis]
repetitions = 10
"""


def _digests(folder: Path) -> dict:
    return {p.name: hashlib.sha256(p.read_bytes()).hexdigest() for p in sorted(folder.iterdir())}


def test_9_determinism(tmp_path, capsys):
    cfg = tmp_path / "run.ini"
    cfg.write_text(DETERMINISM_CONFIG)
    codes = [main(["--config", str(cfg), "--out-dir", str(tmp_path / name), "run"])
             for name in ("first", "second")]
    a, b = _digests(tmp_path / "first"), _digests(tmp_path / "second")
    differing = sorted(k for k in a if a[k] != b.get(k))
    ok = codes == [0, 0] and a == b and len(a) == 23
    assert report(capsys, 9, "determinism of two identical runs", ok,
                  f"{len(a)} artifacts, {len(differing)} differing digests"
                  + (f": {differing}" if differing else ""))


if __name__ == "__main__":
    import tempfile
    sys.path.insert(0, str(Path(__file__).parent))
    small = generate_scene(SceneSpec(width=112, height=112, n_trees=4, seed=11))
    with tempfile.TemporaryDirectory() as tmp:
        for fn, args in [(test_1_table2_purity, ()), (test_2_dimensions, (small,)),
                         (test_3_gradient_check, ()), (test_4_toy_training, ()),
                         (test_5_transitivity, ()), (test_6_pipeline_recovery, ()),
                         (test_7_equal_frequency_bands, ()), (test_8_oracle_suite, ()),
                         (test_9_determinism, (Path(tmp),))]:
            try:
                fn(*args, None)
            except AssertionError:
                pass
    print(f"{sum(RESULTS.values())}/{len(RESULTS)} acceptance criteria passed")
    sys.exit(0 if all(RESULTS.values()) else 1)
