import warnings

import numpy as np
import pytest
from hypothesis import assume, given, settings, strategies as st

from treeembed.banding import (MISSING, VOCAB_SIZE, apply_band_params, assign_band,
                               band_thresholds, build_band_table, detect_outliers,
                               minmax_normalize, parse_token, token_id, token_name, token_parts)
from treeembed.segments import SegmentProfile


def oracle_quartile(sorted_vals, q):
    """Linear interpolation between order statistics at position q * (n - 1)."""
    pos = q * (len(sorted_vals) - 1)
    lo = int(pos)
    hi = min(lo + 1, len(sorted_vals) - 1)
    return sorted_vals[lo] + (pos - lo) * (sorted_vals[hi] - sorted_vals[lo])


def test_minmax_examples():
    np.testing.assert_allclose(minmax_normalize([2, 4, 6]), [0, 0.5, 1])
    np.testing.assert_array_equal(minmax_normalize([5, 5, 5]), [0, 0, 0])
    out = minmax_normalize([2, np.nan, 6])
    assert np.isnan(out[1]) and out[2] == 1
    with pytest.raises(ValueError):
        minmax_normalize([np.nan, np.nan])


def test_outlier_example_against_oracle():
    col = np.array([1, 2, 3, 4, 5, 6, 7, 8, 9, 100], dtype=float)
    screened, (lb, ub) = detect_outliers(col)
    s = sorted(col)
    q1, q3 = oracle_quartile(s, 0.25), oracle_quartile(s, 0.75)
    assert (q1, q3) == (3.25, 7.75)
    assert lb == pytest.approx(q1 - 1.5 * (q3 - q1)) and ub == pytest.approx(q3 + 1.5 * (q3 - q1))
    assert np.isnan(screened[-1]) and np.isfinite(screened[:-1]).all()


def test_constant_column_has_no_outliers():
    screened, (lb, ub) = detect_outliers(np.full(8, 0.3))
    assert np.isfinite(screened).all() and lb == ub == pytest.approx(0.3)


def test_value_at_fence_is_kept():
    col = np.array([0.0, 0.0, 1.0, 1.0, 2.5])   # Q1 = 0, Q3 = 1, ub = 2.5
    screened, (_, ub) = detect_outliers(col)
    assert ub == 2.5 and screened[-1] == 2.5


def test_too_few_values_warns():
    with pytest.warns(UserWarning):
        screened, fences = detect_outliers([0.1, 0.9, np.nan])
    assert fences == (-np.inf, np.inf)
    with pytest.raises(ValueError):
        band_thresholds([0.1, 0.2, 0.3])


def test_threshold_examples():
    assert band_thresholds([0, 0.25, 0.5, 0.75, 1]) == (0.25, 0.5, 0.75)
    q = band_thresholds([0.4] * 6)
    assert q == (0.4, 0.4, 0.4)
    assert (assign_band(np.full(6, 0.4), q) == 1).all()


def test_assign_band_examples():
    q = (0.25, 0.5, 0.75)
    assert assign_band(0.25, q) == 1
    assert assign_band(0.2500001, q) == 2
    assert assign_band(0.5, q) == 2 and assign_band(0.75, q) == 3
    assert assign_band(1.0, q) == 4
    assert assign_band(np.nan, q) == MISSING


def test_uniform_column_band_occupancy():
    v = np.random.default_rng(0).random(1000)
    screened, _ = detect_outliers(minmax_normalize(v))
    bands = assign_band(screened, band_thresholds(screened))
    for b in range(1, 5):
        assert abs((bands == b).mean() - 0.25) <= 0.03


def test_agrees_with_rank_bucketing():
    v = np.random.default_rng(1).normal(size=400)
    bands = assign_band(v, band_thresholds(v))
    ranks = np.argsort(np.argsort(v))
    rank_band = ranks * 4 // v.size + 1
    assert (bands == rank_band).mean() >= 0.95


def test_tokens():
    assert VOCAB_SIZE == 84
    assert token_id(1, 1) == 1 and token_id(21, 4) == 84 and token_id(3, 2) == 10
    for t in range(1, 85):
        assert token_id(*token_parts(t)) == t
        assert parse_token(token_name(t)) == t
    assert token_name(84) == "Very High WBI" and token_name(1) == "Low ARI1"
    with pytest.raises(ValueError):
        token_parts(85)
    with pytest.raises(ValueError):
        parse_token("Huge NDVI")


@settings(max_examples=200, deadline=None)
@given(st.lists(st.floats(-1e3, 1e3), min_size=4, max_size=60), st.floats(-1e3, 1e3),
       st.floats(-1e3, 1e3))
def test_band_assignment_monotone(col, v, w):
    q = band_thresholds(col)
    assert q[0] <= q[1] <= q[2]
    lo, hi = min(v, w), max(v, w)
    assert assign_band(lo, q) <= assign_band(hi, q)


def profiles_from(means):
    return [SegmentProfile(t + 1, np.ones(means.shape[1], int), means[t]) for t in range(len(means))]


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1), st.floats(0.01, 100), st.floats(-50, 50))
def test_affine_invariance(seed, a, b):
    rng = np.random.default_rng(seed)
    means = rng.normal(size=(4, 5, 21))
    means[0, 0, 3] = 9.0          # an outlier
    t1 = build_band_table(profiles_from(means))
    t2 = build_band_table(profiles_from(a * means + b))
    # equality up to rounding in the normalisation; compare where not on a boundary
    safe = np.abs(t1.normalized[..., None] - t1.thresholds[None, None]).min(-1) > 1e-9
    assert np.array_equal(t1.bands[safe], t2.bands[safe])
    assert np.array_equal(t1.outlier, t2.outlier)


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2**32 - 1))
def test_marked_exactly_outside_fences(seed):
    rng = np.random.default_rng(seed)
    means = rng.standard_cauchy(size=(3, 5, 21))
    means[rng.random(means.shape) < 0.05] = np.nan
    assume(np.isfinite(means).sum(axis=(0, 1)).min() >= 8)
    table = build_band_table(profiles_from(means))
    lb, ub = table.fences[:, 0], table.fences[:, 1]
    norm = table.normalized
    finite = np.isfinite(norm)
    outside = finite & ((norm < lb) | (norm > ub))
    assert np.array_equal(outside, table.outlier)
    assert not np.any(table.outlier & (table.bands != MISSING))
    assert np.array_equal(table.bands == MISSING, ~finite | table.outlier)
    assert np.all(table.thresholds[:, 0] <= table.thresholds[:, 1])
    assert np.all(table.thresholds[:, 1] <= table.thresholds[:, 2])
    assert np.all((table.thresholds >= 0) & (table.thresholds <= 1))


def test_shape_and_no_outlier_table():
    means = np.tile(np.linspace(0, 1, 5)[:, None], (2, 1, 21)).reshape(2, 5, 21)
    table = build_band_table(profiles_from(means))
    assert table.bands.size == 210 and not table.outlier.any()
    assert table.vocab_size == 84 and table.n_contexts == 10
    assert set(np.unique(table.bands)) <= {1, 2, 3, 4}


def monolithic_oracle(means):
    """Normalise, fence and band every column in one plain loop."""
    t, s, n = means.shape
    bands = np.zeros((t, s, n), dtype=int)
    for j in range(n):
        col = [means[a, b, j] for a in range(t) for b in range(s)]
        good = [v for v in col if not np.isnan(v)]
        lo, hi = min(good), max(good)
        norm = [np.nan if np.isnan(v) else (0.0 if hi == lo else (v - lo) / (hi - lo)) for v in col]
        srt = sorted(v for v in norm if not np.isnan(v))
        q1, q3 = oracle_quartile(srt, 0.25), oracle_quartile(srt, 0.75)
        lb, ub = q1 - 1.5 * (q3 - q1), q3 + 1.5 * (q3 - q1)
        kept = [v if (not np.isnan(v) and lb <= v <= ub) else np.nan for v in norm]
        srt = sorted(v for v in kept if not np.isnan(v))
        qs = [oracle_quartile(srt, q) for q in (0.25, 0.5, 0.75)]
        for k, v in enumerate(kept):
            if np.isnan(v):
                b = 0
            else:
                b = 1 + sum(v > q for q in qs)
            bands[k // s, k % s, j] = b
    return bands


def test_matches_monolithic_oracle(small_scene):
    from treeembed.segments import tree_profile
    from treeembed.treex import find_trees
    from treeembed.vegindex import compute_all
    trees = find_trees(small_scene.cube)[:3]
    profs = [tree_profile(t, compute_all(small_scene.cube, t)) for t in trees]
    table = build_band_table(profs)
    np.testing.assert_array_equal(table.bands, monolithic_oracle(np.stack([p.means for p in profs])))


def test_apply_params_reproduces_table():
    rng = np.random.default_rng(3)
    means = rng.normal(size=(5, 5, 21))
    means[1, 2, 4] = np.nan
    table = build_band_table(profiles_from(means))
    norm, bands = apply_band_params(means, table.norm_bounds, table.fences, table.thresholds)
    np.testing.assert_array_equal(bands, table.bands)
    np.testing.assert_allclose(norm, table.normalized, equal_nan=True)
