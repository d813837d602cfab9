"""Concentric crown segments, per-segment index means and radial trends."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np
from scipy.spatial import ConvexHull, QhullError

from .vegindex import N_INDICES

DEFAULT_SEGMENTS = 5


@dataclass(frozen=True)
class SegmentProfile:
    """Per-segment pixel counts and index means of one tree.

    ``means[s, j]`` is the mean of catalog index ``j`` over segment ``s + 1``
    (segment 1 is the central disc); NaN where no pixel had a valid value.
    """

    tree_id: int
    pixel_counts: np.ndarray  # (n_segments,)
    means: np.ndarray         # (n_segments, n_indices)

    @property
    def n_segments(self) -> int:
        return self.means.shape[0]


def _farthest_pair(points: np.ndarray) -> tuple[int, int]:
    """Indices (a, b) of the farthest pair, lexicographically smallest among ties."""
    n = len(points)
    cand = np.arange(n)
    if n > 64:
        try:
            cand = np.sort(ConvexHull(points).vertices)
        except QhullError:  # collinear or otherwise flat sets
            pass
    sub = points[cand].astype(np.int64)
    d2 = ((sub[:, None, :] - sub[None, :, :]) ** 2).sum(-1)
    best = d2.max()
    pairs = []
    for a, b in zip(*np.nonzero(d2 == best)):
        p, q = tuple(sub[a]), tuple(sub[b])
        if p < q:
            pairs.append((p, q, cand[a], cand[b]))
    if not pairs:  # single point
        return 0, 0
    pairs.sort()
    return int(pairs[0][2]), int(pairs[0][3])


def tree_geometry(region) -> tuple[tuple[float, float], float]:
    """Centre and radius from the two mutually farthest pixels.

    The centre is the midpoint of that pair and the radius half its length.
    A single-pixel region gets radius 0 with a warning.
    """
    if region.pixel_count == 0:
        raise ValueError("empty region")
    points = np.column_stack([region.xs, region.ys])
    a, b = _farthest_pair(points)
    pa, pb = points[a].astype(float), points[b].astype(float)
    center = ((pa[0] + pb[0]) / 2, (pa[1] + pb[1]) / 2)
    radius = float(np.hypot(*(pa - pb))) / 2
    if radius == 0:
        warnings.warn(f"tree {region.id}: degenerate geometry (radius 0)", stacklevel=2)
    return center, radius


def segment_of_distance(d, radius: float, n_segments: int = DEFAULT_SEGMENTS) -> np.ndarray:
    """Segment number ceil(d * n / r), clamped to [1, n]."""
    if radius <= 0:
        raise ValueError("radius must be positive")
    if n_segments < 1:
        raise ValueError("n_segments must be >= 1")
    seg = np.ceil(np.asarray(d, dtype=float) * n_segments / radius).astype(int)
    return np.clip(seg, 1, n_segments)


def assign_segments(region, center, radius: float, n_segments: int = DEFAULT_SEGMENTS) -> np.ndarray:
    """1-based segment number of every pixel of ``region``."""
    d = np.hypot(region.xs - center[0], region.ys - center[1])
    if radius <= 0:
        # degenerate crowns collapse into the central disc
        return np.ones(region.pixel_count, dtype=int)
    return segment_of_distance(d, radius, n_segments)


def segment_means(tree_id: int, assignment, values: np.ndarray,
                  n_segments: int = DEFAULT_SEGMENTS) -> SegmentProfile:
    """Mean of each index column per segment, skipping NaN entries."""
    assignment = np.asarray(assignment)
    values = np.asarray(values, dtype=float)
    counts = np.bincount(assignment - 1, minlength=n_segments)[:n_segments]
    means = np.full((n_segments, values.shape[1]), np.nan)
    for s in range(n_segments):
        block = values[assignment == s + 1]
        valid = np.isfinite(block)
        n = valid.sum(axis=0)
        total = np.where(valid, block, 0.0).sum(axis=0)
        with np.errstate(invalid="ignore", divide="ignore"):
            means[s] = np.where(n > 0, total / np.maximum(n, 1), np.nan)
    return SegmentProfile(tree_id, counts, means)


def tree_profile(region, rows, n_segments: int = DEFAULT_SEGMENTS) -> SegmentProfile:
    """Geometry, segment assignment and means for one tree's index rows."""
    center, radius = tree_geometry(region)
    assignment = assign_segments(region, center, radius, n_segments)
    return segment_means(region.id, assignment, rows.values, n_segments)


def monotone_run(series) -> int:
    """Longest strictly increasing or strictly decreasing run, in segments.

    Equal neighbours and missing values break a run. Series with fewer than
    two usable values give 1.
    """
    v = np.asarray(series, dtype=float)
    best = 1
    up = down = 1
    for prev, cur in zip(v[:-1], v[1:]):
        if not (np.isfinite(prev) and np.isfinite(cur)):
            up = down = 1
            continue
        up = up + 1 if cur > prev else 1
        down = down + 1 if cur < prev else 1
        best = max(best, up, down)
    return best


def monotone_histogram(profiles, index: int, n_segments: int = DEFAULT_SEGMENTS) -> np.ndarray:
    """Tree counts per run length: element ``l - 1`` counts trees with run length ``l``."""
    hist = np.zeros(n_segments, dtype=int)
    for p in profiles:
        hist[monotone_run(p.means[:, index]) - 1] += 1
    return hist


def monotone_table(profiles, n_segments: int = DEFAULT_SEGMENTS) -> np.ndarray:
    """Histogram for every catalog index, shape (n_indices, n_segments)."""
    return np.array([monotone_histogram(profiles, j, n_segments) for j in range(N_INDICES)])
