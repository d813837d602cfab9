"""Min-max normalisation, box-plot outlier screening and quartile bands.

Each vegetation index is processed as one column holding its value for every
segment of every tree. The column is normalised to [0, 1], values outside the
box-plot fences are marked as outliers, and the survivors are split into four
equal-frequency bands at their quartiles. Band ``b`` of catalog index ``j``
(both 1-based) is vocabulary token ``(j - 1) * 4 + b``.
"""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .vegindex import INDEX_NAMES, N_INDICES

N_BANDS = 4
VOCAB_SIZE = N_BANDS * N_INDICES
BAND_NAMES = ("Low", "Mid", "High", "Very High")
MISSING = 0          # band code for outlier / missing cells
PAPER_SENTINEL = -1000000


def quartiles(values) -> np.ndarray:
    """Q1, Q2, Q3 by linear interpolation between order statistics."""
    return np.quantile(np.asarray(values, dtype=float), [0.25, 0.5, 0.75])


def minmax_normalize(values) -> np.ndarray:
    """(v - min) / (max - min); a constant column maps to 0. NaN passes through."""
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    if not finite.any():
        raise ValueError("cannot normalise a column with no values")
    lo, hi = v[finite].min(), v[finite].max()
    if hi == lo:
        return np.where(finite, 0.0, np.nan)
    return np.where(finite, (v - lo) / (hi - lo), np.nan)


def outlier_fences(values) -> tuple[float, float]:
    """Lower and upper box-plot fences Q1 - 1.5 IQR and Q3 + 1.5 IQR."""
    q1, _, q3 = quartiles(values)
    iqr = q3 - q1
    return q1 - 1.5 * iqr, q3 + 1.5 * iqr


def detect_outliers(values, min_values: int = 4) -> tuple[np.ndarray, tuple[float, float]]:
    """Mark values outside the fences.

    Returns ``(screened, (lb, ub))`` where outliers are replaced by NaN.
    Values equal to a fence are kept. Columns with fewer than ``min_values``
    usable entries are returned unscreened with infinite fences.
    """
    v = np.asarray(values, dtype=float)
    finite = np.isfinite(v)
    if finite.sum() < min_values:
        warnings.warn(f"only {finite.sum()} values; outlier screening skipped", stacklevel=2)
        return v.copy(), (-np.inf, np.inf)
    lb, ub = outlier_fences(v[finite])
    with np.errstate(invalid="ignore"):
        keep = (v >= lb) & (v <= ub)
    return np.where(keep, v, np.nan), (float(lb), float(ub))


def band_thresholds(values, min_values: int = 4) -> tuple[float, float, float]:
    v = np.asarray(values, dtype=float)
    v = v[np.isfinite(v)]
    if v.size < min_values:
        raise ValueError(f"need at least {min_values} values for band thresholds, got {v.size}")
    q1, q2, q3 = quartiles(v)
    return float(q1), float(q2), float(q3)


def assign_band(value, thresholds) -> np.ndarray | int:
    """Band 1 for v <= Q1, 2 for v <= Q2, 3 for v <= Q3, else 4; NaN -> MISSING."""
    v = np.asarray(value, dtype=float)
    q1, q2, q3 = thresholds
    with np.errstate(invalid="ignore"):
        band = 1 + (v > q1).astype(int) + (v > q2) + (v > q3)
    band = np.where(np.isfinite(v), band, MISSING)
    return int(band) if band.ndim == 0 else band


def token_id(index: int, band: int) -> int:
    """1-based token for 1-based catalog index and band."""
    return (index - 1) * N_BANDS + band


def token_parts(token: int) -> tuple[int, int]:
    """Inverse of token_id: (1-based index, band)."""
    if not 1 <= token <= VOCAB_SIZE:
        raise ValueError(f"token {token} outside 1..{VOCAB_SIZE}")
    return (token - 1) // N_BANDS + 1, (token - 1) % N_BANDS + 1


def token_name(token: int) -> str:
    """Human label such as 'Very High NDVI'."""
    index, band = token_parts(token)
    return f"{BAND_NAMES[band - 1]} {INDEX_NAMES[index - 1]}"


def parse_token(name: str) -> int:
    for b, prefix in sorted(enumerate(BAND_NAMES, 1), key=lambda p: -len(p[1])):
        if name.startswith(prefix + " "):
            index = name[len(prefix) + 1:].strip()
            if index in INDEX_NAMES:
                return token_id(INDEX_NAMES.index(index) + 1, b)
    raise ValueError(f"unrecognised band token {name!r}")


@dataclass(frozen=True)
class BandTable:
    """Banded view of all (tree, segment, index) cells.

    ``bands[t, s, j]`` is 1..4, or MISSING for outliers and cells that were
    missing upstream. ``normalized`` keeps the min-max normalised means
    (NaN where missing) before outlier screening.
    """

    tree_ids: np.ndarray      # (n_trees,)
    bands: np.ndarray         # (n_trees, n_segments, n_indices) int
    normalized: np.ndarray    # (n_trees, n_segments, n_indices) float
    outlier: np.ndarray       # bool, cells screened out by the fences
    norm_bounds: np.ndarray   # (n_indices, 2) raw min, max
    fences: np.ndarray        # (n_indices, 2) lb, ub on the normalised scale
    thresholds: np.ndarray    # (n_indices, 3) Q1, Q2, Q3 on the normalised scale

    @property
    def n_trees(self) -> int:
        return self.bands.shape[0]

    @property
    def n_segments(self) -> int:
        return self.bands.shape[1]

    @property
    def n_indices(self) -> int:
        return self.bands.shape[2]

    @property
    def vocab_size(self) -> int:
        return N_BANDS * self.n_indices

    @property
    def n_contexts(self) -> int:
        return self.n_trees * self.n_segments

    def row(self, tree_id: int) -> int:
        hits = np.nonzero(self.tree_ids == tree_id)[0]
        if hits.size == 0:
            raise KeyError(f"unknown tree id {tree_id}")
        return int(hits[0])

    def tokens(self) -> np.ndarray:
        """0-based token ids per cell, -1 where missing."""
        j = np.arange(self.n_indices)[None, None, :]
        return np.where(self.bands > 0, j * N_BANDS + self.bands - 1, -1)

    def thresholds_dict(self) -> dict:
        return {
            name: {"min": float(self.norm_bounds[j, 0]), "max": float(self.norm_bounds[j, 1]),
                   "lb": float(self.fences[j, 0]), "ub": float(self.fences[j, 1]),
                   "q1": float(self.thresholds[j, 0]), "q2": float(self.thresholds[j, 1]),
                   "q3": float(self.thresholds[j, 2])}
            for j, name in enumerate(INDEX_NAMES[:self.n_indices])
        }


def _raw_bounds(column):
    finite = column[np.isfinite(column)]
    if finite.size == 0:
        raise ValueError("cannot normalise a column with no values")
    return finite.min(), finite.max()


def build_band_table(profiles) -> BandTable:
    """Run normalise -> screen -> threshold -> assign for every index column."""
    profiles = list(profiles)
    if not profiles:
        raise ValueError("no segment profiles")
    means = np.stack([p.means for p in profiles])  # (T, S, I)
    n_t, n_s, n_i = means.shape
    normalized = np.full_like(means, np.nan)
    bands = np.zeros(means.shape, dtype=np.int64)
    outlier = np.zeros(means.shape, dtype=bool)
    norm_bounds = np.zeros((n_i, 2))
    fences = np.zeros((n_i, 2))
    thresholds = np.zeros((n_i, 3))
    for j in range(n_i):
        column = means[:, :, j].ravel()
        norm_bounds[j] = _raw_bounds(column)
        norm = minmax_normalize(column)
        screened, fences[j] = detect_outliers(norm)
        thresholds[j] = band_thresholds(screened)
        normalized[:, :, j] = norm.reshape(n_t, n_s)
        outlier[:, :, j] = (np.isfinite(norm) & ~np.isfinite(screened)).reshape(n_t, n_s)
        bands[:, :, j] = assign_band(screened, thresholds[j]).reshape(n_t, n_s)
    return BandTable(np.array([p.tree_id for p in profiles]), bands, normalized, outlier,
                     norm_bounds, fences, thresholds)


def apply_band_params(means: np.ndarray, norm_bounds, fences, thresholds):
    """Re-derive (normalized, bands) for profile means from stored parameters."""
    means = np.asarray(means, dtype=float)
    lo, hi = np.asarray(norm_bounds, dtype=float).T
    span = np.where(hi > lo, hi - lo, 1.0)
    with np.errstate(invalid="ignore"):
        norm = np.where(hi > lo, (means - lo) / span, 0.0)
    norm = np.where(np.isfinite(means), norm, np.nan)
    lb, ub = np.asarray(fences, dtype=float).T
    with np.errstate(invalid="ignore"):
        screened = np.where((norm >= lb) & (norm <= ub), norm, np.nan)
    bands = np.zeros(means.shape, dtype=np.int64)
    for j in range(means.shape[-1]):
        bands[..., j] = assign_band(screened[..., j], thresholds[j])
    return norm, bands
