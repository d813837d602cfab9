"""Per-tree embedding vectors assembled from band embeddings."""
from __future__ import annotations

import warnings

import numpy as np

from .banding import N_BANDS


def nearest_valid_segments(valid: np.ndarray, segment: int) -> list[int]:
    """0-based segments used to fill a missing cell at 0-based ``segment``.

    Searches ring distance k = 1, 2, ... and returns the valid segments at the
    first distance that has any (one or two of them); empty if none exist.
    """
    n = len(valid)
    for k in range(1, n):
        hits = [s for s in (segment - k, segment + k) if 0 <= s < n and valid[s]]
        if hits:
            return hits
    return []


def impute_cell(table, model, tree_id: int, segment: int, index: int) -> np.ndarray:
    """Embedding for an outlier cell (1-based segment and index) from its nearest valid segments."""
    row = table.row(tree_id)
    bands = table.bands[row, :, index - 1]
    if bands[segment - 1] > 0:
        raise ValueError(f"cell (tree {tree_id}, s{segment}, index {index}) is not missing")
    src = nearest_valid_segments(bands > 0, segment - 1)
    if not src:
        warnings.warn(f"tree {tree_id}: index {index} missing in every segment; using zeros",
                      stacklevel=2)
        return np.zeros(model.E.shape[0])
    cols = [(index - 1) * N_BANDS + bands[s] - 1 for s in src]
    return model.E[:, cols].mean(axis=1)


def tree_vector(table, model, tree_id: int) -> np.ndarray:
    """Concatenated band embeddings: segments centre to edge, indices in catalog order.

    Length is n_segments * n_indices * embedding_dim.
    """
    row = table.row(tree_id)
    n_s, n_i = table.n_segments, table.n_indices
    dim = model.E.shape[0]
    if model.n_tokens != table.vocab_size:
        raise ValueError(f"model has {model.n_tokens} tokens, table needs {table.vocab_size}")
    out = np.zeros((n_s, n_i, dim))
    bands = table.bands[row]
    for s in range(n_s):
        for j in range(n_i):
            if bands[s, j] > 0:
                out[s, j] = model.E[:, j * N_BANDS + bands[s, j] - 1]
            else:
                out[s, j] = impute_cell(table, model, tree_id, s + 1, j + 1)
    return out.ravel()


def tree_vectors(table, model) -> np.ndarray:
    """Stacked tree vectors in table order, (n_trees, length)."""
    return np.stack([tree_vector(table, model, int(t)) for t in table.tree_ids])
