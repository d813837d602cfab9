"""Clustering, agreement, classification and characterisation of tree vectors."""
from __future__ import annotations

import warnings
from dataclasses import dataclass

import numpy as np

from .banding import BAND_NAMES, MISSING
from .embed import nearest_tokens
from .treevec import nearest_valid_segments
from .vegindex import INDEX_NAMES


@dataclass(frozen=True)
class ClusterAssignment:
    tree_ids: np.ndarray
    labels: np.ndarray  # 1..k
    k: int
    seed: int | None = None
    space: str = "embedding"

    def as_dict(self) -> dict:
        return dict(zip(self.tree_ids.tolist(), self.labels.tolist()))


# ---------------------------------------------------------------- k-means

def _kmeanspp(X, k, rng):
    centers = [X[rng.integers(len(X))]]
    d2 = ((X - centers[0]) ** 2).sum(axis=1)
    for _ in range(1, k):
        total = d2.sum()
        if total <= 0:
            idx = rng.integers(len(X))
        else:
            idx = rng.choice(len(X), p=d2 / total)
        centers.append(X[idx])
        d2 = np.minimum(d2, ((X - X[idx]) ** 2).sum(axis=1))
    return np.array(centers, dtype=float)


def _sq_dists(X, C):
    return ((X[:, None, :] - C[None, :, :]) ** 2).sum(-1)


def lloyd(X, k, seed=0, max_iter=300, tol=1e-6):
    """k-means++ seeded Lloyd iterations.

    Returns ``(labels, centers, inertia_history)`` with 0-based labels.
    """
    X = np.asarray(X, dtype=float)
    if len(X) < k:
        raise ValueError(f"{len(X)} points cannot form {k} clusters")
    rng = np.random.default_rng(seed)
    C = _kmeanspp(X, k, rng)
    history = []
    labels = np.zeros(len(X), dtype=int)
    for _ in range(max_iter):
        d2 = _sq_dists(X, C)
        labels = d2.argmin(axis=1)
        history.append(float(d2[np.arange(len(X)), labels].sum()))
        new = C.copy()
        for c in range(k):
            members = labels == c
            if members.any():
                new[c] = X[members].mean(axis=0)
            else:
                # re-seed an empty cluster at the point worst served by its centre
                far = int(d2[np.arange(len(X)), labels].argmax())
                new[c] = X[far]
                labels[far] = c
        shift = float(np.sqrt(((new - C) ** 2).sum(axis=1)).max())
        C = new
        if shift < tol:
            break
    d2 = _sq_dists(X, C)
    labels = d2.argmin(axis=1)
    history.append(float(d2[np.arange(len(X)), labels].sum()))
    return labels, C, history


def kmeans(features, k: int = 4, seed: int = 0, tree_ids=None, space: str = "embedding") -> ClusterAssignment:
    X = np.asarray(features, dtype=float)
    labels, _, _ = lloyd(X, k, seed)
    ids = np.arange(1, len(X) + 1) if tree_ids is None else np.asarray(tree_ids)
    return ClusterAssignment(ids, labels + 1, k, seed, space)


# ------------------------------------------------------------- agreement

def _aligned(a: ClusterAssignment, b: ClusterAssignment):
    da, db = a.as_dict(), b.as_dict()
    if set(da) != set(db):
        raise ValueError("cluster assignments cover different trees")
    ids = sorted(da)
    return np.array([da[t] for t in ids]), np.array([db[t] for t in ids])


def confusion(a: ClusterAssignment, b: ClusterAssignment) -> np.ndarray:
    """Counts of trees in cluster i of ``a`` and cluster j of ``b``."""
    la, lb = _aligned(a, b)
    m = np.zeros((a.k, b.k), dtype=int)
    np.add.at(m, (la - 1, lb - 1), 1)
    return m


def purity_from_confusion(matrix) -> float:
    m = np.asarray(matrix)
    return float(m.max(axis=1).sum() / m.sum())


def purity(a: ClusterAssignment, b: ClusterAssignment) -> float:
    """Share of trees falling in the best-matching ``b`` cluster of their ``a`` cluster."""
    return purity_from_confusion(confusion(a, b))


# ---------------------------------------------------------- direct vectors

def direct_vectors(table) -> np.ndarray:
    """Normalised per-segment index means, (n_trees, n_segments * n_indices).

    Outlier and missing cells take the value of the nearest valid segment of
    the same tree and index, averaging two equidistant ones; 0 if none.
    """
    norm = table.normalized
    valid = table.bands != MISSING
    out = np.where(valid, norm, 0.0)
    n_t, n_s, n_i = norm.shape
    for t in range(n_t):
        for j in range(n_i):
            for s in np.nonzero(~valid[t, :, j])[0]:
                src = nearest_valid_segments(valid[t, :, j], s)
                out[t, s, j] = norm[t, src, j].mean() if src else 0.0
    return out.reshape(n_t, n_s * n_i)


# ------------------------------------------------------------ classifiers

class GaussianNaiveBayes:
    def __init__(self, var_floor: float = 1e-9):
        self.var_floor = var_floor

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self.mean_ = np.array([X[y == c].mean(axis=0) for c in self.classes_])
        self.var_ = np.maximum(np.array([X[y == c].var(axis=0) for c in self.classes_]),
                               self.var_floor)
        self.log_prior_ = np.log(np.array([(y == c).mean() for c in self.classes_]))
        return self

    def log_likelihood(self, X):
        X = np.asarray(X, dtype=float)
        ll = -0.5 * (np.log(2 * np.pi * self.var_)[None].sum(-1)
                     + (((X[:, None, :] - self.mean_[None]) ** 2) / self.var_[None]).sum(-1))
        return ll + self.log_prior_

    def predict(self, X):
        return self.classes_[self.log_likelihood(X).argmax(axis=1)]


class SoftmaxRegression:
    """Multinomial logistic regression fitted by full-batch gradient descent.

    Features are standardised with training statistics; a small L2 penalty
    keeps separable problems bounded.
    """

    def __init__(self, lr: float = 0.5, n_iter: int = 300, l2: float = 1e-3):
        self.lr, self.n_iter, self.l2 = lr, n_iter, l2

    def _scale(self, X):
        return (X - self.mu_) / self.sd_

    def fit(self, X, y):
        X = np.asarray(X, dtype=float)
        y = np.asarray(y)
        self.classes_ = np.unique(y)
        self.mu_ = X.mean(axis=0)
        sd = X.std(axis=0)
        self.sd_ = np.where(sd > 0, sd, 1.0)
        Z = self._scale(X)
        Y = (y[:, None] == self.classes_[None]).astype(float)
        n, d = Z.shape
        self.W_ = np.zeros((d, len(self.classes_)))
        self.b_ = np.zeros(len(self.classes_))
        for _ in range(self.n_iter):
            P = _softmax(Z @ self.W_ + self.b_)
            G = (P - Y) / n
            self.W_ -= self.lr * (Z.T @ G + self.l2 * self.W_)
            self.b_ -= self.lr * G.sum(axis=0)
        return self

    def predict(self, X):
        scores = self._scale(np.asarray(X, dtype=float)) @ self.W_ + self.b_
        return self.classes_[scores.argmax(axis=1)]


def _softmax(S):
    S = S - S.max(axis=1, keepdims=True)
    e = np.exp(S)
    return e / e.sum(axis=1, keepdims=True)


CLASSIFIERS = {
    "gaussian-naive-bayes": GaussianNaiveBayes,
    "multinomial-logistic": SoftmaxRegression,
}

DEFAULT_FRACTIONS = tuple(round(0.04 * i, 2) for i in range(1, 13))


@dataclass(frozen=True)
class AccuracyRow:
    fraction: float
    mean_accuracy: float
    repetitions: int
    skipped: int


def _split(rng, n, n_test, labels, max_retries):
    classes = np.unique(labels)
    for _ in range(max_retries):
        perm = rng.permutation(n)
        test, train = perm[:n_test], perm[n_test:]
        if np.isin(classes, labels[train]).all():
            return train, test
    return None


def classification_harness(features, labels, algorithm: str = "gaussian-naive-bayes",
                           test_fractions=DEFAULT_FRACTIONS, repetitions: int = 100,
                           seed: int = 0, max_retries: int = 20) -> list[AccuracyRow]:
    """Mean test accuracy over repeated random splits at each test fraction.

    Repetition r at fraction f draws its split from a generator seeded with
    (seed, f index, r). Splits that leave a class out of training are redrawn
    up to ``max_retries`` times and otherwise skipped.
    """
    if algorithm not in CLASSIFIERS:
        raise ValueError(f"unknown algorithm {algorithm!r}; choose from {sorted(CLASSIFIERS)}")
    X = np.asarray(features, dtype=float)
    y = np.asarray(labels)
    n = len(y)
    rows = []
    for fi, frac in enumerate(test_fractions):
        n_test = min(max(1, int(round(frac * n))), n - 1)
        accs, skipped = [], 0
        for r in range(repetitions):
            rng = np.random.default_rng([seed, fi, r])
            split = _split(rng, n, n_test, y, max_retries)
            if split is None:
                skipped += 1
                continue
            train, test = split
            model = CLASSIFIERS[algorithm]().fit(X[train], y[train])
            accs.append(float((model.predict(X[test]) == y[test]).mean()))
        if skipped:
            warnings.warn(f"fraction {frac}: skipped {skipped} splits missing a class", stacklevel=2)
        rows.append(AccuracyRow(float(frac), float(np.mean(accs)) if accs else float("nan"),
                                len(accs), skipped))
    return rows


# --------------------------------------------------------- characterisation

@dataclass(frozen=True)
class CoordinateRank:
    segment: int     # 1-based
    index: str
    band: str
    deviation: float

    @property
    def label(self) -> str:
        return f"{self.band} {self.index}"


def characterize_cluster(members, direct: np.ndarray, table, top_n: int = 5) -> list[CoordinateRank]:
    """Most compact direct-vector coordinates of a cluster.

    ``members`` are row positions into ``direct`` and ``table``. Coordinates
    are ranked by ascending mean squared deviation from the cluster centroid
    (ties by coordinate order) and named after the band most members hold.
    """
    members = np.asarray(members, dtype=int)
    if members.size == 0:
        raise ValueError("empty cluster")
    V = np.asarray(direct, dtype=float)[members]
    d = ((V - V.mean(axis=0)) ** 2).mean(axis=0)
    n_s, n_i = table.n_segments, table.n_indices
    bands = table.bands[members].reshape(len(members), n_s * n_i)
    out = []
    for c in np.argsort(d, kind="stable")[:top_n]:
        col = bands[:, c]
        col = col[col != MISSING]
        if col.size:
            band = BAND_NAMES[int(np.bincount(col, minlength=5)[1:].argmax())]
        else:
            band = "Missing"
        out.append(CoordinateRank(int(c // n_i) + 1, INDEX_NAMES[c % n_i], band, float(d[c])))
    return out


# ------------------------------------------------------ band neighbourhoods

def nearest_bands_embedding(model, token: int, n: int, metric: str = "euclidean") -> list[int]:
    """1-based tokens closest to ``token`` in the embedding space; ties by id."""
    return nearest_tokens(model, token, n, metric)


def nearest_bands_direct(contexts, token: int, n: int) -> list[int]:
    """1-based tokens with the highest Jaccard similarity to ``token``; ties by id."""
    if not 1 <= token <= contexts.n_tokens:
        raise ValueError(f"token {token} outside 1..{contexts.n_tokens}")
    sim = contexts.jaccard[token - 1]
    order = np.lexsort((np.arange(sim.size), -sim))
    return [int(t) + 1 for t in order if t != token - 1][:n]
