"""Jaccard co-occurrence targets and the pair-input embedding network.

A token pair (i, j) is scored by looking up embedding columns ``E[:, i]`` and
``E[:, j]``, concatenating them, passing the result through one leaky-ReLU
hidden layer and reading out a single linear unit. The network is trained
full-batch with Adam so that its score matches the Jaccard similarity of the
two tokens' context sets over every unordered pair i < j.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import sparse

logger = logging.getLogger(__name__)

MODEL_FORMAT_VERSION = 1


class TrainingDiverged(FloatingPointError):
    pass


@dataclass(frozen=True)
class CooccurrenceTable:
    """Token-by-context incidence and the Jaccard matrix derived from it.

    Tokens are 0-based here; ``contexts[c]`` is the (tree id, segment) pair
    behind column ``c`` of ``incidence``.
    """

    incidence: np.ndarray   # (n_tokens, n_contexts) bool
    contexts: tuple
    jaccard: np.ndarray     # (n_tokens, n_tokens)

    @property
    def n_tokens(self) -> int:
        return self.incidence.shape[0]

    def context_set(self, token: int) -> set:
        return {self.contexts[c] for c in np.nonzero(self.incidence[token])[0]}


def jaccard_matrix(incidence: np.ndarray) -> np.ndarray:
    """Pairwise |A & B| / |A | B| over rows of a boolean matrix; 0 when both empty."""
    m = np.asarray(incidence, dtype=np.int64)
    inter = m @ m.T
    sizes = m.sum(axis=1)
    union = sizes[:, None] + sizes[None, :] - inter
    with np.errstate(invalid="ignore", divide="ignore"):
        j = np.where(union > 0, inter / np.maximum(union, 1), 0.0)
    return j


def cooccurrence_from_sets(sets, contexts=None) -> CooccurrenceTable:
    """Build a table from one iterable of context labels per token."""
    sets = [set(s) for s in sets]
    if contexts is None:
        contexts = sorted(set().union(*sets), key=repr) if sets else []
    contexts = tuple(contexts)
    pos = {c: k for k, c in enumerate(contexts)}
    inc = np.zeros((len(sets), len(contexts)), dtype=bool)
    for t, s in enumerate(sets):
        for c in s:
            inc[t, pos[c]] = True
    return CooccurrenceTable(inc, contexts, jaccard_matrix(inc))


def band_contexts(table) -> CooccurrenceTable:
    """Token occurrences over the (tree, segment) contexts of a BandTable."""
    tokens = table.tokens()
    n_t, n_s, _ = tokens.shape
    inc = np.zeros((table.vocab_size, n_t * n_s), dtype=bool)
    for t in range(n_t):
        for s in range(n_s):
            present = tokens[t, s][tokens[t, s] >= 0]
            inc[present, t * n_s + s] = True
    contexts = tuple((int(tid), s + 1) for tid in table.tree_ids for s in range(n_s))
    return CooccurrenceTable(inc, contexts, jaccard_matrix(inc))


@dataclass(frozen=True)
class EmbedConfig:
    embedding_dim: int = 64
    hidden: int = 600
    dropout: float = 0.2
    leaky_slope: float = 0.01
    learning_rate: float = 1e-3
    epochs: int = 2000
    init_scale: float = 0.05
    beta1: float = 0.9
    beta2: float = 0.999
    eps: float = 1e-8
    use_bias: bool = False


@dataclass
class EmbeddingModel:
    """Weights of the pair network.

    ``E`` is (embedding_dim, n_tokens), ``W_h`` is (2 * embedding_dim, hidden)
    and ``w_o`` is (hidden,). Biases are only present with ``use_bias``.
    """

    E: np.ndarray
    W_h: np.ndarray
    w_o: np.ndarray
    config: EmbedConfig = field(default_factory=EmbedConfig)
    seed: int | None = None
    b_h: np.ndarray | None = None
    b_o: float = 0.0

    @property
    def n_tokens(self) -> int:
        return self.E.shape[1]

    def params(self) -> dict:
        p = {"E": self.E, "W_h": self.W_h, "w_o": self.w_o}
        if self.config.use_bias:
            p["b_h"] = self.b_h
            p["b_o"] = np.atleast_1d(np.asarray(self.b_o, dtype=float))
        return p

    def copy(self) -> "EmbeddingModel":
        return EmbeddingModel(self.E.copy(), self.W_h.copy(), self.w_o.copy(), self.config,
                              self.seed, None if self.b_h is None else self.b_h.copy(),
                              float(self.b_o))

    def embedding(self, token: int) -> np.ndarray:
        """Embedding column of a 1-based token."""
        _check_token(self, token)
        return self.E[:, token - 1].copy()

    def to_dict(self) -> dict:
        d = {"format_version": MODEL_FORMAT_VERSION,
             "n_tokens": self.n_tokens,
             "seed": self.seed,
             "config": asdict(self.config),
             "E": self.E.tolist(), "W_h": self.W_h.tolist(), "w_o": self.w_o.tolist()}
        if self.config.use_bias:
            d["b_h"] = self.b_h.tolist()
            d["b_o"] = float(self.b_o)
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "EmbeddingModel":
        if d.get("format_version") != MODEL_FORMAT_VERSION:
            raise ValueError(f"unsupported model format {d.get('format_version')!r}")
        cfg = EmbedConfig(**d["config"])
        model = cls(np.array(d["E"], dtype=float), np.array(d["W_h"], dtype=float),
                    np.array(d["w_o"], dtype=float), cfg, d.get("seed"),
                    np.array(d["b_h"], dtype=float) if "b_h" in d else None,
                    float(d.get("b_o", 0.0)))
        _check_shapes(model)
        return model


def _check_shapes(model):
    dim, n = model.E.shape
    if model.W_h.shape[0] != 2 * dim or model.w_o.shape != (model.W_h.shape[1],):
        raise ValueError(f"inconsistent weight shapes E{model.E.shape} "
                         f"W_h{model.W_h.shape} w_o{model.w_o.shape}")


def _check_token(model, token):
    if not 1 <= int(token) <= model.n_tokens:
        raise ValueError(f"token {token} outside 1..{model.n_tokens}")


def init_model(n_tokens: int, config: EmbedConfig = EmbedConfig(), seed: int = 0) -> EmbeddingModel:
    """Uniform(-init_scale, init_scale) initialisation of every weight."""
    rng = np.random.default_rng(seed)
    a = config.init_scale
    dim, hid = config.embedding_dim, config.hidden
    E = rng.uniform(-a, a, size=(dim, n_tokens))
    W_h = rng.uniform(-a, a, size=(2 * dim, hid))
    w_o = rng.uniform(-a, a, size=hid)
    b_h = np.zeros(hid) if config.use_bias else None
    return EmbeddingModel(E, W_h, w_o, config, seed, b_h, 0.0)


def upper_pairs(n_tokens: int) -> tuple[np.ndarray, np.ndarray]:
    """0-based (i, j) with i < j in row-major order."""
    return np.triu_indices(n_tokens, k=1)


def _forward_batch(model, I, J, mask=None):
    # u_ij @ W_h splits into a left and a right half, so the first layer is
    # evaluated once per token and gathered per pair
    dim = model.E.shape[0]
    left = model.E.T @ model.W_h[:dim]      # (n_tokens, hidden)
    right = model.E.T @ model.W_h[dim:]
    Z = left[I] + right[J]
    if model.b_h is not None and model.config.use_bias:
        Z = Z + model.b_h
    H = _leaky(Z, model.config.leaky_slope)
    if mask is not None:
        H *= mask
    y = H @ model.w_o
    if model.config.use_bias:
        y = y + model.b_o
    return y, (Z, H)


def _leaky(Z, slope):
    # max(Z, slope * Z) is the leaky ReLU for slope <= 1 and much faster
    # than np.where on random signs
    H = Z * slope
    return np.maximum(H, Z, out=H) if slope <= 1 else np.minimum(H, Z, out=H)


def _scatter_rows(index, rows, n):
    """Sum of ``rows`` grouped by ``index`` into an (n, ...) array."""
    ind = sparse.csr_matrix((np.ones(index.size), (index, np.arange(index.size))),
                            shape=(n, index.size))
    return np.asarray(ind @ rows)


def forward(model: EmbeddingModel, i: int, j: int, training: bool = False,
            rng: np.random.Generator | None = None) -> float:
    """Predicted similarity for 1-based tokens (i, j).

    With ``training`` set, inverted dropout is applied to the hidden layer.
    """
    _check_token(model, i)
    _check_token(model, j)
    mask = None
    if training and model.config.dropout > 0:
        rng = rng if rng is not None else np.random.default_rng()
        mask = _dropout_mask(rng, (1, model.W_h.shape[1]), model.config.dropout)
    y, _ = _forward_batch(model, np.array([i - 1]), np.array([j - 1]), mask)
    return float(y[0])


def predict_matrix(model: EmbeddingModel) -> np.ndarray:
    """Evaluation-mode score for every ordered token pair, (n_tokens, n_tokens)."""
    n = model.n_tokens
    I, J = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    y, _ = _forward_batch(model, I.ravel(), J.ravel())
    return y.reshape(n, n)


def _dropout_mask(rng, shape, rate):
    # single-precision uniforms are plenty for a keep/drop decision
    keep = 1.0 - rate
    mask = (rng.random(shape, dtype=np.float32) < keep).astype(np.float64)
    mask *= 1.0 / keep
    return mask


def _targets(pairs, n_tokens):
    jac = pairs.jaccard if isinstance(pairs, CooccurrenceTable) else np.asarray(pairs, float)
    if jac.shape != (n_tokens, n_tokens):
        raise ValueError(f"targets {jac.shape} do not match {n_tokens} tokens")
    return jac


def loss(model: EmbeddingModel, pairs) -> float:
    """Mean squared error over all pairs i < j, dropout disabled.

    ``pairs`` is a CooccurrenceTable or a square target matrix.
    """
    jac = _targets(pairs, model.n_tokens)
    I, J = upper_pairs(model.n_tokens)
    y, _ = _forward_batch(model, I, J)
    return float(np.mean((y - jac[I, J]) ** 2))


def loss_and_grads(model: EmbeddingModel, I, J, target, mask=None):
    """Mean squared error over the given pairs and its gradient for every weight."""
    I = np.asarray(I)
    J = np.asarray(J)
    y, (Z, H) = _forward_batch(model, I, J, mask)
    resid = y - target
    n = resid.size
    value = float(np.mean(resid ** 2))
    g_y = 2.0 * resid / n                                # (P,)
    grads = {"w_o": H.T @ g_y}
    slope = model.config.leaky_slope
    g_Z = (Z > 0) * (1.0 - slope)
    g_Z += slope
    if mask is not None:
        g_Z *= mask
    g_Z *= g_y[:, None]
    g_Z *= model.w_o
    # per-token sums of g_Z for the left and right halves of u_ij
    n_tok = model.n_tokens
    g_left = _scatter_rows(I, g_Z, n_tok)               # (n_tokens, hidden)
    g_right = _scatter_rows(J, g_Z, n_tok)
    dim = model.E.shape[0]
    grads["W_h"] = np.concatenate([model.E @ g_left, model.E @ g_right], axis=0)
    grads["E"] = model.W_h[:dim] @ g_left.T + model.W_h[dim:] @ g_right.T
    if model.config.use_bias:
        grads["b_h"] = g_Z.sum(axis=0)
        grads["b_o"] = np.atleast_1d(g_y.sum())
    return value, grads


def _apply(model, name, value):
    if name == "b_o":
        model.b_o = float(value[0])
    else:
        setattr(model, name, value)


class Adam:
    def __init__(self, params: dict, lr=1e-3, beta1=0.9, beta2=0.999, eps=1e-8):
        self.lr, self.beta1, self.beta2, self.eps = lr, beta1, beta2, eps
        self.m = {k: np.zeros_like(v, dtype=float) for k, v in params.items()}
        self.v = {k: np.zeros_like(v, dtype=float) for k, v in params.items()}
        self.t = 0

    def step(self, params: dict, grads: dict) -> dict:
        self.t += 1
        b1, b2 = self.beta1, self.beta2
        out = {}
        for k, g in grads.items():
            self.m[k] = b1 * self.m[k] + (1 - b1) * g
            self.v[k] = b2 * self.v[k] + (1 - b2) * g * g
            m_hat = self.m[k] / (1 - b1 ** self.t)
            v_hat = self.v[k] / (1 - b2 ** self.t)
            out[k] = params[k] - self.lr * m_hat / (np.sqrt(v_hat) + self.eps)
        return out


def train(model: EmbeddingModel, pairs, epochs: int | None = None, lr: float | None = None,
          seed: int = 0) -> tuple[EmbeddingModel, np.ndarray]:
    """Full-batch Adam on the pair loss.

    Returns a trained copy of ``model`` and the evaluation-mode loss recorded
    after every epoch. The dropout masks and the pair order both come from
    ``seed``, so a run is reproducible.
    """
    cfg = model.config
    epochs = cfg.epochs if epochs is None else epochs
    lr = cfg.learning_rate if lr is None else lr
    if epochs < 1:
        raise ValueError("epochs must be >= 1")
    jac = _targets(pairs, model.n_tokens)
    model = model.copy()
    rng = np.random.default_rng(seed)
    I0, J0 = upper_pairs(model.n_tokens)
    opt = Adam(model.params(), lr, cfg.beta1, cfg.beta2, cfg.eps)
    history = np.empty(epochs)
    for epoch in range(epochs):
        order = rng.permutation(I0.size)
        I, J = I0[order], J0[order]
        mask = None
        if cfg.dropout > 0:
            mask = _dropout_mask(rng, (I.size, model.W_h.shape[1]), cfg.dropout)
        # overflow is caught by the finiteness checks below
        with np.errstate(over="ignore", invalid="ignore"):
            value, grads = loss_and_grads(model, I, J, jac[I, J], mask)
        if not np.isfinite(value):
            raise TrainingDiverged(f"non-finite training loss at epoch {epoch + 1} (lr={lr})")
        for name, new in opt.step(model.params(), grads).items():
            _apply(model, name, new)
        with np.errstate(over="ignore", invalid="ignore"):
            history[epoch] = loss(model, jac)
        if not np.isfinite(history[epoch]):
            raise TrainingDiverged(f"non-finite loss after epoch {epoch + 1} (lr={lr})")
        if (epoch + 1) % 500 == 0:
            logger.debug("epoch %d loss %.6g", epoch + 1, history[epoch])
    return model, history


def nudge_from_kink(model: EmbeddingModel, i: int, j: int, margin: float = 1e-2) -> EmbeddingModel:
    """Copy of ``model`` whose hidden pre-activations for pair (i, j) are at
    least ``margin`` away from zero, so finite differences do not straddle
    the leaky-ReLU kink."""
    m = model.copy()
    u = np.concatenate([m.E[:, i - 1], m.E[:, j - 1]])
    uu = float(u @ u)
    if uu == 0:
        return m
    z = u @ m.W_h
    if m.b_h is not None and m.config.use_bias:
        z = z + m.b_h
    close = np.abs(z) < margin
    shift = np.where(z >= 0, margin, -margin) - z
    m.W_h[:, close] += np.outer(u, shift[close]) / uu
    return m


def gradient_check(model: EmbeddingModel, pair, step: float = 1e-5, floor: float = 1e-6) -> float:
    """Largest relative gap between analytic and central-difference gradients.

    ``pair`` is ``(i, j, target)`` with 1-based tokens. Dropout is off.
    The relative error of each entry is |a - n| / max(|a|, |n|, floor); the
    floor keeps round-off in near-zero gradients from dominating.
    """
    i, j, target = pair
    _check_token(model, i)
    _check_token(model, j)
    I, J, T = np.array([i - 1]), np.array([j - 1]), np.array([float(target)])
    _, grads = loss_and_grads(model, I, J, T)
    probe = model.copy()
    worst = 0.0
    for name, g in grads.items():
        base = probe.params()[name].astype(float).copy()
        numeric = np.zeros_like(base)
        for idx in np.ndindex(base.shape):
            for sign in (1, -1):
                trial = base.copy()
                trial[idx] += sign * step
                _apply(probe, name, trial)
                val, _ = loss_and_grads(probe, I, J, T)
                numeric[idx] += sign * val
            numeric[idx] /= 2 * step
        _apply(probe, name, base)
        denom = np.maximum(np.maximum(np.abs(g), np.abs(numeric)), floor)
        worst = max(worst, float(np.max(np.abs(g - numeric) / denom)))
    return worst


def nearest_tokens(model: EmbeddingModel, token: int, n: int, metric: str = "euclidean") -> list[int]:
    """The n tokens closest to ``token`` in embedding space (1-based, self excluded)."""
    _check_token(model, token)
    E = model.E.T
    q = E[token - 1]
    if metric == "euclidean":
        dist = np.sqrt(((E - q) ** 2).sum(axis=1))
    elif metric == "cosine":
        norms = np.linalg.norm(E, axis=1) * np.linalg.norm(q)
        with np.errstate(invalid="ignore", divide="ignore"):
            dist = 1.0 - np.where(norms > 0, E @ q / norms, 0.0)
    else:
        raise ValueError(f"unknown metric {metric!r}")
    order = [int(t) for t in np.lexsort((np.arange(E.shape[0]), dist)) if t != token - 1]
    return [t + 1 for t in order[:n]]
