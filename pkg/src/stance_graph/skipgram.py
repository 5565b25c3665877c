"""Skip-gram with negative sampling over (target, context) node pairs.

Training runs mini-batch SGD: each batch gathers its pair rows, computes
the exact gradient of the batch loss at the current parameters, and
scatter-adds the update. The learning rate decays linearly from lr_start
to lr_start / 100 over all pair visits. Negatives are drawn from the
frequency^power unigram distribution.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import TrainingError


@dataclass(frozen=True)
class SkipGramParams:
    dim: int = 128
    epochs: int = 5
    lr_start: float = 0.025
    negatives: int = 5
    freq_power: float = 0.75
    batch_size: int = 512
    track_loss: bool = False

    def validate(self) -> list[str]:
        errors = []
        if self.dim < 1:
            errors.append(f"dim must be >= 1, got {self.dim}")
        if self.epochs < 1:
            errors.append(f"epochs must be >= 1, got {self.epochs}")
        if self.lr_start <= 0:
            errors.append(f"lr_start must be > 0, got {self.lr_start}")
        if self.negatives < 1:
            errors.append(f"negatives must be >= 1, got {self.negatives}")
        if self.batch_size < 1:
            errors.append(f"batch_size must be >= 1, got {self.batch_size}")
        return errors


@dataclass
class SkipGramModel:
    input_vectors: np.ndarray
    output_vectors: np.ndarray
    negative_table: np.ndarray
    params: SkipGramParams
    seed: int
    loss_history: list[float] = field(default_factory=list)

    @property
    def n_nodes(self) -> int:
        return int(self.input_vectors.shape[0])


def sigmoid(z: np.ndarray | float) -> np.ndarray | float:
    """Numerically stable logistic function (no overflow for any |z|)."""
    z = np.asarray(z, dtype=np.float64)
    e = np.exp(-np.abs(z))
    return np.where(z >= 0, 1.0 / (1.0 + e), e / (1.0 + e))


def log_sigmoid(z: np.ndarray) -> np.ndarray:
    return -np.logaddexp(0.0, -z)


def negative_table(frequencies: np.ndarray, power: float = 0.75) -> np.ndarray:
    """Sampling probabilities proportional to frequency^power; sums to 1."""
    freq = np.asarray(frequencies, dtype=np.float64)
    if freq.ndim != 1 or freq.size == 0:
        raise ValueError("frequencies must be a non-empty 1-D array")
    if (freq < 0).any():
        raise ValueError("frequencies must be non-negative")
    weights = np.where(freq > 0, freq, 0.0) ** power
    total = weights.sum()
    if total <= 0:
        raise ValueError("at least one frequency must be positive")
    return weights / total


def _forward(
    inp: np.ndarray,
    out: np.ndarray,
    targets: np.ndarray,
    contexts: np.ndarray,
    negatives: np.ndarray,
) -> tuple[np.ndarray, ...]:
    u = inp[targets]
    v = out[contexts]
    vn = out[negatives]
    pos_score = np.einsum("bd,bd->b", u, v)
    neg_score = np.einsum("bd,bkd->bk", u, vn)
    return u, v, vn, pos_score, neg_score


def sgns_loss(
    inp: np.ndarray,
    out: np.ndarray,
    targets: np.ndarray,
    contexts: np.ndarray,
    negatives: np.ndarray,
) -> float:
    """Total negative-sampling loss over the given pairs with fixed negatives."""
    _, _, _, pos_score, neg_score = _forward(inp, out, targets, contexts, negatives)
    return float(-(log_sigmoid(pos_score).sum() + log_sigmoid(-neg_score).sum()))


def sgns_gradients(
    inp: np.ndarray,
    out: np.ndarray,
    targets: np.ndarray,
    contexts: np.ndarray,
    negatives: np.ndarray,
) -> tuple[np.ndarray, np.ndarray]:
    """Dense (d_inp, d_out) gradients of sgns_loss at the current parameters.

    This is the same math the training step applies through scatter-adds;
    tests compare it against central finite differences of sgns_loss.
    """
    u, v, vn, pos_score, neg_score = _forward(inp, out, targets, contexts, negatives)
    g_pos = sigmoid(pos_score) - 1.0
    g_neg = sigmoid(neg_score)
    du = g_pos[:, None] * v + np.einsum("bk,bkd->bd", g_neg, vn)
    dv = g_pos[:, None] * u
    dvn = g_neg[..., None] * u[:, None, :]
    d_inp = np.zeros_like(inp)
    d_out = np.zeros_like(out)
    np.add.at(d_inp, targets, du)
    np.add.at(d_out, contexts, dv)
    np.add.at(d_out, negatives.reshape(-1), dvn.reshape(-1, inp.shape[1]))
    return d_inp, d_out


def _sample_negatives(
    rng: np.random.Generator, cum_probs: np.ndarray, shape: tuple[int, int]
) -> np.ndarray:
    idx = np.searchsorted(cum_probs, rng.random(shape), side="right")
    return np.minimum(idx, cum_probs.size - 1)


def _scatter_add(arr: np.ndarray, idx: np.ndarray, updates: np.ndarray) -> None:
    # Equivalent to np.add.at but much faster for many duplicate indices.
    uniq, inv = np.unique(idx, return_inverse=True)
    acc = np.zeros((uniq.size, arr.shape[1]), dtype=arr.dtype)
    np.add.at(acc, inv, updates)
    arr[uniq] += acc


def train_skipgram(
    pairs: np.ndarray, n_nodes: int, params: SkipGramParams, seed: int
) -> SkipGramModel:
    """Train embeddings on a symmetric (target, context) pair stream.

    Deterministic for fixed inputs: initialization, per-epoch shuffles and
    negative draws all come from one generator seeded with ``seed``.
    Raises TrainingError on an empty pair stream or non-finite parameters.
    """
    errors = params.validate()
    if errors:
        raise TrainingError("; ".join(errors))
    pairs = np.asarray(pairs, dtype=np.int64)
    if pairs.ndim != 2 or pairs.shape[1] != 2:
        raise TrainingError(f"pairs must have shape (n, 2), got {pairs.shape}")
    m = pairs.shape[0]
    if m == 0:
        raise TrainingError("cannot train on zero pairs")

    freq = np.bincount(pairs[:, 0], minlength=n_nodes)
    table = negative_table(freq, params.freq_power)
    cum_probs = np.cumsum(table)

    rng = np.random.default_rng(seed)
    # Both sides start at small random values: zero-initialized context
    # vectors stall the first epochs at desk-scale corpus sizes.
    inp = (rng.random((n_nodes, params.dim)) - 0.5) / params.dim
    out = (rng.random((n_nodes, params.dim)) - 0.5) / params.dim

    eval_negatives = None
    if params.track_loss:
        eval_rng = np.random.default_rng([seed, 1])
        eval_negatives = _sample_negatives(eval_rng, cum_probs, (m, params.negatives))

    total_updates = m * params.epochs
    lr_end = params.lr_start / 100.0
    processed = 0
    loss_history: list[float] = []
    for epoch in range(params.epochs):
        perm = rng.permutation(m)
        for start in range(0, m, params.batch_size):
            idx = perm[start : start + params.batch_size]
            targets = pairs[idx, 0]
            contexts = pairs[idx, 1]
            negatives = _sample_negatives(rng, cum_probs, (idx.size, params.negatives))
            lr = params.lr_start + (lr_end - params.lr_start) * (processed / total_updates)
            u, v, vn, pos_score, neg_score = _forward(inp, out, targets, contexts, negatives)
            g_pos = sigmoid(pos_score) - 1.0
            g_neg = sigmoid(neg_score)
            du = g_pos[:, None] * v + np.einsum("bk,bkd->bd", g_neg, vn)
            dv = g_pos[:, None] * u
            dvn = g_neg[..., None] * u[:, None, :]
            np.add.at(inp, targets, -lr * du)
            np.add.at(out, contexts, -lr * dv)
            _scatter_add(out, negatives.reshape(-1), (-lr * dvn).reshape(-1, params.dim))
            processed += idx.size
        if not (np.isfinite(inp).all() and np.isfinite(out).all()):
            raise TrainingError(
                f"non-finite embedding values after epoch {epoch + 1} "
                f"({processed} of {total_updates} updates); lower lr_start"
            )
        if params.track_loss:
            loss_history.append(sgns_loss(inp, out, pairs[:, 0], pairs[:, 1], eval_negatives))
    # Negative sampling drifts every vector along a shared direction;
    # centering removes it. Linear models are unaffected (the offset is
    # absorbed by the bias), cosine geometry improves.
    inp -= inp.mean(axis=0)
    return SkipGramModel(
        input_vectors=inp,
        output_vectors=out,
        negative_table=table,
        params=params,
        seed=seed,
        loss_history=loss_history,
    )
