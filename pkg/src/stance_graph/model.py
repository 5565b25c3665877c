"""Binary logistic regression trained by full-batch gradient descent.

Positive class is VAX_SKEPTIC (encoded 1). The objective is mean
cross-entropy plus (lambda / 2) * ||w||^2 with an unregularized bias;
it is strictly convex for lambda > 0, so the optimum is unique.
"""

from __future__ import annotations

from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .errors import ParseError, TrainingError
from .ingest import StanceLabel
from .skipgram import sigmoid

_PROB_EPS = 1e-15


@dataclass
class LogRegModel:
    weights: np.ndarray
    bias: float
    lam: float
    epochs: int
    lr: float
    seed: int
    final_loss: float
    loss_history: list[float] = field(default_factory=list, repr=False, compare=False)

    @property
    def dim(self) -> int:
        return int(self.weights.size)


def logreg_loss_and_grad(
    w: np.ndarray, b: float, X: np.ndarray, y: np.ndarray, lam: float
) -> tuple[float, np.ndarray, float]:
    """(loss, grad_w, grad_b) of the regularized mean cross-entropy."""
    n = X.shape[0]
    p = sigmoid(X @ w + b)
    p_safe = np.clip(p, _PROB_EPS, 1.0 - _PROB_EPS)
    loss = float(
        -np.mean(y * np.log(p_safe) + (1 - y) * np.log(1 - p_safe))
        + 0.5 * lam * float(w @ w)
    )
    resid = p - y
    grad_w = X.T @ resid / n + lam * w
    grad_b = float(np.mean(resid))
    return loss, grad_w, grad_b


def train(
    X: np.ndarray,
    y: np.ndarray,
    lam: float = 1e-4,
    epochs: int = 1000,
    lr: float = 0.1,
    seed: int = 0,
    init: str = "zeros",
) -> LogRegModel:
    """Full-batch gradient descent with a fixed learning rate.

    Deterministic: the default all-zeros initialization makes the seed
    inert; init="random" draws a small seeded start instead (the convex
    objective converges to the same optimum either way).
    """
    X = np.asarray(X, dtype=np.float64)
    y = np.asarray(y, dtype=np.int64)
    if X.ndim != 2 or y.shape != (X.shape[0],):
        raise ValueError(f"incompatible shapes X{X.shape}, y{y.shape}")
    if lr <= 0:
        raise TrainingError(f"lr must be > 0, got {lr}")
    if epochs < 1:
        raise TrainingError(f"epochs must be >= 1, got {epochs}")
    classes = np.unique(y)
    if not np.array_equal(classes, [0, 1]):
        raise TrainingError(
            f"training needs both classes (0 and 1), got labels {classes.tolist()}"
        )
    n, m = X.shape
    if init == "zeros":
        w = np.zeros(m, dtype=np.float64)
        b = 0.0
    elif init == "random":
        rng = np.random.default_rng(seed)
        w = rng.normal(scale=0.01, size=m)
        b = float(rng.normal(scale=0.01))
    else:
        raise ValueError(f"unknown init {init!r}")

    loss_history: list[float] = []
    for epoch in range(epochs):
        loss, grad_w, grad_b = logreg_loss_and_grad(w, b, X, y, lam)
        if not np.isfinite(loss):
            raise TrainingError(
                f"loss diverged to non-finite at epoch {epoch + 1}; try a smaller lr"
            )
        loss_history.append(loss)
        w -= lr * grad_w
        b -= lr * grad_b
    if not (np.isfinite(w).all() and np.isfinite(b)):
        raise TrainingError("non-finite parameters after training; try a smaller lr")
    final_loss, _, _ = logreg_loss_and_grad(w, b, X, y, lam)
    return LogRegModel(
        weights=w,
        bias=b,
        lam=lam,
        epochs=epochs,
        lr=lr,
        seed=seed,
        final_loss=final_loss,
        loss_history=loss_history,
    )


def predict_proba(model: LogRegModel, x: np.ndarray) -> float | np.ndarray:
    """P(VAX_SKEPTIC | x); accepts one vector or a matrix of rows.

    Numerically stable for extreme scores and clipped into the open
    interval (0, 1).
    """
    x = np.asarray(x, dtype=np.float64)
    if x.shape[-1] != model.dim:
        raise ValueError(f"input width {x.shape[-1]} does not match model width {model.dim}")
    p = np.clip(sigmoid(x @ model.weights + model.bias), _PROB_EPS, 1.0 - _PROB_EPS)
    return float(p) if x.ndim == 1 else p


def classify(model: LogRegModel, x: np.ndarray, threshold: float = 0.5) -> StanceLabel:
    """VAX_SKEPTIC iff predicted probability >= threshold."""
    p = predict_proba(model, x)
    return StanceLabel.VAX_SKEPTIC if p >= threshold else StanceLabel.PRO_VAX


def save_model(model: LogRegModel, path: str | Path, config_hash: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if config_hash is not None:
            f.write(f"# config_hash {config_hash}\n")
        f.write(f"m {model.dim}\n")
        f.write(f"lambda {format(model.lam, '.17g')}\n")
        f.write(f"epochs {model.epochs}\n")
        f.write(f"lr {format(model.lr, '.17g')}\n")
        f.write(f"seed {model.seed}\n")
        f.write(f"final_loss {format(model.final_loss, '.17g')}\n")
        f.write(f"bias {format(model.bias, '.17g')}\n")
        for v in model.weights:
            f.write(format(v, ".17g") + "\n")


def load_model(path: str | Path) -> LogRegModel:
    header: dict[str, str] = {}
    weights: list[float] = []
    with open(path, encoding="utf-8") as f:
        for line in f:
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) == 2 and not _is_float(parts[0]):
                header[parts[0]] = parts[1]
            else:
                weights.append(float(parts[0]))
    for key in ("m", "lambda", "epochs", "lr", "seed", "final_loss", "bias"):
        if key not in header:
            raise ParseError(f"model file missing header field {key!r}")
    m = int(header["m"])
    if len(weights) != m:
        raise ParseError(f"model file has {len(weights)} weights, header says {m}")
    return LogRegModel(
        weights=np.array(weights, dtype=np.float64),
        bias=float(header["bias"]),
        lam=float(header["lambda"]),
        epochs=int(header["epochs"]),
        lr=float(header["lr"]),
        seed=int(header["seed"]),
        final_loss=float(header["final_loss"]),
    )


def _is_float(token: str) -> bool:
    try:
        float(token)
        return True
    except ValueError:
        return False
