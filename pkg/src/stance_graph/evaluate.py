"""Temporal evaluation: splits, AUC/accuracy, ablations, sliding windows,
and the 2-D projection / kernel-density export of the embedding space."""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from . import model as logreg
from .embed import EmbeddingMatrix
from .errors import UndefinedMetricError
from .features import (
    DEFAULT_MASKS,
    HistoryIndex,
    Vocabulary,
    assemble_matrix,
    fit_vocabulary,
    mask_name,
    normalize_mask,
    tokenize,
)
from .ingest import Dataset, StanceLabel, TweetRecord

LabeledTweet = tuple[TweetRecord, StanceLabel]

SECONDS_PER_DAY = 86400


@dataclass(frozen=True)
class TemporalSplit:
    """Train strictly precedes test in the (created_at, tweet_id) order."""

    train: tuple[LabeledTweet, ...]
    test: tuple[LabeledTweet, ...]
    boundary_time: int


def temporal_split(labeled: Sequence[LabeledTweet], train_frac: float = 0.7) -> TemporalSplit:
    """First round(train_frac * n) tweets go to train (banker's rounding).

    The input must already be sorted by (created_at, tweet_id); both sides
    of the split are always non-empty.
    """
    n = len(labeled)
    if n < 2:
        raise ValueError(f"need at least 2 labeled tweets to split, got {n}")
    if not 0.0 < train_frac < 1.0:
        raise ValueError(f"train_frac must be in (0, 1), got {train_frac}")
    keys = [(rec.created_at, rec.tweet_id) for rec, _ in labeled]
    if any(keys[i] > keys[i + 1] for i in range(n - 1)):
        raise ValueError("labeled tweets must be sorted by (created_at, tweet_id)")
    n_train = min(max(int(round(train_frac * n)), 1), n - 1)
    train = tuple(labeled[:n_train])
    test = tuple(labeled[n_train:])
    return TemporalSplit(train=train, test=test, boundary_time=train[-1][0].created_at)


def auc(scores: np.ndarray, labels: np.ndarray) -> float:
    """Probability a random positive outranks a random negative; ties 1/2.

    Computed from average ranks in O(n log n). Positive class is label 1
    (VAX_SKEPTIC). Raises UndefinedMetricError on single-class input.
    """
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if scores.shape != labels.shape or scores.ndim != 1:
        raise ValueError("scores and labels must be equal-length 1-D arrays")
    n = scores.size
    n_pos = int(labels.sum())
    n_neg = n - n_pos
    if n_pos == 0 or n_neg == 0:
        raise UndefinedMetricError(
            f"AUC undefined: {n_pos} positive and {n_neg} negative examples"
        )
    order = np.argsort(scores, kind="mergesort")
    sorted_scores = scores[order]
    group_starts = np.concatenate(([0], np.nonzero(np.diff(sorted_scores))[0] + 1))
    group_ends = np.concatenate((group_starts[1:], [n]))
    avg_rank = (group_starts + group_ends + 1) / 2.0  # 1-based, averaged over ties
    ranks = np.empty(n, dtype=np.float64)
    ranks[order] = np.repeat(avg_rank, group_ends - group_starts)
    pos_rank_sum = float(ranks[labels == 1].sum())
    return (pos_rank_sum - n_pos * (n_pos + 1) / 2.0) / (n_pos * n_neg)


def accuracy(predictions: np.ndarray, labels: np.ndarray) -> float:
    predictions = np.asarray(predictions)
    labels = np.asarray(labels)
    if predictions.shape != labels.shape or predictions.ndim != 1:
        raise ValueError("predictions and labels must be equal-length 1-D arrays")
    if predictions.size == 0:
        raise ValueError("accuracy undefined on empty input")
    return float(np.mean(predictions == labels))


def gain_vs_text(value: float, text_value: float) -> float:
    """Percentage gain over the text-only baseline: 100 * (v - t) / t."""
    return 100.0 * (value - text_value) / text_value


@dataclass
class MaskResult:
    mask: tuple[str, ...]
    auc: float
    accuracy: float
    auc_gain_pct: float | None
    accuracy_gain_pct: float | None

    @property
    def name(self) -> str:
        return mask_name(self.mask)


@dataclass
class WindowResult:
    window_start: int
    window_end: int
    n_pos: int
    n_neg: int
    auc: float | None


@dataclass
class EvalReport:
    masks: list[MaskResult]
    windows: list[WindowResult]
    metadata: dict

    def to_dict(self) -> dict:
        return {
            "metadata": self.metadata,
            "masks": {
                r.name: {
                    "auc": r.auc,
                    "accuracy": r.accuracy,
                    "auc_gain_pct": r.auc_gain_pct,
                    "accuracy_gain_pct": r.accuracy_gain_pct,
                }
                for r in self.masks
            },
            "windows": [
                {
                    "window_start": w.window_start,
                    "window_end": w.window_end,
                    "n_pos": w.n_pos,
                    "n_neg": w.n_neg,
                    "auc": w.auc,
                }
                for w in self.windows
            ],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True, indent=2)


@dataclass(frozen=True)
class EvalParams:
    split_frac: float = 0.7
    vocab_size: int = 1000
    masks: tuple[tuple[str, ...], ...] = DEFAULT_MASKS
    lam: float = 1e-4
    logreg_lr: float = 0.1
    logreg_epochs: int = 1000
    threshold: float = 0.5
    window_days: float = 7.0
    stride_days: float = 1.0


def prepare_features(
    split: TemporalSplit, vocab_size: int
) -> tuple[Vocabulary, HistoryIndex]:
    """Vocabulary from the train split only, plus the shared history index."""
    train_docs = [tokenize(rec.text) for rec, _ in split.train]
    vocab = fit_vocabulary(train_docs, max_terms=vocab_size)
    return vocab, HistoryIndex(split.train, split.test)


@dataclass
class MaskEval:
    """One trained mask with its test-set predictions."""

    mask: tuple[str, ...]
    model: logreg.LogRegModel
    test_ids: np.ndarray
    test_times: np.ndarray
    test_labels: np.ndarray
    test_scores: np.ndarray
    auc: float
    accuracy: float


def evaluate_masks(
    split: TemporalSplit,
    vocab: Vocabulary,
    history_index: HistoryIndex,
    embeddings: EmbeddingMatrix | None,
    params: EvalParams,
) -> list[MaskEval]:
    """Train and score one model per mask on the shared temporal split."""
    results = []
    for mask in params.masks:
        mask = normalize_mask(mask)
        X_train, y_train, _, _ = assemble_matrix(
            split.train, vocab, embeddings, history_index, mask, in_test=False
        )
        X_test, y_test, ids, times = assemble_matrix(
            split.test, vocab, embeddings, history_index, mask, in_test=True
        )
        clf = logreg.train(
            X_train,
            y_train,
            lam=params.lam,
            epochs=params.logreg_epochs,
            lr=params.logreg_lr,
        )
        scores = logreg.predict_proba(clf, X_test)
        preds = (scores >= params.threshold).astype(np.int64)
        results.append(
            MaskEval(
                mask=mask,
                model=clf,
                test_ids=ids,
                test_times=times,
                test_labels=y_test,
                test_scores=scores,
                auc=auc(scores, y_test),
                accuracy=accuracy(preds, y_test),
            )
        )
    return results


def report_from_masks(
    mask_evals: Sequence[MaskEval],
    windows: Sequence[WindowResult] = (),
    metadata: dict | None = None,
) -> EvalReport:
    """Attach percentage gains against the text-only row, when present."""
    baseline = next((m for m in mask_evals if m.mask == ("text",)), None)
    rows = []
    for m in mask_evals:
        if baseline is None or m is baseline:
            auc_gain = acc_gain = None
        else:
            auc_gain = gain_vs_text(m.auc, baseline.auc)
            acc_gain = gain_vs_text(m.accuracy, baseline.accuracy)
        rows.append(
            MaskResult(
                mask=m.mask,
                auc=m.auc,
                accuracy=m.accuracy,
                auc_gain_pct=auc_gain,
                accuracy_gain_pct=acc_gain,
            )
        )
    return EvalReport(masks=rows, windows=list(windows), metadata=metadata or {})


def run_ablation(
    dataset: Dataset,
    embeddings: EmbeddingMatrix | None,
    params: EvalParams,
    metadata: dict | None = None,
) -> EvalReport:
    """Table-style ablation over feature masks on one temporal split.

    All masks share the identical train/test membership. The sliding
    window series is computed from the last mask's test predictions
    (the full fusion row under the default mask set).
    """
    split = temporal_split(list(dataset.labeled_subset), params.split_frac)
    vocab, hindex = prepare_features(split, params.vocab_size)
    mask_evals = evaluate_masks(split, vocab, hindex, embeddings, params)
    last = mask_evals[-1]
    windows = sliding_window(
        last.test_times,
        last.test_scores,
        last.test_labels,
        window_days=params.window_days,
        stride_days=params.stride_days,
    )
    meta = dict(metadata or {})
    meta.update(
        {
            "n_train": len(split.train),
            "n_test": len(split.test),
            "boundary_time": split.boundary_time,
            "window_mask": mask_name(last.mask),
        }
    )
    return report_from_masks(mask_evals, windows, meta)


def sliding_window(
    times: np.ndarray,
    scores: np.ndarray,
    labels: np.ndarray,
    window_days: float = 7.0,
    stride_days: float = 1.0,
) -> list[WindowResult]:
    """AUC over [t, t + window) windows advancing by the stride.

    Windows are placed from the first prediction timestamp while they fit
    inside the prediction period (at least one window always). Windows
    lacking either class report auc as None with the counts kept.
    """
    if window_days <= 0 or stride_days <= 0:
        raise ValueError("window_days and stride_days must be > 0")
    times = np.asarray(times, dtype=np.int64)
    scores = np.asarray(scores, dtype=np.float64)
    labels = np.asarray(labels, dtype=np.int64)
    if times.size == 0:
        return []
    window_s = int(round(window_days * SECONDS_PER_DAY))
    stride_s = int(round(stride_days * SECONDS_PER_DAY))
    t0 = int(times.min())
    span = int(times.max()) - t0
    n_windows = max(1, (span - window_s) // stride_s + 1)
    out = []
    for i in range(n_windows):
        start = t0 + i * stride_s
        end = start + window_s
        inside = (times >= start) & (times < end)
        n_pos = int(labels[inside].sum())
        n_neg = int(inside.sum()) - n_pos
        value = auc(scores[inside], labels[inside]) if n_pos and n_neg else None
        out.append(WindowResult(start, end, n_pos, n_neg, value))
    return out


def project_2d(vectors: np.ndarray) -> np.ndarray:
    """Deterministic PCA onto the top-2 variance directions.

    Mean-centered; eigenvectors are sign-fixed so each one's
    largest-magnitude coordinate is positive.
    """
    X = np.asarray(vectors, dtype=np.float64)
    if X.ndim != 2 or X.shape[0] < 2 or X.shape[1] < 2:
        raise ValueError(f"need at least 2 rows and 2 columns, got {X.shape}")
    centered = X - X.mean(axis=0)
    cov = centered.T @ centered / (X.shape[0] - 1)
    eigvals, eigvecs = np.linalg.eigh(cov)
    if eigvals[-1] <= 0:
        raise ValueError("zero-variance input has no principal directions")
    components = eigvecs[:, [-1, -2]]
    for j in range(2):
        pivot = int(np.argmax(np.abs(components[:, j])))
        if components[pivot, j] < 0:
            components[:, j] = -components[:, j]
    return centered @ components


def scott_bandwidth(points: np.ndarray) -> float:
    """Scott's rule for 2-D data: n^(-1/6) times the mean per-axis std."""
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 2:
        raise ValueError("need an (n, 2) array with n >= 2")
    sigma = float(np.mean(pts.std(axis=0, ddof=1)))
    if sigma <= 0:
        raise ValueError("zero spread: bandwidth undefined")
    return float(pts.shape[0] ** (-1.0 / 6.0) * sigma)


def kde_grid(
    points: np.ndarray,
    bandwidth: float,
    grid_size: int = 100,
    bounds: tuple[float, float, float, float] | None = None,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Gaussian kernel density on a grid_size x grid_size grid.

    f(x) = (1/n) sum_i (1 / (2 pi h^2)) exp(-||x - p_i||^2 / (2 h^2)),
    evaluated over the bounding box expanded by 3h per side (or explicit
    ``bounds`` (xmin, xmax, ymin, ymax) to share a grid across groups).
    Returns (xs, ys, density) with density[i, j] at (xs[i], ys[j]).
    """
    pts = np.asarray(points, dtype=np.float64)
    if pts.ndim != 2 or pts.shape[1] != 2 or pts.shape[0] < 1:
        raise ValueError("need an (n, 2) array with n >= 1")
    if bandwidth <= 0:
        raise ValueError(f"bandwidth must be > 0, got {bandwidth}")
    if grid_size < 2:
        raise ValueError(f"grid_size must be >= 2, got {grid_size}")
    if bounds is None:
        xmin, xmax = pts[:, 0].min() - 3 * bandwidth, pts[:, 0].max() + 3 * bandwidth
        ymin, ymax = pts[:, 1].min() - 3 * bandwidth, pts[:, 1].max() + 3 * bandwidth
    else:
        xmin, xmax, ymin, ymax = bounds
    xs = np.linspace(xmin, xmax, grid_size)
    ys = np.linspace(ymin, ymax, grid_size)
    inv = 1.0 / (2.0 * bandwidth * bandwidth)
    gx = np.exp(-((xs[:, None] - pts[None, :, 0]) ** 2) * inv)
    gy = np.exp(-((ys[:, None] - pts[None, :, 1]) ** 2) * inv)
    density = (gx @ gy.T) / (pts.shape[0] * 2.0 * np.pi * bandwidth * bandwidth)
    return xs, ys, density


def user_stance_groups(labeled: Iterable[LabeledTweet]) -> dict[int, StanceLabel]:
    """Majority stance per user; ties go to the skeptic (positive) class."""
    counts: dict[int, list[int]] = {}
    for rec, label in labeled:
        pair = counts.setdefault(rec.user_id, [0, 0])
        pair[int(label)] += 1
    return {
        u: (StanceLabel.VAX_SKEPTIC if c[1] >= c[0] else StanceLabel.PRO_VAX)
        for u, c in counts.items()
    }


@dataclass
class KdeExport:
    """Shared-grid density surfaces of the two stance groups."""

    xs: np.ndarray
    ys: np.ndarray
    density_pro: np.ndarray
    density_skeptic: np.ndarray
    bandwidth: float
    n_pro_users: int
    n_skeptic_users: int


def embedding_density_export(
    embeddings: EmbeddingMatrix,
    labeled: Iterable[LabeledTweet],
    grid_size: int = 100,
    bandwidth: float | None = None,
    user_subset: Iterable[int] | None = None,
) -> KdeExport:
    """Project labeled users' embeddings to 2-D and estimate group densities.

    Only users present in the embedding matrix contribute. ``user_subset``
    optionally restricts the export (e.g. to users active in a date range).
    Raises UndefinedMetricError when a stance group ends up empty.
    """
    groups = user_stance_groups(labeled)
    users = sorted(groups)
    if user_subset is not None:
        wanted = set(user_subset)
        users = [u for u in users if u in wanted]
    rows = []
    kept_users = []
    for u in users:
        row = embeddings.row_for_user(u)
        if row is not None:
            rows.append(row)
            kept_users.append(u)
    if len(rows) < 2:
        raise UndefinedMetricError("need at least 2 embedded labeled users for the export")
    coords = project_2d(np.stack(rows))
    is_skeptic = np.array(
        [groups[u] is StanceLabel.VAX_SKEPTIC for u in kept_users], dtype=bool
    )
    pro = coords[~is_skeptic]
    skeptic = coords[is_skeptic]
    if pro.shape[0] == 0 or skeptic.shape[0] == 0:
        raise UndefinedMetricError("both stance groups need at least one embedded user")
    h = scott_bandwidth(coords) if bandwidth is None else float(bandwidth)
    xmin = coords[:, 0].min() - 3 * h
    xmax = coords[:, 0].max() + 3 * h
    ymin = coords[:, 1].min() - 3 * h
    ymax = coords[:, 1].max() + 3 * h
    bounds = (float(xmin), float(xmax), float(ymin), float(ymax))
    xs, ys, dens_pro = kde_grid(pro, h, grid_size, bounds)
    _, _, dens_skeptic = kde_grid(skeptic, h, grid_size, bounds)
    return KdeExport(
        xs=xs,
        ys=ys,
        density_pro=dens_pro,
        density_skeptic=dens_skeptic,
        bandwidth=h,
        n_pro_users=int(pro.shape[0]),
        n_skeptic_users=int(skeptic.shape[0]),
    )


def write_report(report: EvalReport, path: str | Path) -> None:
    with open(path, "w", encoding="utf-8") as f:
        f.write(report.to_json() + "\n")


def write_windows_csv(
    windows: Sequence[WindowResult], path: str | Path, config_hash: str | None = None
) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if config_hash is not None:
            f.write(f"# config_hash {config_hash}\n")
        f.write("window_start,window_end,n_pos,n_neg,auc\n")
        for w in windows:
            value = "" if w.auc is None else format(w.auc, ".17g")
            f.write(f"{w.window_start},{w.window_end},{w.n_pos},{w.n_neg},{value}\n")


def write_kde_csv(export: KdeExport, path: str | Path, config_hash: str | None = None) -> None:
    with open(path, "w", encoding="utf-8") as f:
        if config_hash is not None:
            f.write(f"# config_hash {config_hash}\n")
        f.write("x,y,density_pro,density_skeptic\n")
        for i, x in enumerate(export.xs):
            for j, y in enumerate(export.ys):
                f.write(
                    f"{format(x, '.17g')},{format(y, '.17g')},"
                    f"{format(export.density_pro[i, j], '.17g')},"
                    f"{format(export.density_skeptic[i, j], '.17g')}\n"
                )
