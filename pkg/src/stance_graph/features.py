"""Per-tweet feature blocks: TF-IDF text, user label history, embeddings.

The three blocks concatenate in the fixed order text | history | embedding;
blocks excluded by the feature mask are zero-width, not zero-filled.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, field
from pathlib import Path
from typing import Iterable, Sequence

import numpy as np

from .embed import EmbeddingMatrix
from .errors import ParseError
from .ingest import StanceLabel, TweetRecord

TEXT = "text"
HISTORY = "history"
EMBEDDING = "embedding"
BLOCK_ORDER = (TEXT, HISTORY, EMBEDDING)
# Row naming follows the conventional ablation order (embedding before
# history), independent of the block memory layout above.
NAME_ORDER = (TEXT, EMBEDDING, HISTORY)
DEFAULT_MASKS = (
    (TEXT,),
    (TEXT, HISTORY),
    (TEXT, EMBEDDING),
    (TEXT, EMBEDDING, HISTORY),
)

HISTORY_WIDTH = 4

_TOKEN_RE = re.compile(r"[^\W_]+", re.UNICODE)


def tokenize(text: str) -> list[str]:
    """Lowercase alphanumeric runs of length >= 2.

    Whitespace tokens starting with "http" (URLs) or "@" (mentions) are
    removed before splitting on non-alphanumeric characters.
    """
    tokens: list[str] = []
    for chunk in text.split():
        low = chunk.lower()
        if low.startswith("http") or low.startswith("@"):
            continue
        tokens.extend(t for t in _TOKEN_RE.findall(low) if len(t) >= 2)
    return tokens


def normalize_mask(mask: Iterable[str]) -> tuple[str, ...]:
    """Canonical block order; text is mandatory in every mask."""
    chosen = set(mask)
    unknown = chosen - set(BLOCK_ORDER)
    if unknown:
        raise ValueError(f"unknown feature blocks: {sorted(unknown)}")
    if TEXT not in chosen:
        raise ValueError("the text block is required in every feature mask")
    return tuple(b for b in BLOCK_ORDER if b in chosen)


def mask_name(mask: Iterable[str]) -> str:
    chosen = set(normalize_mask(mask))
    return "+".join(b for b in NAME_ORDER if b in chosen)


@dataclass
class Vocabulary:
    """Top document-frequency terms from the training split.

    idf(t) = ln((1 + N) / (1 + df(t))) + 1 with N training documents.
    """

    terms: list[str]
    df: np.ndarray
    idf: np.ndarray
    n_docs: int
    index: dict[str, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.index = {t: i for i, t in enumerate(self.terms)}

    def __len__(self) -> int:
        return len(self.terms)


def fit_vocabulary(token_docs: Sequence[Sequence[str]], max_terms: int = 1000) -> Vocabulary:
    """Select the max_terms highest-df terms, ties broken lexicographically."""
    if len(token_docs) == 0:
        raise ValueError("cannot fit a vocabulary on an empty corpus")
    df_counts: dict[str, int] = {}
    for doc in token_docs:
        for term in set(doc):
            df_counts[term] = df_counts.get(term, 0) + 1
    ranked = sorted(df_counts, key=lambda t: (-df_counts[t], t))[:max_terms]
    df = np.array([df_counts[t] for t in ranked], dtype=np.int64)
    n_docs = len(token_docs)
    idf = np.log((1.0 + n_docs) / (1.0 + df)) + 1.0
    return Vocabulary(terms=ranked, df=df, idf=idf, n_docs=n_docs)


def tfidf_vector(tokens: Sequence[str], vocab: Vocabulary) -> np.ndarray:
    """Raw count x idf per vocabulary term, then L2-normalized.

    A document with no vocabulary term stays the zero vector.
    """
    vec = np.zeros(len(vocab), dtype=np.float64)
    for t in tokens:
        i = vocab.index.get(t)
        if i is not None:
            vec[i] += 1.0
    vec *= vocab.idf
    norm = np.linalg.norm(vec)
    if norm > 0:
        vec /= norm
    return vec


@dataclass(frozen=True)
class HistoryStats:
    """Counts over the user's strictly earlier labeled tweets."""

    n_pro: int
    n_skeptic: int
    skeptic_ratio: float
    has_history: int

    def as_array(self) -> np.ndarray:
        return np.array(
            [self.n_pro, self.n_skeptic, self.skeptic_ratio, self.has_history],
            dtype=np.float64,
        )


_EMPTY_HISTORY = HistoryStats(0, 0, 0.0, 0)


class HistoryIndex:
    """Per-user label history with the progressive-annotation rule.

    Train-split labels are always visible; test-split labels are visible
    only to strictly later test tweets. All lookups are strict in time:
    labels at the exact query timestamp are excluded.
    """

    def __init__(
        self,
        train: Iterable[tuple[TweetRecord, StanceLabel]],
        test: Iterable[tuple[TweetRecord, StanceLabel]] = (),
    ):
        per_user: dict[int, list[tuple[int, int, bool]]] = {}
        for items, is_test in ((train, False), (test, True)):
            for rec, label in items:
                per_user.setdefault(rec.user_id, []).append(
                    (rec.created_at, int(label), is_test)
                )
        self._users: dict[int, tuple[np.ndarray, np.ndarray, np.ndarray]] = {}
        for user, entries in per_user.items():
            entries.sort()
            times = np.array([e[0] for e in entries], dtype=np.int64)
            skeptic = np.array([e[1] for e in entries], dtype=np.int64)
            is_test = np.array([e[2] for e in entries], dtype=bool)
            # Cumulative counts let each lookup run in O(log n).
            cum_skeptic_all = np.cumsum(skeptic)
            cum_skeptic_train = np.cumsum(np.where(is_test, 0, skeptic))
            cum_total_train = np.cumsum(~is_test)
            self._users[user] = (
                times,
                np.stack([cum_skeptic_all, cum_skeptic_train, cum_total_train]),
                is_test,
            )

    def stats(self, user_id: int, t: int, include_test_history: bool) -> HistoryStats:
        entry = self._users.get(user_id)
        if entry is None:
            return _EMPTY_HISTORY
        times, cums, _ = entry
        k = int(np.searchsorted(times, t, side="left"))
        if k == 0:
            return _EMPTY_HISTORY
        if include_test_history:
            n_total = k
            n_skeptic = int(cums[0, k - 1])
        else:
            n_total = int(cums[2, k - 1])
            n_skeptic = int(cums[1, k - 1])
        n_pro = n_total - n_skeptic
        if n_total == 0:
            return _EMPTY_HISTORY
        return HistoryStats(n_pro, n_skeptic, n_skeptic / n_total, 1)


def history_features(
    user_id: int, t: int, index: HistoryIndex, include_test_history: bool = False
) -> HistoryStats:
    """Summary of the user's labeled tweets strictly earlier than t."""
    return index.stats(user_id, t, include_test_history)


@dataclass
class FeatureVector:
    x: np.ndarray
    label: StanceLabel
    tweet_id: int
    created_at: int


def block_widths(mask: Iterable[str], vocab_size: int, embedding_dim: int) -> dict[str, int]:
    mask = normalize_mask(mask)
    all_widths = {TEXT: vocab_size, HISTORY: HISTORY_WIDTH, EMBEDDING: embedding_dim}
    return {b: (all_widths[b] if b in mask else 0) for b in BLOCK_ORDER}


def assemble(
    record: TweetRecord,
    label: StanceLabel,
    vocab: Vocabulary,
    embeddings: EmbeddingMatrix | None,
    history_index: HistoryIndex | None,
    mask: Iterable[str] = DEFAULT_MASKS[-1],
    in_test: bool = False,
) -> FeatureVector:
    """Concatenate the masked blocks for one labeled tweet.

    Users missing from the embedding matrix contribute a zero embedding
    block; users with no visible history get the empty-history stats.
    """
    mask = normalize_mask(mask)
    parts = [tfidf_vector(tokenize(record.text), vocab)]
    if HISTORY in mask:
        if history_index is None:
            raise ValueError("history block requested without a history index")
        parts.append(
            history_features(record.user_id, record.created_at, history_index, in_test).as_array()
        )
    if EMBEDDING in mask:
        if embeddings is None:
            raise ValueError("embedding block requested without an embedding matrix")
        row = embeddings.row_for_user(record.user_id)
        if row is None:
            parts.append(np.zeros(embeddings.dim))
        else:
            # L2-normalize so the block is commensurate with the unit-norm
            # text block; users filtered out of the graph stay all-zero.
            norm = np.linalg.norm(row)
            parts.append(row / norm if norm > 0 else row)
    return FeatureVector(
        x=np.concatenate(parts),
        label=label,
        tweet_id=record.tweet_id,
        created_at=record.created_at,
    )


def assemble_matrix(
    items: Sequence[tuple[TweetRecord, StanceLabel]],
    vocab: Vocabulary,
    embeddings: EmbeddingMatrix | None,
    history_index: HistoryIndex | None,
    mask: Iterable[str] = DEFAULT_MASKS[-1],
    in_test: bool = False,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
    """(X, y, tweet_ids, times) over labeled tweets, rows in input order."""
    mask = normalize_mask(mask)
    widths = block_widths(mask, len(vocab), embeddings.dim if embeddings else 0)
    m = sum(widths.values())
    X = np.zeros((len(items), m), dtype=np.float64)
    y = np.zeros(len(items), dtype=np.int64)
    ids = np.zeros(len(items), dtype=np.int64)
    times = np.zeros(len(items), dtype=np.int64)
    for i, (rec, label) in enumerate(items):
        fv = assemble(rec, label, vocab, embeddings, history_index, mask, in_test)
        X[i] = fv.x
        y[i] = int(label)
        ids[i] = rec.tweet_id
        times[i] = rec.created_at
    return X, y, ids, times


def write_feature_matrix(
    path: str | Path,
    X: np.ndarray,
    y: np.ndarray,
    tweet_ids: np.ndarray,
    widths: dict[str, int],
    config_hash: str | None = None,
) -> None:
    """Header of the three block widths, then ``tweet_id label f_1 ... f_m``."""
    with open(path, "w", encoding="utf-8") as f:
        if config_hash is not None:
            f.write(f"# config_hash {config_hash}\n")
        f.write(f"{widths[TEXT]} {widths[HISTORY]} {widths[EMBEDDING]}\n")
        for i in range(X.shape[0]):
            values = " ".join(format(v, ".17g") for v in X[i])
            f.write(f"{int(tweet_ids[i])} {int(y[i])} {values}\n")


def read_feature_matrix(
    path: str | Path,
) -> tuple[np.ndarray, np.ndarray, np.ndarray, dict[str, int]]:
    """Inverse of write_feature_matrix: (X, y, tweet_ids, widths)."""
    widths = None
    ids, labels, rows = [], [], []
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if widths is None:
                if len(parts) != 3:
                    raise ParseError(f"line {line_no}: expected three block widths")
                w = [int(p) for p in parts]
                widths = {TEXT: w[0], HISTORY: w[1], EMBEDDING: w[2]}
                continue
            ids.append(int(parts[0]))
            labels.append(int(parts[1]))
            rows.append([float(v) for v in parts[2:]])
    if widths is None:
        raise ParseError("missing feature-matrix header line")
    m = sum(widths.values())
    X = np.array(rows, dtype=np.float64) if rows else np.zeros((0, m))
    if X.shape[1] != m:
        raise ParseError(f"feature rows have width {X.shape[1]}, header says {m}")
    return X, np.array(labels, dtype=np.int64), np.array(ids, dtype=np.int64), widths
