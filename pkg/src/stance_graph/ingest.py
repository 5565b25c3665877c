"""Tweet dataset parsing, validation, and stance-label normalization.

Input format: newline-delimited JSON objects with fields
``tweet_id``, ``user_id``, ``created_at`` (epoch seconds), ``text``,
optional ``parent_tweet_id`` (absent or null for seed tweets) and
optional ``label`` (one of "pro", "skeptic", "anti", "irrelevant").
Lines starting with ``#`` are treated as comments and skipped.
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from enum import IntEnum
from pathlib import Path
from typing import IO, Iterable, Iterator

from .errors import ParseError

RAW_LABELS = ("pro", "skeptic", "anti", "irrelevant")

_REQUIRED = ("tweet_id", "user_id", "created_at", "text")


class StanceLabel(IntEnum):
    """Binary stance target; the skeptic class absorbs anti-vax labels."""

    PRO_VAX = 0
    VAX_SKEPTIC = 1

    @staticmethod
    def from_raw(raw: str) -> "StanceLabel | None":
        """Map a raw annotation onto the binary scheme.

        "anti" merges into VAX_SKEPTIC; "irrelevant" yields None and is
        excluded from classification. Any other string is rejected.
        """
        if raw == "pro":
            return StanceLabel.PRO_VAX
        if raw in ("skeptic", "anti"):
            return StanceLabel.VAX_SKEPTIC
        if raw == "irrelevant":
            return None
        raise ValueError(f"unknown label {raw!r}")


@dataclass(frozen=True)
class TweetRecord:
    """One post. parent_tweet_id is None for seed (non-reply) tweets."""

    tweet_id: int
    user_id: int
    created_at: int
    text: str
    parent_tweet_id: int | None = None
    raw_label: str | None = None

    def __post_init__(self) -> None:
        if self.created_at <= 0:
            raise ValueError(f"tweet {self.tweet_id}: created_at must be > 0")
        if self.parent_tweet_id is not None and self.parent_tweet_id == self.tweet_id:
            raise ValueError(f"tweet {self.tweet_id}: replies to itself")
        if self.raw_label is not None and self.raw_label not in RAW_LABELS:
            raise ValueError(f"tweet {self.tweet_id}: unknown label {self.raw_label!r}")

    @property
    def is_reply(self) -> bool:
        return self.parent_tweet_id is not None


class Dataset:
    """Timestamp-ordered tweet collection with a dense user index.

    Records are sorted by (created_at, tweet_id). ``labeled_subset`` holds
    exactly the records whose raw label maps onto a binary stance, in the
    same order. ``user_index`` maps user_id to a dense index over the
    sorted distinct user ids.
    """

    __slots__ = ("records", "user_index", "labeled_subset", "n_skipped_lines")

    def __init__(self, records: Iterable[TweetRecord], n_skipped_lines: int = 0):
        recs = sorted(records, key=lambda r: (r.created_at, r.tweet_id))
        seen: set[int] = set()
        for r in recs:
            if r.tweet_id in seen:
                raise ParseError(f"duplicate tweet_id {r.tweet_id}")
            seen.add(r.tweet_id)
        self.records: tuple[TweetRecord, ...] = tuple(recs)
        users = sorted({r.user_id for r in recs})
        self.user_index: dict[int, int] = {u: i for i, u in enumerate(users)}
        labeled = []
        for r in recs:
            if r.raw_label is None:
                continue
            lab = StanceLabel.from_raw(r.raw_label)
            if lab is not None:
                labeled.append((r, lab))
        self.labeled_subset: tuple[tuple[TweetRecord, StanceLabel], ...] = tuple(labeled)
        self.n_skipped_lines = n_skipped_lines

    @property
    def n_users(self) -> int:
        return len(self.user_index)

    def __len__(self) -> int:
        return len(self.records)

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, Dataset):
            return NotImplemented
        return self.records == other.records

    def __repr__(self) -> str:
        return (
            f"Dataset(records={len(self.records)}, users={self.n_users}, "
            f"labeled={len(self.labeled_subset)})"
        )


def _field(obj: dict, key: str, line_no: int):
    if key not in obj or obj[key] is None:
        raise ParseError(f"line {line_no}: missing required field {key!r}")
    return obj[key]


def _as_id(value, key: str, line_no: int) -> int:
    if isinstance(value, bool) or not isinstance(value, int):
        raise ParseError(f"line {line_no}: field {key!r} must be an integer")
    return value


def _record_from_obj(obj: dict, line_no: int) -> TweetRecord:
    tweet_id = _as_id(_field(obj, "tweet_id", line_no), "tweet_id", line_no)
    user_id = _as_id(_field(obj, "user_id", line_no), "user_id", line_no)
    created_at = _as_id(_field(obj, "created_at", line_no), "created_at", line_no)
    text = _field(obj, "text", line_no)
    if not isinstance(text, str):
        raise ParseError(f"line {line_no}: field 'text' must be a string")
    parent = obj.get("parent_tweet_id")
    if parent is not None:
        parent = _as_id(parent, "parent_tweet_id", line_no)
    label = obj.get("label")
    if label is not None and not isinstance(label, str):
        raise ParseError(f"line {line_no}: field 'label' must be a string")
    try:
        return TweetRecord(
            tweet_id=tweet_id,
            user_id=user_id,
            created_at=created_at,
            text=text,
            parent_tweet_id=parent,
            raw_label=label,
        )
    except ValueError as exc:
        raise ParseError(f"line {line_no}: {exc}") from exc


def parse_jsonl(lines: Iterable[str] | IO[str], skip_bad_lines: bool = False) -> Dataset:
    """Parse newline-delimited records into a Dataset.

    In strict mode (default) any malformed line aborts with a ParseError
    naming the line number. With ``skip_bad_lines`` malformed lines are
    counted and skipped instead; duplicate tweet ids and unknown label
    strings stay hard errors in both modes.
    """
    records: list[TweetRecord] = []
    seen: dict[int, int] = {}
    skipped = 0
    for line_no, line in enumerate(lines, 1):
        line = line.strip()
        if not line or line.startswith("#"):
            continue
        try:
            obj = json.loads(line)
            if not isinstance(obj, dict):
                raise ParseError(f"line {line_no}: record must be an object")
            rec = _record_from_obj(obj, line_no)
        except ParseError as exc:
            if "unknown label" in str(exc) or not skip_bad_lines:
                raise
            skipped += 1
            continue
        except json.JSONDecodeError as exc:
            if not skip_bad_lines:
                raise ParseError(f"line {line_no}: invalid JSON ({exc})") from exc
            skipped += 1
            continue
        if rec.tweet_id in seen:
            raise ParseError(
                f"line {line_no}: duplicate tweet_id {rec.tweet_id} "
                f"(first seen on line {seen[rec.tweet_id]})"
            )
        seen[rec.tweet_id] = line_no
        records.append(rec)
    return Dataset(records, n_skipped_lines=skipped)


def load_jsonl(path: str | Path, skip_bad_lines: bool = False) -> Dataset:
    with open(path, encoding="utf-8") as f:
        return parse_jsonl(f, skip_bad_lines=skip_bad_lines)


def record_to_json(r: TweetRecord) -> str:
    obj: dict = {
        "tweet_id": r.tweet_id,
        "user_id": r.user_id,
        "created_at": r.created_at,
        "text": r.text,
    }
    if r.parent_tweet_id is not None:
        obj["parent_tweet_id"] = r.parent_tweet_id
    if r.raw_label is not None:
        obj["label"] = r.raw_label
    return json.dumps(obj, ensure_ascii=False, sort_keys=True)


def write_jsonl(dataset: Dataset, path: str | Path, config_hash: str | None = None) -> None:
    """Serialize in canonical record order; re-parsing yields an equal Dataset."""
    with open(path, "w", encoding="utf-8") as f:
        if config_hash is not None:
            f.write(f"# config_hash {config_hash}\n")
        for r in dataset.records:
            f.write(record_to_json(r) + "\n")


def class_balance(dataset: Dataset) -> tuple[int, int, float]:
    """(count_pro, count_skeptic, frac_pro) over the labeled subset."""
    n_pro = sum(1 for _, lab in dataset.labeled_subset if lab is StanceLabel.PRO_VAX)
    n_skeptic = len(dataset.labeled_subset) - n_pro
    total = n_pro + n_skeptic
    frac = n_pro / total if total else 0.0
    return n_pro, n_skeptic, frac


def _thread_roots(dataset: Dataset) -> dict[int, int]:
    """Map each tweet_id to its thread root id (deepest reachable ancestor).

    For replies whose ancestor chain leaves the dataset, the root is the
    first missing ancestor id, so dangling threads group together too.
    """
    by_id = {r.tweet_id: r for r in dataset.records}
    roots: dict[int, int] = {}

    def resolve(tid: int) -> int:
        chain = []
        cur = tid
        while cur not in roots:
            rec = by_id.get(cur)
            if rec is None or rec.parent_tweet_id is None:
                roots[cur] = cur
                break
            chain.append(cur)
            cur = rec.parent_tweet_id
            if cur in chain:  # defensive: parent cycles collapse onto the first revisited id
                roots[cur] = cur
                break
        root = roots[cur] if cur in roots else roots[chain[-1]]
        for t in chain:
            roots[t] = root
        return roots[tid]

    for r in dataset.records:
        resolve(r.tweet_id)
    return roots


def filter_min_thread_replies(dataset: Dataset, min_replies: int) -> Dataset:
    """Keep only threads whose root accumulated at least min_replies replies.

    Mirrors the collection-time threshold on seed tweets; off by default in
    the pipeline. Reply counts are recursive over the whole thread.
    """
    roots = _thread_roots(dataset)
    reply_count: dict[int, int] = {}
    for r in dataset.records:
        if r.is_reply:
            root = roots[r.tweet_id]
            reply_count[root] = reply_count.get(root, 0) + 1
    kept = [r for r in dataset.records if reply_count.get(roots[r.tweet_id], 0) >= min_replies]
    return Dataset(kept, n_skipped_lines=dataset.n_skipped_lines)


def iter_reply_pairs(dataset: Dataset) -> Iterator[tuple[int, int]]:
    """Yield (replier_user_id, parent_author_user_id) for in-dataset replies."""
    by_id = {r.tweet_id: r for r in dataset.records}
    for r in dataset.records:
        if not r.is_reply:
            continue
        parent = by_id.get(r.parent_tweet_id)
        if parent is None:
            continue
        yield r.user_id, parent.user_id
