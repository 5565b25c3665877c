"""Truncated random-walk corpus generation and offset pair extraction."""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .graph import ReplyGraph


@dataclass
class WalkCorpus:
    """Random walks over dense node indices.

    Exactly walks_per_node walks start at every node, grouped by start
    node in ascending order. A walk has walk_length entries unless it
    starts at an isolated node, in which case it has length 1.
    """

    walks: list[np.ndarray] = field(repr=False)
    walk_length: int
    walks_per_node: int
    rng_seed: int
    _grouped: dict[int, np.ndarray] | None = field(
        default=None, init=False, repr=False, compare=False
    )

    def __len__(self) -> int:
        return len(self.walks)

    def grouped_by_length(self) -> dict[int, np.ndarray]:
        """Walks stacked into one matrix per length, cached across scales."""
        if self._grouped is None:
            groups: dict[int, list[np.ndarray]] = {}
            for w in self.walks:
                groups.setdefault(len(w), []).append(w)
            self._grouped = {L: np.stack(ws) for L, ws in sorted(groups.items())}
        return self._grouped


def _walks_from_node(
    g: ReplyGraph, node: int, n_walks: int, length: int, seed: int, weighted: bool
) -> list[np.ndarray]:
    # Per-node generator keyed on (seed, node): serial and partitioned
    # parallel generation produce the identical corpus.
    rng = np.random.default_rng([seed, node])
    nbrs = g.neighbors(node)
    if nbrs.size == 0:
        return [np.array([node], dtype=np.int64) for _ in range(n_walks)]
    cumw = None
    if weighted:
        cumw_all = {node: np.cumsum(g.neighbor_weights(node))}
    out = []
    for _ in range(n_walks):
        walk = np.empty(length, dtype=np.int64)
        walk[0] = node
        cur = node
        cur_nbrs = nbrs
        if weighted:
            cumw = cumw_all[node]
        draws = rng.random(length - 1)
        for t in range(1, length):
            if weighted:
                k = int(np.searchsorted(cumw, draws[t - 1] * cumw[-1], side="right"))
                k = min(k, cur_nbrs.size - 1)
            else:
                k = int(draws[t - 1] * cur_nbrs.size)
            cur = int(cur_nbrs[k])
            walk[t] = cur
            cur_nbrs = g.neighbors(cur)
            if weighted:
                cumw = cumw_all.get(cur)
                if cumw is None:
                    cumw = np.cumsum(g.neighbor_weights(cur))
                    cumw_all[cur] = cumw
        out.append(walk)
    return out


def generate_walks(
    g: ReplyGraph,
    n_walks: int,
    walk_length: int,
    seed: int,
    weighted: bool = False,
    n_threads: int = 1,
) -> WalkCorpus:
    """n_walks truncated walks per node; next step uniform over neighbors,
    or proportional to edge weight when ``weighted``."""
    if n_walks < 1:
        raise ValueError(f"n_walks must be >= 1, got {n_walks}")
    if walk_length < 1:
        raise ValueError(f"walk_length must be >= 1, got {walk_length}")

    def run(node: int) -> list[np.ndarray]:
        return _walks_from_node(g, node, n_walks, walk_length, seed, weighted)

    if n_threads > 1 and g.n_nodes > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            per_node = list(pool.map(run, range(g.n_nodes)))
    else:
        per_node = [run(node) for node in range(g.n_nodes)]
    walks = [w for group in per_node for w in group]
    return WalkCorpus(
        walks=walks, walk_length=walk_length, walks_per_node=n_walks, rng_seed=seed
    )


def extract_pairs(corpus: WalkCorpus | list[np.ndarray], scale: int) -> np.ndarray:
    """(target, context) node pairs at walk offset ``scale``.

    For every walk w and position i with i + scale < len(w), both
    (w[i], w[i+scale]) and (w[i+scale], w[i]) are emitted, so the pair
    multiset is symmetric. Scale 1 recovers adjacent-pair training.
    Returns an (n_pairs, 2) int array; order is deterministic for a given
    corpus (walks grouped by length, ascending).
    """
    if scale < 1:
        raise ValueError(f"scale must be >= 1, got {scale}")
    if isinstance(corpus, WalkCorpus):
        grouped = corpus.grouped_by_length()
    else:
        groups: dict[int, list[np.ndarray]] = {}
        for w in corpus:
            groups.setdefault(len(w), []).append(w)
        grouped = {L: np.stack(ws) for L, ws in sorted(groups.items())}
    blocks = []
    for length in sorted(grouped):
        span = length - scale
        if span <= 0:
            continue
        mat = grouped[length]
        fwd_t = mat[:, :span]
        fwd_c = mat[:, scale:]
        block = np.empty((mat.shape[0], span, 2, 2), dtype=np.int64)
        block[:, :, 0, 0] = fwd_t
        block[:, :, 0, 1] = fwd_c
        block[:, :, 1, 0] = fwd_c
        block[:, :, 1, 1] = fwd_t
        blocks.append(block.reshape(-1, 2))
    if not blocks:
        return np.empty((0, 2), dtype=np.int64)
    return np.concatenate(blocks, axis=0)
