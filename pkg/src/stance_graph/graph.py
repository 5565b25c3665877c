"""Undirected weighted user-user reply network and degree filtering."""

from __future__ import annotations

from collections import deque
from pathlib import Path
from typing import Iterator

import numpy as np

from .errors import ParseError
from .ingest import Dataset, iter_reply_pairs


class ReplyGraph:
    """CSR-style undirected graph over dense node indices.

    ``node_ids[i]`` is the user_id behind node i; neighbor lists are sorted
    and contain no self loops. Edge weights count reply events between the
    pair, both directions summed. Instances are treated as immutable.
    """

    __slots__ = ("n_nodes", "node_ids", "indptr", "indices", "weights", "n_dangling_replies")

    def __init__(
        self,
        node_ids: np.ndarray,
        indptr: np.ndarray,
        indices: np.ndarray,
        weights: np.ndarray,
        n_dangling_replies: int = 0,
    ):
        self.node_ids = np.asarray(node_ids, dtype=np.int64)
        self.indptr = np.asarray(indptr, dtype=np.int64)
        self.indices = np.asarray(indices, dtype=np.int64)
        self.weights = np.asarray(weights, dtype=np.int64)
        self.n_nodes = int(self.node_ids.size)
        self.n_dangling_replies = n_dangling_replies

    @classmethod
    def from_pair_weights(
        cls,
        node_ids: np.ndarray,
        pair_weights: dict[tuple[int, int], int],
        n_dangling_replies: int = 0,
    ) -> "ReplyGraph":
        """Build from {(u, v): weight} with u < v as dense node indices."""
        n = len(node_ids)
        adj: list[list[tuple[int, int]]] = [[] for _ in range(n)]
        for (u, v), w in pair_weights.items():
            adj[u].append((v, w))
            adj[v].append((u, w))
        indptr = np.zeros(n + 1, dtype=np.int64)
        indices = np.empty(2 * len(pair_weights), dtype=np.int64)
        weights = np.empty(2 * len(pair_weights), dtype=np.int64)
        pos = 0
        for u in range(n):
            adj[u].sort()
            for v, w in adj[u]:
                indices[pos] = v
                weights[pos] = w
                pos += 1
            indptr[u + 1] = pos
        return cls(np.asarray(node_ids), indptr, indices, weights, n_dangling_replies)

    def neighbors(self, u: int) -> np.ndarray:
        return self.indices[self.indptr[u] : self.indptr[u + 1]]

    def neighbor_weights(self, u: int) -> np.ndarray:
        return self.weights[self.indptr[u] : self.indptr[u + 1]]

    def degrees(self) -> np.ndarray:
        """Distinct-neighbor count per node."""
        return np.diff(self.indptr)

    def degree(self, u: int) -> int:
        return int(self.indptr[u + 1] - self.indptr[u])

    @property
    def n_edges(self) -> int:
        return int(self.indices.size // 2)

    def edges(self) -> Iterator[tuple[int, int, int]]:
        """Yield (u, v, weight) once per unordered pair, u < v, sorted."""
        for u in range(self.n_nodes):
            for k in range(self.indptr[u], self.indptr[u + 1]):
                v = int(self.indices[k])
                if u < v:
                    yield u, v, int(self.weights[k])

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, ReplyGraph):
            return NotImplemented
        return (
            np.array_equal(self.node_ids, other.node_ids)
            and np.array_equal(self.indptr, other.indptr)
            and np.array_equal(self.indices, other.indices)
            and np.array_equal(self.weights, other.weights)
        )

    def __repr__(self) -> str:
        return f"ReplyGraph(n_nodes={self.n_nodes}, n_edges={self.n_edges})"


def build_graph(dataset: Dataset) -> ReplyGraph:
    """Aggregate reply events into the undirected user-user network.

    Every user appearing in the dataset becomes a node. Replies to missing
    parent tweets are dropped and counted; self replies produce no edge.
    """
    index = dataset.user_index
    node_ids = np.array(sorted(index), dtype=np.int64)
    by_id = {r.tweet_id: r for r in dataset.records}
    pair_weights: dict[tuple[int, int], int] = {}
    dangling = 0
    for r in dataset.records:
        if not r.is_reply:
            continue
        parent = by_id.get(r.parent_tweet_id)
        if parent is None:
            dangling += 1
            continue
        if parent.user_id == r.user_id:
            continue
        u, v = index[r.user_id], index[parent.user_id]
        key = (u, v) if u < v else (v, u)
        pair_weights[key] = pair_weights.get(key, 0) + 1
    return ReplyGraph.from_pair_weights(node_ids, pair_weights, n_dangling_replies=dangling)


def _induced_subgraph(g: ReplyGraph, keep: np.ndarray) -> ReplyGraph:
    """Subgraph on ``keep`` (bool mask), nodes re-indexed densely."""
    remap = np.full(g.n_nodes, -1, dtype=np.int64)
    kept_old = np.nonzero(keep)[0]
    remap[kept_old] = np.arange(kept_old.size)
    pair_weights: dict[tuple[int, int], int] = {}
    for u_old in kept_old:
        u = int(remap[u_old])
        lo, hi = g.indptr[u_old], g.indptr[u_old + 1]
        for k in range(lo, hi):
            v_old = int(g.indices[k])
            if v_old <= u_old or not keep[v_old]:
                continue
            pair_weights[(u, int(remap[v_old]))] = int(g.weights[k])
    return ReplyGraph.from_pair_weights(
        g.node_ids[kept_old], pair_weights, n_dangling_replies=g.n_dangling_replies
    )


def degree_filter(g: ReplyGraph, min_degree: int, mode: str = "single_pass") -> ReplyGraph:
    """Drop low-degree users.

    single_pass removes every node whose distinct-neighbor count in the
    input graph is below min_degree, then removes incident edges once.
    iterative repeats until fixpoint, yielding the min_degree-core.
    """
    if min_degree < 0:
        raise ValueError(f"min_degree must be >= 0, got {min_degree}")
    if mode not in ("single_pass", "iterative"):
        raise ValueError(f"unknown degree_filter mode {mode!r}")
    keep = g.degrees() >= min_degree
    out = _induced_subgraph(g, keep)
    if mode == "iterative":
        while out.n_nodes:
            keep = out.degrees() >= min_degree
            if keep.all():
                break
            out = _induced_subgraph(out, keep)
    return out


def connected_components(g: ReplyGraph) -> tuple[int, np.ndarray]:
    """(n_components, labels); components numbered by smallest member index."""
    labels = np.full(g.n_nodes, -1, dtype=np.int64)
    n_components = 0
    for start in range(g.n_nodes):
        if labels[start] != -1:
            continue
        labels[start] = n_components
        queue = deque([start])
        while queue:
            u = queue.popleft()
            for v in g.neighbors(u):
                if labels[v] == -1:
                    labels[v] = n_components
                    queue.append(int(v))
        n_components += 1
    return n_components, labels


def write_edge_list(g: ReplyGraph, path: str | Path, config_hash: str | None = None) -> None:
    """One line per edge: ``user_id_a user_id_b weight``, ids ascending."""
    with open(path, "w", encoding="utf-8") as f:
        if config_hash is not None:
            f.write(f"# config_hash {config_hash}\n")
        for u, v, w in g.edges():
            a, b = int(g.node_ids[u]), int(g.node_ids[v])
            if a > b:
                a, b = b, a
            f.write(f"{a} {b} {w}\n")


def load_edge_list(path: str | Path) -> ReplyGraph:
    """Rebuild a graph from an edge-list file; nodes are users seen in edges."""
    raw: list[tuple[int, int, int]] = []
    users: set[int] = set()
    with open(path, encoding="utf-8") as f:
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line or line.startswith("#"):
                continue
            parts = line.split()
            if len(parts) != 3:
                raise ParseError(f"line {line_no}: expected 'user_a user_b weight'")
            try:
                a, b, w = int(parts[0]), int(parts[1]), int(parts[2])
            except ValueError as exc:
                raise ParseError(f"line {line_no}: non-integer field") from exc
            if a == b:
                raise ParseError(f"line {line_no}: self loop {a}")
            if w < 1:
                raise ParseError(f"line {line_no}: weight must be >= 1")
            raw.append((a, b, w))
            users.update((a, b))
    node_ids = np.array(sorted(users), dtype=np.int64)
    index = {u: i for i, u in enumerate(node_ids.tolist())}
    pair_weights: dict[tuple[int, int], int] = {}
    for a, b, w in raw:
        u, v = index[a], index[b]
        key = (u, v) if u < v else (v, u)
        pair_weights[key] = pair_weights.get(key, 0) + w
    return ReplyGraph.from_pair_weights(node_ids, pair_weights)
