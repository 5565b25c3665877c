"""User embedding models over the reply graph.

Three interchangeable sources of per-user vectors: DeepWalk (window-based
skip-gram over random walks), Walklets (independent skip-gram models on
fixed walk offsets, concatenated), and one-hot community indicators from
label propagation.
"""

from __future__ import annotations

from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .errors import ConfigError, ParseError
from .graph import ReplyGraph
from .skipgram import SkipGramParams, train_skipgram
from .walks import WalkCorpus, extract_pairs, generate_walks

MODEL_DEEPWALK = "deepwalk"
MODEL_WALKLETS = "walklets"
MODEL_COMMUNITY = "community_indicator"


@dataclass
class EmbeddingMatrix:
    """Dense per-user vectors; row i belongs to user node_ids[i]."""

    vectors: np.ndarray
    model_tag: str
    node_ids: np.ndarray
    _row_by_user: dict[int, int] = field(init=False, repr=False, compare=False)

    def __post_init__(self) -> None:
        self.node_ids = np.asarray(self.node_ids, dtype=np.int64)
        self._row_by_user = {int(u): i for i, u in enumerate(self.node_ids)}

    @property
    def dim(self) -> int:
        return int(self.vectors.shape[1])

    def row_for_user(self, user_id: int) -> np.ndarray | None:
        """The user's vector, or None when the user was filtered out."""
        i = self._row_by_user.get(int(user_id))
        return None if i is None else self.vectors[i]


def _walk_pairs_window(corpus: WalkCorpus, window: int) -> np.ndarray:
    blocks = [extract_pairs(corpus, k) for k in range(1, window + 1)]
    return np.concatenate(blocks, axis=0)


def deepwalk(
    g: ReplyGraph,
    n_walks: int = 10,
    walk_length: int = 80,
    window: int = 5,
    params: SkipGramParams | None = None,
    seed: int = 0,
    weighted: bool = False,
    n_threads: int = 1,
) -> EmbeddingMatrix:
    """Skip-gram embedding over all walk offsets up to ``window``."""
    if window < 1:
        raise ConfigError(f"window must be >= 1, got {window}")
    params = params or SkipGramParams()
    if g.n_nodes == 0:
        return EmbeddingMatrix(
            np.zeros((0, params.dim)), MODEL_DEEPWALK, np.empty(0, dtype=np.int64)
        )
    corpus = generate_walks(g, n_walks, walk_length, seed, weighted=weighted, n_threads=n_threads)
    pairs = _walk_pairs_window(corpus, window)
    model = train_skipgram(pairs, g.n_nodes, params, seed=seed + 1)
    return EmbeddingMatrix(model.input_vectors, MODEL_DEEPWALK, g.node_ids)


def walklets(
    g: ReplyGraph,
    scales: tuple[int, ...] = (1, 2, 3, 4),
    n_walks: int = 10,
    walk_length: int = 80,
    params: SkipGramParams | None = None,
    seed: int = 0,
    weighted: bool = False,
    n_threads: int = 1,
) -> EmbeddingMatrix:
    """Multi-scale embedding: one skip-gram model per walk offset.

    params.dim is the total width; each scale trains an independent model
    of width dim / len(scales) on pairs at exactly that offset, and the
    blocks are concatenated in ascending scale order. The scale-k model is
    seeded with seed + k, so the scale-1 block reproduces
    deepwalk(window=1) bit for bit under shared walks and seeds.
    """
    params = params or SkipGramParams()
    scales = tuple(sorted(set(int(s) for s in scales)))
    if not scales or scales[0] < 1:
        raise ConfigError(f"scales must be positive integers, got {scales}")
    if params.dim % len(scales) != 0:
        raise ConfigError(
            f"dim {params.dim} is not divisible by the number of scales {len(scales)}"
        )
    d_sub = params.dim // len(scales)
    if g.n_nodes == 0:
        return EmbeddingMatrix(
            np.zeros((0, params.dim)), MODEL_WALKLETS, np.empty(0, dtype=np.int64)
        )
    corpus = generate_walks(g, n_walks, walk_length, seed, weighted=weighted, n_threads=n_threads)
    sub_params = replace(params, dim=d_sub)

    def train_scale(k: int) -> np.ndarray:
        pairs = extract_pairs(corpus, k)
        model = train_skipgram(pairs, g.n_nodes, sub_params, seed=seed + k)
        return model.input_vectors

    if n_threads > 1:
        with ThreadPoolExecutor(max_workers=n_threads) as pool:
            blocks = list(pool.map(train_scale, scales))
    else:
        blocks = [train_scale(k) for k in scales]
    return EmbeddingMatrix(np.concatenate(blocks, axis=1), MODEL_WALKLETS, g.node_ids)


@dataclass
class CommunityAssignment:
    """Per-node community ids, numbered by smallest member node index."""

    labels: np.ndarray
    n_communities: int
    node_ids: np.ndarray


def label_propagation(g: ReplyGraph, max_iters: int = 100, seed: int = 0) -> CommunityAssignment:
    """Asynchronous label propagation.

    Every node starts in its own community; nodes update in a seeded
    random order, adopting the most frequent label among their neighbors
    with ties broken toward the smallest label id. Stops at a fixpoint or
    after max_iters sweeps.
    """
    if max_iters < 1:
        raise ConfigError(f"max_iters must be >= 1, got {max_iters}")
    n = g.n_nodes
    labels = np.arange(n, dtype=np.int64)
    rng = np.random.default_rng(seed)
    for _ in range(max_iters):
        changed = False
        for v in rng.permutation(n):
            nbrs = g.neighbors(v)
            if nbrs.size == 0:
                continue
            counts = np.bincount(labels[nbrs])
            best = int(np.argmax(counts))  # argmax takes the smallest label on ties
            if best != labels[v]:
                labels[v] = best
                changed = True
        if not changed:
            break
    # Renumber compactly by smallest member node index.
    mapping: dict[int, int] = {}
    for v in range(n):
        if int(labels[v]) not in mapping:
            mapping[int(labels[v])] = len(mapping)
    compact = np.array([mapping[int(l)] for l in labels], dtype=np.int64)
    return CommunityAssignment(labels=compact, n_communities=len(mapping), node_ids=g.node_ids)


def community_features(assignment: CommunityAssignment, dim: int = 128) -> EmbeddingMatrix:
    """One-hot membership over the dim - 1 largest communities plus "other".

    Column order follows community size descending (ties toward the
    smaller community id); nodes outside the top dim - 1 communities set
    the final "other" column, so every row sums to exactly 1.
    """
    if dim < 2:
        raise ConfigError(f"dim must be >= 2, got {dim}")
    labels = assignment.labels
    n = labels.size
    sizes = np.bincount(labels, minlength=assignment.n_communities)
    order = sorted(range(assignment.n_communities), key=lambda c: (-int(sizes[c]), c))
    column = {c: min(rank, dim - 1) for rank, c in enumerate(order)}
    vectors = np.zeros((n, dim), dtype=np.float64)
    for v in range(n):
        vectors[v, column[int(labels[v])]] = 1.0
    return EmbeddingMatrix(vectors, MODEL_COMMUNITY, assignment.node_ids)


def save_embeddings(
    emb: EmbeddingMatrix, path: str | Path, config_hash: str | None = None
) -> None:
    """Text format: ``n_nodes d`` then one ``user_id f_1 ... f_d`` line per node."""
    with open(path, "w", encoding="utf-8") as f:
        if config_hash is not None:
            f.write(f"# config_hash {config_hash}\n")
        f.write(f"# model {emb.model_tag}\n")
        n, d = emb.vectors.shape
        f.write(f"{n} {d}\n")
        for i in range(n):
            values = " ".join(format(x, ".17g") for x in emb.vectors[i])
            f.write(f"{int(emb.node_ids[i])} {values}\n")


def load_embeddings(path: str | Path) -> EmbeddingMatrix:
    model_tag = "unknown"
    with open(path, encoding="utf-8") as f:
        header = None
        rows = []
        ids = []
        for line_no, line in enumerate(f, 1):
            line = line.strip()
            if not line:
                continue
            if line.startswith("#"):
                parts = line[1:].split()
                if len(parts) == 2 and parts[0] == "model":
                    model_tag = parts[1]
                continue
            if header is None:
                header = line.split()
                if len(header) != 2:
                    raise ParseError(f"line {line_no}: expected 'n_nodes d' header")
                continue
            parts = line.split()
            ids.append(int(parts[0]))
            rows.append([float(x) for x in parts[1:]])
    if header is None:
        raise ParseError("missing embedding header line")
    n, d = int(header[0]), int(header[1])
    if any(len(row) != d for row in rows):
        raise ParseError(f"embedding rows must have {d} values")
    vectors = np.array(rows, dtype=np.float64) if rows else np.zeros((0, d))
    if vectors.shape != (n, d):
        raise ParseError(f"embedding shape {vectors.shape} does not match header ({n}, {d})")
    return EmbeddingMatrix(vectors, model_tag, np.array(ids, dtype=np.int64))
