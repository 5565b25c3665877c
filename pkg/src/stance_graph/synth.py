"""Synthetic tweet dataset generator with planted community structure.

Desk-scale stand-in for a private crawl: users belong to one of two
stochastic-block-model communities, stance correlates with community,
reply targets follow the block-model friendship graph, and tweet text is
drawn from one of two overlapping word-frequency distributions.

Ground-truth construction rules (tests rely on these):
  - users are ids 1..n_users; the first round(n_users * pro_fraction)
    users form community 0 (the pro-leaning block), the rest community 1;
  - a user's stance equals their community stance with probability
    stance_correlation, otherwise it is redrawn from the global prior;
  - each tweet carries its author's stance, flipped with probability
    stance_flip_fraction; text and label both follow the tweet stance;
  - vocabulary is "w0000".."wNNNN" split in two halves; a tweet's words
    fall into the tweet's own half with probability 1 - overlap/2;
  - every generated quantity is a pure function of (config, seed).
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np

from .errors import ConfigError
from .ingest import Dataset, TweetRecord

DEFAULT_START_TIME = 1_609_459_200  # 2021-01-01 00:00:00 UTC


@dataclass(frozen=True)
class SyntheticConfig:
    n_users: int = 1000
    p_in: float = 0.02
    p_out: float = 0.002
    stance_correlation: float = 0.85
    pro_fraction: float = 0.72
    vocab_size: int = 150
    vocab_overlap: float = 0.5
    tweets_per_user: int = 4
    label_fraction: float = 0.5
    irrelevant_fraction: float = 0.0
    stance_flip_fraction: float = 0.0
    reply_fraction: float = 0.8
    mean_words_per_tweet: float = 3.0
    duration_days: float = 60.0
    start_time: int = DEFAULT_START_TIME

    def validate(self) -> list[str]:
        errors = []
        for name in (
            "p_in",
            "p_out",
            "stance_correlation",
            "pro_fraction",
            "vocab_overlap",
            "label_fraction",
            "irrelevant_fraction",
            "stance_flip_fraction",
            "reply_fraction",
        ):
            value = getattr(self, name)
            if not 0.0 <= value <= 1.0:
                errors.append(f"{name} must be in [0, 1], got {value}")
        if self.n_users < 2:
            errors.append(f"n_users must be >= 2, got {self.n_users}")
        if self.vocab_size < 2:
            errors.append(f"vocab_size must be >= 2, got {self.vocab_size}")
        if self.tweets_per_user < 1:
            errors.append(f"tweets_per_user must be >= 1, got {self.tweets_per_user}")
        if self.mean_words_per_tweet < 1.0:
            errors.append(
                f"mean_words_per_tweet must be >= 1, got {self.mean_words_per_tweet}"
            )
        if self.duration_days <= 0:
            errors.append(f"duration_days must be > 0, got {self.duration_days}")
        if self.start_time <= 0:
            errors.append(f"start_time must be > 0, got {self.start_time}")
        return errors

    def as_dict(self) -> dict:
        return asdict(self)


def _sbm_adjacency(
    rng: np.random.Generator, community: np.ndarray, p_in: float, p_out: float
) -> list[np.ndarray]:
    """Sample an undirected block-model friendship graph, one row at a time."""
    n = community.size
    neighbors: list[list[int]] = [[] for _ in range(n)]
    for i in range(n - 1):
        probs = np.where(community[i + 1 :] == community[i], p_in, p_out)
        hits = np.nonzero(rng.random(n - 1 - i) < probs)[0]
        for j in hits:
            k = i + 1 + int(j)
            neighbors[i].append(k)
            neighbors[k].append(i)
    return [np.array(sorted(ns), dtype=np.int64) for ns in neighbors]


def generate_synthetic(cfg: SyntheticConfig, seed: int) -> Dataset:
    """Generate a Dataset; byte-identical for a fixed (cfg, seed)."""
    errors = cfg.validate()
    if errors:
        raise ConfigError("; ".join(errors))
    rng = np.random.default_rng(seed)
    n = cfg.n_users

    n_pro_community = int(round(n * cfg.pro_fraction))
    community = np.zeros(n, dtype=np.int64)
    community[n_pro_community:] = 1

    # Stance: community-aligned with probability stance_correlation, else
    # redrawn from the global prior, so E[frac_pro] == pro_fraction.
    aligned = rng.random(n) < cfg.stance_correlation
    fresh_pro = rng.random(n) < cfg.pro_fraction
    stance_pro = np.where(aligned, community == 0, fresh_pro)

    neighbors = _sbm_adjacency(rng, community, cfg.p_in, cfg.p_out)

    n_tweets = n * cfg.tweets_per_user
    authors = np.repeat(np.arange(n), cfg.tweets_per_user)
    rng.shuffle(authors)
    span = int(cfg.duration_days * 86400)
    times = np.sort(rng.integers(0, span, size=n_tweets)) + cfg.start_time

    word_counts = 1 + rng.poisson(cfg.mean_words_per_tweet - 1.0, size=n_tweets)
    flips = rng.random(n_tweets) < cfg.stance_flip_fraction
    half = cfg.vocab_size // 2
    half_sizes = (half, cfg.vocab_size - half)
    half_starts = (0, half)

    # Replies target an earlier tweet of a friendship-graph neighbor, so
    # reply edges concentrate inside communities when p_in >> p_out.
    earlier_tweets: list[list[int]] = [[] for _ in range(n)]
    tweet_ids = np.arange(1, n_tweets + 1)
    tweet_pro = stance_pro[authors] ^ flips
    parents: list[int | None] = []
    texts: list[str] = []
    for j in range(n_tweets):
        a = int(authors[j])
        parent: int | None = None
        if rng.random() < cfg.reply_fraction:
            eligible = [v for v in neighbors[a] if earlier_tweets[v]]
            if eligible:
                v = eligible[int(rng.integers(len(eligible)))]
                parent = earlier_tweets[v][int(rng.integers(len(earlier_tweets[v])))]
        parents.append(parent)

        own = 0 if tweet_pro[j] else 1
        draws = rng.random((int(word_counts[j]), 2))
        words = []
        for flip, pick in draws:
            side = 1 - own if flip < cfg.vocab_overlap / 2.0 else own
            idx = half_starts[side] + int(pick * half_sizes[side])
            words.append(f"w{idx:04d}")
        texts.append(" ".join(words))
        earlier_tweets[a].append(int(tweet_ids[j]))

    n_labeled = int(round(cfg.label_fraction * n_tweets))
    labeled_idx = np.sort(rng.choice(n_tweets, size=n_labeled, replace=False))
    labels: dict[int, str] = {}
    for j in labeled_idx:
        j = int(j)
        if cfg.irrelevant_fraction > 0 and rng.random() < cfg.irrelevant_fraction:
            labels[j] = "irrelevant"
        elif tweet_pro[j]:
            labels[j] = "pro"
        else:
            labels[j] = "anti" if rng.random() < 1.0 / 3.0 else "skeptic"

    records = [
        TweetRecord(
            tweet_id=int(tweet_ids[j]),
            user_id=int(authors[j]) + 1,
            created_at=int(times[j]),
            text=texts[j],
            parent_tweet_id=parents[j],
            raw_label=labels.get(j),
        )
        for j in range(n_tweets)
    ]
    return Dataset(records)
