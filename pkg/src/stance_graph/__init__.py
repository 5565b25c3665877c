"""Stance classification of short posts by fusing TF-IDF text vectors,
user label-history statistics, and reply-network node embeddings."""

__version__ = "0.1.0"

from .ingest import Dataset, StanceLabel, TweetRecord  # noqa: F401
from .graph import ReplyGraph  # noqa: F401
from .embed import EmbeddingMatrix  # noqa: F401
from .pipeline import PipelineConfig, run_pipeline  # noqa: F401
