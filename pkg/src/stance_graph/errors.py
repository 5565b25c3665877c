"""Exception types shared across the package."""


class StanceGraphError(Exception):
    """Base class for all stance-graph errors."""


class ParseError(StanceGraphError):
    """Malformed or inconsistent input records."""


class ConfigError(StanceGraphError):
    """Invalid configuration values."""


class TrainingError(StanceGraphError):
    """Model training cannot proceed or diverged."""


class UndefinedMetricError(StanceGraphError):
    """Metric is undefined for the given inputs (e.g. single-class AUC)."""


class StageError(StanceGraphError):
    """Wraps a failure inside a named pipeline stage."""

    def __init__(self, stage: str, cause: BaseException):
        super().__init__(f"stage '{stage}' failed: {cause}")
        self.stage = stage
        self.cause = cause
