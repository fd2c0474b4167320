"""Exception hierarchy shared by all pipeline modules."""


class FloodscopeError(Exception):
    """Base class for fatal pipeline errors."""


class CorpusError(FloodscopeError):
    pass


class PrepError(FloodscopeError):
    pass


class TopicModelError(FloodscopeError):
    pass


class EmbeddingError(FloodscopeError):
    pass


class EmptyEmbeddingError(FloodscopeError):
    """Raised when a zero vector is scored against the reference corpus."""

    code = "empty-embedding"


class RelevanceError(FloodscopeError):
    pass


class ReportError(FloodscopeError):
    pass


class ConfigError(FloodscopeError):
    pass


class StageError(FloodscopeError):
    def __init__(self, stage, message):
        super().__init__(f"{stage}: {message}")
        self.stage = stage
