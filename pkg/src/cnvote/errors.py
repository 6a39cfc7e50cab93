"""Exception types shared across the toolkit."""


class CnvoteError(Exception):
    """Base class for all toolkit errors."""


class CorpusShapeError(CnvoteError):
    """Parallel inputs disagree in length."""


class InputValidationError(CnvoteError, ValueError):
    """Input text violates a token-level constraint."""


class DomainError(CnvoteError, ValueError):
    """An operation was called outside its domain (empty reference, ...)."""


class FormatError(CnvoteError):
    """A serialized artifact could not be parsed."""


class ConfigurationError(CnvoteError):
    """Dimensions or settings are inconsistent."""


class ConsistencyError(CnvoteError):
    """Two related artifacts do not line up (e.g. decisions vs. slots)."""
