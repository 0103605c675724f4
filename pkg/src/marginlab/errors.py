"""Exception types shared across the package."""


class MarginlabError(Exception):
    """Base class for all marginlab-specific errors."""


class ConfigError(MarginlabError, ValueError):
    """Invalid configuration (bad counts, non-orthogonal rotation, ...)."""


class DataError(MarginlabError, ValueError):
    """Input data cannot support the requested operation."""


class FormatError(MarginlabError, ValueError):
    """Malformed or truncated file."""


class FitError(MarginlabError, ValueError):
    """A statistical fit is impossible or failed."""


class DegenerateVectorError(MarginlabError, ValueError):
    """A zero-norm vector reached a cosine-geometry computation."""


class DegenerateGeometryError(MarginlabError, ValueError):
    """The point configuration admits no meaningful answer (e.g. all equal)."""


class DivergedError(MarginlabError, RuntimeError):
    """Training produced a non-finite loss."""


class NumericalError(MarginlabError, RuntimeError):
    """A numerical routine failed (non-PD matrix, ...)."""


class UndefinedCorrelationError(MarginlabError, ValueError):
    """Rank correlation of a constant sequence is undefined."""
