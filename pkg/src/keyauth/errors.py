"""Shared exception types."""


class KeyauthError(Exception):
    """Base class for all toolkit errors."""


class MalformedTrace(KeyauthError):
    """Raw event trace does not encode one valid typing of the fixed password."""


class InsufficientData(KeyauthError):
    """Too few rows to compute the requested statistic or fit a model."""


class SchemaError(KeyauthError):
    """CSV file does not match the benchmark schema."""


class DimensionMismatch(KeyauthError):
    """Vector length differs from the model's feature dimension."""


class DegenerateNorm(KeyauthError):
    """Normed score undefined: test or mean vector has zero norm."""


class SubjectTooSmall(KeyauthError):
    """A subject has too few samples for the requested split protocol."""


class NonConvergence(KeyauthError):
    """Iterative solver hit its iteration cap before reaching tolerance."""


class ShapeMismatch(KeyauthError):
    """Tensor shape incompatible with the layer it was fed to."""


class Divergence(KeyauthError):
    """Training loss became NaN or infinite."""
