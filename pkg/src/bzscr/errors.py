"""Exception types raised across the package."""


class BZSCRError(Exception):
    """Base class for all package errors."""


class ValidationError(BZSCRError, ValueError):
    """An input violates a type invariant."""


class DegenerateEmbeddingError(ValidationError):
    """Cosine divergence is undefined because all embeddings are parallel."""


class InvalidPathMatrixError(ValidationError):
    pass


class DegenerateTargetSetError(ValidationError):
    """Fewer than two target classes, so the covariance term is vacuous."""


class LoadError(ValidationError):
    """A file on disk could not be parsed or failed validation.

    ``path``, ``row`` and ``col`` locate the offending entry when known
    (rows and columns are 0-based positions in the file).
    """

    def __init__(self, message, path=None, row=None, col=None):
        self.path = path
        self.row = row
        self.col = col
        where = []
        if path is not None:
            where.append(str(path))
        if row is not None:
            where.append(f"row {row}")
        if col is not None:
            where.append(f"column {col}")
        if where:
            message = f"{', '.join(where)}: {message}"
        super().__init__(message)


class DimensionMismatchError(LoadError):
    pass


class ZeroDualMatrixError(BZSCRError):
    """The weak-learner matrix is exactly zero; no model violates the dual."""


class TrivialProblemError(BZSCRError):
    """Training cannot start because the first dual matrix carries no signal."""
