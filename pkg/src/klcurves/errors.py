"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the mathematical domain of an operation."""


class DimensionError(ValueError):
    """Array shapes or model dimensions do not agree."""


class SingularMatrixError(ValueError):
    """A matrix that must be positive definite failed the pivot test."""


class UnsupportedError(ValueError):
    """The requested (model, direction) combination has no implementation."""
