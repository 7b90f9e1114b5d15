"""Exception types raised across the package."""


class InvalidInputError(ValueError):
    """Raised when arguments violate a documented precondition."""


class OracleError(RuntimeError):
    """Raised when the reference QP solver fails to certify a solution."""


class DegenerateTargetError(InvalidInputError):
    """Raised when targets have zero range and cannot be min-max scaled."""
