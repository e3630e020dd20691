"""Exception hierarchy shared by all modules."""


class BochnerError(Exception):
    """Base class for every error raised by this package."""


class InvalidGeometry(BochnerError):
    pass


class ShapeMismatch(BochnerError):
    pass


class InvalidInput(BochnerError):
    pass


class InvalidLoop(BochnerError):
    pass


class UsageError(BochnerError):
    pass


class TooLarge(BochnerError):
    pass


class SolverFailure(BochnerError):
    pass


class MatchingFailure(BochnerError):
    pass


class StructurallyZero(BochnerError):
    """The skew-endomorphism space is trivial (rank-1 bundle)."""


class UnsupportedStructureGroup(BochnerError):
    pass


class StructureViolation(BochnerError):
    """An SO(2) realification invariant failed; indicates a bug upstream."""
