"""Exception types raised across the package."""


class AffourierError(Exception):
    """Base class for all package errors."""


class ValidationError(AffourierError):
    """Raw IFS data failed one or more constraints.

    ``violations`` holds ``(kind, message)`` pairs, one per violated
    constraint, where ``kind`` is one of ``NonContractive``, ``BadWeights``,
    ``Singular`` or ``DimensionMismatch``.
    """

    def __init__(self, violations):
        self.violations = list(violations)
        lines = [f"{kind}: {msg}" for kind, msg in self.violations]
        super().__init__("invalid system:\n  " + "\n  ".join(lines))

    @property
    def kinds(self):
        return sorted({kind for kind, _ in self.violations})


class SystemFormatError(AffourierError):
    """A system file is syntactically valid JSON but has the wrong shape."""


class IndexOutOfRange(AffourierError):
    pass


class BudgetExceeded(AffourierError):
    """A tree enumeration or recursion hit its node cap."""


class EmptyPool(AffourierError):
    pass


class InsufficientSamples(AffourierError):
    pass


class InsufficientAtoms(AffourierError):
    pass


class SingularMatrix(AffourierError):
    pass


class Inconclusive(AffourierError):
    """Cone detection did not stabilise within its iteration budget."""

    def __init__(self, message, report=None):
        super().__init__(message)
        self.report = report


class StepCapExceeded(AffourierError):
    pass


class NonNegativeLyapunov(AffourierError):
    pass


class DimensionNot2(AffourierError):
    pass


class NoConvergence(AffourierError):
    def __init__(self, message, spread=None):
        super().__init__(message)
        self.spread = spread
