"""Exception hierarchy.

Two families: :class:`DomainError` for inputs outside an operation's
preconditions (CLI exit code 2) and :class:`NumericalFailure` for
algorithms that ran but could not certify a result (exit code 3).
"""


class AttractorLabError(Exception):
    """Base class for all package errors."""


class DomainError(AttractorLabError, ValueError):
    pass


class NumericalFailure(AttractorLabError, ArithmeticError):
    pass


# ray dynamics
class CriticalSlope(DomainError):
    pass


class CornerAbsorbed(DomainError):
    pass


class SectionUnavailable(DomainError):
    pass


# symbols and escape functions
class InvalidBump(DomainError):
    pass


class EmptyShell(DomainError):
    pass


class BlowUp(NumericalFailure):
    pass


# normal forms
class NoConvergence(NumericalFailure):
    pass


class NotConverged(NumericalFailure):
    def __init__(self, message, gap=None):
        super().__init__(message)
        self.gap = gap


class BasinEscape(NumericalFailure):
    pass


# quadrature and spectral densities
class QuadratureFailure(NumericalFailure):
    pass


class HolderViolation(DomainError):
    pass


class AtomTooClose(DomainError):
    pass


class DegenerateLevel(DomainError):
    pass


# lattice
class DegenerateResonance(DomainError):
    pass


# profiles
class ExtrapolationUnstable(NumericalFailure):
    pass


class GrowthViolation(DomainError):
    pass


# output
class EmptyData(DomainError):
    pass
