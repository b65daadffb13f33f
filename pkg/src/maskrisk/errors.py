"""Exception types raised across the package."""

from __future__ import annotations


class MaskRiskError(Exception):
    """Base class for all package errors."""


class InvalidSpec(MaskRiskError, ValueError):
    """A construction descriptor or config carries out-of-range parameters."""


class NonPositiveDefinite(MaskRiskError):
    pass


class MissingSpike(MaskRiskError):
    pass


class EigendecompositionUnavailable(MaskRiskError):
    pass


class EmptyTargetSet(MaskRiskError):
    """No row was selected as a reconstruction target."""


class DegenerateInput(MaskRiskError, ValueError):
    pass


class ZeroMatrix(MaskRiskError, ValueError):
    pass


class AtPhaseTransition(MaskRiskError, ValueError):
    """The isotropic formula is singular at gamma == p."""


class NoSolution(MaskRiskError):
    pass


class BracketExhausted(MaskRiskError):
    pass


class SingularConditioning(MaskRiskError):
    pass


class NotAnEigenvector(MaskRiskError, ValueError):
    pass


class UnknownPreset(MaskRiskError, KeyError):
    pass


class TooManySkips(MaskRiskError):
    """More than half of the repetitions at some masking ratio had no targets."""
