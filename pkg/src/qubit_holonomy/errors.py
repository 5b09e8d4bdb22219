"""Exception types raised by the library.

Validation failures derive from ``ValueError`` so callers can catch them
generically; numerical failures derive from ``ArithmeticError``.
"""


class ValidationError(ValueError):
    """An input violates a documented invariant."""


class SingularDrift(ArithmeticError):
    """The 3x3 Bloch drift matrix is numerically singular."""


class StepTooLarge(ValidationError):
    """Integrator step exceeds the stability bound."""


class OutsideBall(ValidationError):
    """Bloch vector lies outside the unit ball beyond numerical slack."""


class DegenerateCoherence(ValidationError):
    """Coherence phase is undefined because the steady-state coherence vanishes."""


class PredictabilityPole(ValidationError):
    """Phase-resolved curvature evaluated on the P = 0 pole."""


class ZeroPolarization(ValidationError):
    """Target polarization z0 = 0 appears in a denominator."""


class TrialityMismatch(ArithmeticError):
    """The two algebraically equal bracket forms disagree."""


class OpenPath(ValidationError):
    """A path that must be closed is not."""


class UnsupportedRegion(ValidationError):
    """Surface integral requested over a region with no interior quadrature."""


class NotSupported(NotImplementedError):
    """Requested variant has no dynamical model."""


class ConvergenceFailure(ArithmeticError):
    """Adiabatic study did not show the dynamical work approaching the holonomy."""
