"""Work connection on control space and its curvature.

The quasistatic work one-form is ``A_i = Tr[rho_ss dH/d lambda_i]``. For
``H = (omega sz + g sx)/2`` this gives ``A_omega = z/2`` and ``A_g = x/2``.
Its curvature ``F = dA_g/domega - dA_omega/dg`` is available three ways:

* finite differences of the connection (Richardson-extrapolated),
* the analytic mixed partials of the closed-form steady state,
* the phase-resolved expression in triality variables ``(C, P, E, phi)``.

The aligned (Gibbs) dissipator gives an exact connection ``A = grad F_th``
with zero curvature.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass

import numpy as np
from scipy.optimize import brentq

from .bloch import (
    BathSpec,
    Controls,
    TrialityPoint,
    gibbs_arrays,
    ness_arrays,
    ness_closed_form,
    to_triality,
)
from .errors import PredictabilityPole, TrialityMismatch, ValidationError, ZeroPolarization

FD_STEP = 1e-4
POLE_TOL = 1e-12
BRACKET_TOL = 1e-14


class CurvatureMethod(str, enum.Enum):
    FINITE_DIFFERENCE = "FiniteDifference"
    CLOSED_FORM = "ClosedForm"
    PHASE_RESOLVED = "PhaseResolved"


@dataclass(frozen=True)
class ConnectionValue:
    a_omega: float
    a_g: float


@dataclass(frozen=True)
class CurvatureSample:
    f_omega_g: float
    location: Controls
    method: CurvatureMethod


# ---------------------------------------------------------------------------
# Connections


def connection_pointer_arrays(omega, g, b: BathSpec):
    x, _, z = ness_arrays(omega, g, b.gamma1, b.gamma2, b.z0)
    return 0.5 * z, 0.5 * x


def connection_gibbs_arrays(omega, g, beta):
    x, _, z = gibbs_arrays(omega, g, beta)
    return 0.5 * z, 0.5 * x


def connection_pointer(c: Controls, b: BathSpec) -> ConnectionValue:
    a_w, a_g = connection_pointer_arrays(c.omega, c.g, b)
    return ConnectionValue(float(a_w), float(a_g))


def connection_gibbs(c: Controls, beta: float) -> ConnectionValue:
    if not beta >= 0:
        raise ValidationError(f"beta >= 0 required, got {beta}")
    a_w, a_g = connection_gibbs_arrays(c.omega, c.g, beta)
    return ConnectionValue(float(a_w), float(a_g))


def free_energy_gibbs(c: Controls, beta: float) -> float:
    """Thermal free energy ``-ln(2 cosh(beta eps / 2)) / beta``.

    Written as ``-eps/2 - ln(1 + exp(-beta eps)) / beta`` so that large beta
    (including ``inf``) does not overflow.
    """
    if not beta > 0:
        raise ValidationError(f"beta > 0 required, got {beta}")
    eps = math.hypot(c.omega, c.g)
    if math.isinf(beta):
        return -0.5 * eps
    return -0.5 * eps - math.log1p(math.exp(-beta * eps)) / beta


# ---------------------------------------------------------------------------
# Curvature


def fd_curvature_arrays(connection, omega, g, h):
    """Richardson-combined central differences of ``connection(omega, g)``.

    ``h`` is the absolute step (scalar or broadcastable array).
    """

    def central(step):
        a_g_plus = connection(omega + step, g)[1]
        a_g_minus = connection(omega - step, g)[1]
        a_w_plus = connection(omega, g + step)[0]
        a_w_minus = connection(omega, g - step)[0]
        return ((a_g_plus - a_g_minus) - (a_w_plus - a_w_minus)) / (2.0 * step)

    coarse = central(h)
    fine = central(0.5 * h)
    return (4.0 * fine - coarse) / 3.0


def _pointer_step(omega, g, b: BathSpec, step):
    return step * np.maximum(np.maximum(np.abs(omega), np.abs(g)), b.gamma2)


def curvature_fd_arrays(omega, g, b: BathSpec, step: float = FD_STEP):
    omega = np.asarray(omega, dtype=float)
    g = np.asarray(g, dtype=float)
    h = _pointer_step(omega, g, b, step)
    return fd_curvature_arrays(lambda w, gg: connection_pointer_arrays(w, gg, b), omega, g, h)


def curvature_fd(c: Controls, b: BathSpec, step: float = FD_STEP) -> CurvatureSample:
    if not step > 0:
        raise ValidationError(f"step > 0 required, got {step}")
    f = curvature_fd_arrays(c.omega, c.g, b, step)
    return CurvatureSample(float(f), c, CurvatureMethod.FINITE_DIFFERENCE)


def curvature_gibbs_fd(c: Controls, beta: float, step: float = FD_STEP) -> float:
    """Finite-difference curvature of the Gibbs connection (zero up to rounding)."""
    h = step * max(abs(c.omega), abs(c.g), 1.0)
    f = fd_curvature_arrays(
        lambda w, gg: connection_gibbs_arrays(w, gg, beta), c.omega, c.g, h
    )
    return float(f)


def curvature_closed_arrays(omega, g, b: BathSpec):
    g1, g2, z0 = b.gamma1, b.gamma2, b.z0
    D = g2 + omega**2 / g2 + g**2 / g1
    u = omega**2 / g2**2
    return g * z0 / (2.0 * D**2) * (1.0 - u + g**2 / (g1 * g2) + 2.0 * g2 * (1.0 + u) / g1)


def curvature_closed_form(c: Controls, b: BathSpec) -> CurvatureSample:
    f = curvature_closed_arrays(c.omega, c.g, b)
    return CurvatureSample(float(f), c, CurvatureMethod.CLOSED_FORM)


def _brackets(C, P, E, phi, b: BathSpec):
    """Both printed bracket forms; they coincide on the triality sphere."""
    cos2 = np.cos(2.0 * phi)
    plain = b.gamma2 * C**2 + 2.0 * b.gamma2 * P**2 - b.gamma1 * P**2 * cos2
    sphere = b.gamma2 * (1.0 - E**2 + P**2) - b.gamma1 * P**2 * cos2
    return plain, sphere


def _checked_bracket(C, P, E, phi, b: BathSpec):
    plain, sphere = _brackets(C, P, E, phi, b)
    tol = BRACKET_TOL * max(1.0, b.gamma1, b.gamma2)
    gap = np.max(np.abs(plain - sphere)) if np.size(plain) else 0.0
    if gap > tol:
        raise TrialityMismatch(f"bracket forms differ by {gap:.3e} (> {tol:.1e})")
    return plain


def regularized_curvature_arrays(C, P, E, phi, b: BathSpec):
    """``P * F`` written without the division by P; finite at P = 0."""
    if b.z0 == 0:
        raise ZeroPolarization("regularized curvature has a 1/z0 prefactor")
    bracket = _checked_bracket(C, P, E, phi, b)
    return -C * np.sin(phi) / (2.0 * b.gamma1 * b.gamma2 * b.z0) * bracket


def phase_resolved_arrays(C, P, E, phi, b: BathSpec):
    if np.any(np.abs(P) < POLE_TOL):
        raise PredictabilityPole("phase-resolved curvature has a 1/P pole")
    return regularized_curvature_arrays(C, P, E, phi, b) / P


def curvature_phase_resolved(t: TrialityPoint, b: BathSpec) -> float:
    return float(phase_resolved_arrays(t.C, t.P, t.E, t.phi, b))


def curvature_phase_resolved_sample(c: Controls, b: BathSpec) -> CurvatureSample:
    """Phase-resolved curvature at the steady state reached at controls ``c``."""
    t = to_triality(ness_closed_form(c, b))
    return CurvatureSample(curvature_phase_resolved(t, b), c, CurvatureMethod.PHASE_RESOLVED)


def regularized_curvature(t: TrialityPoint, b: BathSpec) -> float:
    return float(regularized_curvature_arrays(t.C, t.P, t.E, t.phi, b))


# ---------------------------------------------------------------------------
# Weak mismatch


def weak_mismatch_bracket(C, P, b: BathSpec):
    """Sign-controlling bracket ``gamma2 C^2 + (2 gamma2 - gamma1) P^2``."""
    return b.gamma2 * C**2 + (2.0 * b.gamma2 - b.gamma1) * P**2


def weak_mismatch_coefficient(C, P, b: BathSpec):
    """dF/dphi at phi = 0 with (C, P) held fixed."""
    if b.z0 == 0:
        raise ZeroPolarization("weak-mismatch coefficient has a 1/z0 prefactor")
    if np.any(np.abs(P) < POLE_TOL):
        raise PredictabilityPole("weak-mismatch coefficient has a 1/P pole")
    return -C / (2.0 * P * b.gamma1 * b.gamma2 * b.z0) * weak_mismatch_bracket(C, P, b)


def sign_change_ratio(b: BathSpec, xtol: float = 1e-15):
    """Locate the nodal line of the weak-mismatch bracket by root finding.

    Searches along the unit (C, P) quarter circle ``C = cos a, P = sin a`` and
    returns ``P^2 / C^2`` at the root, or ``None`` when the bracket keeps one
    sign (``gamma1 <= 2 gamma2``).
    """

    def f(a):
        return weak_mismatch_bracket(math.cos(a), math.sin(a), b)

    lo, hi = 0.0, 0.5 * math.pi
    if f(lo) * f(hi) > 0:
        return None
    a = brentq(f, lo, hi, xtol=xtol, rtol=4 * np.finfo(float).eps, maxiter=200)
    return math.tan(a) ** 2


def predicted_sign_change_ratio(b: BathSpec):
    """Analytic nodal ratio ``gamma2 / (gamma1 - 2 gamma2)``; None if absent."""
    excess = b.gamma1 - 2.0 * b.gamma2
    if excess <= 0:
        return None
    return b.gamma2 / excess
