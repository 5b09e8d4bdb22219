"""Driven dissipative qubit: Bloch dynamics, steady states and triality coordinates.

The qubit Hamiltonian is ``H = (omega * sz + g * sx) / 2`` and the Bloch vector
obeys

    dr/dt = h x r - gamma2 (x, y, 0) - gamma1 (z - z0) e_z,   h = (g, 0, omega)

with relaxation and dephasing acting in the fixed sigma_z (pointer) basis.
Units: hbar = 1, all rates and control parameters share one inverse-time unit.

Most functions come in two flavours: a scalar API on the small dataclasses
below, and an array API (``*_arrays``) that broadcasts over numpy inputs for
grid sweeps.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DegenerateCoherence,
    OutsideBall,
    SingularDrift,
    StepTooLarge,
    ValidationError,
)

BALL_HARD_LIMIT = 1e-9
COHERENCE_FLOOR = 1e-14
TRIALITY_TOL = 1e-12
STABILITY_FACTOR = 0.1


@dataclass(frozen=True)
class Controls:
    """A point (omega, g) in control space. Signed values are allowed."""

    omega: float
    g: float

    def __post_init__(self):
        if not (math.isfinite(self.omega) and math.isfinite(self.g)):
            raise ValidationError(f"controls must be finite, got {self}")


@dataclass(frozen=True)
class BathSpec:
    """Pointer-basis dissipation: longitudinal rate, transverse rate, target z.

    Only ``gamma1, gamma2 > 0`` and ``|z0| <= 1`` are enforced. The steady
    state stays inside the Bloch ball only when ``2 gamma2 >= gamma1`` (the
    complete-positivity condition of the Bloch equation); see
    :attr:`completely_positive`.
    """

    gamma1: float
    gamma2: float
    z0: float

    def __post_init__(self):
        if not self.gamma1 > 0:
            raise ValidationError(f"gamma1 > 0 required, got gamma1={self.gamma1}")
        if not self.gamma2 > 0:
            raise ValidationError(f"gamma2 > 0 required, got gamma2={self.gamma2}")
        if not abs(self.z0) <= 1:
            raise ValidationError(f"|z0| <= 1 required, got z0={self.z0}")
        if not (math.isfinite(self.gamma1) and math.isfinite(self.gamma2)):
            raise ValidationError("bath rates must be finite")

    @property
    def completely_positive(self) -> bool:
        return 2.0 * self.gamma2 >= self.gamma1


@dataclass(frozen=True)
class BlochVector:
    x: float
    y: float
    z: float

    @property
    def r(self) -> float:
        return math.sqrt(self.x * self.x + self.y * self.y + self.z * self.z)

    def as_array(self) -> np.ndarray:
        return np.array([self.x, self.y, self.z])

    @classmethod
    def from_array(cls, a) -> "BlochVector":
        return cls(float(a[0]), float(a[1]), float(a[2]))


@dataclass(frozen=True)
class TrialityPoint:
    """Complementarity coordinates (C, P, E) and the coherence phase phi.

    ``C**2 + P**2 + E**2 == 1`` is enforced to ``TRIALITY_TOL``.
    """

    C: float
    P: float
    E: float
    phi: float = 0.0

    def __post_init__(self):
        if self.C < 0 or self.E < 0:
            raise ValidationError(f"C and E must be non-negative, got {self}")
        defect = self.C**2 + self.P**2 + self.E**2 - 1.0
        if abs(defect) > TRIALITY_TOL:
            raise ValidationError(f"triality identity violated by {defect:.3e}")

    @property
    def R(self) -> float:
        return math.sqrt(max(0.0, 1.0 - self.E**2))


# ---------------------------------------------------------------------------
# Equation of motion


def bloch_rhs_arrays(x, y, z, omega, g, gamma1, gamma2, z0):
    """Broadcasting right-hand side of the Bloch equation."""
    dx = -omega * y - gamma2 * x
    dy = omega * x - g * z - gamma2 * y
    dz = g * y - gamma1 * (z - z0)
    return dx, dy, dz


def bloch_rhs(state: BlochVector, c: Controls, b: BathSpec) -> BlochVector:
    d = bloch_rhs_arrays(state.x, state.y, state.z, c.omega, c.g, b.gamma1, b.gamma2, b.z0)
    return BlochVector(*map(float, d))


def drift_matrix(c: Controls, b: BathSpec):
    """Return ``(M, a)`` such that ``dr/dt = M r + a``."""
    M = np.array(
        [
            [-b.gamma2, -c.omega, 0.0],
            [c.omega, -b.gamma2, -c.g],
            [0.0, c.g, -b.gamma1],
        ]
    )
    a = np.array([0.0, 0.0, b.gamma1 * b.z0])
    return M, a


# ---------------------------------------------------------------------------
# Steady state


def ness_arrays(omega, g, gamma1, gamma2, z0):
    """Closed-form steady state, broadcasting over all arguments."""
    D = gamma2 + omega**2 / gamma2 + g**2 / gamma1
    y = -g * z0 / D
    x = omega * g * z0 / (gamma2 * D)
    z = z0 * (gamma2 + omega**2 / gamma2) / D
    return x, y, z


def ness_closed_form(c: Controls, b: BathSpec) -> BlochVector:
    x, y, z = ness_arrays(c.omega, c.g, b.gamma1, b.gamma2, b.z0)
    return BlochVector(float(x), float(y), float(z))


def ness_linear_solve(c: Controls, b: BathSpec, max_cond: float = 1e13) -> BlochVector:
    """Steady state from a generic LU solve of ``M r = -a``.

    Independent of :func:`ness_closed_form`; used as its oracle.
    """
    M, a = drift_matrix(c, b)
    if not np.linalg.cond(M) < max_cond:
        raise SingularDrift(f"drift matrix is numerically singular for {c}, {b}")
    try:
        r = np.linalg.solve(M, -a)
    except np.linalg.LinAlgError as exc:
        raise SingularDrift(str(exc)) from exc
    return BlochVector.from_array(r)


def stability_bound(omega_max, g_max, gamma1, gamma2) -> float:
    """Largest RK4 step accepted for the given control and rate magnitudes."""
    scale = max(abs(omega_max), abs(g_max), gamma1, gamma2)
    return STABILITY_FACTOR / scale


def _rk4_autonomous(r, omega, g, gamma1, gamma2, z0, n_steps, h):
    def f(x, y, z):
        return bloch_rhs_arrays(x, y, z, omega, g, gamma1, gamma2, z0)

    x, y, z = r
    for _ in range(n_steps):
        k1 = f(x, y, z)
        k2 = f(x + 0.5 * h * k1[0], y + 0.5 * h * k1[1], z + 0.5 * h * k1[2])
        k3 = f(x + 0.5 * h * k2[0], y + 0.5 * h * k2[1], z + 0.5 * h * k2[2])
        k4 = f(x + h * k3[0], y + h * k3[1], z + h * k3[2])
        x = x + h / 6.0 * (k1[0] + 2 * k2[0] + 2 * k3[0] + k4[0])
        y = y + h / 6.0 * (k1[1] + 2 * k2[1] + 2 * k3[1] + k4[1])
        z = z + h / 6.0 * (k1[2] + 2 * k2[2] + 2 * k3[2] + k4[2])
    return x, y, z


def relax_arrays(x0, y0, z0_state, omega, g, gamma1, gamma2, z0, t_final, dt):
    """Batched fixed-step RK4 relaxation over arrays of parameters.

    The step is shortened so that an integer number of steps lands exactly on
    ``t_final``. Raises :class:`StepTooLarge` if ``dt`` violates the bound for
    any member of the batch.
    """
    if not dt > 0:
        raise ValidationError(f"dt > 0 required, got {dt}")
    if t_final < 0:
        raise ValidationError(f"t_final >= 0 required, got {t_final}")
    bound = stability_bound(
        np.max(np.abs(omega)), np.max(np.abs(g)), np.max(gamma1), np.max(gamma2)
    )
    if dt > bound:
        raise StepTooLarge(f"dt={dt} exceeds stability bound {bound:.4g}")
    n_steps = int(math.ceil(t_final / dt - 1e-9)) if t_final > 0 else 0
    h = t_final / n_steps if n_steps else 0.0
    arrs = [np.asarray(v, dtype=float) for v in (x0, y0, z0_state)]
    return _rk4_autonomous(arrs, omega, g, gamma1, gamma2, z0, n_steps, h)


def relax_to_ness(initial: BlochVector, c: Controls, b: BathSpec, t_final: float, dt: float) -> BlochVector:
    x, y, z = relax_arrays(
        initial.x, initial.y, initial.z, c.omega, c.g, b.gamma1, b.gamma2, b.z0, t_final, dt
    )
    return BlochVector(float(x), float(y), float(z))


# ---------------------------------------------------------------------------
# Coordinates


def triality_arrays(x, y, z):
    """Vectorized (C, P, E, phi); ``phi = 0`` where the coherence vanishes.

    Radii in ``(1, 1 + BALL_HARD_LIMIT]`` are projected onto the sphere with
    ``E = 0``; larger radii give NaN for the caller to reject.
    """
    x, y, z = np.broadcast_arrays(*(np.asarray(v, dtype=float) for v in (x, y, z)))
    C = np.hypot(x, y)
    r = np.hypot(C, z)
    over = r > 1.0
    scale = np.where(over, r, 1.0)
    C = C / scale
    P = z / scale
    E = np.where(over, 0.0, np.sqrt(np.clip(1.0 - (C * C + P * P), 0.0, None)))
    E = np.where(r > 1.0 + BALL_HARD_LIMIT, np.nan, E)
    phi = np.where(C < COHERENCE_FLOOR, 0.0, np.arctan2(y, x))
    # atan2 returns -pi on the negative real axis with y = -0.0; range is (-pi, pi]
    phi = np.where(phi == -np.pi, np.pi, phi)
    return C, P, E, phi


def to_triality(state: BlochVector) -> TrialityPoint:
    C, P, E, phi = (float(v) for v in triality_arrays(state.x, state.y, state.z))
    if math.isnan(E):
        raise OutsideBall(f"|r| = {state.r!r} exceeds the unit ball")
    return TrialityPoint(C, P, E, phi)


def phase_of_ness(c: Controls, b: BathSpec) -> float:
    """Coherence phase of the steady state, satisfying ``tan(phi) = -gamma2/omega``."""
    if c.g == 0 or b.z0 == 0:
        raise DegenerateCoherence("steady-state coherence vanishes (g = 0 or z0 = 0)")
    s = c.g * b.z0
    if c.omega == 0:
        return -math.copysign(math.pi / 2, s)
    # x ~ omega*g*z0/gamma2 and y ~ -g*z0, both scaled by the same positive 1/D
    return math.atan2(-s, c.omega * s / b.gamma2)


def cylindrical_rhs(t: TrialityPoint, c: Controls, b: BathSpec):
    """Rates (dC/dt, dphi/dt, dP/dt) in cylindrical form. Requires C > 0.

    Precession about +z turns the phase at ``+omega``, as follows from
    ``h x r`` with ``h = (g, 0, omega)``.
    """
    sphi, cphi = math.sin(t.phi), math.cos(t.phi)
    Cdot = -b.gamma2 * t.C - c.g * t.P * sphi
    phidot = c.omega - c.g * t.P / t.C * cphi
    Pdot = c.g * t.C * sphi - b.gamma1 * (t.P - b.z0)
    return Cdot, phidot, Pdot


def deficit_balance(C, P, b: BathSpec):
    """``E dE/dt = gamma2 C^2 + gamma1 P (P - z0)``; zero on the steady-state manifold."""
    return b.gamma2 * C * C + b.gamma1 * P * (P - b.z0)


# ---------------------------------------------------------------------------
# Aligned (Gibbs) limit


def gibbs_arrays(omega, g, beta):
    """Thermal Bloch vector ``-tanh(beta eps / 2) (g, 0, omega) / eps``."""
    omega = np.asarray(omega, dtype=float)
    g = np.asarray(g, dtype=float)
    eps = np.hypot(omega, g)
    safe = np.where(eps > 0, eps, 1.0)
    pol = np.where(eps > 0, np.tanh(0.5 * beta * eps), 0.0) / safe
    return -pol * g, np.zeros_like(pol * g), -pol * omega


def gibbs_state(c: Controls, beta: float) -> BlochVector:
    if not beta >= 0:
        raise ValidationError(f"beta >= 0 required, got {beta}")
    x, y, z = gibbs_arrays(c.omega, c.g, beta)
    return BlochVector(float(x), float(y), float(z))
