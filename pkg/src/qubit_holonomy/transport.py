"""Closed control-space loops, holonomic work and its Stokes check.

Line integrals of the work connection use Gauss-Legendre panels on analytic
paths (rectangle edges, ellipse arcs) and Richardson-extrapolated composite
trapezoid on polylines. Surface integrals of the curvature use composite
Simpson on rectangles and polar-mapped Gauss-Legendre on ellipses.
Counter-clockwise loops in the (omega, g) plane give the positive Stokes sign.

``dynamic_work`` realizes a loop as a time-dependent drive and integrates the
Bloch equation together with the work ``W = int Tr[rho dH/dt] dt``.
"""

from __future__ import annotations

import enum
import math
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import simpson

from .bloch import BathSpec, BlochVector, ness_arrays, stability_bound
from .errors import (
    ConvergenceFailure,
    NotSupported,
    OpenPath,
    StepTooLarge,
    UnsupportedRegion,
    ValidationError,
)
from .geometry import (
    connection_gibbs_arrays,
    connection_pointer_arrays,
    curvature_closed_arrays,
)

GAUSS_ORDER = 32
DEFAULT_SAMPLES_PER_UNIT = 64.0
DEFAULT_FLUX_GRID = (32, 32)
MIN_FLUX_GRID = 16


class PathKind(str, enum.Enum):
    RECTANGLE = "rect"
    ELLIPSE = "ellipse"
    POLYLINE = "polyline"


class Orientation(str, enum.Enum):
    CCW = "ccw"
    CW = "cw"

    @property
    def sign(self) -> float:
        return 1.0 if self is Orientation.CCW else -1.0


class Schedule(str, enum.Enum):
    UNIFORM_SPEED = "uniform"
    SMOOTHSTEP = "smoothstep"


@dataclass(frozen=True)
class ControlPath:
    """A closed loop in the (omega, g) plane.

    Build with :meth:`rectangle`, :meth:`ellipse` or :meth:`polyline`.
    Polylines are traversed in vertex order for CCW and reversed for CW; they
    count as closed only if the last vertex repeats the first exactly.
    """

    kind: PathKind
    center: tuple = (0.0, 0.0)
    size: tuple = (0.0, 0.0)
    vertices: tuple = ()
    orientation: Orientation = Orientation.CCW
    samples_per_unit: float = DEFAULT_SAMPLES_PER_UNIT

    def __post_init__(self):
        object.__setattr__(self, "kind", PathKind(self.kind))
        object.__setattr__(self, "orientation", Orientation(self.orientation))
        if self.kind is PathKind.POLYLINE:
            if len(self.vertices) < 2:
                raise ValidationError("polyline needs at least two vertices")
        elif not (self.size[0] > 0 and self.size[1] > 0):
            raise ValidationError(f"{self.kind.value} sizes must be strictly positive, got {self.size}")
        if not self.samples_per_unit > 0:
            raise ValidationError("samples_per_unit must be positive")

    @classmethod
    def rectangle(cls, center, half_widths, orientation="ccw", samples_per_unit=DEFAULT_SAMPLES_PER_UNIT):
        return cls(PathKind.RECTANGLE, tuple(map(float, center)), tuple(map(float, half_widths)),
                   orientation=orientation, samples_per_unit=samples_per_unit)

    @classmethod
    def ellipse(cls, center, semi_axes, orientation="ccw", samples_per_unit=DEFAULT_SAMPLES_PER_UNIT):
        return cls(PathKind.ELLIPSE, tuple(map(float, center)), tuple(map(float, semi_axes)),
                   orientation=orientation, samples_per_unit=samples_per_unit)

    @classmethod
    def polyline(cls, vertices, orientation="ccw", samples_per_unit=DEFAULT_SAMPLES_PER_UNIT):
        verts = tuple((float(w), float(g)) for w, g in vertices)
        return cls(PathKind.POLYLINE, vertices=verts, orientation=orientation,
                   samples_per_unit=samples_per_unit)

    def reversed(self) -> "ControlPath":
        flip = Orientation.CW if self.orientation is Orientation.CCW else Orientation.CCW
        return ControlPath(self.kind, self.center, self.size, self.vertices, flip, self.samples_per_unit)

    def with_density(self, samples_per_unit: float) -> "ControlPath":
        return ControlPath(self.kind, self.center, self.size, self.vertices, self.orientation, samples_per_unit)

    @property
    def is_closed(self) -> bool:
        if self.kind is PathKind.POLYLINE:
            return self.vertices[0] == self.vertices[-1]
        return True

    def corner_points(self):
        """Ordered vertices of a piecewise-linear loop (first repeated at the end)."""
        if self.kind is PathKind.RECTANGLE:
            (w0, g0), (dw, dg) = self.center, self.size
            pts = [(w0 - dw, g0 - dg), (w0 + dw, g0 - dg), (w0 + dw, g0 + dg),
                   (w0 - dw, g0 + dg), (w0 - dw, g0 - dg)]
        elif self.kind is PathKind.POLYLINE:
            pts = list(self.vertices)
        else:
            raise ValidationError("ellipse has no corners")
        if self.orientation is Orientation.CW:
            pts = pts[::-1]
        return np.array(pts, dtype=float)

    @property
    def area(self) -> float:
        if self.kind is PathKind.RECTANGLE:
            return 4.0 * self.size[0] * self.size[1]
        if self.kind is PathKind.ELLIPSE:
            return math.pi * self.size[0] * self.size[1]
        raise UnsupportedRegion("area is defined only for rectangles and ellipses")

    def pieces(self):
        """Smooth pieces as ``(position, velocity, length)`` on a unit parameter."""
        if self.kind is PathKind.ELLIPSE:
            (w0, g0), (a, b) = self.center, self.size
            sgn = self.orientation.sign

            def pos(t):
                th = 2.0 * math.pi * t * sgn
                return w0 + a * np.cos(th), g0 + b * np.sin(th)

            def vel(t):
                th = 2.0 * math.pi * t * sgn
                k = 2.0 * math.pi * sgn
                return -a * k * np.sin(th), b * k * np.cos(th)

            # Ramanujan's perimeter approximation; only sets node counts
            h = ((a - b) / (a + b)) ** 2
            length = math.pi * (a + b) * (1 + 3 * h / (10 + math.sqrt(4 - 3 * h)))
            return [(pos, vel, length)]
        out = []
        pts = self.corner_points()
        for p0, p1 in zip(pts[:-1], pts[1:]):
            d = p1 - p0

            def pos(t, p0=p0, d=d):
                return p0[0] + t * d[0], p0[1] + t * d[1]

            def vel(t, d=d):
                t = np.asarray(t, dtype=float)
                return np.full_like(t, d[0]), np.full_like(t, d[1])

            out.append((pos, vel, float(np.hypot(*d))))
        return out

    @property
    def length(self) -> float:
        return sum(p[2] for p in self.pieces())


@dataclass(frozen=True)
class WorkResult:
    w_cyc: float
    quadrature_nodes: int
    estimated_error: float


@dataclass(frozen=True)
class DriveProtocol:
    path: ControlPath
    period: float
    schedule: Schedule = Schedule.SMOOTHSTEP

    def __post_init__(self):
        if not self.period > 0:
            raise ValidationError(f"period > 0 required, got {self.period}")
        object.__setattr__(self, "schedule", Schedule(self.schedule))

    def controls_at(self, t):
        """(omega, g, d omega/dt, dg/dt) at times ``t`` (periodic in the period)."""
        t = np.asarray(t, dtype=float)
        s = np.mod(t / self.period, 1.0)
        # keep the exact end of a period on the closing point rather than wrapping to 0
        s = np.where((s == 0.0) & (t > 0), 1.0, s)
        pieces = self.path.pieces()
        lengths = np.array([p[2] for p in pieces])
        total = lengths.sum()
        frac = lengths / total if total > 0 else np.full(len(pieces), 1.0 / len(pieces))
        edges = np.concatenate([[0.0], np.cumsum(frac)])
        edges[-1] = 1.0
        idx = np.clip(np.searchsorted(edges, s, side="right") - 1, 0, len(pieces) - 1)
        w = np.empty_like(s)
        g = np.empty_like(s)
        wd = np.empty_like(s)
        gd = np.empty_like(s)
        for k, (pos, vel, _) in enumerate(pieces):
            sel = idx == k
            if not np.any(sel):
                continue
            tau = (s[sel] - edges[k]) / frac[k] if frac[k] > 0 else np.zeros(np.count_nonzero(sel))
            if self.schedule is Schedule.SMOOTHSTEP:
                sig = tau * tau * (3.0 - 2.0 * tau)
                dsig = 6.0 * tau * (1.0 - tau)
            else:
                sig = tau
                dsig = np.ones_like(tau)
            pw, pg = pos(sig)
            vw, vg = vel(sig)
            rate = dsig / (frac[k] * self.period) if frac[k] > 0 else np.zeros_like(dsig)
            w[sel], g[sel] = pw, pg
            wd[sel], gd[sel] = vw * rate, vg * rate
        return w, g, wd, gd


# ---------------------------------------------------------------------------
# Line integrals


def _gauss_panels(n_panels):
    xi, wt = np.polynomial.legendre.leggauss(GAUSS_ORDER)
    k = np.arange(n_panels)[:, None]
    t = (k + 0.5 * (xi[None, :] + 1.0)) / n_panels
    return t.ravel(), np.tile(0.5 * wt / n_panels, n_panels)


def _gauss_loop(path: ControlPath, connection, refine: int):
    total = 0.0
    nodes = 0
    for pos, vel, length in path.pieces():
        n_panels = refine * max(1, math.ceil(length * path.samples_per_unit / GAUSS_ORDER))
        t, wt = _gauss_panels(n_panels)
        w, g = pos(t)
        dw, dg = vel(t)
        a_w, a_g = connection(w, g)
        total += float(np.sum(wt * (a_w * dw + a_g * dg)))
        nodes += t.size
    return total, nodes


def _trapezoid_loop(path: ControlPath, connection, refine: int):
    total = 0.0
    nodes = 0
    for pos, vel, length in path.pieces():
        n = refine * max(1, math.ceil(length * path.samples_per_unit))
        t = np.linspace(0.0, 1.0, n + 1)
        w, g = pos(t)
        dw, dg = vel(t)
        a_w, a_g = connection(w, g)
        f = a_w * dw + a_g * dg
        total += float((np.sum(f) - 0.5 * (f[0] + f[-1])) / n)
        nodes += t.size
    return total, nodes


def line_integral(path: ControlPath, connection) -> WorkResult:
    """Integrate a one-form ``connection(omega, g) -> (A_omega, A_g)`` around ``path``.

    The error estimate comes from repeating the quadrature at half the step.
    """
    if not path.is_closed:
        raise OpenPath("path must end where it starts")
    if path.kind is PathKind.POLYLINE:
        coarse, _ = _trapezoid_loop(path, connection, 1)
        fine, nodes = _trapezoid_loop(path, connection, 2)
        value = (4.0 * fine - coarse) / 3.0
        err = abs(fine - coarse) / 3.0
    else:
        coarse, _ = _gauss_loop(path, connection, 1)
        value, nodes = _gauss_loop(path, connection, 2)
        err = abs(value - coarse)
    return WorkResult(value, nodes, err)


def loop_work_quasistatic(path: ControlPath, b: BathSpec) -> WorkResult:
    return line_integral(path, lambda w, g: connection_pointer_arrays(w, g, b))


def loop_work_gibbs(path: ControlPath, beta: float) -> WorkResult:
    if not beta >= 0:
        raise ValidationError(f"beta >= 0 required, got {beta}")
    return line_integral(path, lambda w, g: connection_gibbs_arrays(w, g, beta))


def _abs_line_scale(path: ControlPath, connection) -> float:
    """``oint |A_omega| |domega| + |A_g| |dg|``; cannot cancel around the loop."""
    total = 0.0
    for pos, vel, length in path.pieces():
        n_panels = max(1, math.ceil(length * path.samples_per_unit / GAUSS_ORDER))
        t, wt = _gauss_panels(n_panels)
        a_w, a_g = connection(*pos(t))
        dw, dg = vel(t)
        total += float(np.sum(wt * (np.abs(a_w * dw) + np.abs(a_g * dg))))
    return total


# ---------------------------------------------------------------------------
# Surface integrals


def surface_integral(path: ControlPath, curvature, grid=DEFAULT_FLUX_GRID) -> float:
    """Integrate ``curvature(omega, g)`` over the region bounded by ``path``.

    For a rectangle ``grid`` is the number of Simpson intervals along (omega, g)
    (rounded up to even); for an ellipse it is the number of Gauss nodes in
    (radius, angle).
    """
    n1, n2 = int(grid[0]), int(grid[1])
    if n1 < MIN_FLUX_GRID or n2 < MIN_FLUX_GRID:
        raise ValidationError(f"flux grid must be at least ({MIN_FLUX_GRID}, {MIN_FLUX_GRID}), got {grid}")
    if path.kind is PathKind.RECTANGLE:
        n1 += n1 % 2
        n2 += n2 % 2
        (w0, g0), (dw, dg) = path.center, path.size
        w = np.linspace(w0 - dw, w0 + dw, n1 + 1)
        g = np.linspace(g0 - dg, g0 + dg, n2 + 1)
        W, G = np.meshgrid(w, g, indexing="ij")
        val = simpson(simpson(curvature(W, G), x=g, axis=1), x=w)
    elif path.kind is PathKind.ELLIPSE:
        (w0, g0), (a, b) = path.center, path.size
        xr, wr = np.polynomial.legendre.leggauss(n1)
        xt, wt = np.polynomial.legendre.leggauss(n2)
        r = 0.5 * (xr + 1.0)
        th = math.pi * (xt + 1.0)
        R, TH = np.meshgrid(r, th, indexing="ij")
        f = curvature(w0 + a * R * np.cos(TH), g0 + b * R * np.sin(TH)) * a * b * R
        val = 0.5 * math.pi * float(wr @ f @ wt)
    else:
        raise UnsupportedRegion("curvature flux is implemented for rectangles and ellipses only")
    return path.orientation.sign * float(val)


def curvature_flux(path: ControlPath, b: BathSpec, grid=DEFAULT_FLUX_GRID) -> float:
    return surface_integral(path, lambda w, g: curvature_closed_arrays(w, g, b), grid)


def stokes_residual(path: ControlPath, b: BathSpec, grid=DEFAULT_FLUX_GRID) -> float:
    """Relative mismatch between the loop integral and the enclosed curvature flux."""
    loop = loop_work_quasistatic(path, b).w_cyc
    flux = curvature_flux(path, b, grid)
    return abs(loop - flux) / max(abs(loop), abs(flux), 1e-15)


def stokes_residual_gibbs(path: ControlPath, beta: float) -> float:
    """Stokes check for the flat Gibbs connection.

    The flux side is identically zero, so the loop integral is normalized by
    ``oint |A_omega dw| + |A_g dg|`` along the path instead of by the
    vanishing work itself.
    """
    loop = loop_work_gibbs(path, beta).w_cyc
    conn = lambda w, g: connection_gibbs_arrays(w, g, beta)  # noqa: E731
    scale = _abs_line_scale(path, conn)
    return abs(loop) / max(abs(scale), 1e-15)


# ---------------------------------------------------------------------------
# Dynamical work


def _path_extent(path: ControlPath):
    if path.kind is PathKind.ELLIPSE:
        (w0, g0), (a, b) = path.center, path.size
        return abs(w0) + a, abs(g0) + b
    pts = path.corner_points()
    return float(np.max(np.abs(pts[:, 0]))), float(np.max(np.abs(pts[:, 1])))


def default_dt(path: ControlPath, b: BathSpec) -> float:
    w_max, g_max = _path_extent(path)
    return stability_bound(w_max, g_max, b.gamma1, b.gamma2)


def dynamic_work(protocol: DriveProtocol, b: BathSpec, initial: BlochVector | None = None,
                 dt: float | None = None) -> float:
    """Work done on the qubit over one period after a one-period burn-in.

    RK4 on the state augmented with the work accumulator
    ``dW/dt = (z domega/dt + x dg/dt) / 2``. ``initial`` defaults to the
    steady state at the path's starting point.
    """
    path = protocol.path
    if not path.is_closed:
        raise OpenPath("protocol path must be closed")
    bound = default_dt(path, b)
    if dt is None:
        dt = bound
    if not dt > 0:
        raise ValidationError(f"dt > 0 required, got {dt}")
    if dt > bound * (1 + 1e-12):
        raise StepTooLarge(f"dt={dt} exceeds stability bound {bound:.4g}")
    n = max(1, int(math.ceil(protocol.period / dt - 1e-9)))
    h = protocol.period / n
    t_half = np.arange(2 * n + 1) * (0.5 * h)
    W, G, WD, GD = (a.tolist() for a in protocol.controls_at(t_half))
    if initial is None:
        x, y, z = (float(v) for v in ness_arrays(W[0], G[0], b.gamma1, b.gamma2, b.z0))
    else:
        x, y, z = initial.x, initial.y, initial.z
    g1, g2, z0 = b.gamma1, b.gamma2, b.z0
    h2 = 0.5 * h
    h6 = h / 6.0
    work = 0.0
    for sweep in range(2):
        work = 0.0
        for k in range(n):
            i = 2 * k
            w_, g_, wd, gd = W[i], G[i], WD[i], GD[i]
            ax = -w_ * y - g2 * x
            ay = w_ * x - g_ * z - g2 * y
            az = g_ * y - g1 * (z - z0)
            aw = 0.5 * (z * wd + x * gd)
            w_, g_, wd, gd = W[i + 1], G[i + 1], WD[i + 1], GD[i + 1]
            x2, y2, z2 = x + h2 * ax, y + h2 * ay, z + h2 * az
            bx = -w_ * y2 - g2 * x2
            by = w_ * x2 - g_ * z2 - g2 * y2
            bz = g_ * y2 - g1 * (z2 - z0)
            bw = 0.5 * (z2 * wd + x2 * gd)
            x3, y3, z3 = x + h2 * bx, y + h2 * by, z + h2 * bz
            cx = -w_ * y3 - g2 * x3
            cy = w_ * x3 - g_ * z3 - g2 * y3
            cz = g_ * y3 - g1 * (z3 - z0)
            cw = 0.5 * (z3 * wd + x3 * gd)
            w_, g_, wd, gd = W[i + 2], G[i + 2], WD[i + 2], GD[i + 2]
            x4, y4, z4 = x + h * cx, y + h * cy, z + h * cz
            dx = -w_ * y4 - g2 * x4
            dy = w_ * x4 - g_ * z4 - g2 * y4
            dz = g_ * y4 - g1 * (z4 - z0)
            dw = 0.5 * (z4 * wd + x4 * gd)
            x += h6 * (ax + 2.0 * bx + 2.0 * cx + dx)
            y += h6 * (ay + 2.0 * by + 2.0 * cy + dy)
            z += h6 * (az + 2.0 * bz + 2.0 * cz + dz)
            work += h6 * (aw + 2.0 * bw + 2.0 * cw + dw)
    return work


@dataclass
class ConvergenceStudy:
    w_quasistatic: float
    periods: list
    errors: list
    slope: float | None = None
    work: list = field(default_factory=list)

    def rows(self):
        return list(zip(self.periods, self.errors))


def adiabatic_convergence_study(path: ControlPath, b: BathSpec, periods, dt=None,
                                schedule=Schedule.SMOOTHSTEP, gibbs: bool = False) -> ConvergenceStudy:
    """Tabulate ``|W(T) - W_qs|`` over driving periods and fit its log-log slope."""
    if gibbs:
        raise NotSupported("no dynamical model is defined for the Hamiltonian-aligned dissipator")
    periods = [float(T) for T in periods]
    if not periods:
        raise ValidationError("at least one period is required")
    if any(b2 <= a for a, b2 in zip(periods, periods[1:])):
        raise ValidationError("periods must be strictly ascending")
    w_qs = loop_work_quasistatic(path, b).w_cyc
    works = [dynamic_work(DriveProtocol(path, T, schedule), b, dt=dt) for T in periods]
    errors = [abs(w - w_qs) for w in works]
    if not all(math.isfinite(e) for e in errors):
        raise ConvergenceFailure("dynamical work is not finite")
    slope = None
    if len(periods) > 1:
        if errors[-1] >= errors[0]:
            raise ConvergenceFailure(f"error did not decrease: {errors[0]:.3e} -> {errors[-1]:.3e}")
        slope = float(np.polyfit(np.log(periods), np.log(errors), 1)[0])
    return ConvergenceStudy(w_qs, periods, errors, slope, works)
