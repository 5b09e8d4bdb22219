"""Charts on the triality quarter-sphere and curvature fields painted on them.

The chart ``(eta, lam)`` embeds as

    C = cos(lam) cos(eta),  P = cos(lam) sin(eta),  E = sin(lam)

with ``eta`` in [-pi/2, pi/2] (C >= 0) and ``lam`` in [0, pi/2] (E >= 0).
``lam = 0`` is the pure-state boundary E = 0 and ``eta = 0`` the P = 0 meridian.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .bloch import BathSpec, TrialityPoint
from .errors import ValidationError
from .geometry import regularized_curvature_arrays

HALF_PI = 0.5 * math.pi
MIN_PAINT_GRID = (32, 16)


@dataclass(frozen=True)
class ChartPoint:
    eta: float
    lam: float

    def __post_init__(self):
        if not (-HALF_PI <= self.eta <= HALF_PI and 0.0 <= self.lam <= HALF_PI):
            raise ValidationError(f"chart point out of range: {self}")


@dataclass
class ScalarField2D:
    """Samples ``values[i, j]`` at ``(axis1[i], axis2[j])``; ``mask`` flags excluded nodes."""

    axis1_name: str
    axis1: np.ndarray
    axis2_name: str
    axis2: np.ndarray
    values: np.ndarray
    mask: np.ndarray | None = None

    def __post_init__(self):
        self.axis1 = np.asarray(self.axis1, dtype=float)
        self.axis2 = np.asarray(self.axis2, dtype=float)
        self.values = np.asarray(self.values, dtype=float)
        if self.mask is None:
            self.mask = np.zeros(self.values.shape, dtype=bool)
        shape = (self.axis1.size, self.axis2.size)
        if self.values.shape != shape or self.mask.shape != shape:
            raise ValidationError(f"field shape {self.values.shape} does not match axes {shape}")

    @property
    def shape(self):
        return self.values.shape


@dataclass(frozen=True)
class Extremum:
    coords: tuple
    index: tuple
    value: float
    kind: str
    interior: bool


def chart_arrays(eta, lam):
    eta = np.asarray(eta, dtype=float)
    lam = np.asarray(lam, dtype=float)
    cl = np.cos(lam)
    return cl * np.cos(eta), cl * np.sin(eta), np.sin(lam)


def chart_to_triality(p: ChartPoint, phi: float = 0.0) -> TrialityPoint:
    C, P, E = chart_arrays(p.eta, p.lam)
    # cos(pi/2) is 6e-17, not 0
    return TrialityPoint(max(float(C), 0.0), float(P), float(E), phi)


def triality_to_chart(t: TrialityPoint) -> ChartPoint:
    return ChartPoint(math.atan2(t.P, t.C), math.asin(min(t.E, 1.0)))


def chart_axes(n_eta: int, n_lambda: int):
    """Endpoint-inclusive eta nodes and cell-centred lambda nodes."""
    eta = np.linspace(-HALF_PI, HALF_PI, n_eta)
    lam = (np.arange(n_lambda) + 0.5) * (HALF_PI / n_lambda)
    return eta, lam


def paint_regularized_curvature(phi: float, b: BathSpec, grid=(128, 64)) -> ScalarField2D:
    """Regularized curvature ``P F`` over the chart at fixed coherence phase."""
    n_eta, n_lambda = int(grid[0]), int(grid[1])
    if n_eta < MIN_PAINT_GRID[0] or n_lambda < MIN_PAINT_GRID[1]:
        raise ValidationError(f"paint grid must be at least {MIN_PAINT_GRID}, got {grid}")
    eta, lam = chart_axes(n_eta, n_lambda)
    ETA, LAM = np.meshgrid(eta, lam, indexing="ij")
    C, P, E = chart_arrays(ETA, LAM)
    values = regularized_curvature_arrays(C, P, E, phi, b)
    return ScalarField2D("eta", eta, "lambda", lam, values)


def _neighbour_stack(values, mask):
    padded = np.pad(np.where(mask, np.nan, values), 1, constant_values=np.nan)
    n1, n2 = values.shape
    shifts = [(di, dj) for di in (-1, 0, 1) for dj in (-1, 0, 1) if (di, dj) != (0, 0)]
    return np.stack([padded[1 + di:1 + di + n1, 1 + dj:1 + dj + n2] for di, dj in shifts])


def locate_extrema(field: ScalarField2D, margin: int = 2):
    """Strict local extrema under 8-neighbour comparison.

    Missing neighbours (outside the grid or masked) are ignored. An extremum
    is ``interior`` when it sits at least ``margin`` nodes from every edge.
    """
    v = field.values
    nb = _neighbour_stack(v, field.mask)
    with np.errstate(invalid="ignore"):
        higher = np.nanmax(nb, axis=0)
        lower = np.nanmin(nb, axis=0)
    valid = ~field.mask & np.isfinite(higher)
    is_max = valid & (v > higher)
    is_min = valid & (v < lower)
    n1, n2 = v.shape
    out = []
    for kind, sel in (("max", is_max), ("min", is_min)):
        for i, j in zip(*np.nonzero(sel)):
            interior = margin <= i < n1 - margin and margin <= j < n2 - margin
            out.append(Extremum((float(field.axis1[i]), float(field.axis2[j])), (int(i), int(j)),
                                float(v[i, j]), kind, bool(interior)))
    out.sort(key=lambda e: (-abs(e.value), e.index))
    return out


def global_abs_extrema(field: ScalarField2D, rtol: float = 1e-12):
    """All unmasked nodes whose ``|value|`` equals the global maximum within ``rtol``."""
    a = np.where(field.mask, -np.inf, np.abs(field.values))
    top = a.max()
    idx = np.argwhere(a >= top * (1.0 - rtol))
    return [(int(i), int(j)) for i, j in idx]


def corridor_ratio(field: ScalarField2D, margin: int = 2) -> float | None:
    """max |field| on the first lambda row (nearest E = 0) over the interior max.

    Values below 1 mean the pure-state boundary is a low-curvature corridor.
    Returns None for a field that vanishes in the interior.
    """
    a = np.where(field.mask, np.nan, np.abs(field.values))
    edge = np.nanmax(a[:, 0])
    inner = np.nanmax(a[margin:-margin, margin:-margin])
    return float(edge / inner) if inner > 0 else None


def is_eta_even(field: ScalarField2D, atol: float = 1e-14) -> bool:
    return bool(np.allclose(field.values, field.values[::-1, :], rtol=0.0, atol=atol))


@dataclass
class SphereMesh:
    """Triangle mesh of the quarter-sphere with a per-vertex scalar."""

    vertices: np.ndarray
    scalars: np.ndarray
    faces: np.ndarray
    polylines: dict


def quarter_sphere_vertices(grid, phi: float, b: BathSpec) -> SphereMesh:
    """Mesh ``n_eta x n_lambda`` chart rows plus a single pole vertex.

    Rows sit at ``lam = j (pi/2) / n_lambda`` for ``j < n_lambda`` so row 0 is
    the E = 0 boundary; the ``lam = pi/2`` row collapses to the pole, which is
    stored once. The E = 0 row is also returned as the labelled polyline
    ``pure_state_boundary``.
    """
    n_eta, n_lambda = int(grid[0]), int(grid[1])
    if n_eta < 2 or n_lambda < 1:
        raise ValidationError(f"mesh grid needs n_eta >= 2 and n_lambda >= 1, got {grid}")
    eta = np.linspace(-HALF_PI, HALF_PI, n_eta)
    lam = np.arange(n_lambda) * (HALF_PI / n_lambda)
    LAM, ETA = np.meshgrid(lam, eta, indexing="ij")  # eta fastest in the flattened order
    C, P, E = chart_arrays(ETA.ravel(), LAM.ravel())
    C = np.clip(C, 0.0, None)
    verts = np.column_stack([C, P, E])
    verts = np.vstack([verts, [0.0, 0.0, 1.0]])
    pole = len(verts) - 1
    scalars = regularized_curvature_arrays(verts[:, 0], verts[:, 1], verts[:, 2], phi, b)

    def vid(i, j):
        return j * n_eta + i

    faces = []
    for j in range(n_lambda):
        for i in range(n_eta - 1):
            if j + 1 < n_lambda:
                a, b_, c, d = vid(i, j), vid(i + 1, j), vid(i + 1, j + 1), vid(i, j + 1)
                faces.append((a, b_, c))
                faces.append((a, c, d))
            else:
                faces.append((vid(i, j), vid(i + 1, j), pole))
    boundary = [vid(i, 0) for i in range(n_eta)]
    return SphereMesh(verts, np.asarray(scalars, dtype=float), np.array(faces, dtype=int),
                      {"pure_state_boundary": boundary})
