import math

import numpy as np
import pytest

from qubit_holonomy.bloch import BathSpec
from qubit_holonomy.errors import NotSupported, OpenPath, StepTooLarge, UnsupportedRegion, ValidationError
from qubit_holonomy.geometry import curvature_closed_arrays
from qubit_holonomy.transport import (
    ControlPath,
    DriveProtocol,
    Schedule,
    adiabatic_convergence_study,
    curvature_flux,
    default_dt,
    dynamic_work,
    line_integral,
    loop_work_gibbs,
    loop_work_quasistatic,
    stokes_residual,
    stokes_residual_gibbs,
    surface_integral,
)

UNIT = BathSpec(1, 1, 1)
SMALL_FLUX = 5 / 18 * 4e-4
TRIANGLE = [(0.2, 0.2), (1.0, 0.2), (0.2, 1.0), (0.2, 0.2)]


def gibbs_paths():
    return [
        (ControlPath.rectangle((1, 1), (0.5, 0.5)), 1.0),
        (ControlPath.ellipse((0.5, 0.5), (0.3, 0.2)), 2.0),
        (ControlPath.polyline(TRIANGLE), 1.0),
    ]


# -- paths ---------------------------------------------------------------------

def test_path_validation():
    with pytest.raises(ValidationError):
        ControlPath.rectangle((0, 0), (0.0, 1.0))
    with pytest.raises(ValidationError):
        ControlPath.ellipse((0, 0), (1.0, -1.0))
    rect = ControlPath.rectangle((1, 1), (0.5, 0.25))
    assert rect.area == pytest.approx(0.5)
    assert rect.is_closed
    assert rect.reversed().reversed() == rect
    assert not ControlPath.polyline([(0, 0), (1, 0), (1, 1)]).is_closed


def test_pieces_close_exactly():
    for path in (ControlPath.rectangle((1, 1), (0.5, 0.5)), ControlPath.ellipse((0, 1), (0.4, 0.7)),
                 ControlPath.polyline(TRIANGLE)):
        pieces = path.pieces()
        start = np.asarray(pieces[0][0](0.0)).ravel()
        end = np.asarray(pieces[-1][0](1.0)).ravel()
        assert np.array_equal(start, end) or np.allclose(start, end, atol=1e-15)


# -- quasistatic loop work -----------------------------------------------------

def test_small_rectangle_matches_local_curvature():
    w = loop_work_quasistatic(ControlPath.rectangle((1, 1), (0.01, 0.01)), UNIT)
    assert w.w_cyc == pytest.approx(SMALL_FLUX, rel=1e-2)
    assert w.estimated_error >= 0 and w.quadrature_nodes > 0


def test_zero_polarization_gives_zero_work():
    b = BathSpec(1.3, 0.8, 0.0)
    for path in (ControlPath.rectangle((1, 1), (0.5, 0.5)), ControlPath.ellipse((0, 0), (1, 2)),
                 ControlPath.polyline(TRIANGLE)):
        assert abs(loop_work_quasistatic(path, b).w_cyc) < 1e-12


def test_retraced_path_cancels():
    path = ControlPath.polyline([(0.5, 1.0), (1.5, 1.0), (0.5, 1.0)])
    assert abs(loop_work_quasistatic(path, UNIT).w_cyc) < 1e-14


def test_open_path_rejected():
    path = ControlPath.polyline([(0, 0), (1, 0), (1, 1)])
    with pytest.raises(OpenPath):
        loop_work_quasistatic(path, UNIT)
    with pytest.raises(OpenPath):
        loop_work_gibbs(path, 1.0)


def test_polyline_square_matches_rectangle():
    square = ControlPath.polyline([(0.5, 0.5), (1.5, 0.5), (1.5, 1.5), (0.5, 1.5), (0.5, 0.5)],
                                  samples_per_unit=256)
    rect = ControlPath.rectangle((1, 1), (0.5, 0.5))
    a = loop_work_quasistatic(square, UNIT).w_cyc
    b = loop_work_quasistatic(rect, UNIT).w_cyc
    assert a == pytest.approx(b, rel=1e-8)


@pytest.mark.parametrize("path, beta", gibbs_paths())
def test_gibbs_loops_vanish(path, beta):
    assert abs(loop_work_gibbs(path, beta).w_cyc) < 1e-10
    assert stokes_residual_gibbs(path, beta) < 1e-10


def test_line_integral_of_linear_form_gives_area():
    # A = (0, omega) has unit curvature, so the loop integral is the area
    for path in (ControlPath.rectangle((0.3, -0.2), (0.5, 0.25)), ControlPath.ellipse((1, 1), (0.6, 0.3))):
        w = line_integral(path, lambda om, g: (np.zeros_like(om), om))
        assert w.w_cyc == pytest.approx(path.area, rel=1e-12)
        assert line_integral(path.reversed(), lambda om, g: (np.zeros_like(om), om)).w_cyc == pytest.approx(-path.area, rel=1e-12)


# -- flux ----------------------------------------------------------------------

def test_small_rectangle_flux():
    assert abs(curvature_flux(ControlPath.rectangle((1, 1), (0.01, 0.01)), UNIT) - SMALL_FLUX) < 1e-9


def test_flux_parity_and_zero():
    up = curvature_flux(ControlPath.rectangle((1, 1), (0.3, 0.2)), UNIT)
    down = curvature_flux(ControlPath.rectangle((1, -1), (0.3, 0.2)), UNIT)
    assert down == pytest.approx(-up, rel=1e-13)
    assert curvature_flux(ControlPath.ellipse((1, 1), (0.5, 0.5)), BathSpec(1, 1, 0)) == 0.0


def test_flux_restrictions():
    with pytest.raises(UnsupportedRegion):
        curvature_flux(ControlPath.polyline(TRIANGLE), UNIT)
    with pytest.raises(ValidationError):
        curvature_flux(ControlPath.rectangle((1, 1), (0.5, 0.5)), UNIT, grid=(8, 8))


def test_surface_integral_of_polynomial():
    rect = ControlPath.rectangle((0.5, 1.0), (0.5, 1.0))
    assert surface_integral(rect, lambda w, g: w * g**2) == pytest.approx(0.5 * 8 / 3, rel=1e-13)
    ell = ControlPath.ellipse((0.0, 0.0), (2.0, 0.5))
    assert surface_integral(ell, lambda w, g: np.ones_like(w)) == pytest.approx(math.pi, rel=1e-13)


# -- Stokes --------------------------------------------------------------------

def test_stokes_rectangle_and_refinement():
    path = ControlPath.rectangle((1, 1), (0.5, 0.5))
    residuals = [stokes_residual(path, UNIT, grid=(n, n)) for n in (32, 64, 128)]
    assert residuals[0] < 1e-4
    assert residuals[0] > residuals[1] > residuals[2]


def test_stokes_ellipse_and_other_bath():
    b = BathSpec(0.7, 1.4, -0.6)
    assert stokes_residual(ControlPath.ellipse((0.4, 0.8), (0.9, 0.5)), b) < 1e-8
    assert stokes_residual(ControlPath.rectangle((-0.5, 0.3), (0.4, 0.6)), b) < 1e-4


def test_shrinking_loops_converge():
    res = [stokes_residual(ControlPath.rectangle((1, 1), (s, s)), UNIT, grid=(16, 16)) for s in (0.8, 0.4, 0.2, 0.1)]
    assert all(a > b for a, b in zip(res, res[1:]))


# -- properties ----------------------------------------------------------------

@pytest.mark.parametrize("path", [
    ControlPath.rectangle((1, 1), (0.5, 0.5)),
    ControlPath.ellipse((0.5, -0.3), (0.7, 0.4)),
])
def test_orientation_antisymmetry(path):
    rev = path.reversed()
    assert loop_work_quasistatic(rev, UNIT).w_cyc == pytest.approx(-loop_work_quasistatic(path, UNIT).w_cyc, rel=1e-12)
    assert curvature_flux(rev, UNIT) == pytest.approx(-curvature_flux(path, UNIT), rel=1e-12)


def test_orientation_antisymmetry_polyline():
    fwd = ControlPath.polyline(TRIANGLE)
    rev = ControlPath.polyline(TRIANGLE[::-1])
    assert loop_work_quasistatic(rev, UNIT).w_cyc == pytest.approx(-loop_work_quasistatic(fwd, UNIT).w_cyc, rel=1e-12)


def test_additivity_across_shared_edge():
    whole = loop_work_quasistatic(ControlPath.rectangle((1, 1), (0.5, 0.5)), UNIT).w_cyc
    left = loop_work_quasistatic(ControlPath.rectangle((0.75, 1), (0.25, 0.5)), UNIT).w_cyc
    right = loop_work_quasistatic(ControlPath.rectangle((1.25, 1), (0.25, 0.5)), UNIT).w_cyc
    assert abs(whole - (left + right)) < 1e-10


# -- dynamics ------------------------------------------------------------------

def test_drive_protocol_schedule():
    path = ControlPath.rectangle((1, 1), (0.5, 0.5))
    with pytest.raises(ValidationError):
        DriveProtocol(path, 0.0)
    for sched in Schedule:
        proto = DriveProtocol(path, 8.0, sched)
        w, g, wd, gd = proto.controls_at(np.array([0.0, 2.0, 4.0, 8.0]))
        corners = path.corner_points()
        assert np.allclose(np.column_stack([w, g]), corners[[0, 1, 2, 0]], atol=1e-14)
    # smoothstep velocity vanishes at the corners
    w, g, wd, gd = DriveProtocol(path, 8.0, Schedule.SMOOTHSTEP).controls_at(np.array([0.0, 2.0, 4.0]))
    assert np.allclose(wd, 0, atol=1e-14) and np.allclose(gd, 0, atol=1e-14)


def test_dynamic_work_slow_limit():
    path = ControlPath.rectangle((1, 1), (0.5, 0.5))
    w_qs = loop_work_quasistatic(path, UNIT).w_cyc
    w = dynamic_work(DriveProtocol(path, 1e4), UNIT)
    assert w == pytest.approx(w_qs, rel=0.02)
    w_rev = dynamic_work(DriveProtocol(path.reversed(), 1e4), UNIT)
    assert w_rev == pytest.approx(-w_qs, rel=0.02)


def test_static_protocol_does_no_work():
    path = ControlPath.polyline([(1.0, 1.0), (1.0, 1.0)])
    assert dynamic_work(DriveProtocol(path, 50.0), UNIT) == 0.0


def test_dynamic_work_step_bound():
    path = ControlPath.rectangle((1, 1), (0.5, 0.5))
    with pytest.raises(StepTooLarge):
        dynamic_work(DriveProtocol(path, 10.0), UNIT, dt=10 * default_dt(path, UNIT))


def test_convergence_study():
    path = ControlPath.rectangle((1, 1), (0.5, 0.5))
    study = adiabatic_convergence_study(path, UNIT, [1e2, 1e3, 1e4])
    assert -1.3 <= study.slope <= -0.7
    assert all(e > 0 for e in study.errors)
    assert study.errors == sorted(study.errors, reverse=True)
    single = adiabatic_convergence_study(path, UNIT, [1e2])
    assert single.slope is None and len(single.rows()) == 1
    with pytest.raises(NotSupported):
        adiabatic_convergence_study(path, UNIT, [1e2], gibbs=True)
    with pytest.raises(ValidationError):
        adiabatic_convergence_study(path, UNIT, [1e3, 1e2])
