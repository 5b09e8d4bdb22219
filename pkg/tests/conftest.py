import itertools
import sys

import numpy as np
import pytest

from qubit_holonomy.bloch import BathSpec, Controls

CONTROL_VALUES = (-2.0, -1.0, -0.3, 0.3, 1.0, 2.0)
RATES = (0.1, 0.5, 1.0, 2.0)
Z0_VALUES = (-1.0, -0.5, 0.5, 1.0)


def grid_points():
    """The (omega, g, gamma1, gamma2, z0) test grid with gamma1 = gamma2 = rate (576 points)."""
    return [(w, g, r, r, z0) for w, g, r, z0 in itertools.product(CONTROL_VALUES, CONTROL_VALUES, RATES, Z0_VALUES)]


def pair_grid_points(physical_only=False):
    """Grid with gamma1, gamma2 varied independently.

    With ``physical_only`` keep pairs with ``2 gamma2 >= gamma1``; other pairs
    can push the steady state outside the Bloch ball.
    """
    pts = itertools.product(CONTROL_VALUES, CONTROL_VALUES, RATES, RATES, Z0_VALUES)
    return [p for p in pts if not physical_only or 2 * p[3] >= p[2]]


def grid_arrays():
    pts = np.array(grid_points())
    return tuple(pts[:, k] for k in range(5))


@pytest.fixture
def unit_bath():
    return BathSpec(1.0, 1.0, 1.0)


@pytest.fixture
def unit_controls():
    return Controls(1.0, 1.0)


def pytest_terminal_summary(terminalreporter):
    acceptance = sys.modules.get("test_acceptance")
    if acceptance is None or not acceptance.RESULTS:
        return
    terminalreporter.section("acceptance criteria")
    for n in sorted(acceptance.RESULTS):
        terminalreporter.write_line(acceptance.RESULTS[n])
