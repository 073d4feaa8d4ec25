import math

import numpy as np
import pytest

from latticetrap.constants import UM, YB171_MASS
from latticetrap.geometry import Contour, ElectrodeLayout, regular_polygon
from latticetrap.trap import DriveAndSpecies


_ACCEPTANCE_LINES: list[str] = []


def report(name: str, passed: bool, detail: str) -> None:
    """Record one PASS/FAIL line; all of them are repeated in the terminal summary."""
    line = f"[{'PASS' if passed else 'FAIL'}] {name}: {detail}"
    _ACCEPTANCE_LINES.append(line)
    print(line)


def pytest_terminal_summary(terminalreporter):
    if _ACCEPTANCE_LINES:
        terminalreporter.section("acceptance criteria")
        for line in _ACCEPTANCE_LINES:
            terminalreporter.write_line(line)


@pytest.fixture
def yb_drive():
    return DriveAndSpecies.from_alpha(1e-6, YB171_MASS)


@pytest.fixture
def single_hole_layout():
    """A 200 um square island with one 30 um circular-ish hole at the origin."""
    outer = Contour(regular_polygon((0, 0), 200 * UM * math.sqrt(2), 4, math.pi / 4), "outer")
    hole = Contour(regular_polygon((0, 0), 30 * UM, 40, clockwise=True), "hole")
    return ElectrodeLayout((outer, hole), 100.0)


def random_polygon(rng, n_max=9):
    """Star-shaped simple polygon, counterclockwise, closed."""
    n = int(rng.integers(3, n_max + 1))
    th = 2 * np.pi * (np.arange(n) + rng.uniform(-0.2, 0.2, n)) / n
    rad = rng.uniform(0.3, 1.0, n) * 100 * UM
    c = rng.uniform(-50, 50, 2) * UM
    v = np.column_stack([c[0] + rad * np.cos(th), c[1] + rad * np.sin(th)])
    return np.vstack([v, v[:1]])


def quadrature_field(contours, point):
    """Field per volt by adaptive quadrature of the contour line integral, segment by segment."""
    from scipy.integrate import quad

    p = np.asarray(point, float)
    total = np.zeros(3)
    for v in contours:
        for s, e in zip(v[:-1], v[1:]):
            d = np.array([e[0] - s[0], e[1] - s[1], 0.0])

            def integrand(t, k):
                a = p - np.array([s[0] + t * d[0], s[1] + t * d[1], 0.0])
                return np.cross(d, a)[k] / np.linalg.norm(a) ** 3

            for k in range(3):
                total[k] += quad(integrand, 0, 1, args=(k,), epsabs=0, epsrel=1e-13, limit=200)[0]
    return total / (2 * np.pi)


def disk_axis_field(radius, z):
    """On-axis field per volt above a grounded-plane disk electrode held at 1 V."""
    return radius**2 / (radius**2 + z**2) ** 1.5
