import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import disk_axis_field, quadrature_field, random_polygon
from latticetrap.constants import UM, YB171_MASS
from latticetrap.field import (
    PseudoContext,
    SingularPointError,
    assembled_pseudo_hessian,
    field_at,
    field_jacobian,
    pseudo_hessian,
    pseudopotential,
)
from latticetrap.geometry import Contour, ElectrodeLayout, regular_polygon


def _layout(vertices, V=1.0):
    return ElectrodeLayout((Contour(vertices, "outer"),), V)


def test_kernel_matches_quadrature_few_cases():
    rng = np.random.default_rng(1)
    for _ in range(5):
        v = random_polygon(rng)
        p = np.append(rng.uniform(-150, 150, 2) * UM, rng.uniform(5, 150) * UM)
        ref = quadrature_field([v], p)
        got = field_at(_layout(v), p)
        assert np.linalg.norm(got - ref) <= 1e-9 * np.linalg.norm(ref)


@pytest.mark.parametrize("z_um", [1.0, 10.0, 100.0, 1000.0])
def test_disk_on_axis(z_um):
    R = 50 * UM
    lay = _layout(regular_polygon((0, 0), R, 10_000))
    E = field_at(lay, (0, 0, z_um * UM))
    assert E[2] == pytest.approx(disk_axis_field(R, z_um * UM), rel=1e-4)
    assert abs(E[0]) < 1e-8 * E[2] and abs(E[1]) < 1e-8 * E[2]


def test_field_linear_in_amplitude():
    v = regular_polygon((0, 0), 30 * UM, 12)
    p = (3 * UM, -4 * UM, 20 * UM)
    assert np.allclose(field_at(_layout(v, 7.0), p), 7.0 * field_at(_layout(v, 1.0), p), rtol=1e-14)


def test_hole_negates_outer():
    v = regular_polygon((0, 0), 30 * UM, 12)
    hole = regular_polygon((0, 0), 30 * UM, 12, clockwise=True)
    big = regular_polygon((0, 0), 500 * UM, 4, math.pi / 4)
    p = (2 * UM, 1 * UM, 25 * UM)
    island = ElectrodeLayout((Contour(big, "outer"), Contour(hole, "hole")), 1.0)
    assert np.allclose(field_at(island, p), field_at(_layout(big), p) - field_at(_layout(v), p), rtol=1e-12, atol=1e-6)


def test_far_field_vanishes():
    v = regular_polygon((0, 0), 30 * UM, 12)
    assert np.linalg.norm(field_at(_layout(v), (0, 0, 1.0))) < 1e-6


def test_plane_is_singular():
    v = regular_polygon((0, 0), 30 * UM, 12)
    with pytest.raises(SingularPointError):
        field_at(_layout(v), (0, 0, 0))


def test_curl_free_and_divergence_free():
    lay = _layout(random_polygon(np.random.default_rng(3)))
    J = field_jacobian(lay, (10 * UM, 5 * UM, 40 * UM))
    scale = np.abs(J).max()
    assert np.allclose(J, J.T, atol=1e-6 * scale)
    assert abs(np.trace(J)) < 1e-6 * scale


@settings(max_examples=40, deadline=None)
@given(st.floats(-200, 200), st.floats(-200, 200), st.floats(0.5, 300))
def test_pseudopotential_nonnegative(x, y, z):
    lay = _layout(regular_polygon((0, 0), 40 * UM, 7), 100.0)
    ctx = PseudoContext(YB171_MASS, 2 * math.pi * 30e6, 100.0)
    assert pseudopotential(lay, ctx, (x * UM, y * UM, z * UM)) >= 0


def test_hessian_two_routes_agree(single_hole_layout):
    from latticetrap.trap import find_null

    ctx = PseudoContext(YB171_MASS, 2 * math.pi * 30e6, 100.0)
    null = find_null(single_hole_layout, (0, 0, 20 * UM)).position
    H1 = pseudo_hessian(single_hole_layout, ctx, null)
    H2 = assembled_pseudo_hessian(single_hole_layout, ctx, null)
    assert np.allclose(H1, H2, rtol=1e-4, atol=1e-4 * np.abs(H1).max())


def test_hessian_at_null_is_jacobian_gram(single_hole_layout):
    # E = 0 at the null, so the Hessian of |E|^2 reduces to 2 J^T J
    from latticetrap.trap import find_null

    ctx = PseudoContext(YB171_MASS, 2 * math.pi * 30e6, 100.0)
    null = find_null(single_hole_layout, (0, 0, 20 * UM)).position
    J = field_jacobian(single_hole_layout, null) / single_hole_layout.rf_amplitude
    H = pseudo_hessian(single_hole_layout, ctx, null)
    assert np.allclose(H, 2 * ctx.prefactor * J.T @ J, rtol=1e-4, atol=1e-4 * np.abs(H).max())
