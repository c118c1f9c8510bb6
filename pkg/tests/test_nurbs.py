import math

import numpy as np
import pytest

from igacontact.nurbs import (
    GeometryError,
    KnotVector,
    NurbsCurve,
    NurbsPatch,
    basis_derivatives,
    basis_functions,
    curve_derivatives,
    curve_point,
    dump_geometry,
    knot_insert,
    load_geometry,
    make_annulus_patch,
    make_arc,
    refine,
    uniform_insertions,
)

from .oracles import basis_vector, bernstein, central_difference, rational_point

KNOTS = [0, 0, 0, 0.2, 0.5, 0.5, 0.8, 1, 1, 1]


def test_basis_matches_recursive_definition():
    kv = KnotVector(2, KNOTS)
    for u in np.linspace(0, 1, 101):
        np.testing.assert_allclose(basis_functions(kv, u), basis_vector(2, KNOTS, u), atol=1e-14)


def test_cubic_basis_matches_recursive_definition():
    knots = [0, 0, 0, 0, 0.3, 0.6, 0.6, 1, 1, 1, 1]
    kv = KnotVector(3, knots)
    for u in np.random.default_rng(0).random(200):
        np.testing.assert_allclose(basis_functions(kv, u), basis_vector(3, knots, u), atol=1e-14)


def test_single_span_reduces_to_bernstein():
    kv = KnotVector(2, [0, 0, 0, 1, 1, 1])
    for u in (0.0, 0.25, 0.5, 1.0):
        np.testing.assert_allclose(basis_functions(kv, u), [bernstein(i, 2, u) for i in range(3)], atol=1e-15)


def test_bernstein_derivatives_at_half():
    d = basis_derivatives(KnotVector(2, [0, 0, 0, 1, 1, 1]), 0.5, 2)
    np.testing.assert_allclose(d[:, 1], [-1.0, 0.0, 1.0], atol=1e-15)
    np.testing.assert_allclose(d[:, 2], [2.0, -4.0, 2.0], atol=1e-15)


def test_basis_derivatives_against_finite_differences():
    kv = KnotVector(2, KNOTS)
    for u in (0.1, 0.33, 0.65, 0.9):
        fd = central_difference(lambda t: basis_functions(kv, t), u)
        np.testing.assert_allclose(basis_derivatives(kv, u, 1)[:, 1], fd, atol=1e-7)


def test_partition_of_unity_and_nonnegativity():
    kv = KnotVector(2, KNOTS)
    for u in np.random.default_rng(1).random(500):
        N = basis_functions(kv, u)
        assert abs(N.sum() - 1) < 1e-14
        assert N.min() >= 0
        assert np.count_nonzero(N) <= 3


def test_domain_end_is_closed():
    kv = KnotVector(2, KNOTS)
    N = basis_functions(kv, 1.0)
    assert N[-1] == pytest.approx(1.0)


@pytest.mark.parametrize(
    "knots",
    [
        [0, 0, 1, 1, 1],  # not clamped at the start
        [0, 0, 0, 0.6, 0.4, 1, 1, 1],  # decreasing
        [1, 1, 1, 1, 1, 1],  # empty
        [0, 0, 1, 1],  # too short for p = 2
    ],
)
def test_invalid_knot_vectors(knots):
    with pytest.raises(GeometryError):
        KnotVector(2, knots)


def test_evaluation_outside_domain():
    with pytest.raises(GeometryError):
        basis_functions(KnotVector(2, KNOTS), 1.2)
    with pytest.raises(GeometryError):
        make_arc((0, 0), 1, 0, 1).evaluate(-0.1)


def test_curve_control_point_count_checked():
    with pytest.raises(GeometryError):
        NurbsCurve(KnotVector(2, [0, 0, 0, 1, 1, 1]), np.zeros((4, 2)), np.ones(4))
    with pytest.raises(GeometryError):
        NurbsCurve(KnotVector(2, [0, 0, 0, 1, 1, 1]), np.zeros((3, 2)), [1, 0, 1])


def test_rational_curve_matches_oracle():
    rng = np.random.default_rng(2)
    kv = KnotVector(2, KNOTS)
    P, w = rng.random((kv.n, 2)), rng.uniform(0.5, 2, kv.n)
    c = NurbsCurve(kv, P, w)
    for u in rng.random(50):
        np.testing.assert_allclose(curve_point(c, u), rational_point(2, KNOTS, P, w, u), atol=1e-14)


def test_rational_derivatives_against_finite_differences():
    rng = np.random.default_rng(3)
    kv = KnotVector(2, KNOTS)
    c = NurbsCurve(kv, rng.random((kv.n, 2)), rng.uniform(0.5, 2, kv.n))
    for u in (0.1, 0.4, 0.7):
        d = curve_derivatives(c, u, 2)
        np.testing.assert_allclose(d[1], central_difference(lambda t: curve_point(c, t), u), rtol=1e-6)
        fd2 = central_difference(lambda t: curve_derivatives(c, t, 1)[1], u, 1e-5)
        np.testing.assert_allclose(d[2], fd2, rtol=1e-5, atol=1e-6)


def test_rational_basis_derivative_sums_to_zero():
    c = make_arc((0, 0), 2.0, 0.2, 2.5)
    _, R = c.rational_basis(np.linspace(0, 1, 11), 1)
    np.testing.assert_allclose(R[:, 0].sum(1), 1, atol=1e-15)
    np.testing.assert_allclose(R[:, 1].sum(1), 0, atol=1e-14)


def test_quarter_arc_is_exact():
    c = make_arc((0, 0), 1.0, 0.0, math.pi / 2)
    np.testing.assert_allclose(curve_point(c, 0.5), [math.sqrt(0.5)] * 2, atol=1e-15)
    x = c.evaluate(np.linspace(0, 1, 1000))[:, 0]
    assert np.abs(np.hypot(*x.T) - 1).max() < 1e-14


def test_arc_endpoints_and_tangent_direction():
    c = make_arc((1.0, -2.0), 0.5, -2.0, -0.5)
    np.testing.assert_allclose(curve_point(c, 0), [1 + 0.5 * math.cos(-2), -2 + 0.5 * math.sin(-2)], atol=1e-15)
    np.testing.assert_allclose(curve_point(c, 1), [1 + 0.5 * math.cos(-0.5), -2 + 0.5 * math.sin(-0.5)], atol=1e-15)
    t = curve_derivatives(c, 0.3, 1)[1]
    r = curve_point(c, 0.3) - [1.0, -2.0]
    assert abs(t @ r) < 1e-14  # tangent perpendicular to radius
    assert t[0] * r[1] - t[1] * r[0] < 0  # counter-clockwise


def test_arc_midpoint_lands_on_bottom_exactly():
    r = 29.225e-3
    c = make_arc((0.0, r), r, -5 * math.pi / 6, -math.pi / 6)
    assert tuple(curve_point(c, 0.5)) == (0.0, 0.0)


@pytest.mark.parametrize("span", [0.0, math.pi, 4.0])
def test_arc_span_limits(span):
    with pytest.raises(GeometryError):
        make_arc((0, 0), 1.0, 0.0, span)


def test_knot_insertion_preserves_curve():
    rng = np.random.default_rng(4)
    kv = KnotVector(2, KNOTS)
    c = NurbsCurve(kv, rng.random((kv.n, 2)), rng.uniform(0.5, 2, kv.n))
    c2 = knot_insert(knot_insert(c, 0.37), 0.8)
    assert c2.knotvec.n == kv.n + 2
    u = rng.random(1000)
    assert np.abs(c.evaluate(u) - c2.evaluate(u)).max() < 1e-14


def test_knot_insertion_multiplicity_limit():
    c = make_arc((0, 0), 1, 0, 1)
    c = knot_insert(knot_insert(c, 0.5), 0.5)
    with pytest.raises(GeometryError):
        knot_insert(c, 0.5)
    with pytest.raises(GeometryError):
        knot_insert(c, 1.0)


def test_refine_counts_and_positions():
    assert uniform_insertions(4) == [0.2, 0.4, 0.6, 0.8]
    c = refine(make_arc((0, 0), 1, 0, 1), 4)
    np.testing.assert_allclose(c.knotvec.unique_knots(), [0, 0.2, 0.4, 0.6, 0.8, 1])
    p = refine(make_annulus_patch((0, 0), 1, 2, 0, 1), 3)
    assert p.shape == (6, 6)


def test_patch_refinement_preserves_geometry():
    p = make_annulus_patch((0, 0.03), 0.029, 0.030, -2.6, -0.5)
    q = refine(p, 5)
    rng = np.random.default_rng(5)
    u, v = rng.random(1000), rng.random(1000)
    assert np.abs(p.evaluate(u, v) - q.evaluate(u, v)).max() < 1e-15


def test_annulus_orientation_and_radii():
    c = np.array([0.1, 0.2])
    p = make_annulus_patch(c, 1.0, 1.5, 0.3, 1.9)
    x = p.evaluate([0.3, 0.3, 0.3], [0.0, 0.5, 1.0])
    np.testing.assert_allclose(np.hypot(*(x - c).T), [1.5, 1.25, 1.0], rtol=1e-14)
    outer = p.edge_curve("v0").evaluate(np.linspace(0, 1, 50))[:, 0]
    np.testing.assert_allclose(np.hypot(*(outer - c).T), 1.5, rtol=1e-14)


def test_flat_ordering_and_edges():
    p = refine(make_annulus_patch((0, 0), 1, 2, 0, 1), 1)  # 4 x 4
    n_u, n_v = p.shape
    flat = p.flat_points()
    assert flat.shape == (n_u * n_v, 2)
    np.testing.assert_array_equal(flat[p.flat_index(2, 3)], p.control_net[2, 3])
    np.testing.assert_array_equal(flat[p.edge_indices("v1")], p.edge_curve("v1").control_points)
    np.testing.assert_array_equal(flat[p.edge_indices("u0")], p.edge_curve("u0").control_points)
    with pytest.raises(GeometryError):
        p.edge_indices("w0")
    q = p.with_flat_points(flat + 1.0)
    np.testing.assert_array_equal(q.control_net, p.control_net + 1.0)


def test_geometry_serialization_round_trip():
    for g in (make_arc((0, 0), 1, 0.1, 1.2), refine(make_annulus_patch((0, 0), 1, 2, 0, 1), 2)):
        h = load_geometry(dump_geometry(g))
        assert type(h) is type(g)
        assert h.to_dict() == g.to_dict()


def test_arrays_are_read_only():
    c = make_arc((0, 0), 1, 0, 1)
    with pytest.raises(ValueError):
        c.control_points[0, 0] = 5.0


def test_patch_shape_checked():
    kv = KnotVector(2, [0, 0, 0, 1, 1, 1])
    with pytest.raises(GeometryError):
        NurbsPatch(kv, kv, np.zeros((3, 2, 2)), np.ones((3, 2)))
