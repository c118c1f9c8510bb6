import math

import numpy as np
import pytest

from igacontact.contact import (
    ContactConfig,
    DeformedCurve,
    ProjectionError,
    UndefinedStiffness,
    chord_angles,
    closest_point_projection,
    contact_force,
    contact_residual,
    contact_stiffness_matrix,
    detect_contacts,
    effective_contact_stiffness,
    exact_normal_jumps,
    faceted_boundary,
    gap,
    gaps,
    project_points,
    sagitta,
    unit_normals,
)
from igacontact.mesh import build_dof_map
from igacontact.nurbs import make_arc, refine
from igacontact.scene import SceneConfig, build_scene
from igacontact.validation import brute_force_projection, projection_queries

R_S = 29.225e-3
CENTER = np.array([0.0, R_S])


@pytest.fixture(scope="module")
def sheath_arc():
    return refine(make_arc(CENTER, R_S, -5 * math.pi / 6, -math.pi / 6), 4)


def test_projection_matches_brute_force(sheath_arc):
    xs, _ = projection_queries(sheath_arc, 200, seed=11)
    u, res = project_points(xs, sheath_arc, np.full(200, 0.5))
    oracle = np.array([brute_force_projection(x, sheath_arc) for x in xs])
    assert np.abs(u - oracle).max() < 1e-8
    assert res.max() < 1e-10


def test_projection_of_circle_points_is_radial(sheath_arc):
    # the closest point of a circle lies on the ray from its centre
    xs, _ = projection_queries(sheath_arc, 50, seed=12)
    u, _ = project_points(xs, sheath_arc, np.full(50, 0.5))
    xm = sheath_arc.evaluate(u)[:, 0]
    a = xs - CENTER
    b = xm - CENTER
    cross = a[:, 0] * b[:, 1] - a[:, 1] * b[:, 0]
    assert np.abs(cross).max() < 1e-15


def test_warm_and_cold_start_agree(sheath_arc):
    xs, u_true = projection_queries(sheath_arc, 100, seed=13)
    cold, _ = project_points(xs, sheath_arc, np.full(100, 0.5))
    warm, _ = project_points(xs, sheath_arc, u_true + 1e-3)
    np.testing.assert_allclose(cold, warm, atol=1e-12)


def test_point_beyond_end_projects_to_end(sheath_arc):
    end = sheath_arc.evaluate(1.0, 1)[0]
    x = end[0] + 1e-3 * end[1] / np.linalg.norm(end[1])
    assert closest_point_projection(x, sheath_arc) == 1.0


def test_projection_failure_names_the_point(sheath_arc):
    cfg = ContactConfig(max_iterations=1, projection_tol=1e-30)
    with pytest.raises(ProjectionError, match="slave point"):
        closest_point_projection(np.array([0.01, 0.001]), sheath_arc, cfg=cfg)


def test_deformed_curve_split_evaluation(sheath_arc):
    d = np.random.default_rng(0).normal(scale=1e-6, size=sheath_arc.control_points.shape)
    dc = DeformedCurve(sheath_arc, d)
    u = np.linspace(0, 1, 17)
    np.testing.assert_allclose(dc.evaluate(u, 1), dc.current().evaluate(u, 1), atol=1e-17)


def test_deformed_curve_with_coarse_reference():
    coarse = make_arc(CENTER, R_S, -5 * math.pi / 6, -math.pi / 6)
    fine = refine(coarse, 4)
    dc = DeformedCurve(coarse, np.zeros_like(fine.control_points), basis=fine)
    u = np.linspace(0, 1, 33)
    np.testing.assert_allclose(dc.evaluate(u, 2), fine.evaluate(u, 2), atol=1e-15)
    assert dc.knotvec is fine.knotvec


def test_gap_sign_and_magnitude(sheath_arc):
    # sheath material lies outside the inner arc; its outward normal points at the centre
    for r, expected in ((R_S - 1e-4, 1e-4), (R_S + 2e-5, -2e-5)):
        x = CENTER + r * np.array([math.cos(-1.3), math.sin(-1.3)])
        u = closest_point_projection(x, sheath_arc)
        g, n = gap(x, sheath_arc, u, normal_sign=1)
        assert g == pytest.approx(expected, rel=1e-9)
        np.testing.assert_allclose(n, -(x - CENTER) / np.linalg.norm(x - CENTER), atol=1e-12)


def test_gaps_vectorised(sheath_arc):
    xs, _ = projection_queries(sheath_arc, 30, seed=14)
    u, _ = project_points(xs, sheath_arc, np.full(30, 0.5))
    g, _ = gaps(xs, sheath_arc, u, 1)
    exact = R_S - np.linalg.norm(xs - CENTER, axis=1)
    np.testing.assert_allclose(g, exact, atol=1e-15)


def test_unit_normals():
    n = unit_normals(np.array([[2.0, 0.0], [0.0, -3.0]]), 1)
    np.testing.assert_allclose(n, [[0, 1], [1, 0]])
    np.testing.assert_allclose(unit_normals(np.array([[2.0, 0.0]]), -1), [[0, -1]])
    with pytest.raises(ValueError):
        unit_normals(np.array([[0.0, 0.0]]))


def test_penalty_force():
    np.testing.assert_allclose(contact_force(np.array([-1e-9, 0.0, 2e-9]), 1e12), [1000.0, 0.0, 0.0])


def test_effective_stiffness():
    assert effective_contact_stiffness(0.0, 0.0) == 0.0
    assert effective_contact_stiffness(10.0, 2e-9) == pytest.approx(5e9)
    with pytest.raises(UndefinedStiffness):
        effective_contact_stiffness(10.0, 1e-20)


def _scene_pairs(disp_slave=None, disp_master=None, cfg=ContactConfig()):
    scene = build_scene(SceneConfig())
    if disp_slave is not None:
        scene.slave.disp = disp_slave
    if disp_master is not None:
        scene.master.disp = disp_master
    dm = build_dof_map(scene.bodies)
    return scene, dm, detect_contacts(scene.slave, scene.master, cfg, dm)


def test_reference_configuration_is_tangent_at_the_centre():
    _, _, pairs = _scene_pairs()
    assert len(pairs) == 15  # 5 spans x 3 stations
    centre = [p for p in pairs if p.u_s == 0.5]
    assert len(centre) == 1
    assert centre[0].gap == 0.0 and not centre[0].active
    assert min(p.gap for p in pairs) == 0.0


def test_rigid_slave_translation_gives_exact_penetration():
    scene, _, _ = _scene_pairs()
    d = np.zeros((scene.slave.patch.n_control_points, 2))
    d[:, 1] = -1e-9
    _, _, pairs = _scene_pairs(disp_slave=d)
    p = min(pairs, key=lambda p: p.gap)
    assert p.gap == pytest.approx(-1e-9, rel=1e-12)
    assert p.force == pytest.approx(1000.0, rel=1e-12)


def test_gap_gradient_matches_finite_differences():
    rng = np.random.default_rng(5)
    scene, dm, _ = _scene_pairs()
    ns, nm = scene.slave.patch.n_control_points, scene.master.patch.n_control_points
    ds = np.zeros((ns, 2))
    ds[:, 1] = -3e-9
    _, _, pairs0 = _scene_pairs(disp_slave=ds)
    p = min(pairs0, key=lambda q: q.gap)
    G = p.gap_gradient()
    h = 1e-8
    for k in rng.choice(G.size, 8, replace=False):
        dof = int(p.dofs[k])
        ds2, dm2 = ds.copy(), np.zeros((nm, 2))
        if dof < 2 * ns:
            ds2.reshape(-1)[dof] += h
        else:
            dm2.reshape(-1)[dof - 2 * ns] += h
        _, _, pairs1 = _scene_pairs(disp_slave=ds2, disp_master=dm2)
        q = next(q for q in pairs1 if q.u_s == p.u_s)
        assert (q.gap - p.gap) / h == pytest.approx(G[k], abs=1e-6)


def test_contact_stiffness_is_rank_one_psd():
    scene, _, _ = _scene_pairs()
    d = np.zeros((scene.slave.patch.n_control_points, 2))
    d[:, 1] = -1e-9
    _, _, pairs = _scene_pairs(disp_slave=d)
    p = next(p for p in pairs if p.active)
    dofs, K = contact_stiffness_matrix(p, ContactConfig())
    assert np.array_equal(dofs, p.dofs)
    np.testing.assert_allclose(K, K.T)
    ev = np.linalg.eigvalsh(K)
    assert ev.min() > -1e-6 * ev.max()
    assert np.sum(ev > 1e-9 * ev.max()) == 1
    # slave and master receive equal and opposite forces
    _, f = contact_residual(p)
    n = len(p.slave_dofs)
    np.testing.assert_allclose(f[:n].reshape(-1, 2).sum(0), -f[n:].reshape(-1, 2).sum(0), atol=1e-9)
    np.testing.assert_allclose(f[:n].reshape(-1, 2).sum(0), p.force * p.normal, rtol=1e-12)


def test_inactive_pair_has_no_stiffness():
    _, _, pairs = _scene_pairs()
    p = pairs[0]
    assert not p.active
    _, K = contact_stiffness_matrix(p, ContactConfig())
    assert not K.any()
    _, f = contact_residual(p)
    assert not f.any()


def test_consistent_weights_integrate_edge_length():
    _, _, pairs = _scene_pairs(cfg=ContactConfig(integration="consistent"))
    length = 7.1e-3 * 2 * math.pi / 3
    assert sum(p.weight for p in pairs) == pytest.approx(length, rel=1e-6)


def test_exact_boundary_has_no_normal_jumps(sheath_arc):
    assert exact_normal_jumps(sheath_arc).max() < 1e-12


@pytest.mark.parametrize("segments", [4, 16, 64])
def test_faceted_boundary_jumps_and_sagitta(sheath_arc, segments):
    poly = faceted_boundary(sheath_arc, segments, 1)
    jumps = poly.normal_jumps()
    assert jumps.size == segments - 1
    assert jumps.min() > 0
    # the jump at each vertex equals half the sum of neighbouring chord angles
    th = chord_angles(CENTER, poly.vertices)
    np.testing.assert_allclose(jumps, 0.5 * (th[:-1] + th[1:]), rtol=1e-9)
    on_arc = sheath_arc.evaluate(np.linspace(0, 1, 4001))[:, 0]
    _, g, _, _, _ = poly.project(on_arc)
    bound = sagitta(R_S, th).max()
    assert np.abs(g).max() <= bound * (1 + 1e-9)
    assert np.abs(g).max() >= 0.9 * bound


def test_sagitta_formula():
    assert sagitta(1.0, math.pi) == pytest.approx(1.0)
    assert sagitta(2.0, 1e-3) == pytest.approx(2.0 * 1e-6 / 8, rel=1e-6)


def test_faceted_detection_runs():
    _, _, pairs = _scene_pairs(cfg=ContactConfig(boundary_mode="faceted", segments=16))
    assert len(pairs) == 15
    # the polyline chords lie inside the arc, so the tangent tube already overlaps one vertex region
    assert min(p.gap for p in pairs) <= 0.0


@pytest.mark.parametrize(
    "kw",
    [
        {"penalty": 0},
        {"projection_tol": -1},
        {"max_iterations": 0},
        {"boundary_mode": "polygon"},
        {"integration": "mortar"},
        {"boundary_mode": "faceted", "segments": 1},
    ],
)
def test_contact_config_validation(kw):
    with pytest.raises(ValueError):
        ContactConfig(**kw)
