import math

import numpy as np
import pytest

from igacontact.mesh import DofMap, build_dof_map, extract_elements, gauss_rule
from igacontact.nurbs import make_annulus_patch, refine
from igacontact.scene import SceneConfig, build_scene

MESH_COUNTS = [
    (0, 2, 36),
    (2, 18, 100),
    (4, 50, 196),
    (6, 98, 324),
    (8, 162, 484),
    (10, 242, 676),
    (14, 450, 1156),
    (18, 722, 1764),
    (20, 882, 2116),
]


@pytest.mark.parametrize("k,elements,dof", MESH_COUNTS)
def test_mesh_bookkeeping(k, elements, dof):
    scene = build_scene(SceneConfig().with_(insertions=k))
    assert sum(len(b.elements) for b in scene.bodies) == elements
    assert build_dof_map(scene.bodies).n_dof == dof


@pytest.mark.parametrize("n", range(1, 11))
def test_gauss_rule_exact_for_degree_2n_minus_1(n):
    g = gauss_rule(n)
    assert g.n == n
    for d in range(2 * n):
        exact = 0.0 if d % 2 else 2.0 / (d + 1)
        assert g.weights @ g.points**d == pytest.approx(exact, abs=1e-13)


def test_gauss_rule_not_exact_beyond_its_degree():
    g = gauss_rule(3)
    assert abs(g.weights @ g.points**6 - 2 / 7) > 1e-3


def test_gauss_rule_smooth_integrand():
    g = gauss_rule(10)
    assert g.weights @ np.cos(g.points) == pytest.approx(2 * math.sin(1), abs=1e-14)


@pytest.mark.parametrize("n", [0, 11, -1])
def test_gauss_rule_order_limits(n):
    with pytest.raises(ValueError):
        gauss_rule(n)


def test_elements_cover_the_parameter_square():
    p = refine(make_annulus_patch((0, 0), 1, 2, 0, 1), 3)
    els = extract_elements(p)
    assert len(els) == 16
    assert sum(e.area for e in els) == pytest.approx(1.0)
    for e in els:
        assert len(e.cp) == 9
        assert len(set(e.cp)) == 9


def test_element_local_order_is_u_fastest():
    p = refine(make_annulus_patch((0, 0), 1, 2, 0, 1), 2)
    e = extract_elements(p)[0]
    n_u = p.shape[0]
    assert e.cp[:3] == (0, 1, 2)
    assert e.cp[3:6] == (n_u, n_u + 1, n_u + 2)


def test_repeated_knot_gives_no_zero_length_element():
    from igacontact.nurbs import knot_insert

    p = knot_insert(knot_insert(make_annulus_patch((0, 0), 1, 2, 0, 1), 0.5), 0.5)
    assert len(extract_elements(p)) == 2


def test_dof_numbering():
    dm = DofMap(offsets=(0, 9), counts=(9, 16))
    assert dm.n_dof == 50
    assert dm.dof(1, 0, 1) == 19
    np.testing.assert_array_equal(dm.body_dofs(1), np.arange(18, 50))
    with pytest.raises(IndexError):
        dm.dof(0, 9, 0)


def test_element_dofs_interleaved():
    scene = build_scene(SceneConfig().with_(insertions=0))
    dm = build_dof_map(scene.bodies)
    e = scene.master.elements[0]
    d = dm.element_dofs(e)
    assert d.size == 18
    np.testing.assert_array_equal(d[0::2] + 1, d[1::2])
    assert d.min() >= 18
