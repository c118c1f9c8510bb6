"""Invariant checks shared by the ``validate`` command and the test suite."""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
from scipy import stats
from scipy.optimize import minimize_scalar

from .contact import ContactConfig, exact_normal_jumps, faceted_boundary, project_points
from .elasticity import Material, constitutive_plane_strain
from .mesh import build_dof_map
from .nurbs import KnotVector, NurbsCurve, NurbsPatch, make_annulus_patch, make_arc, refine
from .scene import SceneConfig, build_scene
from .solver import Body, apply_boundary_conditions, assemble, boundary_values, run_load_steps, solve_step


@dataclass(frozen=True)
class Check:
    name: str
    passed: bool
    detail: str

    def line(self) -> str:
        return f"{'PASS' if self.passed else 'FAIL'}  {self.name}: {self.detail}"


def arc_radial_error(samples: int = 1000, seed: int = 0) -> float:
    """Largest relative radial deviation of a 120 degree arc at random parameters."""
    rng = np.random.default_rng(seed)
    c, r = np.array([0.3, -0.2]), 29.225e-3
    arc = make_arc(c, r, -5 * math.pi / 6, -math.pi / 6)
    x = arc.evaluate(rng.random(samples))[:, 0]
    return float(np.abs(np.hypot(*(x - c).T) / r - 1).max())


def refinement_drift(insertions: int = 6, samples: int = 1000, seed: int = 1) -> float:
    """Largest point movement (m) caused by knot insertion on a sheath sector."""
    rng = np.random.default_rng(seed)
    p = make_annulus_patch((0.0, 29.225e-3), 29.225e-3, 30.225e-3, -5 * math.pi / 6, -math.pi / 6)
    q = refine(p, insertions)
    u, v = rng.random(samples), rng.random(samples)
    return float(np.abs(p.evaluate(u, v) - q.evaluate(u, v)).max())


def partition_of_unity_error(curve: NurbsCurve, samples: int = 1000, seed: int = 2) -> float:
    rng = np.random.default_rng(seed)
    _, R = curve.rational_basis(rng.random(samples), 1)
    return float(max(np.abs(R[:, 0].sum(1) - 1).max(), np.abs(R[:, 1].sum(1)).max()))


def brute_force_projection(x, curve: NurbsCurve, samples: int = 20001) -> float:
    """Closest parameter by dense sampling, polished by bounded scalar search."""
    u = np.linspace(0.0, 1.0, samples)
    pts = curve.evaluate(u)[:, 0]
    i = int(np.argmin(np.sum((pts - x) ** 2, axis=1)))
    lo, hi = u[max(i - 1, 0)], u[min(i + 1, samples - 1)]

    def d2(t):
        return float(np.sum((curve.evaluate(t)[0, 0] - x) ** 2))

    res = minimize_scalar(d2, bounds=(lo, hi), method="bounded", options={"xatol": 1e-13})
    return float(res.x)


def projection_queries(curve: NurbsCurve, n: int, seed: int = 3, band: float = 2e-3) -> tuple[np.ndarray, np.ndarray]:
    """Random points within ``band`` of the interior of ``curve``, and their base parameters."""
    rng = np.random.default_rng(seed)
    u = rng.uniform(0.02, 0.98, n)
    d = curve.evaluate(u, 1)
    t = d[:, 1] / np.linalg.norm(d[:, 1], axis=1, keepdims=True)
    nrm = np.stack([-t[:, 1], t[:, 0]], axis=1)
    return d[:, 0] + rng.uniform(-band, band, (n, 1)) * nrm, u


def projection_error(n: int = 1000, seed: int = 3) -> float:
    sheath = build_scene(SceneConfig()).master
    curve, _, _ = sheath.contact_surface()
    xs, _ = projection_queries(curve.reference, n, seed)
    u, _ = project_points(xs, curve, np.full(n, 0.5), ContactConfig())
    oracle = np.array([brute_force_projection(x, curve.reference) for x in xs])
    return float(np.abs(u - oracle).max())


QUAD_CORNERS = ((0.0, 0.0), (2.0, 0.3), (0.2, 1.1), (1.7, 1.6))  # u0v0, u1v0, u0v1, u1v1


def quad_patch(corners=QUAD_CORNERS, insertions: int = 0) -> NurbsPatch:
    """Straight-sided quadrilateral as a biquadratic patch with unit weights."""
    c = np.asarray(corners, dtype=float)
    s = np.array([0.0, 0.5, 1.0])
    su, sv = np.meshgrid(s, s, indexing="ij")
    net = (
        ((1 - su) * (1 - sv))[..., None] * c[0]
        + (su * (1 - sv))[..., None] * c[1]
        + ((1 - su) * sv)[..., None] * c[2]
        + (su * sv)[..., None] * c[3]
    )
    kv = KnotVector(2, [0, 0, 0, 1, 1, 1])
    return refine(NurbsPatch(kv, kv, net, np.ones((3, 3))), insertions)


def patch_test(strain=(-1e-4, -2e-4, 0.0), insertions: int = 0, material=Material(7e8, 0.35), patch=None):
    """Displacement patch test.

    Boundary control points follow the linear field of ``strain``; the interior
    is solved for.  Returns ``(stresses at Gauss points (m, 3), exact stress (3,))``.
    """
    exx, eyy, gxy = strain
    G = np.array([[exx, 0.5 * gxy], [0.5 * gxy, eyy]])
    patch = quad_patch(insertions=insertions) if patch is None else patch
    body = Body("patch", patch, material, contact_edge="v0")
    dm = build_dof_map([body])
    K, _, F = assemble([body], [], dm, ContactConfig(), 3)
    X = patch.flat_points()
    boundary = np.unique(np.concatenate([patch.edge_indices(e) for e in ("u0", "u1", "v0", "v1")]))
    exact_disp = X @ G.T
    prescribed = {}
    for cp in boundary:
        for c in range(2):
            prescribed[int(dm.dof(0, cp, c))] = float(exact_disp[cp, c])
    Kff, Ff, free, fixed, uf = apply_boundary_conditions(K, F, prescribed)
    U = np.zeros(dm.n_dof)
    U[free], _ = solve_step(Kff, Ff)
    U[fixed] = uf
    body.disp = U.reshape(-1, 2)
    # strains on the reference configuration
    eps = body.quadrature(3).strains(body.reference_points, body.disp)
    D = constitutive_plane_strain(material)
    return (eps @ D.T).reshape(-1, 3), D @ np.array(strain)


def stiffness_properties(insertions: int = 4):
    """``(relative asymmetry of K, smallest eigenvalue of the constrained K)`` on the reference scene."""
    scene = build_scene(SceneConfig().with_(insertions=insertions))
    dm = build_dof_map(scene.bodies)
    K, _, F = assemble(scene.bodies, [], dm, scene.contact, scene.solver.gauss_points)
    K = K.toarray()
    asym = float(np.abs(K - K.T).max() / np.abs(K).max())
    Kff, _, _, _, _ = apply_boundary_conditions(sp.csr_matrix(K), F, boundary_values(scene, dm, 1e-9))
    return asym, float(np.linalg.eigvalsh(Kff.toarray())[0])


def linearity_r2(history, first: int = 10) -> float:
    F = history.column("contact_force")[first - 1 :]
    d = history.column("master_displacement")[first - 1 :]
    return float(stats.linregress(d, F).rvalue ** 2)


def run_checks(quick: bool = False) -> list[Check]:
    out = []

    def add(name, ok, detail):
        out.append(Check(name, bool(ok), detail))

    e = arc_radial_error()
    add("arc radial error", e < 1e-12, f"{e:.2e} (< 1e-12)")
    e = refinement_drift()
    add("knot insertion preserves geometry", e < 1e-12, f"{e:.2e} m (< 1e-12)")
    scene = build_scene(SceneConfig())
    curve, _, sign = scene.master.contact_surface()
    e = partition_of_unity_error(curve.basis)
    add("partition of unity", e < 1e-12, f"{e:.2e} (< 1e-12)")
    e = projection_error(100 if quick else 300)
    add("projection vs brute force", e < 1e-8, f"{e:.2e} (< 1e-8)")
    j = exact_normal_jumps(curve.basis, sign)
    add("exact boundary normal continuity", j.max() < 1e-12, f"max jump {j.max():.2e} rad")
    fj = faceted_boundary(curve, 16, sign).normal_jumps()
    add("faceted boundary normal jumps", fj.min() > 0, f"min jump {fj.min():.3e} rad")
    sig, exact = patch_test()
    e = float(np.abs(sig - exact).max() / np.abs(exact).max())
    add("patch test", e < 1e-8, f"{e:.2e} relative (< 1e-8)")
    asym, lam = stiffness_properties()
    add("stiffness symmetry", asym < 1e-12, f"{asym:.2e} relative")
    add("constrained stiffness SPD", lam > 0, f"smallest eigenvalue {lam:.3e}")

    h = run_load_steps(scene, steps=20 if quick else None)
    res = h.column("residual").max()
    add("solve residual", res < 1e-10, f"max {res:.2e} (< 1e-10)")
    presc = h.column("prescribed")
    ok = all(p == k * scene.schedule.increment for k, p in enumerate(presc, 1))
    add("cumulative prescribed displacement", ok, f"{presc[-1]:.3e} m after {len(presc)} steps")
    f1 = h.steps[0].contact_force
    add("first-step force", abs(f1 / 1000.0 - 1) < 1e-9, f"{f1!r} N/m")
    r2 = linearity_r2(h)
    add("force-displacement linearity", r2 > 0.999, f"R^2 = {r2:.9f}")
    return out
