"""Stress recovery, study drivers and report files.

Every writer emits a header row with units and formats floats with ``repr`` so
files parse back losslessly and re-runs reproduce them byte for byte.
"""

from __future__ import annotations

import csv
import math
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .contact import chord_angles, exact_normal_jumps, faceted_boundary, sagitta
from .elasticity import _element_shape, constitutive_plane_strain
from .scene import SceneConfig, build_scene
from .solver import Body, RunHistory, SolverError, run_load_steps, stress_samples


@dataclass(frozen=True)
class StressSample:
    body: int
    point: tuple[float, float]  # m
    sxx: float  # Pa
    syy: float
    txy: float


def _grid_stresses(body: Body, disp: np.ndarray, grid: int) -> tuple[np.ndarray, np.ndarray]:
    """Stresses on a uniform ``grid x grid`` parameter lattice."""
    patch = body.patch
    t = np.linspace(0.0, 1.0, grid)
    uu, vv = (a.ravel() for a in np.meshgrid(t, t, indexing="ij"))
    su = patch.knotvec_u.find_spans(uu)
    sv = patch.knotvec_v.find_spans(vv)
    by_span = {el.span: el for el in body.elements}
    pts = patch.flat_points() + disp
    D = constitutive_plane_strain(body.material)
    xs, sig = [], []
    for u, v, a, b in zip(uu, vv, su, sv):
        el = by_span[(int(a), int(b))]
        (ua, ub), (va, vb) = el.u_range, el.v_range
        xi = np.array([2 * (u - ua) / (ub - ua) - 1])
        eta = np.array([2 * (v - va) / (vb - va) - 1])
        R, dR = _element_shape(patch, el, xi, eta)
        X = pts[np.asarray(el.cp)]
        J = X.T @ dR[0]
        dRdx = dR[0] @ np.linalg.inv(J)
        ue = disp[np.asarray(el.cp)]
        eps = np.array(
            [
                dRdx[:, 0] @ ue[:, 0],
                dRdx[:, 1] @ ue[:, 1],
                dRdx[:, 1] @ ue[:, 0] + dRdx[:, 0] @ ue[:, 1],
            ]
        )
        xs.append(R[0] @ X)
        sig.append(D @ eps)
    return np.array(xs), np.array(sig)


def stress_field(body: Body, U: np.ndarray | None = None, grid: int | None = None, n_gauss: int = 3):
    """Stress samples of a body for control-point displacements ``U`` ``(n_cp, 2)``.

    Gauss points are the default sample set; ``grid`` selects a uniform
    parameter lattice instead, for plotting.
    """
    disp = body.disp if U is None else np.asarray(U, dtype=float).reshape(-1, 2)
    saved = body.disp
    body.disp = disp
    try:
        if grid is None:
            x, s = stress_samples(body, n_gauss)
            x, s = x.reshape(-1, 2), s.reshape(-1, 3)
        else:
            x, s = _grid_stresses(body, disp, grid)
    finally:
        body.disp = saved
    return [StressSample(body.index, (float(a), float(b)), float(p), float(q), float(r)) for (a, b), (p, q, r) in zip(x, s)]


def sigma_ymax(samples: list[StressSample]) -> float:
    return max((abs(s.syy) for s in samples), default=0.0)


# ---- tables -----------------------------------------------------------------


def _fmt(v) -> str:
    if isinstance(v, float):
        return repr(v)
    return str(v)


def write_csv(path, header: list[str], rows) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with path.open("w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(header)
        for r in rows:
            w.writerow([_fmt(v) for v in r])
    return path


def read_csv(path) -> tuple[list[str], list[list]]:
    """Inverse of ``write_csv``; numeric cells come back as int or float."""

    def conv(c):
        for kind in (int, float):
            try:
                return kind(c)
            except ValueError:
                pass
        return c

    with Path(path).open(newline="") as fh:
        rows = list(csv.reader(fh))
    return rows[0], [[conv(c) for c in r] for r in rows[1:]]


HISTORY_HEADER = [
    "step",
    "F_c [N/m]",
    "max_gN [m]",
    "d_slave [m]",
    "d_master [m]",
    "S [N/m^2]",
    "sigma_ymax [Pa]",
]
PAIRS_HEADER = ["step", "slave_gp", "u_m [-]", "g_N [m]", "P_N [N/m^2]", "n_x [-]", "n_y [-]", "active"]
STRESS_HEADER = ["body", "x [m]", "y [m]", "sigma_xx [Pa]", "sigma_yy [Pa]", "tau_xy [Pa]"]
CONVERGE_HEADER = [
    "insertions",
    "elements",
    "dof",
    "sigma_ymax [Pa]",
    "sigma_ymax_sheath [Pa]",
    "F_c [N/m]",
]
PENALTY_HEADER = [
    "epsilon [N/m^2]",
    "status",
    "F_c [N/m]",
    "max_gN [m]",
    "d_slave [m]",
    "d_master [m]",
    "sigma_max_tube [Pa]",
    "sigma_max_sheath [Pa]",
]
FACET_HEADER = [
    "mode",
    "segments",
    "max_normal_jump [rad]",
    "min_normal_jump [rad]",
    "max_gap_error [m]",
    "sagitta_bound [m]",
    "F_c [N/m]",
    "max_gN [m]",
]


def history_rows(h: RunHistory):
    for r in h.steps:
        yield [
            r.step,
            r.contact_force,
            r.max_penetration,
            r.slave_displacement,
            r.master_displacement,
            r.stiffness,
            r.sigma_ymax,
        ]


def pair_rows(h: RunHistory):
    for r in h.steps:
        for i, p in enumerate(r.pairs):
            yield [r.step, i, p.u_m, p.gap, p.force, float(p.normal[0]), float(p.normal[1]), int(p.active)]


def write_run(h: RunHistory, scene, out_dir) -> list[Path]:
    """history.csv, contact_pairs.csv, stress_field.csv and summary.txt."""
    out = Path(out_dir)
    files = [
        write_csv(out / "history.csv", HISTORY_HEADER, history_rows(h)),
        write_csv(out / "contact_pairs.csv", PAIRS_HEADER, pair_rows(h)),
    ]
    samples = [s for b in scene.bodies for s in stress_field(b, n_gauss=scene.solver.gauss_points)]
    files.append(
        write_csv(
            out / "stress_field.csv",
            STRESS_HEADER,
            ([s.body, s.point[0], s.point[1], s.sxx, s.syy, s.txy] for s in samples),
        )
    )
    f = h.final
    lines = [
        f"scene = {scene.name}",
        f"insertions = {scene.refinement}",
        f"elements = {h.n_elements}",
        f"dof = {h.n_dof}",
        f"steps = {len(h.steps)}",
        f"penalty [N/m^2] = {scene.contact.penalty!r}",
        f"prescribed [m] = {f.prescribed!r}",
        f"final F_c [N/m] = {f.contact_force!r}",
        f"final max_gN [m] = {f.max_penetration!r}",
        f"final d_slave [m] = {f.slave_displacement!r}",
        f"final d_master [m] = {f.master_displacement!r}",
        f"final S [N/m^2] = {f.stiffness!r}",
        f"final sigma_ymax [Pa] = {f.sigma_ymax!r}",
        "first steps (step, F_c [N/m], max_gN [m]):",
    ]
    lines += [f"  {r.step}, {r.contact_force!r}, {r.max_penetration!r}" for r in h.steps[:5]]
    path = out / "summary.txt"
    path.write_text("\n".join(lines) + "\n")
    files.append(path)
    return files


# ---- studies ----------------------------------------------------------------


@dataclass(frozen=True)
class ConvergeRow:
    insertions: int
    elements: int
    dof: int
    sigma_ymax: float
    sigma_ymax_sheath: float
    contact_force: float


def converge_study(base: SceneConfig, insertions) -> list[ConvergeRow]:
    rows = []
    for k in sorted(set(int(k) for k in insertions)):
        scene = build_scene(base.with_(insertions=k))
        try:
            h = run_load_steps(scene)
        except SolverError as exc:
            raise SolverError(f"insertions={k}: {exc}") from exc
        sheath = sigma_ymax(stress_field(scene.master, n_gauss=scene.solver.gauss_points))
        rows.append(ConvergeRow(k, h.n_elements, h.n_dof, h.final.sigma_ymax, sheath, h.final.contact_force))
    return rows


def write_converge(rows: list[ConvergeRow], path) -> Path:
    return write_csv(
        path,
        CONVERGE_HEADER,
        ([r.insertions, r.elements, r.dof, r.sigma_ymax, r.sigma_ymax_sheath, r.contact_force] for r in rows),
    )


@dataclass(frozen=True)
class PenaltyRow:
    epsilon: float
    status: str
    contact_force: float = math.nan
    max_gap: float = math.nan  # largest penetration at the final step
    slave_displacement: float = math.nan
    master_displacement: float = math.nan
    sigma_max_tube: float = math.nan
    sigma_max_sheath: float = math.nan


def penalty_sweep(base: SceneConfig, epsilons) -> list[PenaltyRow]:
    """One full run per penalty value; failures are recorded, not raised."""
    rows = []
    for eps in sorted(float(e) for e in epsilons):
        try:
            scene = build_scene(base.with_contact(penalty=eps))
            h = run_load_steps(scene)
        except (SolverError, ValueError) as exc:
            rows.append(PenaltyRow(eps, f"failed: {exc}".replace(",", ";")))
            continue
        f = h.final
        n = scene.solver.gauss_points
        rows.append(
            PenaltyRow(
                eps,
                "ok",
                f.contact_force,
                f.max_penetration,
                f.slave_displacement,
                f.master_displacement,
                sigma_ymax(stress_field(scene.slave, n_gauss=n)),
                sigma_ymax(stress_field(scene.master, n_gauss=n)),
            )
        )
    return rows


def write_penalty(rows: list[PenaltyRow], path) -> Path:
    return write_csv(
        path,
        PENALTY_HEADER,
        (
            [
                r.epsilon,
                r.status,
                r.contact_force,
                r.max_gap,
                r.slave_displacement,
                r.master_displacement,
                r.sigma_max_tube,
                r.sigma_max_sheath,
            ]
            for r in rows
        ),
    )


@dataclass(frozen=True)
class FacetRow:
    mode: str
    segments: int
    max_normal_jump: float
    min_normal_jump: float
    max_gap_error: float
    sagitta_bound: float
    contact_force: float
    max_gap: float


def facet_compare(base: SceneConfig, segments: int = 16, samples: int = 4001, steps: int | None = None) -> list[FacetRow]:
    """Exact NURBS boundary against a polyline of ``segments`` chords.

    The gap error is the signed distance from points of the exact master arc
    to the polyline; for a circle it is bounded by the largest chord sagitta.
    """
    scene = build_scene(base)
    curve, _, sign = scene.master.contact_surface()
    center = np.array(base.contact_point) + np.array([0.0, base.sheath_inner_radius])
    radius = base.sheath_inner_radius

    exact_jumps = exact_normal_jumps(curve.basis, sign)
    poly = faceted_boundary(curve, segments, sign)
    u = np.linspace(0.0, 1.0, samples)
    on_arc = curve.evaluate(u)[:, 0]
    _, g, _, _, _ = poly.project(on_arc)
    bound = float(sagitta(radius, chord_angles(center, poly.vertices)).max())

    rows = []
    for mode in ("exact", "faceted"):
        cfg = base.with_contact(boundary_mode=mode, segments=segments)
        h = run_load_steps(build_scene(cfg), steps=steps)
        if mode == "exact":
            jumps, err = exact_jumps, 0.0
        else:
            jumps, err = poly.normal_jumps(), float(np.abs(g).max())
        jmax = float(np.max(jumps)) if len(jumps) else 0.0
        jmin = float(np.min(jumps)) if len(jumps) else 0.0
        rows.append(FacetRow(mode, segments, jmax, jmin, err, bound, h.final.contact_force, h.final.max_penetration))
    return rows


def write_facet(rows: list[FacetRow], path) -> Path:
    return write_csv(
        path,
        FACET_HEADER,
        (
            [
                r.mode,
                r.segments,
                r.max_normal_jump,
                r.min_normal_jump,
                r.max_gap_error,
                r.sagitta_bound,
                r.contact_force,
                r.max_gap,
            ]
            for r in rows
        ),
    )
