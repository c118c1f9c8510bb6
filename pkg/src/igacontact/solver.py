"""Global assembly, Dirichlet elimination, sparse solve and the load-step loop."""

from __future__ import annotations

import logging
import time
from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .contact import (
    ContactConfig,
    ContactPair,
    DeformedCurve,
    UndefinedStiffness,
    contact_residual,
    contact_stiffness_matrix,
    detect_contacts,
    effective_contact_stiffness,
)
from .elasticity import Material, PatchQuadrature, constitutive_plane_strain
from .mesh import DofMap, build_dof_map, extract_elements, gauss_rule
from .nurbs import NurbsPatch

log = logging.getLogger(__name__)


class ConfigError(ValueError):
    pass


class SolverError(RuntimeError):
    pass


class Body:
    """A patch with a material, boundary tags and its current displacement.

    ``contact_edge``, ``fixed_edges`` and ``driven_edges`` name patch edges
    (``u0``, ``u1``, ``v0``, ``v1``).  ``geometry`` is an optional coarser
    patch with the same mapping, used for the reference contact surface.
    """

    def __init__(
        self,
        name: str,
        patch: NurbsPatch,
        material: Material,
        contact_edge: str,
        fixed_edges=(),
        driven_edges=(),
        index: int = 0,
        geometry: NurbsPatch | None = None,
    ):
        self.name = name
        self.patch = patch
        self.material = material
        self.contact_edge = contact_edge
        self.fixed_edges = tuple(fixed_edges)
        self.driven_edges = tuple(driven_edges)
        self.index = index
        self.geometry = patch if geometry is None else geometry
        self.disp = np.zeros((patch.n_control_points, 2))
        self.elements = extract_elements(patch, index)
        self._quad = {}

    @property
    def reference_points(self) -> np.ndarray:
        return self.patch.flat_points()

    def current_points(self) -> np.ndarray:
        return self.reference_points + self.disp

    def quadrature(self, n_gauss: int) -> PatchQuadrature:
        if n_gauss not in self._quad:
            self._quad[n_gauss] = PatchQuadrature(self.patch, self.elements, gauss_rule(n_gauss))
        return self._quad[n_gauss]

    def contact_normal_sign(self) -> int:
        """+1 if the left normal of the contact edge points out of the body."""
        edge = self.contact_edge
        curve = self.patch.edge_curve(edge)
        t = curve.evaluate(0.5, 1)[0, 1]
        left = np.array([-t[1], t[0]])
        inner = {"v0": (0.5, 0.25), "v1": (0.5, 0.75), "u0": (0.25, 0.5), "u1": (0.75, 0.5)}[edge]
        into_body = self.patch.evaluate(*inner)[0] - curve.evaluate(0.5)[0, 0]
        return -1 if left @ into_body > 0 else 1

    def contact_surface(self):
        """``(deformed edge curve, flat control-point indices, outward normal sign)``."""
        idx = self.patch.edge_indices(self.contact_edge)
        curve = DeformedCurve(
            self.geometry.edge_curve(self.contact_edge),
            self.disp[idx],
            basis=self.patch.edge_curve(self.contact_edge),
        )
        return curve, idx, self.contact_normal_sign()

    def reset(self):
        self.disp[:] = 0.0


@dataclass(frozen=True)
class LoadSchedule:
    increment: float = 1e-9  # m per step
    total: float = 1e-7  # m

    def __post_init__(self):
        if not self.increment > 0:
            raise ConfigError("load increment must be positive")
        ratio = self.total / self.increment
        if ratio < 1 or abs(ratio - round(ratio)) > 1e-9 * ratio:
            raise ConfigError(f"total displacement {self.total} is not an integer multiple of {self.increment}")

    @property
    def steps(self) -> int:
        return int(round(self.total / self.increment))


@dataclass(frozen=True)
class SolverConfig:
    gauss_points: int = 3
    residual_tol: float = 1e-10
    check_spd: bool = False


@dataclass
class Scene:
    slave: Body
    master: Body
    contact: ContactConfig = field(default_factory=ContactConfig)
    schedule: LoadSchedule = field(default_factory=LoadSchedule)
    solver: SolverConfig = field(default_factory=SolverConfig)
    refinement: int = 0
    name: str = "scene"

    def __post_init__(self):
        if self.slave is self.master:
            raise ConfigError("slave and master must be different bodies")
        if not self.slave.driven_edges:
            raise ConfigError("the slave body needs a driven edge")
        if not self.master.fixed_edges:
            raise ConfigError("the master body needs a fixed edge")
        self.slave.index, self.master.index = 0, 1
        for b in self.bodies:
            b.elements = extract_elements(b.patch, b.index)
            b._quad = {}

    @property
    def bodies(self) -> list[Body]:
        return [self.slave, self.master]

    def reset(self):
        for b in self.bodies:
            b.reset()


@dataclass
class StepResult:
    step: int
    U: np.ndarray  # total control-point displacement vector (global numbering)
    contact_force: float  # N/m
    max_penetration: float  # m
    slave_displacement: float  # m, towards the master at the contact point
    master_displacement: float  # m, at the master contact point
    stiffness: float  # N/m^2, nan when undefined
    sigma_ymax: float  # Pa
    residual: float
    n_active: int
    prescribed: float  # cumulative prescribed displacement, m
    pairs: list[ContactPair] = field(default_factory=list, repr=False)


@dataclass
class RunHistory:
    steps: list[StepResult]
    n_elements: int
    n_dof: int
    wall_time: float = 0.0

    def column(self, name: str) -> np.ndarray:
        return np.array([getattr(s, name) for s in self.steps])

    @property
    def final(self) -> StepResult:
        return self.steps[-1]


def _scatter(blocks: list[tuple[np.ndarray, np.ndarray]], n: int) -> sp.csr_matrix:
    rows, cols, vals = [], [], []
    for dofs, ke in blocks:
        if dofs.size and (dofs.min() < 0 or dofs.max() >= n):
            raise IndexError("element DOF outside the global system")
        rows.append(np.repeat(dofs, dofs.size))
        cols.append(np.tile(dofs, dofs.size))
        vals.append(ke.reshape(-1))
    if not rows:
        return sp.csr_matrix((n, n))
    return sp.coo_matrix((np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))), shape=(n, n)).tocsr()


def body_stiffness(body: Body, dofmap: DofMap, n_gauss: int = 3) -> sp.csr_matrix:
    """Material stiffness of one body on its current geometry."""
    quad = body.quadrature(n_gauss)
    Ke = quad.stiffness(body.current_points(), constitutive_plane_strain(body.material))
    base = 2 * (dofmap.offsets[body.index] + quad.cp)
    dofs = np.stack([base, base + 1], axis=2).reshape(base.shape[0], -1)  # (ne, 2nl)
    n = dofmap.n_dof
    ne, nd = dofs.shape
    rows = np.repeat(dofs, nd, axis=1).reshape(-1)
    cols = np.tile(dofs, (1, nd)).reshape(-1)
    return sp.coo_matrix((Ke.reshape(-1), (rows, cols)), shape=(n, n)).tocsr()


def assemble(bodies, contacts, dofmap: DofMap, cfg: ContactConfig = ContactConfig(), n_gauss: int = 3):
    """Global ``(K_g, K_c, F)``; ``F`` holds penalty forces of active pairs.

    The system matrix is ``K_g + K_c``.
    """
    n = dofmap.n_dof
    Kg = sp.csr_matrix((n, n))
    for b in bodies:
        Kg = Kg + body_stiffness(b, dofmap, n_gauss)
    active = [p for p in contacts if p.active]
    Kc = _scatter([contact_stiffness_matrix(p, cfg) for p in active], n)
    F = np.zeros(n)
    for p in active:
        dofs, f = contact_residual(p)
        np.add.at(F, dofs, f)
    return Kg, Kc, F


def boundary_values(scene: Scene, dofmap: DofMap, increment: float) -> dict[int, float]:
    """Prescribed incremental values per global DOF.

    Fixed edges of either body are clamped in x and y.  Driven edges of the
    slave get ``-increment`` in y and 0 in x.
    """
    values: dict[int, float] = {}

    def put(dof, val):
        dof = int(dof)
        if dof in values and values[dof] != val:
            raise ConfigError(f"DOF {dof} prescribed twice with different values")
        values[dof] = val

    for body in scene.bodies:
        for edge in body.fixed_edges:
            for cp in body.patch.edge_indices(edge):
                put(dofmap.dof(body.index, cp, 0), 0.0)
                put(dofmap.dof(body.index, cp, 1), 0.0)
        for edge in body.driven_edges:
            for cp in body.patch.edge_indices(edge):
                put(dofmap.dof(body.index, cp, 0), 0.0)
                put(dofmap.dof(body.index, cp, 1), -increment)
    return values


def apply_boundary_conditions(K: sp.spmatrix, F: np.ndarray, prescribed: dict[int, float]):
    """Eliminate prescribed DOFs; returns ``(K_ff, F_f, free, fixed, u_fixed)``."""
    n = K.shape[0]
    fixed = np.array(sorted(prescribed), dtype=int)
    u_fixed = np.array([prescribed[d] for d in fixed])
    free = np.setdiff1d(np.arange(n), fixed)
    K = K.tocsr()
    Kff = K[free][:, free]
    Kfp = K[free][:, fixed]
    Ff = F[free] - Kfp @ u_fixed
    return Kff.tocsc(), Ff, free, fixed, u_fixed


def solve_step(K: sp.spmatrix, F: np.ndarray, step: int | None = None, tol: float = 1e-10):
    """Sparse LU solve with a residual check; returns ``(U, relative residual)``."""
    where = f" at step {step}" if step is not None else ""
    try:
        lu = spla.splu(sp.csc_matrix(K))
        U = lu.solve(F)
    except RuntimeError as exc:  # SuperLU signals singular factors this way
        raise SolverError(f"factorization failed{where}: {exc}") from exc
    if not np.all(np.isfinite(U)):
        raise SolverError(f"non-finite solution{where}")
    r = np.linalg.norm(K @ U - F)
    nF = np.linalg.norm(F)
    rel = r / nF if nF > 0 else r
    if rel > tol:
        raise SolverError(f"solve residual {rel:.3e} exceeds {tol:.1e}{where}")
    return U, rel


def stress_samples(body: Body, n_gauss: int = 3):
    """Physical Gauss points ``(ne, ng, 2)`` and stresses ``(ne, ng, 3)`` of a body."""
    quad = body.quadrature(n_gauss)
    pts = body.current_points()
    eps = quad.strains(pts, body.disp)
    D = constitutive_plane_strain(body.material)
    return quad.physical_points(pts), eps @ D.T


def _contact_point(pairs: list[ContactPair]):
    if not pairs:
        return None
    active = [p for p in pairs if p.active]
    if active:
        return max(active, key=lambda p: (p.force, -abs(p.u_s - 0.5)))
    return min(pairs, key=lambda p: p.gap)


def _step(scene, dofmap, k, pairs, u_warm, U, f_int, prescribed):
    """One load step; ``U`` and ``f_int`` are updated in place."""
    bodies = scene.bodies
    n = dofmap.n_dof
    ng = scene.solver.gauss_points
    cfg = scene.contact
    Kg, Kc, Fc = assemble(bodies, pairs, dofmap, cfg, ng)
    K = (Kg + Kc).tocsr()
    R = Fc - f_int
    Kff, Ff, free, fixed, ufix = apply_boundary_conditions(K, R, prescribed)
    if scene.solver.check_spd:
        ev = np.linalg.eigvalsh(Kff.toarray())
        if ev[0] <= 0:
            raise SolverError(f"constrained matrix not positive definite at step {k}")
    dUf, res = solve_step(Kff, Ff, k, scene.solver.residual_tol)
    dU = np.zeros(n)
    dU[free] = dUf
    dU[fixed] = ufix
    U += dU
    f_int += Kg @ dU
    for b in bodies:
        b.disp = U[dofmap.body_dofs(b.index)].reshape(-1, 2).copy()

    pairs = detect_contacts(scene.slave, scene.master, cfg, dofmap, u_warm, ng)
    u_warm = np.array([p.u_m for p in pairs])
    active = [p for p in pairs if p.active]
    Fc_total = float(sum(p.force * p.weight for p in active))
    pen = max((-p.gap for p in active), default=0.0)
    cp = _contact_point(pairs)
    d_s = float(-cp.slave_disp @ cp.normal) if cp else 0.0
    d_m = float(-cp.master_disp @ cp.normal) if cp else 0.0
    try:
        S = effective_contact_stiffness(Fc_total, d_m)
    except UndefinedStiffness:
        S = float("nan")
    _, sig = stress_samples(scene.slave, ng)
    rec = StepResult(
        step=k,
        U=U.copy(),
        contact_force=Fc_total,
        max_penetration=pen,
        slave_displacement=d_s,
        master_displacement=d_m,
        stiffness=S,
        sigma_ymax=float(np.abs(sig[..., 1]).max()),
        residual=res,
        n_active=len(active),
        prescribed=k * scene.schedule.increment,
        pairs=pairs,
    )
    return pairs, u_warm, rec


def run_load_steps(scene: Scene, keep_pairs: bool = False, steps: int | None = None) -> RunHistory:
    """Incremental penalty contact loop.

    Each step assembles elastic stiffness on the current geometry plus the
    penalty terms of the pairs found at the end of the previous step, imposes
    the displacement increment, solves once, moves the control points and
    repeats the contact search.
    """
    t0 = time.perf_counter()
    scene.reset()
    bodies = scene.bodies
    dofmap = build_dof_map(bodies)
    n = dofmap.n_dof
    n_steps = scene.schedule.steps if steps is None else steps
    prescribed = boundary_values(scene, dofmap, scene.schedule.increment)
    U = np.zeros(n)
    f_int = np.zeros(n)
    pairs: list[ContactPair] = []
    u_warm = None
    history = []
    for k in range(1, n_steps + 1):
        try:
            pairs, u_warm, rec = _step(scene, dofmap, k, pairs, u_warm, U, f_int, prescribed)
        except SolverError:
            raise
        except (ValueError, RuntimeError, np.linalg.LinAlgError) as exc:
            raise SolverError(f"step {k}: {exc}") from exc
        if not keep_pairs:
            rec.pairs = []
        history.append(rec)
        log.debug("step %d: F_c=%.4e N/m, pen=%.3e m, active=%d", k, rec.contact_force, rec.max_penetration, rec.n_active)
    n_el = sum(len(b.elements) for b in bodies)
    return RunHistory(history, n_el, n, time.perf_counter() - t0)
