"""Knot-to-surface contact search, gap evaluation and penalty terms.

The slave boundary is sampled at Gauss points of its boundary elements; each
sample is projected onto the master boundary curve.  A deformed boundary is
carried as reference geometry plus a displacement curve on the same rational
basis, so nanometre gaps are evaluated without cancellation against
centimetre-sized coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .mesh import gauss_rule
from .nurbs import NurbsCurve


class ProjectionError(RuntimeError):
    pass


class UndefinedStiffness(ValueError):
    pass


@dataclass(frozen=True)
class ContactConfig:
    penalty: float = 1e12  # force per unit length per unit penetration
    projection_tol: float = 1e-10
    max_iterations: int = 30
    boundary_mode: str = "exact"  # "exact" or "faceted"
    segments: int = 16  # polyline segments in faceted mode
    integration: str = "pointwise"  # "pointwise" or "consistent"

    def __post_init__(self):
        if not self.penalty > 0:
            raise ValueError("penalty must be positive")
        if not self.projection_tol > 0:
            raise ValueError("projection tolerance must be positive")
        if self.max_iterations < 1:
            raise ValueError("max_iterations must be at least 1")
        if self.boundary_mode not in ("exact", "faceted"):
            raise ValueError(f"unknown boundary mode {self.boundary_mode!r}")
        if self.boundary_mode == "faceted" and self.segments < 2:
            raise ValueError("faceted mode needs at least 2 segments")
        if self.integration not in ("pointwise", "consistent"):
            raise ValueError(f"unknown contact integration {self.integration!r}")


class DeformedCurve:
    """Reference curve plus a control-point displacement field.

    ``basis`` carries the knots and weights of the displacement field and
    defaults to ``reference``.  A coarser ``reference`` describing the same
    geometry (e.g. before knot insertion) may be given; it evaluates with
    less rounding.
    """

    def __init__(self, reference: NurbsCurve, displacement=None, basis: NurbsCurve | None = None):
        self.reference = reference
        self.basis = reference if basis is None else basis
        if displacement is None:
            displacement = np.zeros_like(self.basis.control_points)
        self.displacement = NurbsCurve(self.basis.knotvec, displacement, self.basis.weights)

    @property
    def knotvec(self):
        return self.basis.knotvec

    def evaluate_parts(self, u, nd=0, side="right"):
        return self.reference.evaluate(u, nd, side), self.displacement.evaluate(u, nd, side)

    def evaluate(self, u, nd=0, side="right"):
        a, b = self.evaluate_parts(u, nd, side)
        return a + b

    def current(self) -> NurbsCurve:
        return self.basis.moved(self.displacement.control_points)


def _parts(curve, u, nd, side="right"):
    if isinstance(curve, DeformedCurve):
        return curve.evaluate_parts(u, nd, side)
    c = curve.evaluate(u, nd, side)
    return c, np.zeros_like(c)


def _split(x, m):
    """Accept a point array or a (reference, displacement) pair."""
    if isinstance(x, tuple):
        ref, disp = (np.atleast_2d(np.asarray(a, dtype=float)) for a in x)
    else:
        ref = np.atleast_2d(np.asarray(x, dtype=float))
        disp = np.zeros_like(ref)
    return np.broadcast_to(ref, (m, 2)), np.broadcast_to(disp, (m, 2))


def _difference(xs_ref, xs_disp, C_ref, C_disp):
    # (x_s - x_m) with large and small parts subtracted separately
    return (xs_ref - C_ref) + (xs_disp - C_disp)


def project_points(xs, master, u0, cfg: ContactConfig = ContactConfig()):
    """Vectorised closest-point projection; returns ``(u_m, residual)``.

    ``xs`` is an ``(m, 2)`` array or a ``(reference, displacement)`` pair.
    Newton on ``f(u) = (x_s - x_m(u)) . x_m'(u)`` with
    ``f'(u) = (x_s - x_m) . x_m'' - x_m' . x_m'``.  Points that do not
    converge restart from the best of 1000 uniform samples.
    """
    u0 = np.atleast_1d(np.asarray(u0, dtype=float))
    m = max(u0.size, np.atleast_2d(xs[0] if isinstance(xs, tuple) else xs).shape[0])
    xr, xd = _split(xs, m)
    u = np.broadcast_to(u0, (m,)).copy()
    a, b = master.knotvec.domain

    def newton(idx, u):
        done = np.zeros(idx.size, dtype=bool)
        res = np.full(idx.size, np.inf)
        for _ in range(cfg.max_iterations):
            live = ~done
            if not live.any():
                break
            ii = idx[live]
            Cr, Cd = _parts(master, u[live], 2)
            diff = _difference(xr[ii], xd[ii], Cr[:, 0], Cd[:, 0])
            d1 = Cr[:, 1] + Cd[:, 1]
            d2 = Cr[:, 2] + Cd[:, 2]
            f = np.einsum("ij,ij->i", diff, d1)
            fp = np.einsum("ij,ij->i", diff, d2) - np.einsum("ij,ij->i", d1, d1)
            du = -f / fp
            un = np.clip(u[live] + du, a, b)
            # a point beyond an end of the curve projects onto that end
            at_end = (un == u[live]) & ((un == a) | (un == b))
            step = np.abs(un - u[live])
            u[live] = un
            res[live] = np.abs(f)
            ok = ((np.abs(f) < cfg.projection_tol) & (step < 1e-13)) | at_end
            sub = np.flatnonzero(live)
            done[sub[ok]] = True
        # final residual at the returned parameter
        Cr, Cd = _parts(master, u, 1)
        diff = _difference(xr[idx], xd[idx], Cr[:, 0], Cd[:, 0])
        f = np.einsum("ij,ij->i", diff, Cr[:, 1] + Cd[:, 1])
        at_end = (u == a) | (u == b)
        return u, np.where(at_end & ~(np.abs(f) < cfg.projection_tol), 0.0, np.abs(f)), done

    idx = np.arange(m)
    u, res, done = newton(idx, u)
    bad = np.flatnonzero(~done | ~(res < cfg.projection_tol))
    if bad.size:
        samples = np.linspace(a, b, 1000)
        Cr, Cd = _parts(master, samples, 0)
        for i in bad:
            d = _difference(xr[i], xd[i], Cr[:, 0], Cd[:, 0])
            j = int(np.argmin(np.einsum("ij,ij->i", d, d)))
            ui, ri, di = newton(np.array([i]), np.array([samples[j]]))
            if not (di[0] and ri[0] < cfg.projection_tol):
                pt = xr[i] + xd[i]
                raise ProjectionError(
                    f"closest-point projection failed for slave point ({pt[0]:.6e}, {pt[1]:.6e}) m"
                )
            u[i], res[i] = ui[0], ri[0]
    return u, res


def closest_point_projection(x_s, master, u0: float = 0.5, cfg: ContactConfig = ContactConfig()) -> float:
    u, _ = project_points(np.atleast_2d(x_s) if not isinstance(x_s, tuple) else x_s, master, u0, cfg)
    return float(u[0])


def unit_normals(tangents: np.ndarray, normal_sign: int = 1) -> np.ndarray:
    """Left-hand normals of tangents, flipped by ``normal_sign``."""
    t = np.atleast_2d(tangents)
    norm = np.hypot(t[:, 0], t[:, 1])
    if np.any(norm < 1e-14):
        raise ValueError("degenerate tangent: cannot define a normal")
    return normal_sign * np.stack([-t[:, 1], t[:, 0]], axis=1) / norm[:, None]


def gaps(xs, master, u_m, normal_sign: int = 1):
    """Signed gaps ``(x_s - x_m) . n_m`` and unit outward normals at ``u_m``."""
    u_m = np.atleast_1d(u_m)
    xr, xd = _split(xs, u_m.size)
    Cr, Cd = _parts(master, u_m, 1)
    n = unit_normals(Cr[:, 1] + Cd[:, 1], normal_sign)
    diff = _difference(xr, xd, Cr[:, 0], Cd[:, 0])
    return np.einsum("ij,ij->i", diff, n), n


def gap(x_s, master, u_m: float, normal_sign: int = 1) -> tuple[float, np.ndarray]:
    g, n = gaps(x_s if isinstance(x_s, tuple) else np.atleast_2d(x_s), master, u_m, normal_sign)
    return float(g[0]), n[0]


def contact_force(g_n, penalty: float):
    """Penalty pressure ``penalty * <-g_n>``."""
    return penalty * np.maximum(0.0, -np.asarray(g_n, dtype=float)) if np.ndim(g_n) else penalty * max(0.0, -g_n)


def effective_contact_stiffness(force: float, d_m: float) -> float:
    """Contact force over master contact-point displacement."""
    if force == 0.0:
        return 0.0
    if abs(d_m) < 1e-15:
        raise UndefinedStiffness(f"master contact displacement {d_m:.3e} m too small")
    return force / d_m


@dataclass(frozen=True, eq=False)
class FacetedBoundary:
    """Polyline through curve points at uniform parameters."""

    params: np.ndarray
    vertices: np.ndarray
    normal_sign: int = 1
    vertex_disp: np.ndarray = None

    @property
    def segments(self) -> int:
        return self.params.size - 1

    def normals(self) -> np.ndarray:
        verts = self.vertices if self.vertex_disp is None else self.vertices + self.vertex_disp
        return unit_normals(np.diff(verts, axis=0), self.normal_sign)

    def normal_jumps(self) -> np.ndarray:
        """Angle (rad) between normals of neighbouring segments at each interior vertex."""
        n = self.normals()
        cross = n[:-1, 0] * n[1:, 1] - n[:-1, 1] * n[1:, 0]
        dot = np.einsum("ij,ij->i", n[:-1], n[1:])
        return np.abs(np.arctan2(cross, dot))

    def project(self, xs):
        """Nearest-segment projection.

        Returns ``(u_m, gap, normal, disp_m, offset)`` per point, where
        ``offset = x_s - x_m`` and ``u_m`` interpolates the vertex parameters.
        """
        m = np.atleast_2d(xs[0] if isinstance(xs, tuple) else xs).shape[0]
        xr, xd = _split(xs, m)
        V = self.vertices
        Vd = np.zeros_like(V) if self.vertex_disp is None else self.vertex_disp
        A, B = V[:-1], V[1:]
        Ad, Bd = Vd[:-1], Vd[1:]
        E = (B - A) + (Bd - Ad)
        L2 = np.einsum("ij,ij->i", E, E)
        # relative position of every point to every segment start
        rel = (xr[:, None] - A[None]) + (xd[:, None] - Ad[None])
        t = np.clip(np.einsum("msi,si->ms", rel, E) / L2, 0.0, 1.0)
        foot = rel - t[..., None] * E[None]
        dist = np.einsum("msi,msi->ms", foot, foot)
        s = np.argmin(dist, axis=1)
        rows = np.arange(m)
        n = self.normals()[s]
        g = np.einsum("ij,ij->i", foot[rows, s], n)
        u = self.params[s] + t[rows, s] * (self.params[s + 1] - self.params[s])
        disp = Ad[s] + t[rows, s][:, None] * (Bd[s] - Ad[s])
        return u, g, n, disp, foot[rows, s]


def faceted_boundary(master, segments: int, normal_sign: int = 1) -> FacetedBoundary:
    if segments < 2:
        raise ValueError("need at least 2 segments")
    params = np.linspace(*master.knotvec.domain, segments + 1)
    ref, disp = _parts(master, params, 0)
    return FacetedBoundary(params, ref[:, 0], normal_sign, disp[:, 0])


def exact_normal_jumps(curve, normal_sign: int = 1) -> np.ndarray:
    """Normal-direction jump (rad) at each interior knot, left vs right limits."""
    knots = curve.knotvec.unique_knots()[1:-1]
    if knots.size == 0:
        return np.zeros(0)
    nl = unit_normals(curve.evaluate(knots, 1, side="left")[:, 1], normal_sign)
    nr = unit_normals(curve.evaluate(knots, 1, side="right")[:, 1], normal_sign)
    cross = nl[:, 0] * nr[:, 1] - nl[:, 1] * nr[:, 0]
    return np.abs(np.arctan2(cross, np.einsum("ij,ij->i", nl, nr)))


@dataclass
class ContactPair:
    slave_element: int
    gauss_index: int
    x_s: np.ndarray
    u_m: float
    x_m: np.ndarray
    normal: np.ndarray
    gap: float
    active: bool
    force: float = 0.0  # penalty pressure at this station
    weight: float = 1.0  # integration weight applied to force and stiffness
    u_s: float = 0.0
    slave_dofs: np.ndarray = field(default=None, repr=False)
    slave_shape: np.ndarray = field(default=None, repr=False)
    master_dofs: np.ndarray = field(default=None, repr=False)
    master_shape: np.ndarray = field(default=None, repr=False)
    slave_disp: np.ndarray = field(default=None, repr=False)
    master_disp: np.ndarray = field(default=None, repr=False)

    def gap_gradient(self) -> np.ndarray:
        """``d g / d U`` on ``slave_dofs ++ master_dofs`` (interleaved x, y)."""
        gs = (self.slave_shape[:, None] * self.normal[None]).reshape(-1)
        gm = -(self.master_shape[:, None] * self.normal[None]).reshape(-1)
        return np.concatenate([gs, gm])

    @property
    def dofs(self) -> np.ndarray:
        return np.concatenate([self.slave_dofs, self.master_dofs])


def contact_stiffness_matrix(pair: ContactPair, cfg: ContactConfig):
    """``(dofs, K)`` with ``K = penalty * weight * G G^T`` for an active pair."""
    G = pair.gap_gradient()
    if not pair.active:
        return pair.dofs, np.zeros((G.size, G.size))
    return pair.dofs, cfg.penalty * pair.weight * np.outer(G, G)


def contact_residual(pair: ContactPair) -> tuple[np.ndarray, np.ndarray]:
    """``(dofs, f)``: penalty force pushing the pair apart (zero when inactive)."""
    G = pair.gap_gradient()
    return pair.dofs, pair.weight * pair.force * G


class SlaveSampling:
    """Gauss stations on a slave boundary curve (fixed in parameter space)."""

    def __init__(self, curve: NurbsCurve, n_gauss: int):
        kv = curve.knotvec
        rule = gauss_rule(n_gauss)
        us, ws, el, gi = [], [], [], []
        for e, s in enumerate(kv.span_indices()):
            a, b = kv.knots[s], kv.knots[s + 1]
            for g, (x, w) in enumerate(zip(rule.points, rule.weights)):
                us.append(a + 0.5 * (x + 1.0) * (b - a))
                ws.append(0.5 * w * (b - a))
                el.append(e)
                gi.append(g)
        self.u = np.array(us)
        self.param_weight = np.array(ws)
        self.element = np.array(el)
        self.gauss_index = np.array(gi)
        self.spans, R = curve.rational_basis(self.u, 0)
        self.shape = R[:, 0]  # (m, p+1)
        self.local = self.spans[:, None] + np.arange(-kv.degree, 1)  # edge control-point index


def detect_contacts(slave, master, cfg: ContactConfig, dofmap, u0=None, n_gauss: int = 3) -> list[ContactPair]:
    """One candidate pair per Gauss station of the slave contact edge.

    ``slave`` / ``master`` are bodies exposing ``contact_surface()``; ``u0``
    warm-starts the projections (default 0.5 for every station).
    """
    s_curve, s_cp, _ = slave.contact_surface()
    m_curve, m_cp, m_sign = master.contact_surface()
    samp = SlaveSampling(s_curve.basis, n_gauss)
    xr, xd = _parts(s_curve, samp.u, 1)
    xs = (xr[:, 0], xd[:, 0])
    m = samp.u.size
    if u0 is None:
        u0 = np.full(m, 0.5)

    if cfg.boundary_mode == "exact":
        u_m, _ = project_points(xs, m_curve, u0, cfg)
        g, n = gaps(xs, m_curve, u_m, m_sign)
        Cr, Cd = _parts(m_curve, u_m, 0)
        x_m = Cr[:, 0] + Cd[:, 0]
        disp_m = Cd[:, 0]
    else:
        poly = faceted_boundary(m_curve, cfg.segments, m_sign)
        u_m, g, n, disp_m, offset = poly.project(xs)
        x_m = xr[:, 0] + xd[:, 0] - offset

    m_spans, m_R = m_curve.basis.rational_basis(u_m, 0)
    m_local = m_spans[:, None] + np.arange(-m_curve.knotvec.degree, 1)
    jac = np.hypot(*(xr[:, 1] + xd[:, 1]).T)
    weights = samp.param_weight * jac if cfg.integration == "consistent" else np.ones(m)
    force = contact_force(g, cfg.penalty)

    pairs = []
    for i in range(m):
        sd = dofmap.dof(slave.index, s_cp[samp.local[i]], 0)
        md = dofmap.dof(master.index, m_cp[m_local[i]], 0)
        pairs.append(
            ContactPair(
                slave_element=int(samp.element[i]),
                gauss_index=int(samp.gauss_index[i]),
                x_s=xr[i, 0] + xd[i, 0],
                u_m=float(u_m[i]),
                x_m=x_m[i],
                normal=n[i],
                gap=float(g[i]),
                active=bool(g[i] < 0),
                force=float(force[i]),
                weight=float(weights[i]),
                u_s=float(samp.u[i]),
                slave_dofs=np.stack([sd, sd + 1], 1).reshape(-1),
                slave_shape=samp.shape[i],
                master_dofs=np.stack([md, md + 1], 1).reshape(-1),
                master_shape=m_R[i, 0],
                slave_disp=xd[i, 0],
                master_disp=disp_m[i],
            )
        )
    return pairs


def sagitta(radius: float, dtheta) -> np.ndarray:
    return radius * (1.0 - np.cos(0.5 * np.asarray(dtheta)))


def chord_angles(center, vertices) -> np.ndarray:
    """Angular extent of each polyline segment seen from ``center``."""
    v = np.asarray(vertices) - np.asarray(center)
    th = np.unwrap(np.arctan2(v[:, 1], v[:, 0]))
    return np.abs(np.diff(th))


