"""B-spline / NURBS curves and biquadratic patches.

Basis functions are indexed from 0: ``N[i]`` is supported on
``knots[i] .. knots[i + p + 1]`` and there are ``n = len(knots) - p - 1`` of
them.  Patch control points are flattened with the u index running fastest,
``flat = i_v * n_u + i_u``.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from math import comb

import numpy as np


class GeometryError(ValueError):
    """Raised for invalid geometry input or out-of-range evaluation."""


def _frozen(a, dtype=float):
    arr = np.array(a, dtype=dtype, copy=True)
    arr.flags.writeable = False
    return arr


@dataclass(frozen=True, eq=False)
class KnotVector:
    degree: int
    knots: np.ndarray

    def __post_init__(self):
        knots = _frozen(self.knots)
        object.__setattr__(self, "knots", knots)
        p = self.degree
        if p < 0:
            raise GeometryError("degree must be non-negative")
        if knots.ndim != 1 or knots.size < 2 * (p + 1):
            raise GeometryError(f"need at least {2 * (p + 1)} knots for degree {p}")
        if np.any(np.diff(knots) < 0):
            raise GeometryError("knot vector must be non-decreasing")
        if np.any(knots[: p + 1] != knots[0]) or np.any(knots[-(p + 1):] != knots[-1]):
            raise GeometryError("knot vector must be clamped (end knots repeated p+1 times)")
        if knots[-1] <= knots[0]:
            raise GeometryError("knot vector spans an empty interval")

    @property
    def n(self) -> int:
        """Number of basis functions."""
        return self.knots.size - self.degree - 1

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.knots[0]), float(self.knots[-1])

    def unique_knots(self) -> np.ndarray:
        return np.unique(self.knots)

    def span_indices(self) -> list[int]:
        """Knot indices ``s`` with ``knots[s] < knots[s+1]`` (one per element)."""
        k = self.knots
        return [s for s in range(self.degree, self.n) if k[s + 1] > k[s]]

    def multiplicity(self, u: float) -> int:
        return int(np.count_nonzero(self.knots == u))

    def check_domain(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        a, b = self.domain
        if np.any(u < a) or np.any(u > b) or np.any(np.isnan(u)):
            raise GeometryError(f"parameter outside knot range [{a}, {b}]")
        return u

    def find_spans(self, u, side: str = "right") -> np.ndarray:
        """Span index for each parameter.

        ``side="left"`` picks the span to the left of an interior knot, which
        gives left-limit evaluation.
        """
        u = np.atleast_1d(np.asarray(u, dtype=float))
        spans = np.searchsorted(self.knots, u, side=side) - 1
        spans = np.clip(spans, self.degree, self.n - 1)
        # skip zero-length spans (repeated interior knots)
        k = self.knots
        for idx in np.flatnonzero(k[spans + 1] <= k[spans]):
            s = spans[idx]
            step = 1 if side == "right" else -1
            while k[s + 1] <= k[s]:
                s += step
            spans[idx] = s
        return spans

    def insert(self, u: float) -> "KnotVector":
        return KnotVector(self.degree, np.insert(self.knots, np.searchsorted(self.knots, u, side="right"), u))

    def to_dict(self) -> dict:
        return {"degree": self.degree, "knots": [float(k) for k in self.knots]}


def _local_ders(kv: KnotVector, spans: np.ndarray, u: np.ndarray, nd: int) -> np.ndarray:
    """Nonzero basis functions and derivatives, batched over points.

    Returns an array of shape ``(m, nd + 1, p + 1)``: entry ``[q, k, j]`` is the
    k-th derivative of ``N[spans[q] - p + j]`` at ``u[q]``.  Triangular
    recursion; in a nonzero span every denominator is a positive knot
    difference.
    """
    p = kv.degree
    U = kv.knots
    m = u.size
    ndu = np.zeros((p + 1, p + 1, m))
    ndu[0, 0] = 1.0
    left = np.zeros((p + 1, m))
    right = np.zeros((p + 1, m))
    for j in range(1, p + 1):
        left[j] = u - U[spans + 1 - j]
        right[j] = U[spans + j] - u
        saved = np.zeros(m)
        for r in range(j):
            ndu[j, r] = right[r + 1] + left[j - r]
            temp = ndu[r, j - 1] / ndu[j, r]
            ndu[r, j] = saved + right[r + 1] * temp
            saved = left[j - r] * temp
        ndu[j, j] = saved

    ders = np.zeros((m, nd + 1, p + 1))
    ders[:, 0, :] = ndu[:, p, :].T
    top = min(nd, p)
    a = np.zeros((2, p + 1, m))
    for r in range(p + 1):
        s1, s2 = 0, 1
        a[0, 0] = 1.0
        for k in range(1, top + 1):
            d = np.zeros(m)
            rk, pk = r - k, p - k
            if r >= k:
                a[s2, 0] = a[s1, 0] / ndu[pk + 1, rk]
                d = a[s2, 0] * ndu[rk, pk]
            j1 = 1 if rk >= -1 else -rk
            j2 = k - 1 if r - 1 <= pk else p - r
            for j in range(j1, j2 + 1):
                a[s2, j] = (a[s1, j] - a[s1, j - 1]) / ndu[pk + 1, rk + j]
                d = d + a[s2, j] * ndu[rk + j, pk]
            if r <= pk:
                a[s2, k] = -a[s1, k - 1] / ndu[pk + 1, r]
                d = d + a[s2, k] * ndu[r, pk]
            ders[:, k, r] = d
            s1, s2 = s2, s1
    fac = p
    for k in range(1, top + 1):
        ders[:, k, :] *= fac
        fac *= p - k
    return ders


def basis_functions(kv: KnotVector, u: float) -> np.ndarray:
    """All ``n`` basis values ``N[i](u)``; at most ``p + 1`` are nonzero."""
    return basis_derivatives(kv, u, 0)[:, 0]


def basis_derivatives(kv: KnotVector, u: float, k: int) -> np.ndarray:
    """Table of shape ``(n, k + 1)``; column ``j`` is the j-th derivative."""
    if k < 0:
        raise GeometryError("derivative order must be >= 0")
    uu = kv.check_domain(np.atleast_1d(u))
    span = kv.find_spans(uu)
    local = _local_ders(kv, span, uu, k)[0]
    out = np.zeros((kv.n, k + 1))
    s = int(span[0])
    out[s - kv.degree : s + 1, :] = local.T
    return out


@dataclass(frozen=True, eq=False)
class NurbsCurve:
    knotvec: KnotVector
    control_points: np.ndarray
    weights: np.ndarray

    def __post_init__(self):
        cp = _frozen(self.control_points)
        w = _frozen(self.weights)
        object.__setattr__(self, "control_points", cp)
        object.__setattr__(self, "weights", w)
        if cp.ndim != 2 or cp.shape[1] != 2:
            raise GeometryError("control points must be an (n, 2) array")
        if cp.shape[0] != self.knotvec.n or w.shape != (self.knotvec.n,):
            raise GeometryError(
                f"knot vector implies {self.knotvec.n} control points, got {cp.shape[0]} points / {w.shape} weights"
            )
        if np.any(w <= 0):
            raise GeometryError("weights must be positive")

    @property
    def degree(self) -> int:
        return self.knotvec.degree

    def moved(self, displacement) -> "NurbsCurve":
        return NurbsCurve(self.knotvec, self.control_points + np.asarray(displacement), self.weights)

    def rational_basis(self, u, nd: int = 0, side: str = "right"):
        """Spans and nonzero rational basis derivatives, batched.

        Returns ``(spans, R)`` with ``R`` of shape ``(m, nd + 1, p + 1)``; only
        orders 0 and 1 are supported here (shape functions need no more).
        """
        if nd > 1:
            raise GeometryError("rational basis supports nd <= 1")
        kv = self.knotvec
        uu = kv.check_domain(np.atleast_1d(u))
        spans = kv.find_spans(uu, side)
        ders = _local_ders(kv, spans, uu, nd)
        idx = spans[:, None] + np.arange(-kv.degree, 1)
        w = self.weights[idx]
        nw = ders * w[:, None, :]
        W = nw.sum(axis=2)
        R = np.empty_like(nw)
        R[:, 0] = nw[:, 0] / W[:, 0, None]
        if nd == 1:
            R[:, 1] = (nw[:, 1] * W[:, 0, None] - nw[:, 0] * W[:, 1, None]) / W[:, 0, None] ** 2
        return spans, R

    def evaluate(self, u, nd: int = 0, side: str = "right") -> np.ndarray:
        """Points and derivatives, shape ``(m, nd + 1, 2)``."""
        kv = self.knotvec
        p = kv.degree
        uu = kv.check_domain(np.atleast_1d(u))
        spans = kv.find_spans(uu, side)
        ders = _local_ders(kv, spans, uu, nd)
        idx = spans[:, None] + np.arange(-p, 1)
        w = self.weights[idx]
        P = self.control_points[idx]
        Aw = np.einsum("mkj,mj,mjd->mkd", ders, w, P)
        W = np.einsum("mkj,mj->mk", ders, w)
        C = np.empty_like(Aw)
        for k in range(nd + 1):
            v = Aw[:, k].copy()
            for i in range(1, k + 1):
                v -= comb(k, i) * W[:, i, None] * C[:, k - i]
            C[:, k] = v / W[:, 0, None]
        return C

    def to_dict(self) -> dict:
        return {
            "type": "curve",
            "knotvec": self.knotvec.to_dict(),
            "control_points": self.control_points.tolist(),
            "weights": self.weights.tolist(),
        }


def curve_point(c: NurbsCurve, u: float) -> np.ndarray:
    return c.evaluate(u, 0)[0, 0]


def curve_derivatives(c: NurbsCurve, u: float, k: int) -> np.ndarray:
    """``[C(u), C'(u), ..., C^(k)(u)]`` as a ``(k + 1, 2)`` array."""
    return c.evaluate(u, k)[0]


@dataclass(frozen=True, eq=False)
class NurbsPatch:
    knotvec_u: KnotVector
    knotvec_v: KnotVector
    control_net: np.ndarray  # (n_u, n_v, 2)
    weights: np.ndarray  # (n_u, n_v)

    def __post_init__(self):
        net = _frozen(self.control_net)
        w = _frozen(self.weights)
        object.__setattr__(self, "control_net", net)
        object.__setattr__(self, "weights", w)
        shape = (self.knotvec_u.n, self.knotvec_v.n)
        if net.shape != shape + (2,) or w.shape != shape:
            raise GeometryError(f"control net must be {shape} to match the knot vectors")
        if np.any(w <= 0):
            raise GeometryError("weights must be positive")

    @property
    def shape(self) -> tuple[int, int]:
        return self.knotvec_u.n, self.knotvec_v.n

    @property
    def n_control_points(self) -> int:
        return self.shape[0] * self.shape[1]

    def flat_points(self) -> np.ndarray:
        """Control points in flat order (u fastest), shape ``(n_u * n_v, 2)``."""
        return self.control_net.transpose(1, 0, 2).reshape(-1, 2)

    def flat_weights(self) -> np.ndarray:
        return self.weights.T.reshape(-1)

    def flat_index(self, i_u, i_v):
        return np.asarray(i_v) * self.shape[0] + np.asarray(i_u)

    def with_flat_points(self, pts) -> "NurbsPatch":
        n_u, n_v = self.shape
        net = np.asarray(pts, dtype=float).reshape(n_v, n_u, 2).transpose(1, 0, 2)
        return NurbsPatch(self.knotvec_u, self.knotvec_v, net, self.weights)

    def edge_indices(self, edge: str) -> np.ndarray:
        """Flat control-point indices along an edge, ordered along the curve."""
        n_u, n_v = self.shape
        if edge == "v0":
            return self.flat_index(np.arange(n_u), 0)
        if edge == "v1":
            return self.flat_index(np.arange(n_u), n_v - 1)
        if edge == "u0":
            return self.flat_index(0, np.arange(n_v))
        if edge == "u1":
            return self.flat_index(n_u - 1, np.arange(n_v))
        raise GeometryError(f"unknown edge {edge!r}; expected one of u0, u1, v0, v1")

    def edge_curve(self, edge: str) -> NurbsCurve:
        if edge in ("v0", "v1"):
            j = 0 if edge == "v0" else self.shape[1] - 1
            return NurbsCurve(self.knotvec_u, self.control_net[:, j], self.weights[:, j])
        if edge in ("u0", "u1"):
            i = 0 if edge == "u0" else self.shape[0] - 1
            return NurbsCurve(self.knotvec_v, self.control_net[i], self.weights[i])
        raise GeometryError(f"unknown edge {edge!r}")

    def evaluate(self, u, v) -> np.ndarray:
        """Physical points at parameter pairs, shape ``(m, 2)``."""
        u = self.knotvec_u.check_domain(np.atleast_1d(u))
        v = self.knotvec_v.check_domain(np.atleast_1d(v))
        su, sv = self.knotvec_u.find_spans(u), self.knotvec_v.find_spans(v)
        Nu = _local_ders(self.knotvec_u, su, u, 0)[:, 0]
        Nv = _local_ders(self.knotvec_v, sv, v, 0)[:, 0]
        p, q = self.knotvec_u.degree, self.knotvec_v.degree
        iu = su[:, None] + np.arange(-p, 1)
        iv = sv[:, None] + np.arange(-q, 1)
        w = self.weights[iu[:, :, None], iv[:, None, :]]
        P = self.control_net[iu[:, :, None], iv[:, None, :]]
        NN = Nu[:, :, None] * Nv[:, None, :] * w
        return np.einsum("mab,mabd->md", NN, P) / NN.sum(axis=(1, 2))[:, None]

    def to_dict(self) -> dict:
        return {
            "type": "patch",
            "knotvec_u": self.knotvec_u.to_dict(),
            "knotvec_v": self.knotvec_v.to_dict(),
            "control_net": self.control_net.tolist(),
            "weights": self.weights.tolist(),
        }


def _insert_homogeneous(kv: KnotVector, Pw: np.ndarray, u: float) -> tuple[KnotVector, np.ndarray]:
    """Boehm insertion of one knot on homogeneous points ``Pw`` (leading axis = basis index)."""
    a, b = kv.domain
    if not a < u < b:
        raise GeometryError(f"knot {u} must lie strictly inside ({a}, {b})")
    p = kv.degree
    if kv.multiplicity(u) + 1 > p:
        raise GeometryError(f"inserting {u} would exceed multiplicity {p}")
    U = kv.knots
    k = int(kv.find_spans(u)[0])
    Q = np.empty((Pw.shape[0] + 1,) + Pw.shape[1:])
    Q[: k - p + 1] = Pw[: k - p + 1]
    Q[k + 1 :] = Pw[k:]
    for i in range(k - p + 1, k + 1):
        alpha = (u - U[i]) / (U[i + p] - U[i])
        Q[i] = alpha * Pw[i] + (1.0 - alpha) * Pw[i - 1]
    return kv.insert(u), Q


def knot_insert(g, u_new: float, direction: str = "u"):
    """Insert one knot into a curve or patch without changing its shape.

    For a patch, ``direction`` selects the parametric direction.
    """
    if isinstance(g, NurbsCurve):
        Pw = np.hstack([g.control_points * g.weights[:, None], g.weights[:, None]])
        kv, Q = _insert_homogeneous(g.knotvec, Pw, u_new)
        return NurbsCurve(kv, Q[:, :2] / Q[:, 2:], Q[:, 2])
    if isinstance(g, NurbsPatch):
        Pw = np.concatenate([g.control_net * g.weights[..., None], g.weights[..., None]], axis=2)
        if direction == "u":
            kv, Q = _insert_homogeneous(g.knotvec_u, Pw, u_new)
            return NurbsPatch(kv, g.knotvec_v, Q[..., :2] / Q[..., 2:], Q[..., 2])
        if direction == "v":
            kv, Q = _insert_homogeneous(g.knotvec_v, Pw.transpose(1, 0, 2), u_new)
            Q = Q.transpose(1, 0, 2)
            return NurbsPatch(g.knotvec_u, kv, Q[..., :2] / Q[..., 2:], Q[..., 2])
        raise GeometryError(f"direction must be 'u' or 'v', got {direction!r}")
    raise TypeError(f"cannot insert knots into {type(g).__name__}")


def uniform_insertions(k: int) -> list[float]:
    """``k`` knots at ``j / (k + 1)``."""
    return [j / (k + 1) for j in range(1, k + 1)]


def refine(g, k: int, directions: str = "uv"):
    """Insert ``k`` uniformly spaced knots (per direction, for patches)."""
    if isinstance(g, NurbsCurve):
        directions = "u"
    for d in directions:
        for u in uniform_insertions(k):
            g = knot_insert(g, u, d)
    return g


def _unit(theta: float) -> np.ndarray:
    """(cos, sin) with round-off at multiples of pi/2 removed."""
    cs = np.array([math.cos(theta), math.sin(theta)])
    cs[np.abs(cs) < 1e-15] = 0.0
    return cs


def _arc_control(center, radius, theta0, theta1):
    span = theta1 - theta0
    if not 0 < span < math.pi:
        raise GeometryError(f"arc span must lie in (0, pi), got {span}")
    if radius <= 0:
        raise GeometryError("radius must be positive")
    half = 0.5 * span
    mid = theta0 + half
    w1 = math.cos(half)
    er = _unit(mid)  # radial at the arc midpoint
    et = np.array([-er[1], er[0]])
    M = np.asarray(center, dtype=float) + radius * er
    # polygon built about the midpoint; the end offset is taken as the
    # rounded product w1 * bulge so that C(1/2) == M without cancellation error
    bulge = radius * (1.0 / w1 - 1.0)
    drop = w1 * bulge
    side = radius * math.sin(half)
    pts = np.array(
        [
            M + (-drop * er - side * et),
            M + bulge * er,
            M + (-drop * er + side * et),
        ]
    )
    return pts, np.array([1.0, w1, 1.0])


def make_arc(center, radius: float, theta0: float, theta1: float) -> NurbsCurve:
    """Exact rational quadratic arc, counter-clockwise from ``theta0`` to ``theta1``."""
    pts, w = _arc_control(center, radius, theta0, theta1)
    return NurbsCurve(KnotVector(2, [0, 0, 0, 1, 1, 1]), pts, w)


def make_annulus_patch(center, r_inner: float, r_outer: float, theta0: float, theta1: float) -> NurbsPatch:
    """Biquadratic annular sector.

    u runs counter-clockwise along the arc and v from the outer radius (v=0)
    to the inner radius (v=1), which keeps the parametrization positively
    oriented.
    """
    if not 0 < r_inner < r_outer:
        raise GeometryError(f"need 0 < r_inner < r_outer, got {r_inner}, {r_outer}")
    radii = [r_outer, 0.5 * (r_inner + r_outer), r_inner]
    net = np.empty((3, 3, 2))
    weights = np.empty((3, 3))
    for j, r in enumerate(radii):
        pts, w = _arc_control(center, r, theta0, theta1)
        net[:, j] = pts
        weights[:, j] = w
    kv = KnotVector(2, [0, 0, 0, 1, 1, 1])
    return NurbsPatch(kv, kv, net, weights)


def geometry_from_dict(d: dict):
    if d.get("type") == "curve":
        kv = KnotVector(d["knotvec"]["degree"], d["knotvec"]["knots"])
        return NurbsCurve(kv, d["control_points"], d["weights"])
    if d.get("type") == "patch":
        ku = KnotVector(d["knotvec_u"]["degree"], d["knotvec_u"]["knots"])
        kv = KnotVector(d["knotvec_v"]["degree"], d["knotvec_v"]["knots"])
        return NurbsPatch(ku, kv, d["control_net"], d["weights"])
    raise GeometryError(f"unknown geometry type {d.get('type')!r}")


def dump_geometry(g) -> str:
    """JSON text; floats are written with round-trip precision."""
    return json.dumps(g.to_dict(), indent=1)


def load_geometry(text: str):
    return geometry_from_dict(json.loads(text))
