"""Plane-strain kinematics, constitution and element matrices for NURBS patches."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .mesh import Element, GaussRule
from .nurbs import NurbsPatch, _local_ders


class InvertedElementError(ValueError):
    pass


@dataclass(frozen=True)
class Material:
    young_modulus: float  # Pa
    poisson_ratio: float

    def __post_init__(self):
        if not self.young_modulus > 0:
            raise ValueError(f"Young's modulus must be positive, got {self.young_modulus}")
        if not 0 <= self.poisson_ratio < 0.5:
            raise ValueError(f"Poisson ratio must lie in [0, 0.5), got {self.poisson_ratio}")


def constitutive_plane_strain(m: Material) -> np.ndarray:
    E, nu = m.young_modulus, m.poisson_ratio
    if nu > 0.49:
        raise ValueError(f"Poisson ratio {nu} too close to incompressibility (limit 0.49)")
    c = E / ((1 + nu) * (1 - 2 * nu))
    return np.array(
        [
            [c * (1 - nu), c * nu, 0.0],
            [c * nu, c * (1 - nu), 0.0],
            [0.0, 0.0, E / (2 * (1 + nu))],
        ]
    )


@dataclass
class ElementMatrices:
    stiffness: np.ndarray
    load: np.ndarray


def _element_shape(patch: NurbsPatch, el: Element, xi: np.ndarray, eta: np.ndarray):
    """Rational shape functions and reference-square gradients at local points.

    Returns ``R`` of shape ``(m, nl)`` and ``dR`` of shape ``(m, nl, 2)`` where
    the gradient is taken w.r.t. the local coordinates in [-1, 1]^2.
    """
    ku, kv = patch.knotvec_u, patch.knotvec_v
    (ua, ub), (va, vb) = el.u_range, el.v_range
    u = ua + 0.5 * (xi + 1.0) * (ub - ua)
    v = va + 0.5 * (eta + 1.0) * (vb - va)
    su = np.full(u.shape, el.span[0])
    sv = np.full(v.shape, el.span[1])
    Du = _local_ders(ku, su, u, 1)  # (m, 2, p+1)
    Dv = _local_ders(kv, sv, v, 1)
    # local order j_v * (p+1) + i_u
    N = (Dv[:, 0, :, None] * Du[:, 0, None, :]).reshape(u.size, -1)
    Nu = (Dv[:, 0, :, None] * Du[:, 1, None, :]).reshape(u.size, -1) * (0.5 * (ub - ua))
    Nv = (Dv[:, 1, :, None] * Du[:, 0, None, :]).reshape(u.size, -1) * (0.5 * (vb - va))
    w = patch.flat_weights()[np.asarray(el.cp)]
    Nw, Nuw, Nvw = N * w, Nu * w, Nv * w
    W, Wu, Wv = Nw.sum(1, keepdims=True), Nuw.sum(1, keepdims=True), Nvw.sum(1, keepdims=True)
    R = Nw / W
    dR = np.stack([(Nuw * W - Nw * Wu) / W**2, (Nvw * W - Nw * Wv) / W**2], axis=2)
    return R, dR


def _b_matrices(dRdx: np.ndarray) -> np.ndarray:
    """Strain-displacement matrices from physical gradients ``(..., nl, 2)``."""
    shape = dRdx.shape[:-2]
    nl = dRdx.shape[-2]
    B = np.zeros(shape + (3, 2 * nl))
    B[..., 0, 0::2] = dRdx[..., 0]
    B[..., 1, 1::2] = dRdx[..., 1]
    B[..., 2, 0::2] = dRdx[..., 1]
    B[..., 2, 1::2] = dRdx[..., 0]
    return B


def _jacobian(X: np.ndarray, dR: np.ndarray):
    # J[a, b] = d x_a / d xi_b
    J = np.einsum("...la,...lb->...ab", X, dR)
    det = J[..., 0, 0] * J[..., 1, 1] - J[..., 0, 1] * J[..., 1, 0]
    return J, det


def strain_displacement(el: Element, patch: NurbsPatch, point) -> tuple[np.ndarray, float]:
    """``B`` (3 x 2nl) and ``detJ`` at a local point of the reference square.

    ``detJ`` maps reference-square area to physical area.
    """
    xi, eta = (np.atleast_1d(float(c)) for c in point)
    if abs(xi[0]) > 1 or abs(eta[0]) > 1:
        raise ValueError("local point must lie in [-1, 1]^2")
    _, dR = _element_shape(patch, el, xi, eta)
    X = patch.flat_points()[np.asarray(el.cp)]
    J, det = _jacobian(X[None], dR)
    if det[0] <= 0:
        raise InvertedElementError(f"non-positive Jacobian {det[0]:.3e} in element {el.span}")
    dRdx = dR[0] @ np.linalg.inv(J[0])
    return _b_matrices(dRdx), float(det[0])


def element_stiffness(
    el: Element, patch: NurbsPatch, m: Material, rule: GaussRule, body_force=(0.0, 0.0)
) -> ElementMatrices:
    D = constitutive_plane_strain(m)
    nl = len(el.cp)
    K = np.zeros((2 * nl, 2 * nl))
    F = np.zeros(2 * nl)
    b = np.asarray(body_force, dtype=float)
    for xi, wx in zip(rule.points, rule.weights):
        for eta, wy in zip(rule.points, rule.weights):
            B, det = strain_displacement(el, patch, (xi, eta))
            K += B.T @ D @ B * det * wx * wy
            if b.any():
                R, _ = _element_shape(patch, el, np.array([xi]), np.array([eta]))
                F[0::2] += R[0] * b[0] * det * wx * wy
                F[1::2] += R[0] * b[1] * det * wx * wy
    return ElementMatrices(K, F)


class PatchQuadrature:
    """Shape functions of every element at every Gauss point of a patch.

    They depend only on knots and weights, so they survive control-point
    updates; only Jacobians are recomputed.
    """

    def __init__(self, patch: NurbsPatch, elements: list[Element], rule: GaussRule):
        self.elements = elements
        self.rule = rule
        pts, wts = rule.points, rule.weights
        xi, eta = np.meshgrid(pts, pts, indexing="ij")
        self.xi = np.stack([xi.ravel(), eta.ravel()], axis=1)  # (ng, 2)
        self.wq = np.outer(wts, wts).ravel()
        shapes = [_element_shape(patch, el, self.xi[:, 0], self.xi[:, 1]) for el in elements]
        self.R = np.array([r for r, _ in shapes])  # (ne, ng, nl)
        self.dR = np.array([d for _, d in shapes])  # (ne, ng, nl, 2), reference-square gradients
        self.cp = np.array([el.cp for el in elements])  # (ne, nl)

    def gradients(self, points: np.ndarray):
        """Physical gradients ``(ne, ng, nl, 2)`` and ``detJ`` ``(ne, ng)`` for flat control points."""
        X = points[self.cp]  # (ne, nl, 2)
        J, det = _jacobian(X[:, None], self.dR)
        if np.any(det <= 0):
            e, g = np.unravel_index(np.argmin(det), det.shape)
            raise InvertedElementError(f"non-positive Jacobian in element {self.elements[e].span}")
        inv = np.empty_like(J)
        inv[..., 0, 0] = J[..., 1, 1] / det
        inv[..., 1, 1] = J[..., 0, 0] / det
        inv[..., 0, 1] = -J[..., 0, 1] / det
        inv[..., 1, 0] = -J[..., 1, 0] / det
        dRdx = np.einsum("eglb,egba->egla", self.dR, inv)
        return dRdx, det

    def stiffness(self, points: np.ndarray, D: np.ndarray) -> np.ndarray:
        """Element stiffness matrices ``(ne, 2nl, 2nl)``."""
        dRdx, det = self.gradients(points)
        B = _b_matrices(dRdx)
        return np.einsum("egki,kl,eglj,eg->eij", B, D, B, det * self.wq, optimize=True)

    def strains(self, points: np.ndarray, disp: np.ndarray) -> np.ndarray:
        """Engineering strains ``(ne, ng, 3)`` for flat control-point displacements."""
        dRdx, _ = self.gradients(points)
        ue = disp[self.cp]  # (ne, nl, 2)
        exx = np.einsum("egl,el->eg", dRdx[..., 0], ue[..., 0])
        eyy = np.einsum("egl,el->eg", dRdx[..., 1], ue[..., 1])
        gxy = np.einsum("egl,el->eg", dRdx[..., 1], ue[..., 0]) + np.einsum("egl,el->eg", dRdx[..., 0], ue[..., 1])
        return np.stack([exx, eyy, gxy], axis=2)

    def physical_points(self, points: np.ndarray) -> np.ndarray:
        return np.einsum("egl,ela->ega", self.R, points[self.cp])
