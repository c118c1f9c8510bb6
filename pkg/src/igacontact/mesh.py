"""Element extraction from knot spans, DOF numbering and Gauss rules."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .nurbs import NurbsPatch


@dataclass(frozen=True)
class Element:
    body: int
    span: tuple[int, int]  # knot-span indices (s_u, s_v)
    u_range: tuple[float, float]
    v_range: tuple[float, float]
    cp: tuple[int, ...]  # flat control-point indices, local order j_v * (p + 1) + i_u

    @property
    def area(self) -> float:
        return (self.u_range[1] - self.u_range[0]) * (self.v_range[1] - self.v_range[0])


@dataclass(frozen=True)
class GaussRule:
    points: np.ndarray
    weights: np.ndarray

    @property
    def n(self) -> int:
        return self.points.size


def gauss_rule(n: int) -> GaussRule:
    """Gauss-Legendre rule with ``n`` points on [-1, 1]."""
    if not 1 <= n <= 10:
        raise ValueError(f"unsupported Gauss rule order {n}; expected 1..10")
    x, w = np.polynomial.legendre.leggauss(n)
    return GaussRule(x, w)


def extract_elements(patch: NurbsPatch, body: int = 0) -> list[Element]:
    ku, kv = patch.knotvec_u, patch.knotvec_v
    p, q = ku.degree, kv.degree
    elements = []
    for sv in kv.span_indices():
        for su in ku.span_indices():
            iu = np.arange(su - p, su + 1)
            iv = np.arange(sv - q, sv + 1)
            cp = patch.flat_index(iu[None, :], iv[:, None]).reshape(-1)
            elements.append(
                Element(
                    body=body,
                    span=(su, sv),
                    u_range=(float(ku.knots[su]), float(ku.knots[su + 1])),
                    v_range=(float(kv.knots[sv]), float(kv.knots[sv + 1])),
                    cp=tuple(int(c) for c in cp),
                )
            )
    return elements


@dataclass(frozen=True)
class DofMap:
    """Global numbering: ``2 * (offset[body] + cp) + component``."""

    offsets: tuple[int, ...]
    counts: tuple[int, ...]

    @property
    def n_dof(self) -> int:
        return 2 * sum(self.counts)

    def dof(self, body: int, cp, comp):
        cp = np.asarray(cp)
        if np.any(cp < 0) or np.any(cp >= self.counts[body]):
            raise IndexError(f"control point index out of range for body {body}")
        return 2 * (self.offsets[body] + cp) + np.asarray(comp)

    def body_dofs(self, body: int) -> np.ndarray:
        start = 2 * self.offsets[body]
        return np.arange(start, start + 2 * self.counts[body])

    def element_dofs(self, el: Element) -> np.ndarray:
        """Interleaved (x, y) DOFs of an element's control points."""
        base = 2 * (self.offsets[el.body] + np.asarray(el.cp))
        return np.stack([base, base + 1], axis=1).reshape(-1)


def build_dof_map(bodies) -> DofMap:
    """Number the control points of each body's patch consecutively."""
    counts = tuple(b.patch.n_control_points for b in bodies)
    offsets = tuple(int(o) for o in np.concatenate([[0], np.cumsum(counts)[:-1]]))
    return DofMap(offsets, counts)
