"""Quadrature rules on simplices.

Points are stored in barycentric coordinates and weights are normalised
to the measure of the reference simplex (1/2 in 2D, 1/6 in 3D). The
physical scaling ``|cell| / |reference|`` is applied at integration time.
"""
from __future__ import annotations

from dataclasses import dataclass
from math import ceil, factorial

import numpy as np
from scipy.special import roots_jacobi

MAX_GAUSS_DEGREE = 6


def reference_measure(dim: int) -> float:
    return 1.0 / factorial(dim)


@dataclass(frozen=True, eq=False)
class QuadratureRule:
    dim: int
    points: np.ndarray  # (nq, dim + 1) barycentric
    weights: np.ndarray  # (nq,)
    degree: int
    name: str = "gauss"

    @property
    def size(self) -> int:
        return self.weights.size

    def cartesian(self) -> np.ndarray:
        """Points on the reference simplex in Cartesian coordinates."""
        return self.points[:, 1:]

    def physical_weights(self, mesh) -> np.ndarray:
        """(nc, nq) weights scaled to each cell of ``mesh``."""
        scale = mesh.volumes / reference_measure(self.dim)
        return scale[:, None] * self.weights[None, :]


def _jacobi01(n: int, alpha: int):
    """Gauss-Jacobi nodes/weights on [0, 1] for the weight (1 - t)^alpha."""
    x, w = roots_jacobi(n, alpha, 0)
    return (1.0 + x) / 2.0, w / 2.0 ** (alpha + 1)


def gauss_rule(dim: int, degree: int) -> QuadratureRule:
    """Collapsed Gauss-Jacobi product rule exact up to ``degree``.

    Degrees 0 and 1 return the one-point centroid rule.
    """
    if dim not in (2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    if not 0 <= degree <= MAX_GAUSS_DEGREE:
        raise ValueError(f"unsupported quadrature degree {degree}")
    if degree <= 1:
        bary = np.full((1, dim + 1), 1.0 / (dim + 1))
        return QuadratureRule(dim, bary, np.array([reference_measure(dim)]), degree)

    n = ceil((degree + 1) / 2)
    s, ws = _jacobi01(n, 0)
    t, wt = _jacobi01(n, 1)
    if dim == 2:
        S, T = np.meshgrid(s, t, indexing="ij")
        W = np.outer(ws, wt)
        x = np.column_stack([(S * (1 - T)).ravel(), T.ravel()])
    else:
        u, wu = _jacobi01(n, 2)
        S, T, U = np.meshgrid(s, t, u, indexing="ij")
        W = ws[:, None, None] * wt[None, :, None] * wu[None, None, :]
        x = np.column_stack(
            [(S * (1 - T) * (1 - U)).ravel(), (T * (1 - U)).ravel(), U.ravel()]
        )
    bary = np.column_stack([1.0 - x.sum(axis=1), x])
    return QuadratureRule(dim, bary, W.ravel(), degree)


def q1_rule(dim: int) -> QuadratureRule:
    """Vertex rule: each vertex carries |reference| / (d + 1)."""
    w = np.full(dim + 1, reference_measure(dim) / (dim + 1))
    return QuadratureRule(dim, np.eye(dim + 1), w, 1, name="Q1")


def q2_rule(dim: int) -> QuadratureRule:
    """Vertex-plus-centroid rule, exact on quadratics."""
    ref = reference_measure(dim)
    bary = np.vstack([np.eye(dim + 1), np.full((1, dim + 1), 1.0 / (dim + 1))])
    w = np.concatenate(
        [
            np.full(dim + 1, ref / ((dim + 1) * (dim + 2))),
            [ref * (dim + 1) / (dim + 2)],
        ]
    )
    return QuadratureRule(dim, bary, w, 2, name="Q2")


def integrate(rule: QuadratureRule, mesh, cell: int, integrand) -> float:
    """Integrate ``integrand(x)`` over one cell; ``x`` has shape (nq, d)."""
    if rule.dim != mesh.dim:
        raise ValueError("rule dimension does not match mesh dimension")
    x = mesh.points[mesh.cells[cell]]
    xq = rule.points @ x
    vals = np.asarray(integrand(xq), dtype=float)
    scale = mesh.volumes[cell] / reference_measure(rule.dim)
    return float(scale * np.dot(rule.weights, vals))


def integrate_mesh(rule: QuadratureRule, mesh, integrand) -> float:
    """Integrate over the whole mesh; ``integrand`` receives (nc, nq, d)."""
    xq = mesh.map_points(rule.points)
    vals = np.asarray(integrand(xq), dtype=float)
    return float(np.sum(rule.physical_weights(mesh) * vals))
