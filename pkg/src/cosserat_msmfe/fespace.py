"""Reference elements and global DOF maps.

Supported families:

``P0``    piecewise constants
``P1dc``  discontinuous piecewise linears
``L1``    continuous piecewise linears (vertex DOFs)
``BDM1``  Brezzi-Douglas-Marini of degree 1
``RT1``   Raviart-Thomas with linear normal traces

The H(div) bases are nodal on facets: the DOF attached to (facet F,
vertex v) is the flux density ``phi(v) . n_F |F|``. A BDM1 basis function
therefore vanishes at every cell vertex other than its own. The RT1
interior DOFs are point values at the centroid, so the facet functions
vanish at the centroid and the interior (bubble) functions vanish at the
vertices. Both properties make the vertex-lumped mass matrices local.
"""
from __future__ import annotations

import itertools
from dataclasses import dataclass
from functools import cached_property, lru_cache
from math import factorial

import numpy as np
import scipy.sparse as sp

from .quadrature import gauss_rule

SCALAR_FAMILIES = ("P0", "P1dc", "L1")
HDIV_FAMILIES = ("BDM1", "RT1")
FAMILIES = SCALAR_FAMILIES + HDIV_FAMILIES

# reference values below this are exact zeros polluted by round-off
_SNAP = 1e-12


def _monomials(dim: int, degree: int):
    return [e for e in itertools.product(range(degree + 1), repeat=dim) if sum(e) <= degree]


def _eval_monomials(exps, x):
    """Values (nq, nm) and gradients (nq, nm, d) of monomials at x (nq, d)."""
    e = np.array(exps)
    vals = np.prod(x[:, None, :] ** e[None], axis=2)
    grads = np.zeros(vals.shape + (x.shape[1],))
    for c in range(x.shape[1]):
        ec = e.copy()
        ec[:, c] = np.maximum(ec[:, c] - 1, 0)
        grads[..., c] = e[None, :, c] * np.prod(x[:, None, :] ** ec[None], axis=2)
    return vals, grads


def _facet_local_vertices(dim: int) -> np.ndarray:
    """Row k lists the local vertices of the facet opposite vertex k."""
    return np.array([[j for j in range(dim + 1) if j != k] for k in range(dim + 1)])


@dataclass(frozen=True, eq=False)
class ReferenceElement:
    family: str
    dim: int

    @property
    def is_hdiv(self) -> bool:
        return self.family in HDIV_FAMILIES

    @property
    def num_facet_dofs(self) -> int:
        return self.dim * (self.dim + 1) if self.is_hdiv else 0

    @property
    def local_dim(self) -> int:
        d = self.dim
        return {
            "P0": 1,
            "P1dc": d + 1,
            "L1": d + 1,
            "BDM1": d * (d + 1),
            "RT1": d * (d + 2),
        }[self.family]

    @cached_property
    def _hdiv_coefficients(self) -> tuple[list, np.ndarray]:
        """Monomial exponents and (nb, nm, d) coefficients of the dual basis."""
        d = self.dim
        exps = _monomials(d, 2)
        index = {e: i for i, e in enumerate(exps)}
        unit = np.eye(d, dtype=int)
        cands = []
        for c in range(d):
            for e in _monomials(d, 1):
                p = np.zeros((len(exps), d))
                p[index[e], c] = 1.0
                cands.append(p)
        if self.family == "RT1":
            for j in range(d):
                p = np.zeros((len(exps), d))
                for i in range(d):
                    p[index[tuple(unit[i] + unit[j])], i] = 1.0
                cands.append(p)
        cands = np.array(cands)  # (nb, nm, d)

        verts = np.vstack([np.zeros(d), np.eye(d)])
        grad_lam = np.vstack([-np.ones(d), np.eye(d)])
        # area-weighted outward normal of the facet opposite vertex k
        weighted_normals = -grad_lam / factorial(d - 1)
        rows = []
        for k, fverts in enumerate(_facet_local_vertices(d)):
            for v in fverts:
                mv, _ = _eval_monomials(exps, verts[v : v + 1])
                rows.append(np.einsum("m,bmc,c->b", mv[0], cands, weighted_normals[k]))
        if self.family == "RT1":
            mc, _ = _eval_monomials(exps, np.full((1, d), 1.0 / (d + 1)))
            for j in range(d):
                rows.append(np.einsum("m,bm->b", mc[0], cands[:, :, j]))
        dual = np.linalg.inv(np.array(rows))  # columns are basis coefficients
        coeffs = np.einsum("ba,bmc->amc", dual, cands)
        return exps, coeffs

    def tabulate(self, bary: np.ndarray):
        """Reference basis at barycentric points.

        Returns ``values`` of shape (nq, nb) for scalar families or
        (nq, nb, d) for H(div) families, and for H(div) also ``div`` of
        shape (nq, nb).
        """
        bary = np.atleast_2d(bary)
        nq = bary.shape[0]
        if self.family == "P0":
            return np.ones((nq, 1)), None
        if not self.is_hdiv:
            return bary.copy(), None
        exps, coeffs = self._hdiv_coefficients
        mv, mg = _eval_monomials(exps, bary[:, 1:])
        vals = np.einsum("qm,bmc->qbc", mv, coeffs)
        div = np.einsum("qmc,bmc->qb", mg, coeffs)
        vals[np.abs(vals) < _SNAP] = 0.0
        div[np.abs(div) < _SNAP] = 0.0
        return vals, div


@lru_cache(maxsize=None)
def reference_element(family: str, dim: int) -> ReferenceElement:
    if family not in FAMILIES:
        raise ValueError(f"unknown element family {family!r}")
    if dim not in (2, 3):
        raise ValueError(f"unsupported dimension {dim}")
    return ReferenceElement(family, dim)


class FunctionSpace:
    """Global finite element space, optionally replicated componentwise.

    ``replication`` copies of the base space are stacked: component ``r``
    owns the DOF range ``[r * ndof_base, (r + 1) * ndof_base)``. For H(div)
    spaces each copy is one row of a matrix-valued field.
    """

    def __init__(self, mesh, family: str, replication: int = 1):
        self.mesh = mesh
        self.element = reference_element(family, mesh.dim)
        self.family = family
        self.replication = int(replication)
        self.cell_dofs, self.cell_signs, self.ndof_base = self._build_dofs()

    def __repr__(self):
        return (
            f"FunctionSpace({self.family}, dim={self.mesh.dim}, "
            f"replication={self.replication}, ndof={self.ndof})"
        )

    @property
    def ndof(self) -> int:
        return self.ndof_base * self.replication

    @property
    def is_hdiv(self) -> bool:
        return self.element.is_hdiv

    @property
    def local_dim(self) -> int:
        return self.element.local_dim

    def _build_dofs(self):
        m, d, fam = self.mesh, self.mesh.dim, self.family
        nc = m.num_cells
        if fam == "P0":
            return np.arange(nc)[:, None], np.ones((nc, 1)), nc
        if fam == "P1dc":
            dofs = np.arange(nc * (d + 1)).reshape(nc, d + 1)
            return dofs, np.ones(dofs.shape), nc * (d + 1)
        if fam == "L1":
            return m.cells.copy(), np.ones(m.cells.shape), m.num_vertices

        nf = m.num_facets
        local = _facet_local_vertices(d)
        dofs, signs = [], []
        for k in range(d + 1):
            f = m.cell_facets[:, k]
            fverts = m.facets[f]  # (nc, d) sorted
            for j in local[k]:
                v = m.cells[:, j]
                slot = np.argmax(fverts == v[:, None], axis=1)
                dofs.append(f * d + slot)
                signs.append(m.cell_facet_signs[:, k])
        ndof = nf * d
        if fam == "RT1":
            for j in range(d):
                dofs.append(ndof + np.arange(nc) * d + j)
                signs.append(np.ones(nc, dtype=np.int64))
            ndof += nc * d
        return (
            np.stack(dofs, axis=1),
            np.stack(signs, axis=1).astype(float),
            ndof,
        )

    def component_dofs(self, r: int) -> np.ndarray:
        """(nc, nb) global DOFs of replica ``r``."""
        return self.cell_dofs + r * self.ndof_base

    def facet_dof_vertices(self) -> np.ndarray:
        """Mesh vertex attached to each facet DOF of the base space."""
        if not self.is_hdiv:
            raise ValueError("only H(div) spaces have facet DOFs")
        return self.mesh.facets.ravel()

    def tabulate(self, bary: np.ndarray, cells=None):
        """Physical basis values at barycentric points.

        For scalar families returns ``values`` (nq, nb) shared by all cells.
        For H(div) families applies the contravariant Piola map and returns
        ``values`` (nc, nq, nb, d) and ``div`` (nc, nq, nb).
        """
        vals, div = self.element.tabulate(bary)
        if not self.is_hdiv:
            return vals, None
        m = self.mesh
        sl = slice(None) if cells is None else cells
        J = m.jacobians[sl]
        det = m.determinants[sl]
        s = self.cell_signs[sl] / det[:, None]
        pvals = np.einsum("cij,qbj->cqbi", J, vals) * s[:, None, :, None]
        pdiv = div[None] * s[:, None, :]
        return pvals, pdiv

    def evaluate(self, coefficients, bary: np.ndarray, cells=None):
        """Evaluate a coefficient vector at barycentric points of cells.

        Returns (nc, nq, rep) for scalar families and (nc, nq, rep, d)
        for H(div) families.
        """
        coefficients = np.asarray(coefficients, dtype=float)
        if coefficients.shape != (self.ndof,):
            raise ValueError("coefficient vector has the wrong length")
        sl = slice(None) if cells is None else cells
        comps = np.stack(
            [coefficients[self.component_dofs(r)[sl]] for r in range(self.replication)],
            axis=1,
        )  # (nc, rep, nb)
        vals, _ = self.tabulate(bary, cells)
        if self.is_hdiv:
            return np.einsum("crb,cqbi->cqri", comps, vals)
        return np.einsum("crb,qb->cqr", comps, vals)

    def evaluate_divergence(self, coefficients, bary: np.ndarray) -> np.ndarray:
        """Row-wise divergence (nc, nq, rep) of an H(div) field."""
        if not self.is_hdiv:
            raise ValueError("divergence is only defined for H(div) spaces")
        comps = np.stack(
            [coefficients[self.component_dofs(r)] for r in range(self.replication)],
            axis=1,
        )
        _, div = self.tabulate(bary)
        return np.einsum("crb,cqb->cqr", comps, div)

    def mass_matrix(self, degree: int = 4) -> sp.csr_matrix:
        """Consistent L2 mass matrix, block diagonal over replicas."""
        rule = gauss_rule(self.mesh.dim, degree)
        w = rule.physical_weights(self.mesh)
        vals, _ = self.tabulate(rule.points)
        if self.is_hdiv:
            local = np.einsum("cq,cqai,cqbi->cab", w, vals, vals)
        else:
            local = np.einsum("cq,qa,qb->cab", w, vals, vals)
        blocks = [
            _scatter(local, self.component_dofs(r), self.component_dofs(r), self.ndof, self.ndof)
            for r in range(self.replication)
        ]
        return sum(blocks[1:], blocks[0]).tocsr()

    def interpolate_hdiv(self, field) -> np.ndarray:
        """Canonical nodal interpolant of a row-wise H(div) field.

        ``field(x)`` takes (n, d) points and returns (n, rep, d). Facet DOFs
        take the normal flux density at facet vertices; RT1 interior DOFs
        are fixed by matching the centroid value.
        """
        if not self.is_hdiv:
            raise ValueError("interpolate_hdiv needs an H(div) space")
        m, d = self.mesh, self.mesh.dim
        nf = m.num_facets
        x = m.points[m.facets]  # (nf, d, d)
        if d == 2:
            t = x[:, 1] - x[:, 0]
            nA = np.column_stack([t[:, 1], -t[:, 0]])
        else:
            nA = 0.5 * np.cross(x[:, 1] - x[:, 0], x[:, 2] - x[:, 0])
        # orient along the global convention: outward from facet_cells[:, 0]
        c0 = m.facet_cells[:, 0]
        opp = m.centroids[c0] - x.mean(axis=1)
        nA *= np.where(np.einsum("fi,fi->f", nA, opp) > 0, -1.0, 1.0)[:, None]
        out = np.zeros(self.ndof)
        vals = np.asarray(field(x.reshape(-1, d))).reshape(nf, d, self.replication, d)
        for r in range(self.replication):
            off = r * self.ndof_base
            out[off : off + nf * d] = np.einsum("fsi,fi->fs", vals[:, :, r], nA).ravel()
        if self.family == "RT1":
            cen = np.full((1, d + 1), 1.0 / (d + 1))
            basis, _ = self.tabulate(cen)  # (nc, 1, nb, d)
            basis = basis[:, 0]
            target = np.asarray(field(m.centroids)).reshape(-1, self.replication, d)
            nfd = self.element.num_facet_dofs
            for r in range(self.replication):
                dofs = self.component_dofs(r)
                fc = out[dofs[:, :nfd]]
                resid = target[:, r] - np.einsum("cb,cbi->ci", fc, basis[:, :nfd])
                out[dofs[:, nfd:]] = np.linalg.solve(
                    np.transpose(basis[:, nfd:], (0, 2, 1)), resid[..., None]
                )[..., 0]
        return out


def _scatter(local, rows, cols, nrows, ncols) -> sp.coo_matrix:
    """COO matrix from per-cell blocks ``local[c, a, b]``."""
    nc, na, nb = local.shape
    r = np.broadcast_to(rows[:, :, None], (nc, na, nb))
    c = np.broadcast_to(cols[:, None, :], (nc, na, nb))
    return sp.coo_matrix((local.ravel(), (r.ravel(), c.ravel())), shape=(nrows, ncols))


def make_space(mesh, family: str, replication: int = 1) -> FunctionSpace:
    return FunctionSpace(mesh, family, replication)


def l2_project(space: FunctionSpace, target, degree: int = 6, tol: float = 1e-13):
    """L2 projection of ``target`` onto ``space``.

    ``target(x)`` maps (n, d) points to (n, rep) values for scalar spaces or
    (n, rep, d) for H(div) spaces.
    """
    from .solve import pcg

    mesh = space.mesh
    rule = gauss_rule(mesh.dim, degree)
    w = rule.physical_weights(mesh)
    xq = mesh.map_points(rule.points)
    nc, nq, d = xq.shape
    vals = np.asarray(target(xq.reshape(-1, d)), dtype=float)
    rhs = np.zeros(space.ndof)
    basis, _ = space.tabulate(rule.points)
    for r in range(space.replication):
        if space.is_hdiv:
            t = vals.reshape(nc, nq, space.replication, d)[:, :, r]
            loc = np.einsum("cq,cqi,cqbi->cb", w, t, basis)
        else:
            t = vals.reshape(nc, nq, space.replication)[:, :, r]
            loc = np.einsum("cq,cq,qb->cb", w, t, basis)
        np.add.at(rhs, space.component_dofs(r), loc)
    M = space.mass_matrix(degree=4)
    diag = M.diagonal()
    if np.any(diag <= 0):
        raise np.linalg.LinAlgError("singular mass matrix")
    x, info = pcg(M, rhs, tol=tol, precond=1.0 / diag, maxiter=10 * space.ndof + 100)
    if not info.converged:
        raise np.linalg.LinAlgError("mass matrix solve did not converge")
    return x


def eval_function(space: FunctionSpace, coefficients, cell, points):
    """Evaluate a discrete field on one cell (or an array of cells).

    Parameters
    ----------
    space : FunctionSpace
    coefficients : array_like
        Global coefficient vector of length ``space.ndof``.
    cell : int or array_like of int
    points : array_like
        Barycentric coordinates, shape (nq, d+1).

    Returns
    -------
    ndarray
        (nq, rep) for scalar families, (nq, rep, d) for H(div) families;
        a leading cell axis is kept when ``cell`` is an array.
    """
    cells = np.atleast_1d(np.asarray(cell, dtype=np.int64))
    nc = space.mesh.num_cells
    if cells.size and (cells.min() < 0 or cells.max() >= nc):
        raise IndexError(f"cell index out of range for a mesh with {nc} cells")
    vals = space.evaluate(coefficients, np.atleast_2d(np.asarray(points, dtype=float)), cells)
    return vals[0] if np.ndim(cell) == 0 else vals
