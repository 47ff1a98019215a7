"""Small-scale structural diagnostics (dense linear algebra)."""
from __future__ import annotations

import numpy as np
import scipy.linalg as sla
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .assembly import DiscreteSpaces, _replica_dofs, assemble_B
from .fespace import _scatter
from .model import LengthScale
from .quadrature import gauss_rule


def divergence_gram(space) -> sp.csr_matrix:
    """``(div phi_a, div phi_b)`` summed over the rows of an H(div) field."""
    rule = gauss_rule(space.mesh.dim, 2)
    w = rule.physical_weights(space.mesh)
    _, div = space.tabulate(rule.points)
    local = np.einsum("cq,cqa,cqb->cab", w, div, div)
    dofs = _replica_dofs(space)
    blocks = [
        _scatter(local, dofs[:, r], dofs[:, r], space.ndof, space.ndof)
        for r in range(space.replication)
    ]
    return sum(blocks[1:], blocks[0]).tocsr()


def elasticity_block(spaces: DiscreteSpaces) -> sp.csr_matrix:
    """Rows of B for u and r restricted to the Cauchy stress columns."""
    B = assemble_B(spaces, LengthScale.from_name("zero"))
    return B[:, : spaces.sigma.ndof].tocsr()


def inf_sup_constant(mesh, scheme) -> float:
    """Discrete inf-sup constant of the elasticity coupling.

    The stress norm is ``||s||^2 + ||div s||^2`` and the displacement and
    rotation norm is plain L2; the constant is the square root of the
    smallest eigenvalue of ``B M_X^{-1} B^T y = lambda M_Y y``.
    """
    spaces = DiscreteSpaces(mesh, scheme)
    B = elasticity_block(spaces)
    MX = (spaces.sigma.mass_matrix() + divergence_gram(spaces.sigma)).tocsc()
    MY = sp.block_diag([spaces.u.mass_matrix(), spaces.r.mass_matrix()]).toarray()
    lu = spla.splu(MX)
    Y = lu.solve(B.T.toarray())
    S = B @ Y
    S = 0.5 * (S + S.T)
    lam = sla.eigh(S, MY, subset_by_index=[0, 0], eigvals_only=True)[0]
    return float(np.sqrt(max(lam, 0.0)))


def kernel_divergence(mesh, scheme, samples: int = 50, seed: int = 0) -> float:
    """Largest ``||div s||`` over random stresses in the kernel of the coupling."""
    spaces = DiscreteSpaces(mesh, scheme)
    Bfull = elasticity_block(spaces).toarray()
    null = sla.null_space(Bfull)
    rng = np.random.default_rng(seed)
    pts = np.vstack([np.eye(mesh.dim + 1), np.full((1, mesh.dim + 1), 1.0 / (mesh.dim + 1))])
    worst = 0.0
    for _ in range(samples):
        s = null @ rng.standard_normal(null.shape[1])
        s /= np.abs(s).max()
        worst = max(worst, float(np.abs(spaces.sigma.evaluate_divergence(s, pts)).max()))
    return worst
