"""Assembly of the saddle-point blocks for the four schemes.

Unknowns are ordered ``eta = (sigma, omega)`` and ``v = (u, r)``. The
system matrix is ``[[A, -B^T], [B, 0]]`` with

    <B eta, v'> = -(div sigma, u') + (asym sigma, r') - (div(l omega), r')

and ``div(l omega)`` expanded as ``grad l . omega + l div omega`` at the
quadrature points.
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
import scipy.sparse as sp

from .fespace import FunctionSpace, _scatter, l2_project
from .model import (
    LengthScale,
    ManufacturedCase,
    MaterialParams,
    asym,
    operator_matrix,
    rotation_dim,
)
from .quadrature import gauss_rule, q1_rule, q2_rule

EXACT_DEGREE = 4
LOAD_DEGREE = 6


@dataclass(frozen=True)
class SchemeSpec:
    name: str
    stress: str
    displacement: str
    rotation: str
    stress_quadrature: str
    rotation_quadrature: str = "exact"
    barycentric: bool = False

    @property
    def uses_lumped_rotation(self) -> bool:
        return self.rotation_quadrature == "Q1"


SCHEMES = {
    "BDM1-P0": SchemeSpec("BDM1-P0", "BDM1", "P0", "P0", "Q1"),
    "BDM1-L1": SchemeSpec("BDM1-L1", "BDM1", "P0", "L1", "Q1", rotation_quadrature="Q1"),
    "RT1-L1": SchemeSpec("RT1-L1", "RT1", "P1dc", "L1", "Q2"),
    "RT1-P1": SchemeSpec("RT1-P1", "RT1", "P1dc", "P1dc", "Q2", barycentric=True),
}


def get_scheme(name) -> SchemeSpec:
    if isinstance(name, SchemeSpec):
        return name
    try:
        return SCHEMES[name]
    except KeyError:
        raise ValueError(f"unknown scheme {name!r}; choose from {sorted(SCHEMES)}") from None


class DiscreteSpaces:
    """The four spaces of a scheme on a mesh and the DOF layout."""

    def __init__(self, mesh, scheme):
        self.scheme = get_scheme(scheme)
        if self.scheme.barycentric and not mesh.barycentric:
            raise ValueError(f"{self.scheme.name} requires a barycentrically subdivided mesh")
        d = mesh.dim
        k = rotation_dim(d)
        self.mesh = mesh
        self.dim = d
        self.k = k
        self.sigma = FunctionSpace(mesh, self.scheme.stress, d)
        self.omega = FunctionSpace(mesh, self.scheme.stress, k)
        self.u = FunctionSpace(mesh, self.scheme.displacement, d)
        self.r = FunctionSpace(mesh, self.scheme.rotation, k)

    @property
    def n_eta(self) -> int:
        return self.sigma.ndof + self.omega.ndof

    @property
    def n_v(self) -> int:
        return self.u.ndof + self.r.ndof

    @property
    def dof_full(self) -> int:
        return self.n_eta + self.n_v

    @property
    def dof_schur(self) -> int:
        return self.n_v

    def split_eta(self, eta):
        return eta[: self.sigma.ndof], eta[self.sigma.ndof :]

    def split_v(self, v):
        return v[: self.u.ndof], v[self.u.ndof :]


@dataclass
class SaddleSystem:
    """``[[A, -B^T], [B, 0]] [eta; v] = [g; f]``."""

    A: sp.csr_matrix
    B: sp.csr_matrix
    g: np.ndarray
    f: np.ndarray
    spaces: DiscreteSpaces
    formulation: str
    extra: dict = field(default_factory=dict)

    def matrix(self) -> sp.csr_matrix:
        return sp.bmat([[self.A, -self.B.T], [self.B, None]]).tocsr()

    def rhs(self) -> np.ndarray:
        return np.concatenate([self.g, self.f])


def _replica_dofs(space: FunctionSpace) -> np.ndarray:
    """(nc, rep, nb) global DOFs."""
    return np.stack([space.component_dofs(r) for r in range(space.replication)], axis=1)


def _stress_rule(spec: SchemeSpec, dim: int, quadrature: str):
    if quadrature == "exact":
        return gauss_rule(dim, EXACT_DEGREE)
    if quadrature == "Q1":
        return q1_rule(dim)
    if quadrature == "Q2":
        return q2_rule(dim)
    raise ValueError(f"unknown quadrature {quadrature!r}")


def _weighted_mass(space: FunctionSpace, rule, Amat: np.ndarray) -> sp.csr_matrix:
    mesh = space.mesh
    d = mesh.dim
    rep = space.replication
    w = rule.physical_weights(mesh)
    vals, _ = space.tabulate(rule.points)
    A4 = Amat.reshape(rep, d, rep, d)
    local = np.einsum("cq,cqaj,ijkl,cqbl->ciakb", w, vals, A4, vals, optimize=True)
    nc, nb = space.cell_dofs.shape
    dofs = _replica_dofs(space).reshape(nc, rep * nb)
    M = _scatter(local.reshape(nc, rep * nb, rep * nb), dofs, dofs, space.ndof, space.ndof).tocsr()
    M.eliminate_zeros()
    return M


def _assemble_stress_form(spaces: DiscreteSpaces, params: MaterialParams, quadrature: str):
    rule = _stress_rule(spaces.scheme, spaces.dim, quadrature)
    d = spaces.dim
    As = _weighted_mass(spaces.sigma, rule, operator_matrix(params, d, "sigma"))
    Aw = _weighted_mass(spaces.omega, rule, operator_matrix(params, d, "omega"))
    A = sp.block_diag([As, Aw], format="csr")
    A.eliminate_zeros()
    return A


def assemble_A(spaces: DiscreteSpaces, params: MaterialParams = MaterialParams()) -> sp.csr_matrix:
    """Exact stress compliance form (Gauss rule of degree 4)."""
    return _assemble_stress_form(spaces, params, "exact")


def assemble_A_h(spaces: DiscreteSpaces, params: MaterialParams = MaterialParams()) -> sp.csr_matrix:
    """Lumped compliance form with the scheme's vertex-based rule."""
    return _assemble_stress_form(spaces, params, spaces.scheme.stress_quadrature)


def _asym_tensor(d: int) -> np.ndarray:
    """P[m, i, j] with asym(tau)_m = sum_ij P[m, i, j] tau_ij."""
    basis = np.eye(d * d).reshape(d * d, d, d)
    return asym(basis).T.reshape(rotation_dim(d), d, d)


def _scalar_tab(space: FunctionSpace, rule):
    vals, _ = space.tabulate(rule.points)  # (nq, nb)
    return vals


def _rotation_rows(spaces: DiscreteSpaces, ell: LengthScale, rule):
    """asym and couple-stress blocks: rows r, columns sigma and omega."""
    mesh = spaces.mesh
    d, k = spaces.dim, spaces.k
    nc = mesh.num_cells
    w = rule.physical_weights(mesh)
    psi = _scalar_tab(spaces.r, rule)  # (nq, nr)
    rdofs = _replica_dofs(spaces.r)  # (nc, k, nr)
    nr = psi.shape[1]

    vals, _ = spaces.sigma.tabulate(rule.points)
    P = _asym_tensor(d)
    loc = np.einsum("cq,qb,mij,cqaj->cmbia", w, psi, P, vals, optimize=True)
    sdofs = _replica_dofs(spaces.sigma)
    na = vals.shape[2]
    Bs = _scatter(
        loc.reshape(nc, k * nr, d * na),
        rdofs.reshape(nc, -1),
        sdofs.reshape(nc, -1),
        spaces.r.ndof,
        spaces.sigma.ndof,
    )

    if ell.is_zero:
        Bw = sp.coo_matrix((spaces.r.ndof, spaces.omega.ndof))
    else:
        xq = mesh.map_points(rule.points)
        flat = xq.reshape(-1, d)
        lv = ell(flat).reshape(nc, -1)
        lg = ell.grad(flat).reshape(nc, -1, d)
        wv, wdiv = spaces.omega.tabulate(rule.points)
        # -(grad l . phi + l div phi) psi, identical for every component m
        core = np.einsum("cqi,cqai->cqa", lg, wv) + lv[:, :, None] * wdiv
        loc1 = -np.einsum("cq,qb,cqa->cba", w, psi, core)
        wdofs = _replica_dofs(spaces.omega)
        blocks = [
            _scatter(loc1, rdofs[:, m], wdofs[:, m], spaces.r.ndof, spaces.omega.ndof)
            for m in range(k)
        ]
        Bw = sum(blocks[1:], blocks[0])
    return Bs, Bw


def _displacement_rows(spaces: DiscreteSpaces, rule):
    mesh = spaces.mesh
    d = spaces.dim
    w = rule.physical_weights(mesh)
    psi = _scalar_tab(spaces.u, rule)
    _, div = spaces.sigma.tabulate(rule.points)
    loc = -np.einsum("cq,qb,cqa->cba", w, psi, div)
    udofs = _replica_dofs(spaces.u)
    sdofs = _replica_dofs(spaces.sigma)
    blocks = [
        _scatter(loc, udofs[:, i], sdofs[:, i], spaces.u.ndof, spaces.sigma.ndof)
        for i in range(d)
    ]
    return sum(blocks[1:], blocks[0])


def _stack_B(spaces, Bu, Bs, Bw) -> sp.csr_matrix:
    zero_uw = sp.coo_matrix((spaces.u.ndof, spaces.omega.ndof))
    B = sp.bmat([[Bu, zero_uw], [Bs, Bw]], format="csr")
    B.sum_duplicates()
    B.eliminate_zeros()
    B.sort_indices()
    return B


def assemble_B(spaces: DiscreteSpaces, ell: LengthScale) -> sp.csr_matrix:
    """Exact coupling form (Gauss rule of degree 6)."""
    rule = gauss_rule(spaces.dim, LOAD_DEGREE)
    Bu = _displacement_rows(spaces, rule)
    Bs, Bw = _rotation_rows(spaces, ell, rule)
    return _stack_B(spaces, Bu, Bs, Bw)


def assemble_B_h(spaces: DiscreteSpaces, ell: LengthScale) -> sp.csr_matrix:
    """Coupling form with vertex quadrature on the rotation rows."""
    if spaces.scheme.rotation != "L1":
        raise ValueError("the lumped rotation form needs continuous linear rotations")
    Bu = _displacement_rows(spaces, gauss_rule(spaces.dim, LOAD_DEGREE))
    Bs, Bw = _rotation_rows(spaces, ell, q1_rule(spaces.dim))
    return _stack_B(spaces, Bu, Bs, Bw)


def _load_vector(space: FunctionSpace, values: np.ndarray, rule) -> np.ndarray:
    """``(values_r, psi)`` for every replica; values (nc, nq, rep)."""
    w = rule.physical_weights(space.mesh)
    psi = _scalar_tab(space, rule)
    out = np.zeros(space.ndof)
    loc = np.einsum("cq,cqr,qb->crb", w, values, psi)
    np.add.at(out, _replica_dofs(space).ravel(), loc.ravel())
    return out


def assemble_rhs(case: ManufacturedCase, spaces: DiscreteSpaces):
    """``(g, f)`` with ``g = 0`` and ``f`` integrated by a degree 6 rule."""
    mesh = spaces.mesh
    rule = gauss_rule(spaces.dim, LOAD_DEGREE)
    xq = mesh.map_points(rule.points)
    nc, nq, d = xq.shape
    fs, fw = case.forcing(xq.reshape(-1, d))
    f = np.concatenate(
        [
            _load_vector(spaces.u, fs.reshape(nc, nq, d), rule),
            _load_vector(spaces.r, fw.reshape(nc, nq, spaces.k), rule),
        ]
    )
    return np.zeros(spaces.n_eta), f


def project_rotation_load(case: ManufacturedCase, spaces: DiscreteSpaces) -> np.ndarray:
    """Coefficients of the L2 projection of the rotation load onto R_h."""
    return l2_project(spaces.r, lambda x: case.forcing(x)[1], degree=LOAD_DEGREE, tol=1e-12)


def lumped_mass_diagonal(space: FunctionSpace) -> np.ndarray:
    """Vertex-rule mass of a continuous linear space (one replica)."""
    if space.family != "L1":
        raise ValueError("lumped mass is defined for L1 spaces")
    m = space.mesh
    d = m.dim
    diag = np.zeros(space.ndof_base)
    np.add.at(diag, m.cells.ravel(), np.repeat(m.volumes / (d + 1), d + 1))
    return diag


def assemble_f_h(case: ManufacturedCase, spaces: DiscreteSpaces) -> np.ndarray:
    """Load vector with the rotation rows replaced by ``(Pi_R f_omega, r')_Q1``."""
    if spaces.scheme.rotation != "L1":
        raise ValueError("the lumped rotation load needs continuous linear rotations")
    _, f = assemble_rhs(case, spaces)
    coeffs = project_rotation_load(case, spaces)
    diag = np.tile(lumped_mass_diagonal(spaces.r), spaces.k)
    f[spaces.u.ndof :] = diag * coeffs
    return f


def assemble_system(mesh, scheme, case: ManufacturedCase, formulation: str = "MS-MFE") -> SaddleSystem:
    """Assemble one formulation (``"MFE"`` or ``"MS-MFE"``) of a scheme.

    The MFE system carries the matching lumped matrix in ``extra["A_h"]``
    for use as a preconditioner.
    """
    spaces = DiscreteSpaces(mesh, scheme)
    spec = spaces.scheme
    if case.dim != mesh.dim:
        raise ValueError("case and mesh dimensions differ")
    g, f = assemble_rhs(case, spaces)
    A_h = assemble_A_h(spaces, case.params)
    if formulation == "MFE":
        A = assemble_A(spaces, case.params)
        B = assemble_B(spaces, case.lengthscale)
        return SaddleSystem(A, B, g, f, spaces, "MFE", {"A_h": A_h})
    if formulation == "MS-MFE":
        if spec.uses_lumped_rotation:
            B = assemble_B_h(spaces, case.lengthscale)
            f = assemble_f_h(case, spaces)
        else:
            B = assemble_B(spaces, case.lengthscale)
        return SaddleSystem(A_h, B, g, f, spaces, "MS-MFE", {"A_h": A_h})
    raise ValueError(f"unknown formulation {formulation!r}")
