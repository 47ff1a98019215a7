"""Linear solvers for the saddle-point systems.

Two paths are provided:

* the reduced (multipoint stress) path: factor the block-diagonal lumped
  stress matrix, solve the Schur complement ``B A_h^{-1} B^T`` for the
  displacement and rotation by conjugate gradients, then recover the
  stresses block by block;
* the full path: restarted GMRES on ``[[A, -B^T], [B, 0]]``, right
  preconditioned by one exact reduced solve.

A system is any object with attributes ``A``, ``B`` (CSR matrices) and
``g``, ``f`` (vectors).
"""
from __future__ import annotations

import time
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla
from scipy.sparse.csgraph import connected_components

from .kernels import get_backend


@dataclass
class CGInfo:
    iterations: int
    residual: float
    converged: bool


@dataclass
class SolverReport:
    method: str
    iterations: int
    residual: float
    seconds: float
    schur_dim: int
    full_dim: int
    converged: bool


def as_csr(A) -> sp.csr_matrix:
    """CSR copy with sorted, unique column indices and int64 index arrays."""
    A = sp.csr_matrix(A, dtype=float)
    A.sum_duplicates()
    A.sort_indices()
    A.indptr = A.indptr.astype(np.int64)
    A.indices = A.indices.astype(np.int64)
    return A


class CSROperator:
    """Matrix-vector product through the active kernel backend."""

    def __init__(self, A, backend=None):
        self.matrix = as_csr(A)
        self.shape = self.matrix.shape
        self._k = get_backend(backend)

    def __matmul__(self, x):
        m = self.matrix
        return self._k.csr_matvec(m.indptr, m.indices, m.data, np.ascontiguousarray(x, float))


def pcg(A, b, tol=1e-10, precond=None, maxiter=None, x0=None):
    """Preconditioned conjugate gradients.

    ``A`` is anything supporting ``A @ x``; ``precond`` is either an array
    (diagonal of the inverse preconditioner) or a callable. Convergence is
    ``||b - A x|| <= tol ||b||``.
    """
    b = np.asarray(b, dtype=float)
    n = b.size
    maxiter = maxiter if maxiter is not None else 10 * n
    if precond is None:
        apply_m = lambda r: r  # noqa: E731
    elif callable(precond):
        apply_m = precond
    else:
        pdiag = np.asarray(precond)
        apply_m = lambda r: pdiag * r  # noqa: E731

    bnorm = np.linalg.norm(b)
    x = np.zeros(n) if x0 is None else np.array(x0, dtype=float)
    if bnorm == 0.0:
        return np.zeros(n), CGInfo(0, 0.0, True)
    r = b - A @ x if x0 is not None else b.copy()
    z = apply_m(r)
    p = z.copy()
    rz = r @ z
    it = 0
    res = np.linalg.norm(r) / bnorm
    while res > tol and it < maxiter:
        Ap = A @ p
        pAp = p @ Ap
        if pAp <= 0:
            break
        alpha = rz / pAp
        x += alpha * p
        r -= alpha * Ap
        it += 1
        res = np.linalg.norm(r) / bnorm
        if res <= tol:
            break
        z = apply_m(r)
        rz_new = r @ z
        p = z + (rz_new / rz) * p
        rz = rz_new
    res = np.linalg.norm(b - A @ x) / bnorm
    return x, CGInfo(it, float(res), bool(res <= tol))


class BlockDiagFactor:
    """Factorization of a block-diagonal SPD matrix.

    Blocks are the connected components of the symmetric sparsity graph,
    each stored as a dense Cholesky factor (compiled backend) or dense
    inverse (numpy backend).
    """

    def __init__(self, n, block_ptr, block_dofs, dense_ptr, data, backend):
        self.n = n
        self.block_ptr = block_ptr
        self.block_dofs = block_dofs
        self.dense_ptr = dense_ptr
        self.data = data
        self.backend = backend

    @property
    def num_blocks(self) -> int:
        return self.block_ptr.size - 1

    @property
    def block_sizes(self) -> np.ndarray:
        return np.diff(self.block_ptr)

    def blocks(self) -> list[np.ndarray]:
        return [self.block_dofs[a:b] for a, b in zip(self.block_ptr[:-1], self.block_ptr[1:])]

    def apply(self, x) -> np.ndarray:
        """Solve ``A_h y = x``."""
        x = np.ascontiguousarray(x, dtype=float)
        k = get_backend(self.backend)
        return k.solve_blocks(self.block_ptr, self.block_dofs, self.dense_ptr, self.data, x)

    def inverse_matrix(self) -> sp.csr_matrix:
        """Explicit sparse inverse, block diagonal in the original numbering."""
        sizes = self.block_sizes
        rows, cols, vals = [], [], []
        for s in np.unique(sizes):
            idx = np.flatnonzero(sizes == s)
            dofs = self.block_dofs[self.block_ptr[idx][:, None] + np.arange(s)]
            # column j of every block of size s at once (blocks are disjoint)
            for j in range(s):
                e = np.zeros(self.n)
                e[dofs[:, j]] = 1.0
                y = self.apply(e)
                rows.append(dofs.ravel())
                cols.append(np.repeat(dofs[:, j], s))
                vals.append(y[dofs].ravel())
        return as_csr(
            sp.coo_matrix(
                (np.concatenate(vals), (np.concatenate(rows), np.concatenate(cols))),
                shape=(self.n, self.n),
            )
        )


def factor_block_diagonal(A_h, backend: str | None = None) -> BlockDiagFactor:
    """Discover the diagonal blocks of ``A_h`` and factor each densely."""
    A = as_csr(A_h)
    A.eliminate_zeros()
    n = A.shape[0]
    ncomp, labels = connected_components(A, directed=False)
    order = np.lexsort((np.arange(n), labels))
    sizes = np.bincount(labels, minlength=ncomp)
    block_ptr = np.concatenate([[0], np.cumsum(sizes)]).astype(np.int64)
    block_dofs = order.astype(np.int64)
    local = np.empty(n, dtype=np.int64)
    local[order] = np.arange(n) - block_ptr[labels[order]]
    dense_ptr = np.concatenate([[0], np.cumsum(sizes.astype(np.int64) ** 2)]).astype(np.int64)

    coo = A.tocoo()
    b = labels[coo.row]
    pos = dense_ptr[b] + local[coo.row] * sizes[b] + local[coo.col]
    dense = np.zeros(dense_ptr[-1])
    dense[pos] = coo.data
    name = backend
    k = get_backend(name)
    data = k.factor_blocks(block_ptr, dense_ptr[:-1].copy(), dense)
    return BlockDiagFactor(
        n, block_ptr, block_dofs, dense_ptr[:-1].copy(), data,
        backend if backend is not None else _active_name(),
    )


def _active_name() -> str:
    from . import kernels

    return kernels.BACKEND


class SchurOperator:
    """Matrix-free ``v -> B A_h^{-1} B^T v``."""

    def __init__(self, B, factor: BlockDiagFactor, backend=None):
        self.B = CSROperator(B, backend)
        self.BT = CSROperator(as_csr(B).T, backend)
        self.factor = factor
        n = B.shape[0]
        self.shape = (n, n)

    def __matmul__(self, v):
        return self.B @ self.factor.apply(self.BT @ v)

    def diagonal(self) -> np.ndarray:
        B = self.B.matrix
        Binv = B @ self.factor.inverse_matrix()
        return np.asarray(Binv.multiply(B).sum(axis=1)).ravel()

    def assemble(self) -> sp.csr_matrix:
        B = self.B.matrix
        return as_csr(B @ self.factor.inverse_matrix() @ B.T)


def schur_solve(system, factor: BlockDiagFactor, tol: float = 1e-10, maxiter=None):
    """Solve ``B A_h^{-1} B^T v = f - B A_h^{-1} g`` by Jacobi-preconditioned CG."""
    if not 0 < tol <= 1e-4:
        raise ValueError("tolerance must lie in (0, 1e-4]")
    t0 = time.perf_counter()
    S = SchurOperator(system.B, factor)
    rhs = system.f - S.B @ factor.apply(system.g)
    n = rhs.size
    maxiter = maxiter if maxiter is not None else int(20 * np.sqrt(n)) + 20
    diag = S.diagonal()
    v, info = pcg(S, rhs, tol=tol, precond=1.0 / diag, maxiter=maxiter)
    report = SolverReport(
        method="reduced",
        iterations=info.iterations,
        residual=info.residual,
        seconds=time.perf_counter() - t0,
        schur_dim=n,
        full_dim=system.A.shape[0] + n,
        converged=info.converged,
    )
    return v, report


def postprocess_stress(system, factor: BlockDiagFactor, v) -> np.ndarray:
    """Recover the stresses from ``A_h eta = B^T v + g``."""
    return factor.apply(as_csr(system.B).T @ v + system.g)


def solve_reduced(system, A_h=None, tol: float = 1e-10):
    """Full reduced solve: factor, Schur CG, stress recovery."""
    factor = factor_block_diagonal(system.A if A_h is None else A_h)
    v, report = schur_solve(system, factor, tol=tol)
    eta = postprocess_stress(system, factor, v)
    return eta, v, report


class ReducedPreconditioner:
    """Exact inverse of ``[[A_h, -B^T], [B, 0]]`` via a sparse LU of the Schur matrix."""

    def __init__(self, A_h, B):
        self.factor = factor_block_diagonal(A_h)
        self.B = as_csr(B)
        self.BT = as_csr(self.B.T)
        S = SchurOperator(self.B, self.factor).assemble()
        self.lu = spla.splu(S.tocsc())
        self.n_eta = A_h.shape[0]

    def __call__(self, r):
        rg, rf = r[: self.n_eta], r[self.n_eta :]
        v = self.lu.solve(rf - self.B @ self.factor.apply(rg))
        eta = self.factor.apply(rg + self.BT @ v)
        return np.concatenate([eta, v])


def saddle_matrix(system) -> sp.csr_matrix:
    """Monolithic ``[[A, -B^T], [B, 0]]``."""
    B = as_csr(system.B)
    return as_csr(sp.bmat([[system.A, -B.T], [B, None]]))


def full_saddle_solve(system, A_h, tol: float = 1e-8, restart: int = 100,
                      maxiter: int = 50, method: str = "gmres"):
    """Solve the full mixed system.

    ``method="gmres"``: GMRES(restart) right-preconditioned by the reduced
    solve built from ``A_h``. ``method="minres"``: unpreconditioned MINRES
    on the symmetric form, for diagnostics only.
    """
    t0 = time.perf_counter()
    n_eta = system.A.shape[0]
    n_v = system.B.shape[0]
    rhs = np.concatenate([system.g, system.f])
    K = saddle_matrix(system)
    bnorm = np.linalg.norm(rhs)
    count = [0]

    def cb(_):
        count[0] += 1

    if bnorm == 0.0:
        x = np.zeros_like(rhs)
    elif method == "gmres":
        M = ReducedPreconditioner(A_h, system.B)
        KM = spla.LinearOperator(K.shape, matvec=lambda y: K @ M(y), dtype=float)
        y, _ = spla.gmres(KM, rhs, rtol=tol, atol=0.0, restart=restart,
                          maxiter=maxiter, callback=cb, callback_type="pr_norm")
        x = M(y)
    elif method == "minres":
        Ksym = as_csr(sp.bmat([[system.A, as_csr(system.B).T], [system.B, None]]))
        z, _ = spla.minres(Ksym, rhs, rtol=tol, maxiter=maxiter * restart, callback=cb)
        x = np.concatenate([z[:n_eta], -z[n_eta:]])
    else:
        raise ValueError(f"unknown method {method!r}")

    res = np.linalg.norm(K @ x - rhs) / bnorm if bnorm else 0.0
    report = SolverReport(
        method="full",
        iterations=count[0],
        residual=float(res),
        seconds=time.perf_counter() - t0,
        schur_dim=n_v,
        full_dim=n_eta + n_v,
        converged=bool(res <= tol),
    )
    return x[:n_eta], x[n_eta:], report
