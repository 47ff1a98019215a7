"""Pure numpy implementations of the compiled kernels.

Dense blocks are stored row-major and concatenated; ``dense_ptr[b]`` is
the offset of block ``b``. ``factor_blocks`` returns data understood only
by the matching ``solve_blocks`` (here: explicit block inverses).
"""
import numpy as np


def csr_matvec(indptr, indices, data, x):
    n = indptr.size - 1
    rows = np.repeat(np.arange(n), np.diff(indptr))
    return np.bincount(rows, weights=data * x[indices], minlength=n)


def _groups(block_ptr, dense_ptr):
    sizes = np.diff(block_ptr)
    for s in np.unique(sizes):
        idx = np.flatnonzero(sizes == s)
        yield int(s), idx


def factor_blocks(block_ptr, dense_ptr, dense):
    out = np.empty_like(dense)
    for s, idx in _groups(block_ptr, dense_ptr):
        pos = dense_ptr[idx][:, None] + np.arange(s * s)
        blocks = dense[pos].reshape(-1, s, s)
        try:
            L = np.linalg.cholesky(blocks)
        except np.linalg.LinAlgError:
            raise ValueError("non-positive pivot in block factorization") from None
        Linv = np.linalg.inv(L)
        out[pos] = np.einsum("bki,bkj->bij", Linv, Linv).reshape(len(idx), -1)
    return out


def solve_blocks(block_ptr, block_dofs, dense_ptr, factor, x):
    y = np.zeros_like(x)
    for s, idx in _groups(block_ptr, dense_ptr):
        dofs = block_dofs[block_ptr[idx][:, None] + np.arange(s)]
        inv = factor[dense_ptr[idx][:, None] + np.arange(s * s)].reshape(-1, s, s)
        y[dofs] = np.einsum("bij,bj->bi", inv, x[dofs])
    return y
