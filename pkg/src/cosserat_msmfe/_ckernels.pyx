# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the Schur-complement inner loop.

Same contract as ``_pykernels``; ``factor_blocks`` stores lower Cholesky
factors instead of inverses.
"""
import numpy as np
cimport numpy as cnp
from libc.math cimport sqrt

cnp.import_array()


def csr_matvec(const cnp.int64_t[::1] indptr, const cnp.int64_t[::1] indices,
               const double[::1] data, const double[::1] x):
    cdef Py_ssize_t n = indptr.shape[0] - 1
    cdef Py_ssize_t i, k
    cdef double acc
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    with nogil:
        for i in range(n):
            acc = 0.0
            for k in range(indptr[i], indptr[i + 1]):
                acc = acc + data[k] * x[indices[k]]
            y[i] = acc
    return out


def factor_blocks(const cnp.int64_t[::1] block_ptr, const cnp.int64_t[::1] dense_ptr,
                  const double[::1] dense):
    cdef Py_ssize_t nb = block_ptr.shape[0] - 1
    cdef Py_ssize_t b, s, i, j, k, off
    cdef double acc
    cdef int bad = 0
    out = np.array(dense, dtype=np.float64, copy=True)
    cdef double[::1] L = out
    with nogil:
        for b in range(nb):
            s = block_ptr[b + 1] - block_ptr[b]
            off = dense_ptr[b]
            for j in range(s):
                acc = L[off + j * s + j]
                for k in range(j):
                    acc = acc - L[off + j * s + k] * L[off + j * s + k]
                if acc <= 0.0:
                    bad = 1
                    break
                L[off + j * s + j] = sqrt(acc)
                for i in range(j + 1, s):
                    acc = L[off + i * s + j]
                    for k in range(j):
                        acc = acc - L[off + i * s + k] * L[off + j * s + k]
                    L[off + i * s + j] = acc / L[off + j * s + j]
                for i in range(j + 1, s):
                    L[off + j * s + i] = 0.0
            if bad:
                break
    if bad:
        raise ValueError("non-positive pivot in block factorization")
    return out


def solve_blocks(const cnp.int64_t[::1] block_ptr, const cnp.int64_t[::1] block_dofs,
                 const cnp.int64_t[::1] dense_ptr, const double[::1] factor,
                 const double[::1] x):
    cdef Py_ssize_t nb = block_ptr.shape[0] - 1
    cdef Py_ssize_t b, s, i, k, off, start
    cdef double acc
    cdef double[::1] z
    out = np.zeros(x.shape[0], dtype=np.float64)
    cdef double[::1] y = out
    work = np.empty(max(1, int(np.max(np.diff(block_ptr))) if nb else 1), dtype=np.float64)
    z = work
    with nogil:
        for b in range(nb):
            start = block_ptr[b]
            s = block_ptr[b + 1] - start
            off = dense_ptr[b]
            for i in range(s):
                acc = x[block_dofs[start + i]]
                for k in range(i):
                    acc = acc - factor[off + i * s + k] * z[k]
                z[i] = acc / factor[off + i * s + i]
            for i in range(s - 1, -1, -1):
                acc = z[i]
                for k in range(i + 1, s):
                    acc = acc - factor[off + k * s + i] * z[k]
                z[i] = acc / factor[off + i * s + i]
            for i in range(s):
                y[block_dofs[start + i]] = z[i]
    return out
