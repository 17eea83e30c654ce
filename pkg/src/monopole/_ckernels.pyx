# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled pointwise matrix kernels.

The grids in this package are arrays of shape (..., n, n) with small n
(su(2) means n=2).  numpy's matmul handles these fine but pays per-call
overhead on tiny trailing dimensions; these loops fuse the arithmetic.
Signatures mirror monopole._kernels_np.
"""

import numpy as np

cimport cython
cimport numpy as cnp

cnp.import_array()

ctypedef double complex cplx


cdef inline void _matmul(const cplx* a, const cplx* b, cplx* out, Py_ssize_t n) noexcept nogil:
    cdef Py_ssize_t i, j, k
    cdef cplx acc
    for i in range(n):
        for j in range(n):
            acc = 0
            for k in range(n):
                acc = acc + a[i * n + k] * b[k * n + j]
            out[i * n + j] = acc


def bracket_grid(x, y):
    """Pointwise commutator over a grid of matrices: out = xy - yx."""
    cdef cnp.ndarray xa = np.ascontiguousarray(x, dtype=np.complex128)
    cdef cnp.ndarray ya = np.ascontiguousarray(y, dtype=np.complex128)
    if xa.shape != ya.shape:
        xa, ya = np.broadcast_arrays(xa, ya)
        xa = np.ascontiguousarray(xa)
        ya = np.ascontiguousarray(ya)
    cdef cnp.ndarray out = np.empty_like(xa)
    cdef Py_ssize_t n = xa.shape[xa.ndim - 1]
    cdef Py_ssize_t m = xa.size // (n * n)
    cdef cplx* xp = <cplx*> cnp.PyArray_DATA(xa)
    cdef cplx* yp = <cplx*> cnp.PyArray_DATA(ya)
    cdef cplx* op = <cplx*> cnp.PyArray_DATA(out)
    cdef cplx ab[64]
    cdef cplx ba[64]
    cdef Py_ssize_t p, i
    if n > 8:
        return np.matmul(xa, ya) - np.matmul(ya, xa)
    with nogil:
        for p in range(m):
            _matmul(xp + p * n * n, yp + p * n * n, ab, n)
            _matmul(yp + p * n * n, xp + p * n * n, ba, n)
            for i in range(n * n):
                op[p * n * n + i] = ab[i] - ba[i]
    return out


def mul_grid(x, y):
    """Pointwise matrix product."""
    cdef cnp.ndarray xa = np.ascontiguousarray(x, dtype=np.complex128)
    cdef cnp.ndarray ya = np.ascontiguousarray(y, dtype=np.complex128)
    if xa.shape != ya.shape:
        xa, ya = np.broadcast_arrays(xa, ya)
        xa = np.ascontiguousarray(xa)
        ya = np.ascontiguousarray(ya)
    cdef cnp.ndarray out = np.empty_like(xa)
    cdef Py_ssize_t n = xa.shape[xa.ndim - 1]
    cdef Py_ssize_t m = xa.size // (n * n)
    cdef cplx* xp = <cplx*> cnp.PyArray_DATA(xa)
    cdef cplx* yp = <cplx*> cnp.PyArray_DATA(ya)
    cdef cplx* op = <cplx*> cnp.PyArray_DATA(out)
    cdef Py_ssize_t p
    if n > 8:
        return np.matmul(xa, ya)
    with nogil:
        for p in range(m):
            _matmul(xp + p * n * n, yp + p * n * n, op + p * n * n, n)
    return out


def sandwich_grid(g, x):
    """Pointwise unitary conjugation g x g^H."""
    cdef cnp.ndarray ga = np.ascontiguousarray(g, dtype=np.complex128)
    cdef cnp.ndarray xa = np.ascontiguousarray(x, dtype=np.complex128)
    if ga.shape != xa.shape:
        ga, xa = np.broadcast_arrays(ga, xa)
        ga = np.ascontiguousarray(ga)
        xa = np.ascontiguousarray(xa)
    cdef cnp.ndarray out = np.empty_like(xa)
    cdef Py_ssize_t n = xa.shape[xa.ndim - 1]
    cdef Py_ssize_t m = xa.size // (n * n)
    cdef cplx* gp = <cplx*> cnp.PyArray_DATA(ga)
    cdef cplx* xp = <cplx*> cnp.PyArray_DATA(xa)
    cdef cplx* op = <cplx*> cnp.PyArray_DATA(out)
    cdef cplx gx[64]
    cdef cplx gh[64]
    cdef Py_ssize_t p, i, j
    if n > 8:
        gh_big = np.conjugate(np.swapaxes(ga, -1, -2))
        return np.matmul(np.matmul(ga, xa), gh_big)
    with nogil:
        for p in range(m):
            _matmul(gp + p * n * n, xp + p * n * n, gx, n)
            for i in range(n):
                for j in range(n):
                    gh[i * n + j] = (gp + p * n * n)[j * n + i].conjugate()
            _matmul(gx, gh, op + p * n * n, n)
    return out


def antiherm_grid(x):
    """Pointwise anti-Hermitian traceless projection; returns (proj, discarded_max)."""
    cdef cnp.ndarray xa = np.ascontiguousarray(x, dtype=np.complex128)
    cdef cnp.ndarray out = np.empty_like(xa)
    cdef Py_ssize_t n = xa.shape[xa.ndim - 1]
    cdef Py_ssize_t m = xa.size // (n * n)
    cdef cplx* xp = <cplx*> cnp.PyArray_DATA(xa)
    cdef cplx* op = <cplx*> cnp.PyArray_DATA(out)
    cdef double discarded = 0.0, d
    cdef cplx tr, v
    cdef Py_ssize_t p, i, j
    with nogil:
        for p in range(m):
            tr = 0
            for i in range(n):
                for j in range(n):
                    v = 0.5 * ((xp + p * n * n)[i * n + j]
                               - (xp + p * n * n)[j * n + i].conjugate())
                    (op + p * n * n)[i * n + j] = v
                tr = tr + (op + p * n * n)[i * n + i]
            tr = tr / n
            for i in range(n):
                (op + p * n * n)[i * n + i] = (op + p * n * n)[i * n + i] - tr
            for i in range(n * n):
                v = (xp + p * n * n)[i] - (op + p * n * n)[i]
                d = abs(v)
                if d > discarded:
                    discarded = d
    return out, discarded


def frob_grid(x):
    """Pointwise Frobenius norm: collapses the trailing matrix axes."""
    cdef cnp.ndarray xa = np.ascontiguousarray(x, dtype=np.complex128)
    cdef Py_ssize_t n = xa.shape[xa.ndim - 1]
    cdef Py_ssize_t m = xa.size // (n * n)
    cdef cnp.ndarray out = np.empty(m, dtype=np.float64)
    cdef cplx* xp = <cplx*> cnp.PyArray_DATA(xa)
    cdef double* op = <double*> cnp.PyArray_DATA(out)
    cdef double acc
    cdef cplx v
    cdef Py_ssize_t p, i
    with nogil:
        for p in range(m):
            acc = 0.0
            for i in range(n * n):
                v = (xp + p * n * n)[i]
                acc = acc + v.real * v.real + v.imag * v.imag
            op[p] = acc ** 0.5
    return out.reshape(np.asarray(x).shape[:-2])
