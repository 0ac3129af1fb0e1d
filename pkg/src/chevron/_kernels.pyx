# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled kernels: Thomas solve, tridiagonal matvec and low-rank CG.

Entry points mirror ``_pykernels`` exactly; the GIL is released inside every
loop so independent runs can share a thread pool.
"""

import numpy as np
cimport numpy as cnp
from libc.math cimport fabs, sqrt
from scipy.linalg.cython_blas cimport dgemv, ddot

cnp.import_array()

BACKEND = "compiled"

cdef double PIVOT_FLOOR = 1e-300


cdef int _thomas(const double[::1] diag, const double[::1] off, const double[:, ::1] rhs,
                 double[::1] cp, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t m = diag.shape[0]
    cdef Py_ssize_t p = rhs.shape[1]
    cdef Py_ssize_t i, j
    cdef double denom, lower
    denom = diag[0]
    if fabs(denom) < PIVOT_FLOOR:
        return 0
    for j in range(p):
        out[0, j] = rhs[0, j] / denom
    if m > 1:
        cp[0] = off[0] / denom
    for i in range(1, m):
        lower = off[i - 1]
        denom = diag[i] - lower * cp[i - 1]
        if fabs(denom) < PIVOT_FLOOR:
            return i
        if i < m - 1:
            cp[i] = off[i] / denom
        for j in range(p):
            out[i, j] = (rhs[i, j] - lower * out[i - 1, j]) / denom
    for i in range(m - 2, -1, -1):
        for j in range(p):
            out[i, j] = out[i, j] - cp[i] * out[i + 1, j]
    return -1


def thomas(diag, off, rhs):
    """Solve the symmetric tridiagonal system; returns ``(x, bad_pivot_row)``.

    ``bad_pivot_row`` is -1 on success.
    """
    cdef const double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[::1] o = np.ascontiguousarray(off, dtype=np.float64)
    b = np.asarray(rhs, dtype=np.float64)
    vector = b.ndim == 1
    cdef const double[:, ::1] b2 = np.ascontiguousarray(b.reshape(b.shape[0], -1))
    out = np.empty((b2.shape[0], b2.shape[1]))
    cdef double[:, ::1] x = out
    cdef double[::1] cp = np.empty(max(d.shape[0], 1))
    cdef int status
    with nogil:
        status = _thomas(d, o, b2, cp, x)
    return (out[:, 0] if vector else out), status


cdef void _tri_apply(const double[::1] diag, const double[::1] off, const double* x,
                     double* y) noexcept nogil:
    cdef Py_ssize_t m = diag.shape[0]
    cdef Py_ssize_t i
    if m == 1:
        y[0] = diag[0] * x[0]
        return
    y[0] = diag[0] * x[0] + off[0] * x[1]
    for i in range(1, m - 1):
        y[i] = off[i - 1] * x[i - 1] + diag[i] * x[i] + off[i] * x[i + 1]
    y[m - 1] = off[m - 2] * x[m - 2] + diag[m - 1] * x[m - 1]


cdef void _apply(const double[::1] diag, const double[::1] off, const double* factor, int k,
                 double scale, const double* x, double* y, double* t) noexcept nogil:
    # y = T x + scale * F (F^T x); F is row-major (m, k), i.e. column-major (k, m)
    cdef int m = <int>diag.shape[0]
    cdef int inc = 1
    cdef double one = 1.0, zero = 0.0
    _tri_apply(diag, off, x, y)
    if k > 0 and scale != 0.0:
        dgemv(b"N", &k, &m, &one, <double*>factor, &k, <double*>x, &inc, &zero, t, &inc)
        dgemv(b"T", &k, &m, &scale, <double*>factor, &k, t, &inc, &one, y, &inc)


def tridiag_matvec(diag, off, x):
    cdef const double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[::1] o = np.ascontiguousarray(off, dtype=np.float64)
    xs = np.asarray(x, dtype=np.float64)
    if xs.ndim == 2:
        return np.stack([tridiag_matvec(diag, off, xs[:, j]) for j in range(xs.shape[1])], axis=1)
    cdef const double[::1] xv = np.ascontiguousarray(xs)
    out = np.empty(d.shape[0])
    cdef double[::1] y = out
    with nogil:
        _tri_apply(d, o, &xv[0], &y[0])
    return out


def lowrank_matvec(diag, off, factor, double scale, x):
    cdef const double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[::1] o = np.ascontiguousarray(off, dtype=np.float64)
    cdef const double[:, ::1] f = np.ascontiguousarray(factor, dtype=np.float64).reshape(d.shape[0], -1)
    cdef int k = <int>f.shape[1]
    cdef const double[::1] xv = np.ascontiguousarray(x, dtype=np.float64)
    out = np.empty(d.shape[0])
    cdef double[::1] y = out
    cdef double[::1] t = np.empty(max(k, 1))
    cdef const double* fp = &f[0, 0] if k > 0 else NULL
    with nogil:
        _apply(d, o, fp, k, scale, &xv[0], &y[0], &t[0])
    return out


cdef inline double _dot(int m, double* a, double* b) noexcept nogil:
    cdef int inc = 1
    return ddot(&m, a, &inc, b, &inc)


def cg(diag, off, factor, double scale, rhs, double tol, int max_iter):
    """Conjugate gradient on ``T + scale * F F^T`` from a zero initial guess.

    Returns ``(x, iterations, converged, residual_norm)``; the residual is the
    true residual ``||b - A x||`` whenever ``converged`` is true.
    """
    cdef const double[::1] d = np.ascontiguousarray(diag, dtype=np.float64)
    cdef const double[::1] o = np.ascontiguousarray(off, dtype=np.float64)
    cdef int m = <int>d.shape[0]
    f_arr = np.ascontiguousarray(factor, dtype=np.float64).reshape(m, -1)
    cdef const double[:, ::1] f = f_arr
    cdef int k = <int>f.shape[1]
    cdef const double* fp = &f[0, 0] if k > 0 else NULL
    cdef const double[::1] b = np.ascontiguousarray(rhs, dtype=np.float64)
    xo = np.zeros(m)
    cdef double[::1] x = xo
    cdef double[::1] r = np.array(b, copy=True)
    cdef double[::1] p = np.array(b, copy=True)
    cdef double[::1] ap = np.empty(m)
    cdef double[::1] t = np.empty(max(k, 1))
    cdef double bnorm, target, rs, rs_new, alpha, beta, pap, rnorm
    cdef int it = 0, i
    cdef bint converged = False
    with nogil:
        bnorm = sqrt(_dot(m, <double*>&b[0], <double*>&b[0]))
        if bnorm == 0.0:
            converged = True
            rnorm = 0.0
        else:
            target = tol * bnorm
            rs = _dot(m, &r[0], &r[0])
            rnorm = sqrt(rs)
            while it < max_iter:
                _apply(d, o, fp, k, scale, &p[0], &ap[0], &t[0])
                pap = _dot(m, &p[0], &ap[0])
                alpha = rs / pap
                for i in range(m):
                    x[i] += alpha * p[i]
                    r[i] -= alpha * ap[i]
                it += 1
                rs_new = _dot(m, &r[0], &r[0])
                if sqrt(rs_new) <= target:
                    # confirm against the true residual, restart if it drifted
                    _apply(d, o, fp, k, scale, &x[0], &ap[0], &t[0])
                    for i in range(m):
                        r[i] = b[i] - ap[i]
                    rs_new = _dot(m, &r[0], &r[0])
                    rnorm = sqrt(rs_new)
                    if rnorm <= target:
                        converged = True
                        break
                    for i in range(m):
                        p[i] = r[i]
                    rs = rs_new
                    continue
                beta = rs_new / rs
                for i in range(m):
                    p[i] = r[i] + beta * p[i]
                rs = rs_new
                rnorm = sqrt(rs)
    return xo, it, bool(converged), rnorm
