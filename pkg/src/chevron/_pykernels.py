"""Pure-Python twins of the compiled kernels in ``_kernels.pyx``.

Same algorithms, same operation order, same return conventions. Used when the
extension is unavailable or ``CHEVRON_BACKEND=python`` is set.
"""

import math

import numpy as np

BACKEND = "python"

PIVOT_FLOOR = 1e-300


def thomas(diag, off, rhs):
    d = np.asarray(diag, dtype=np.float64).tolist()
    o = np.asarray(off, dtype=np.float64).tolist()
    b = np.asarray(rhs, dtype=np.float64)
    vector = b.ndim == 1
    cols = b.reshape(b.shape[0], -1)
    m = len(d)
    out = np.empty(cols.shape)
    cp = [0.0] * m
    for j in range(cols.shape[1]):
        r = cols[:, j].tolist()
        y = [0.0] * m
        denom = d[0]
        if abs(denom) < PIVOT_FLOOR:
            return None, 0
        y[0] = r[0] / denom
        if m > 1:
            cp[0] = o[0] / denom
        for i in range(1, m):
            lower = o[i - 1]
            denom = d[i] - lower * cp[i - 1]
            if abs(denom) < PIVOT_FLOOR:
                return None, i
            if i < m - 1:
                cp[i] = o[i] / denom
            y[i] = (r[i] - lower * y[i - 1]) / denom
        for i in range(m - 2, -1, -1):
            y[i] = y[i] - cp[i] * y[i + 1]
        out[:, j] = y
    return (out[:, 0] if vector else out), -1


def tridiag_matvec(diag, off, x):
    diag = np.asarray(diag, dtype=np.float64)
    off = np.asarray(off, dtype=np.float64)
    x = np.asarray(x, dtype=np.float64)
    if x.ndim == 2:
        diag, off = diag[:, None], off[:, None]
    y = diag * x
    y[:-1] += off * x[1:]
    y[1:] += off * x[:-1]
    return y


def lowrank_matvec(diag, off, factor, scale, x):
    y = tridiag_matvec(diag, off, x)
    factor = np.asarray(factor, dtype=np.float64).reshape(len(diag), -1)
    if factor.shape[1] > 0 and scale != 0.0:
        y += scale * (factor @ (factor.T @ x))
    return y


def cg(diag, off, factor, scale, rhs, tol, max_iter):
    b = np.array(rhs, dtype=np.float64)
    x = np.zeros_like(b)
    bnorm = math.sqrt(float(b @ b))
    if bnorm == 0.0:
        return x, 0, True, 0.0
    target = tol * bnorm
    r = b.copy()
    p = b.copy()
    rs = float(r @ r)
    rnorm = math.sqrt(rs)
    it = 0
    converged = False
    while it < max_iter:
        ap = lowrank_matvec(diag, off, factor, scale, p)
        alpha = rs / float(p @ ap)
        x += alpha * p
        r -= alpha * ap
        it += 1
        rs_new = float(r @ r)
        if math.sqrt(rs_new) <= target:
            r = b - lowrank_matvec(diag, off, factor, scale, x)
            rs_new = float(r @ r)
            rnorm = math.sqrt(rs_new)
            if rnorm <= target:
                converged = True
                break
            p = r.copy()
            rs = rs_new
            continue
        p = r + (rs_new / rs) * p
        rs = rs_new
        rnorm = math.sqrt(rs)
    return x, it, converged, rnorm
