# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_pykernels``."""

import numpy as np
cimport numpy as cnp
from libc.stdlib cimport malloc, free

cnp.import_array()


cdef inline void _eval_point(const long[:, ::1] exps, const double[:, ::1] coeffs,
                             const double[:, ::1] pts, Py_ssize_t p,
                             double *pw, int maxdeg, double *acc) noexcept nogil:
    cdef Py_ssize_t T = exps.shape[0], n = exps.shape[1], K = coeffs.shape[1]
    cdef Py_ssize_t t, i, k, e
    cdef double m, x
    # power table pw[i * (maxdeg + 1) + e] = x_i ** e
    for i in range(n):
        x = pts[p, i]
        pw[i * (maxdeg + 1)] = 1.0
        for e in range(1, maxdeg + 1):
            pw[i * (maxdeg + 1) + e] = pw[i * (maxdeg + 1) + e - 1] * x
    for k in range(K):
        acc[k] = 0.0
    for t in range(T):
        m = 1.0
        for i in range(n):
            m = m * pw[i * (maxdeg + 1) + exps[t, i]]
        for k in range(K):
            acc[k] = acc[k] + coeffs[t, k] * m


def poly_eval_batch(exponents, coeffs, points):
    cdef const long[:, ::1] exps = np.ascontiguousarray(exponents, dtype=np.int64)
    cdef const double[:, ::1] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef Py_ssize_t P = pts.shape[0], n = pts.shape[1], K = cf.shape[1], p, k
    out = np.zeros((P, K))
    cdef double[:, ::1] o = out
    if exps.shape[0] == 0:
        return out
    cdef int maxdeg = int(np.max(exponents)) if exps.shape[0] else 0
    cdef double *pw = <double *> malloc(n * (maxdeg + 1) * sizeof(double))
    cdef double *acc = <double *> malloc(K * sizeof(double))
    try:
        with nogil:
            for p in range(P):
                _eval_point(exps, cf, pts, p, pw, maxdeg, acc)
                for k in range(K):
                    o[p, k] = acc[k]
    finally:
        free(pw)
        free(acc)
    return out


def lie_stats(exponents, coeffs, points, xi, out=None):
    cdef const long[:, ::1] exps = np.ascontiguousarray(exponents, dtype=np.int64)
    cdef const double[:, ::1] cf = np.ascontiguousarray(coeffs, dtype=np.float64)
    cdef const double[:, ::1] pts = np.ascontiguousarray(points, dtype=np.float64)
    cdef const double[::1] xs = np.ascontiguousarray(xi, dtype=np.float64)
    cdef Py_ssize_t P = pts.shape[0], n = pts.shape[1], K = cf.shape[1], p, k
    cdef double v, vmax = -np.inf
    cdef long count = 0
    cdef double[::1] o
    cdef bint store = out is not None
    if store:
        o = out
    if exps.shape[0] == 0:
        if store:
            o[:] = 0.0
        return 0, (0.0 if P else -np.inf)
    cdef int maxdeg = int(np.max(exponents))
    cdef double *pw = <double *> malloc(n * (maxdeg + 1) * sizeof(double))
    cdef double *acc = <double *> malloc(K * sizeof(double))
    try:
        with nogil:
            for p in range(P):
                _eval_point(exps, cf, pts, p, pw, maxdeg, acc)
                v = acc[0]
                for k in range(1, K):
                    v = v + xs[k - 1] * acc[k]
                if store:
                    o[p] = v
                if v > 0.0:
                    count += 1
                if v > vmax:
                    vmax = v
    finally:
        free(pw)
        free(acc)
    return int(count), float(vmax)
