# cython: boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled batched kernels for the Heisenberg group product and Koranyi distance."""

import numpy as np
from libc.math cimport sqrt, hypot


cdef inline double _omega(const double[:, ::1] a, Py_ssize_t i,
                          const double[:, ::1] b, Py_ssize_t j, int n) nogil:
    cdef double s = 0.0
    cdef int k
    for k in range(n):
        s += a[i, k] * b[j, n + k] - a[i, n + k] * b[j, k]
    return s


def mul(const double[:, ::1] p, const double[:, ::1] q, int n):
    cdef Py_ssize_t m = p.shape[0], i
    cdef int k, d = 2 * n
    out = np.empty((m, d + 1), dtype=np.float64)
    cdef double[:, ::1] o = out
    with nogil:
        for i in range(m):
            for k in range(d):
                o[i, k] = p[i, k] + q[i, k]
            o[i, d] = p[i, d] + q[i, d] + 0.5 * _omega(p, i, q, i, n)
    return out


def norm(const double[:, ::1] p, int n):
    cdef Py_ssize_t m = p.shape[0], i
    cdef int k, d = 2 * n
    cdef double sq
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(m):
            sq = 0.0
            for k in range(d):
                sq += p[i, k] * p[i, k]
            o[i] = sqrt(hypot(sq, 4.0 * p[i, d]))
    return out


def dist(const double[:, ::1] p, const double[:, ::1] q, int n):
    cdef Py_ssize_t m = p.shape[0], i
    cdef int k, d = 2 * n
    cdef double sq, dx, dt
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(m):
            sq = 0.0
            for k in range(d):
                dx = p[i, k] - q[i, k]
                sq += dx * dx
            dt = p[i, d] - q[i, d] - 0.5 * _omega(q, i, p, i, n)
            o[i] = sqrt(hypot(sq, 4.0 * dt))
    return out


cdef inline double _dist_row(const double[::1] z, const double[:, ::1] pts,
                             Py_ssize_t i, int n) nogil:
    cdef int k, d = 2 * n
    cdef double sq = 0.0, dx, om = 0.0
    for k in range(d):
        dx = z[k] - pts[i, k]
        sq += dx * dx
    for k in range(n):
        om += pts[i, k] * z[n + k] - pts[i, n + k] * z[k]
    return sqrt(hypot(sq, 4.0 * (z[d] - pts[i, d] - 0.5 * om)))


def dist_one_many(const double[::1] z, const double[:, ::1] pts, int n):
    cdef Py_ssize_t m = pts.shape[0], i
    out = np.empty(m, dtype=np.float64)
    cdef double[::1] o = out
    with nogil:
        for i in range(m):
            o[i] = _dist_row(z, pts, i, n)
    return out


def argmin_one_many(const double[::1] z, const double[:, ::1] pts, int n):
    cdef Py_ssize_t m = pts.shape[0], i, best = 0
    cdef double v, bv = 1.0 / 0.0
    with nogil:
        for i in range(m):
            v = _dist_row(z, pts, i, n)
            if v < bv:
                bv = v
                best = i
    return int(best), float(bv)
