# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled versions of the kernels in ``_kernels_py``; identical contracts."""

import numpy as np
from libc.math cimport exp, log, pow


def deviation_values(grid, double tau_own, double mu, others_load, target,
                     slope, d0_max, weight):
    cdef double[::1] x = np.ascontiguousarray(grid, dtype=np.float64)
    cdef double[::1] ol = np.ascontiguousarray(others_load, dtype=np.float64)
    cdef double[::1] tg = np.ascontiguousarray(target, dtype=np.float64)
    cdef double[::1] sl = np.ascontiguousarray(slope, dtype=np.float64)
    cdef double[::1] cap = np.ascontiguousarray(d0_max, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef Py_ssize_t G = x.shape[0], C = w.shape[0], g, c
    out_arr = np.zeros(G, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef double xg, xp, d0, acc
    for g in range(G):
        xg = x[g]
        xp = pow(xg, tau_own)
        acc = 0.0
        for c in range(C):
            d0 = sl[c] * (xg - tg[c])
            if d0 < 0.0:
                d0 = 0.0
            elif d0 > cap[c]:
                d0 = cap[c]
            acc += w[c] * xp * (mu - ol[c] - xg - d0)
        out[g] = acc
    return out_arr


def misreport_matrix(tau, double mu, own_rate, load, weight):
    cdef double[::1] t = np.ascontiguousarray(tau, dtype=np.float64)
    cdef double[:, ::1] r = np.ascontiguousarray(own_rate, dtype=np.float64)
    cdef double[:, ::1] ld = np.ascontiguousarray(load, dtype=np.float64)
    cdef double[::1] w = np.ascontiguousarray(weight, dtype=np.float64)
    cdef Py_ssize_t m = t.shape[0], C = w.shape[0], s, l, c
    out_arr = np.zeros((m, r.shape[0]), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t L = r.shape[0]
    # logs depend only on (l, c); types are positive so r = 0 maps to exp(-inf) = 0
    lr_arr = np.empty((L, C), dtype=np.float64)
    cdef double[:, ::1] lr = lr_arr
    for l in range(L):
        for c in range(C):
            lr[l, c] = log(r[l, c])
    cdef double acc, ts
    for s in range(m):
        ts = t[s]
        for l in range(L):
            acc = 0.0
            for c in range(C):
                acc += w[c] * exp(ts * lr[l, c]) * (mu - ld[l, c])
            out[s, l] = acc
    return out_arr
