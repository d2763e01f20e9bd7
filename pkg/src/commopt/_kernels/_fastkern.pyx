# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled twin of reference.py. Same contracts, same float op order.

Randomness is pre-drawn by the caller; selections arrive as index arrays, so
results are bit-identical to the NumPy reference implementation.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs

IS_COMPILED = True


def msc_topk(double[:, ::1] X, double[:, ::1] V, Py_ssize_t k, Py_ssize_t R):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    counts_arr = np.zeros((n, R), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    res_arr = np.empty(d, dtype=np.float64)
    cdef double[::1] res = res_arr
    taken_arr = np.zeros(d, dtype=np.uint8)
    cdef unsigned char[::1] taken = taken_arr
    cdef Py_ssize_t i, r, j, m, best
    cdef double besta, a
    cdef bint nonzero

    for i in range(n):
        for r in range(R):
            nonzero = False
            for j in range(d):
                res[j] = X[i, j] - V[i, j]
                taken[j] = 0
                if res[j] != 0.0:
                    nonzero = True
            if nonzero:
                counts[i, r] = k
            for m in range(k):
                best = 0
                besta = -1.0
                for j in range(d):
                    if taken[j]:
                        continue
                    a = fabs(res[j])
                    if a > besta:
                        besta = a
                        best = j
                taken[best] = 1
                V[i, best] += res[best]
    return counts_arr


def msc_randk(double[:, ::1] X, double[:, ::1] V, cnp.int64_t[:, :, ::1] idx):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t R = idx.shape[1]
    cdef Py_ssize_t k = idx.shape[2]
    counts_arr = np.zeros((n, R), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    cdef Py_ssize_t i, r, j, m
    cdef bint nonzero

    for i in range(n):
        for r in range(R):
            nonzero = False
            for j in range(d):
                if X[i, j] - V[i, j] != 0.0:
                    nonzero = True
                    break
            if nonzero:
                counts[i, r] = k
            for m in range(k):
                j = idx[i, r, m]
                V[i, j] += X[i, j] - V[i, j]
    return counts_arr


def msc_urandk(double[:, ::1] X, double[:, ::1] V, cnp.int64_t[:, :, ::1] idx,
               double gain, double accum_scale):
    cdef Py_ssize_t n = X.shape[0]
    cdef Py_ssize_t d = X.shape[1]
    cdef Py_ssize_t R = idx.shape[1]
    cdef Py_ssize_t k = idx.shape[2]
    counts_arr = np.zeros((n, R), dtype=np.int64)
    cdef cnp.int64_t[:, ::1] counts = counts_arr
    cdef Py_ssize_t i, r, j, m
    cdef double msg
    cdef bint nonzero

    for i in range(n):
        for r in range(R):
            nonzero = False
            for j in range(d):
                if X[i, j] - V[i, j] != 0.0:
                    nonzero = True
                    break
            if nonzero:
                counts[i, r] = k
            for m in range(k):
                j = idx[i, r, m]
                msg = gain * (X[i, j] - V[i, j])
                V[i, j] += accum_scale * msg
    return counts_arr
