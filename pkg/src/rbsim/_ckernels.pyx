# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels; semantics match rbsim._kernels_py."""

import numpy as np
cimport numpy as cnp

cnp.import_array()


def first_exceedance(rows, bounds):
    cdef const double[:, ::1] x = np.ascontiguousarray(rows, dtype=np.float64)
    cdef const double[::1] b = np.ascontiguousarray(bounds, dtype=np.float64)
    cdef Py_ssize_t k, i, n = x.shape[0], d = x.shape[1], d4
    cdef double m0, m1, m2, m3
    cdef const double* row
    cdef Py_ssize_t hit = -1
    if n == 0 or d == 0:
        return -1
    d4 = d - d % 4
    with nogil:
        for k in range(n):
            # four independent running maxima break the dependency chain
            row = &x[k, 0]
            m0 = m1 = m2 = m3 = row[0]
            for i in range(0, d4, 4):
                m0 = row[i] if row[i] > m0 else m0
                m1 = row[i + 1] if row[i + 1] > m1 else m1
                m2 = row[i + 2] if row[i + 2] > m2 else m2
                m3 = row[i + 3] if row[i + 3] > m3 else m3
            for i in range(d4, d):
                m0 = row[i] if row[i] > m0 else m0
            m0 = m1 if m1 > m0 else m0
            m2 = m3 if m3 > m2 else m2
            m0 = m2 if m2 > m0 else m0
            if m0 > b[k]:
                hit = k
                break
    return hit


def max_plus_update(acc, rows, shifts):
    cdef double[::1] out = acc
    cdef const double[:, ::1] x = np.ascontiguousarray(rows, dtype=np.float64)
    cdef const double[::1] s = np.ascontiguousarray(shifts, dtype=np.float64)
    cdef Py_ssize_t k, i, n = x.shape[0], d = x.shape[1]
    cdef double v, sk
    cdef const double* row
    cdef double* o
    if n == 0 or d == 0:
        return acc
    o = &out[0]
    with nogil:
        for k in range(n):
            sk = s[k]
            row = &x[k, 0]
            for i in range(d):
                v = row[i] + sk
                o[i] = v if v > o[i] else o[i]
    return acc


def midpoint_refine(vals, offsets):
    cdef const double[:, ::1] v = np.ascontiguousarray(vals, dtype=np.float64)
    cdef const double[:, ::1] c = np.ascontiguousarray(offsets, dtype=np.float64)
    cdef Py_ssize_t r = v.shape[0], p = v.shape[1] - 1, i, k
    result = np.empty((r, 2 * p + 1), dtype=np.float64)
    cdef double[:, ::1] out = result
    with nogil:
        for i in range(r):
            for k in range(p):
                out[i, 2 * k] = v[i, k]
                out[i, 2 * k + 1] = 0.5 * (v[i, k] + v[i, k + 1]) + c[i, k]
            out[i, 2 * p] = v[i, p]
    return result
