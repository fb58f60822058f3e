# cython: boundscheck=False, wraparound=False, cdivision=True, language_level=3
"""Compiled hot kernels; same contracts as the numpy fallback."""

import numpy as np
cimport numpy as cnp
from libc.math cimport INFINITY

cnp.import_array()


def segment_sum(values, segments, Py_ssize_t n_segments):
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef long long[::1] seg = np.ascontiguousarray(segments, dtype=np.int64)
    out_arr = np.zeros((n_segments, v.shape[1]))
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, j, s
    for e in range(v.shape[0]):
        s = seg[e]
        for j in range(v.shape[1]):
            out[s, j] += v[e, j]
    return out_arr


def segment_max(values, segments, Py_ssize_t n_segments):
    cdef double[:, ::1] v = np.ascontiguousarray(values, dtype=np.float64)
    cdef long long[::1] seg = np.ascontiguousarray(segments, dtype=np.int64)
    out_arr = np.full((n_segments, v.shape[1]), -np.inf)
    cdef double[:, ::1] out = out_arr
    cdef Py_ssize_t e, j, s
    for e in range(v.shape[0]):
        s = seg[e]
        for j in range(v.shape[1]):
            if v[e, j] > out[s, j]:
                out[s, j] = v[e, j]
    return out_arr


def repair_spacing(p, double d0, double p_min, double p_max):
    out_arr = np.array(p, dtype=np.float64)
    cdef double[::1] q = out_arr
    cdef Py_ssize_t n = q.shape[0], i
    for i in range(1, n):
        if q[i] < q[i - 1] + d0:
            q[i] = q[i - 1] + d0
    if n and q[n - 1] > p_max:
        q[n - 1] = p_max
        for i in range(n - 2, -1, -1):
            if q[i] > q[i + 1] - d0:
                q[i] = q[i + 1] - d0
    return out_arr


def pa_sample_moments(s, c):
    cdef double complex[:, ::1] sv = np.ascontiguousarray(s, dtype=np.complex128)
    cdef double complex[:, ::1] cv = np.ascontiguousarray(c, dtype=np.complex128)
    cdef Py_ssize_t N = sv.shape[0], n = sv.shape[1], i, j, t
    rcs_arr = np.zeros((N, N), dtype=np.complex128)
    rss_arr = np.zeros((N, N), dtype=np.complex128)
    cdef double complex[:, ::1] rcs = rcs_arr
    cdef double complex[:, ::1] rss = rss_arr
    cdef double complex acc1, acc2, sc
    for i in range(N):
        for j in range(N):
            acc1 = 0
            acc2 = 0
            for t in range(n):
                sc = sv[j, t].conjugate()
                acc1 = acc1 + cv[i, t] * sc
                acc2 = acc2 + sv[i, t] * sc
            rcs[i, j] = acc1 / n
            rss[i, j] = acc2 / n
    return rcs_arr, rss_arr
