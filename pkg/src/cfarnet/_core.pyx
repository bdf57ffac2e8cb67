# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels: batched robust features, biased MMD with gradients,
and pairwise score gaps for the bandwidth heuristic.

Mirrors cfarnet._core_py; cfarnet.kernels picks whichever imports.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport exp, fabs
from libc.stdlib cimport free, malloc, qsort

cnp.import_array()

BACKEND = "compiled"


cdef int _cmp_double(const void* pa, const void* pb) noexcept nogil:
    cdef double a = (<const double*> pa)[0]
    cdef double b = (<const double*> pb)[0]
    if a < b:
        return -1
    if a > b:
        return 1
    return 0


cdef inline double _median_sorted(double* buf, Py_ssize_t n) nogil:
    if n % 2:
        return buf[n // 2]
    return 0.5 * (buf[n // 2 - 1] + buf[n // 2])


def batch_features(x):
    """Per-row (mean, unbiased variance, median, median absolute deviation).

    All statistics are computed from the sorted row, so the output is exactly
    invariant under permutations within a row.
    """
    x = np.ascontiguousarray(x, dtype=np.float64)
    if x.ndim != 2 or x.shape[1] < 2:
        raise ValueError("batch_features expects a (B, n) array with n >= 2")
    cdef double[:, ::1] xv = x
    cdef Py_ssize_t b = xv.shape[0], n = xv.shape[1]
    out_arr = np.empty((b, 4), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    cdef double* buf = <double*> malloc(2 * n * sizeof(double))
    if buf == NULL:
        raise MemoryError()
    cdef double* dev = buf + n
    cdef Py_ssize_t i, j
    cdef double mean, var, med, d
    with nogil:
        for i in range(b):
            for j in range(n):
                buf[j] = xv[i, j]
            qsort(buf, n, sizeof(double), _cmp_double)
            mean = 0.0
            for j in range(n):
                mean += buf[j]
            mean /= n
            var = 0.0
            for j in range(n):
                d = buf[j] - mean
                var += d * d
            var /= n - 1
            med = _median_sorted(buf, n)
            for j in range(n):
                dev[j] = fabs(buf[j] - med)
            qsort(dev, n, sizeof(double), _cmp_double)
            out[i, 0] = mean
            out[i, 1] = var
            out[i, 2] = med
            out[i, 3] = _median_sorted(dev, n)
    free(buf)
    return out_arr


def mmd_biased(s1, s2, double h):
    """Biased (V-statistic) MMD between two 1-D score samples, RBF kernel."""
    cdef double[::1] a = np.ascontiguousarray(s1, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(s2, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    cdef double c = -0.5 / (h * h)
    cdef double t11 = 0.0, t22 = 0.0, t12 = 0.0, d
    cdef Py_ssize_t i, j
    with nogil:
        for i in range(n):
            for j in range(n):
                d = a[i] - a[j]
                t11 += exp(d * d * c)
        for i in range(m):
            for j in range(m):
                d = b[i] - b[j]
                t22 += exp(d * d * c)
        for i in range(n):
            for j in range(m):
                d = a[i] - b[j]
                t12 += exp(d * d * c)
    return t11 / (n * n) + t22 / (m * m) - 2.0 * t12 / (n * m)


def mmd_biased_grad(s1, s2, double h):
    """Biased MMD value plus exact gradients w.r.t. every entry of s1 and s2."""
    cdef double[::1] a = np.ascontiguousarray(s1, dtype=np.float64)
    cdef double[::1] b = np.ascontiguousarray(s2, dtype=np.float64)
    cdef Py_ssize_t n = a.shape[0], m = b.shape[0]
    g1_arr = np.zeros(n, dtype=np.float64)
    g2_arr = np.zeros(m, dtype=np.float64)
    cdef double[::1] g1 = g1_arr
    cdef double[::1] g2 = g2_arr
    cdef double inv_h2 = 1.0 / (h * h)
    cdef double c = -0.5 * inv_h2
    cdef double t11 = 0.0, t22 = 0.0, t12 = 0.0, d, k, w11, w22, w12
    cdef Py_ssize_t i, j
    with nogil:
        w11 = 2.0 / (n * n)
        w22 = 2.0 / (m * m)
        w12 = 2.0 / (n * m)
        for i in range(n):
            for j in range(n):
                d = a[i] - a[j]
                k = exp(d * d * c)
                t11 += k
                g1[i] += w11 * (-d * inv_h2 * k)
        for i in range(m):
            for j in range(m):
                d = b[i] - b[j]
                k = exp(d * d * c)
                t22 += k
                g2[i] += w22 * (-d * inv_h2 * k)
        for i in range(n):
            for j in range(m):
                d = a[i] - b[j]
                k = exp(d * d * c)
                t12 += k
                g1[i] -= w12 * (-d * inv_h2 * k)
                g2[j] -= w12 * (d * inv_h2 * k)
    value = t11 / (n * n) + t22 / (m * m) - 2.0 * t12 / (n * m)
    return value, g1_arr, g2_arr


def pairwise_abs_gaps(x):
    """All nonzero |x_i - x_j| over unordered pairs i < j, as a flat array."""
    cdef double[::1] v = np.ascontiguousarray(x, dtype=np.float64)
    cdef Py_ssize_t n = v.shape[0]
    if n < 2:
        return np.empty(0, dtype=np.float64)
    out_arr = np.empty(n * (n - 1) // 2, dtype=np.float64)
    cdef double[::1] out = out_arr
    cdef Py_ssize_t i, j, count = 0
    cdef double g
    with nogil:
        for i in range(n):
            for j in range(i + 1, n):
                g = fabs(v[i] - v[j])
                if g > 0.0:
                    out[count] = g
                    count += 1
    return out_arr[:count].copy()
