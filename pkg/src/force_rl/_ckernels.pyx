# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled Catoni kernels.

Inputs to the root finders are rows sorted ascending; equal neighbours are
run-length merged so repeated observations cost one ``log1p`` each.
"""

import numpy as np

from libc.math cimport log1p
from libc.stdlib cimport free, malloc


cdef inline double _psi(double y) noexcept nogil:
    if y >= 0.0:
        return log1p(y + y * y)
    return -log1p(-y + y * y)


cdef inline double _wsum(const double* v, const double* c, Py_ssize_t m,
                         double alpha, double z) noexcept nogil:
    cdef double acc = 0.0
    cdef Py_ssize_t i
    for i in range(m):
        acc += c[i] * _psi(alpha * (v[i] - z))
    return acc


cdef Py_ssize_t _compress(const double* xs, Py_ssize_t n, double* v, double* c) noexcept nogil:
    cdef Py_ssize_t i, m = 0
    v[0] = xs[0]
    c[0] = 1.0
    for i in range(1, n):
        if xs[i] == v[m]:
            c[m] += 1.0
        else:
            m += 1
            v[m] = xs[i]
            c[m] = 1.0
    return m + 1


cdef double _bisect(const double* v, const double* c, Py_ssize_t m, double alpha,
                    double tol, int max_iter, int* iters) noexcept nogil:
    cdef double lo, hi, mid, fm
    cdef int it
    if m == 1:
        iters[0] = 0
        return v[0]
    lo = v[0] - 1.0
    hi = v[m - 1] + 1.0
    for it in range(max_iter):
        if hi - lo <= tol:
            iters[0] = it
            return 0.5 * (lo + hi)
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            # bracket is at floating resolution
            iters[0] = it
            return mid
        fm = _wsum(v, c, m, alpha, mid)
        if fm > 0.0:
            lo = mid
        elif fm < 0.0:
            hi = mid
        else:
            iters[0] = it
            return mid
    if hi - lo <= tol:
        iters[0] = max_iter
        return 0.5 * (lo + hi)
    iters[0] = -1
    return 0.5 * (lo + hi)


def psi(const double[::1] y):
    cdef Py_ssize_t i, n = y.shape[0]
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    for i in range(n):
        o[i] = _psi(y[i])
    return out


def weighted_influence(const double[::1] x, const double[::1] w, double alpha, double z):
    cdef double acc = 0.0
    cdef Py_ssize_t i, n = x.shape[0]
    for i in range(n):
        acc += w[i] * _psi(alpha * (x[i] - z))
    return acc


def root_sorted(const double[::1] xs, double alpha, double tol, int max_iter):
    cdef Py_ssize_t n = xs.shape[0], m
    cdef int iters = 0
    cdef double root
    cdef double* v = <double*> malloc(n * sizeof(double))
    cdef double* c = <double*> malloc(n * sizeof(double))
    if v == NULL or c == NULL:
        free(v)
        free(c)
        raise MemoryError()
    with nogil:
        m = _compress(&xs[0], n, v, c)
        root = _bisect(v, c, m, alpha, tol, max_iter, &iters)
    free(v)
    free(c)
    return root, iters


def roots_sorted(const double[:, ::1] xs, const double[::1] alphas, double tol, int max_iter):
    cdef Py_ssize_t rows = xs.shape[0], n = xs.shape[1], r, m
    cdef int it = 0
    roots = np.empty(rows, dtype=np.float64)
    iters = np.empty(rows, dtype=np.int64)
    cdef double[::1] ro = roots
    cdef long long[::1] io = iters
    cdef double* v = <double*> malloc(n * sizeof(double))
    cdef double* c = <double*> malloc(n * sizeof(double))
    if v == NULL or c == NULL:
        free(v)
        free(c)
        raise MemoryError()
    with nogil:
        for r in range(rows):
            m = _compress(&xs[r, 0], n, v, c)
            ro[r] = _bisect(v, c, m, alphas[r], tol, max_iter, &it)
            io[r] = it
    free(v)
    free(c)
    return roots, iters
