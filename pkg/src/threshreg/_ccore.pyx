# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled periodized filter-bank kernels.

Coefficient layout is the usual in-place one: the 2**j_min scaling
coefficients first, then the detail block of level j at [2**j, 2**(j+1)).
"""

import numpy as np


def forward(const double[::1] x, const double[::1] h, const double[::1] g, int j_min):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t nf = h.shape[0]
    cdef Py_ssize_t length = n, half, k, m, idx
    cdef Py_ssize_t stop = (<Py_ssize_t>1) << j_min
    cdef double sa, sd, v
    out = np.empty(n, dtype=np.float64)
    work = np.array(x, dtype=np.float64, copy=True)
    tmp = np.empty(n, dtype=np.float64)
    cdef double[::1] o = out
    cdef double[::1] w = work
    cdef double[::1] t = tmp
    with nogil:
        while length > stop:
            half = length >> 1
            for k in range(half):
                sa = 0.0
                sd = 0.0
                idx = 2 * k
                for m in range(nf):
                    if idx >= length:
                        idx = idx % length
                    v = w[idx]
                    sa = sa + h[m] * v
                    sd = sd + g[m] * v
                    idx = idx + 1
                t[k] = sa
                o[half + k] = sd
            for k in range(half):
                w[k] = t[k]
            length = half
        for k in range(length):
            o[k] = w[k]
    return out


def inverse(const double[::1] c, const double[::1] h, const double[::1] g, int j_min):
    cdef Py_ssize_t n = c.shape[0]
    cdef Py_ssize_t nf = h.shape[0]
    cdef Py_ssize_t length = (<Py_ssize_t>1) << j_min
    cdef Py_ssize_t k, m, idx
    cdef double a, d
    work = np.zeros(n, dtype=np.float64)
    nxt = np.zeros(n, dtype=np.float64)
    cdef double[::1] w = work
    cdef double[::1] t = nxt
    for k in range(length):
        w[k] = c[k]
    with nogil:
        while length < n:
            for k in range(2 * length):
                t[k] = 0.0
            for k in range(length):
                a = w[k]
                d = c[length + k]
                idx = 2 * k
                for m in range(nf):
                    if idx >= 2 * length:
                        idx = idx % (2 * length)
                    t[idx] = t[idx] + h[m] * a + g[m] * d
                    idx = idx + 1
            for k in range(2 * length):
                w[k] = t[k]
            length = 2 * length
    return work
