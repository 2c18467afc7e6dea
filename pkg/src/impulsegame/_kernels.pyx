# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled hot kernels for the 1-D explicit step.

Arithmetic matches _kernels_py.py element by element (same operation
order) so the two backends are bit-identical.
"""

import numpy as np

cimport numpy as cnp

cnp.import_array()

BACKEND = "cython"


def combine_1d(double[::1] v, double[::1] w0, double[::1] wp, double[::1] wm):
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    if n == 1:
        out[0] = w0[0] * v[0]
        return out_arr
    out[0] = w0[0] * v[0] + wp[0] * v[1]
    for i in range(1, n - 1):
        out[i] = w0[i] * v[i] + wp[i] * v[i + 1] + wm[i] * v[i - 1]
    out[n - 1] = w0[n - 1] * v[n - 1] + wm[n - 1] * v[n - 2]
    return out_arr


def upwind_grad_1d(double[::1] v, double[::1] b, double dx):
    cdef Py_ssize_t n = v.shape[0]
    cdef Py_ssize_t i
    out_arr = np.empty(n)
    cdef double[::1] out = out_arr
    for i in range(n):
        if b[i] >= 0.0:
            out[i] = (v[i + 1] - v[i]) / dx if i < n - 1 else 0.0
        else:
            out[i] = (v[i] - v[i - 1]) / dx if i > 0 else 0.0
    return out_arr
