# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True
"""Compiled kernels for the implicit Milstein hot loop.

Operation-for-operation the same arithmetic as the NumPy fallback (built
with fp-contraction off), so both backends produce bit-identical paths.
"""

from libc.math cimport sqrt

import numpy as np


def terminal_batch(double alpha, double mu, double sigma, double theta,
                   double dt, double x0, object dw_in):
    """Terminal state and per-path minimum after one implicit Milstein pass."""
    cdef double[:, ::1] dw = np.ascontiguousarray(dw_in, dtype=np.float64)
    cdef Py_ssize_t n_paths = dw.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    cdef double c_lin = (theta - 1.0) * alpha * dt
    cdef double c_const = (alpha * mu - 0.25 * sigma * sigma) * dt
    cdef double inv = 1.0 / (1.0 + alpha * theta * dt)
    cdef double half_sigma = 0.5 * sigma
    terminal = np.empty(n_paths)
    running_min = np.empty(n_paths)
    cdef double[::1] term_v = terminal
    cdef double[::1] min_v = running_min
    cdef Py_ssize_t i, j
    cdef double x, x_min, r
    with nogil:
        for i in range(n_paths):
            x = x0
            x_min = x0
            for j in range(n_steps):
                r = sqrt(x) + half_sigma * dw[i, j]
                x = (c_lin * x + c_const + r * r) * inv
                if x < x_min:
                    x_min = x
            term_v[i] = x
            min_v[i] = x_min
    return terminal, running_min


def record_batch(double alpha, double mu, double sigma, double theta,
                 double dt, double x0, object dw_in, object record_steps):
    """States at selected step counts (0 = start value)."""
    cdef double[:, ::1] dw = np.ascontiguousarray(dw_in, dtype=np.float64)
    cdef Py_ssize_t n_paths = dw.shape[0]
    cdef Py_ssize_t n_steps = dw.shape[1]
    steps_arr = np.asarray(record_steps, dtype=np.int64)
    if steps_arr.size and (
        steps_arr[0] < 0 or steps_arr[-1] > n_steps or np.any(np.diff(steps_arr) <= 0)
    ):
        raise ValueError("record_steps must be strictly increasing within [0, n_steps]")
    cdef long long[::1] steps = np.ascontiguousarray(steps_arr)
    cdef Py_ssize_t n_rec = steps.shape[0]
    cdef double c_lin = (theta - 1.0) * alpha * dt
    cdef double c_const = (alpha * mu - 0.25 * sigma * sigma) * dt
    cdef double inv = 1.0 / (1.0 + alpha * theta * dt)
    cdef double half_sigma = 0.5 * sigma
    out = np.empty((n_paths, n_rec))
    cdef double[:, ::1] out_v = out
    cdef Py_ssize_t i, j, k
    cdef double x, r
    with nogil:
        for i in range(n_paths):
            x = x0
            k = 0
            if k < n_rec and steps[k] == 0:
                out_v[i, k] = x
                k += 1
            for j in range(n_steps):
                r = sqrt(x) + half_sigma * dw[i, j]
                x = (c_lin * x + c_const + r * r) * inv
                if k < n_rec and steps[k] == j + 1:
                    out_v[i, k] = x
                    k += 1
    return out
