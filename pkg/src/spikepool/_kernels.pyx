# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled time-stepping kernels.

Arithmetic mirrors ``_kernels_py`` operation for operation so both backends
return bit-identical arrays.
"""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def lowpass(const double[:, ::1] x, double a, double b, double[::1] state):
    cdef Py_ssize_t n_steps = x.shape[0]
    cdef Py_ssize_t n = x.shape[1]
    cdef Py_ssize_t t, i
    cdef double s
    out = np.empty((n_steps, n), dtype=np.float64)
    cdef double[:, ::1] y = out
    # time outer, units inner: rows are contiguous
    with nogil:
        for t in range(n_steps):
            for i in range(n):
                s = a * state[i] + b * x[t, i]
                y[t, i] = s
                state[i] = s
    return out


def integrate_fire(const double[:, ::1] drive, double[::1] voltage,
                   double decay, double amplitude, double vmax):
    cdef Py_ssize_t n_steps = drive.shape[0]
    cdef Py_ssize_t n = drive.shape[1]
    cdef Py_ssize_t t, i
    cdef double v
    cdef double keep = 1.0 - decay
    out = np.zeros((n_steps, n), dtype=np.float64)
    cdef double[:, ::1] spikes = out
    with nogil:
        for t in range(n_steps):
            for i in range(n):
                v = voltage[i] * keep + drive[t, i]
                if v < 0.0:
                    v = 0.0
                if v >= 1.0:
                    spikes[t, i] = amplitude
                    v = v - 1.0
                if v > vmax:
                    v = vmax
                voltage[i] = v
    return out
