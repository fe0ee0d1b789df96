# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled inner loops. Signatures mirror :mod:`cowqkd._pykernels`."""
import numpy as np
cimport numpy as cnp

cnp.import_array()


def onepole_filter(const double[::1] x, double b0, double b1, double a1,
                   double initial=0.0):
    cdef Py_ssize_t n = x.shape[0]
    cdef Py_ssize_t i
    out = np.empty(n, dtype=np.float64)
    cdef double[::1] y = out
    cdef double xp = initial
    cdef double yp = initial
    cdef double xi
    for i in range(n):
        xi = x[i]
        yp = b0 * xi + b1 * xp - a1 * yp
        xp = xi
        y[i] = yp
    return out


def slot_energies(const double[::1] x, Py_ssize_t samples_per_slot,
                  double baseline=0.0):
    if samples_per_slot < 1 or x.shape[0] % samples_per_slot:
        raise ValueError(f"{x.shape[0]} samples do not fill slots of {samples_per_slot}")
    cdef Py_ssize_t n_slots = x.shape[0] // samples_per_slot
    cdef Py_ssize_t s, k, base
    cdef double acc
    out = np.empty(n_slots, dtype=np.float64)
    cdef double[::1] e = out
    for s in range(n_slots):
        acc = 0.0
        base = s * samples_per_slot
        for k in range(samples_per_slot):
            acc += x[base + k]
        e[s] = acc / samples_per_slot - baseline
    return out
