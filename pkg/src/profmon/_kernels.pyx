# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled scoring kernels.

Surface mirrors profmon._kernels_py; both use the same erfc-based normal
log-CDF from scipy.special, so the backends agree to the last few ulp.
Inputs must be C-contiguous float64 (callers guarantee this).
"""

import math

import numpy as np

from libc.math cimport exp, fabs
from scipy.special.cython_special cimport log_ndtr

BACKEND = "cython"

P_FLOOR = 1e-300
LOGP_FLOOR = math.log(1e-300)

RULE_MINIMUM = 0
RULE_GEOMETRIC_MEAN = 1

cdef double _P_FLOOR = P_FLOOR
cdef double _LOGP_FLOOR = LOGP_FLOOR


def site_log_pvalues(double[:, ::1] z not None):
    """Per-site log two-tail p-values, floored at log(1e-300)."""
    cdef Py_ssize_t b = z.shape[0]
    cdef Py_ssize_t n = z.shape[1]
    cdef Py_ssize_t i, j
    cdef double lp
    out_arr = np.empty((b, n), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    for i in range(b):
        for j in range(n):
            lp = log_ndtr(-fabs(z[i, j]))
            if lp < _LOGP_FLOOR:
                lp = _LOGP_FLOOR
            out[i, j] = lp
    return out_arr


def aggregate_from_z(double[:, ::1] z not None, int rule):
    """Fused scoring: z matrix -> aggregated p-value per row.

    rule 0 takes the minimum site p-value, rule 1 the geometric mean
    (computed in log space). Output is floored at 1e-300.
    """
    cdef Py_ssize_t b = z.shape[0]
    cdef Py_ssize_t n = z.shape[1]
    cdef Py_ssize_t i, j
    cdef double lp, agg, p
    if rule != RULE_MINIMUM and rule != RULE_GEOMETRIC_MEAN:
        raise ValueError(f"unknown aggregation rule code {rule}")
    if n == 0:
        raise ValueError("need at least one site")
    out_arr = np.empty(b, dtype=np.float64)
    cdef double[::1] out = out_arr
    for i in range(b):
        if rule == RULE_MINIMUM:
            agg = 0.0
            for j in range(n):
                lp = log_ndtr(-fabs(z[i, j]))
                if lp < _LOGP_FLOOR:
                    lp = _LOGP_FLOOR
                if lp < agg:
                    agg = lp
        else:
            agg = 0.0
            for j in range(n):
                lp = log_ndtr(-fabs(z[i, j]))
                if lp < _LOGP_FLOOR:
                    lp = _LOGP_FLOOR
                agg += lp
            agg /= n
        p = exp(agg)
        if p < _P_FLOOR:
            p = _P_FLOOR
        out[i] = p
    return out_arr


def first_below(const double[::1] values not None, double limit):
    """Index of the first entry strictly below limit, or -1 if none."""
    cdef Py_ssize_t i
    for i in range(values.shape[0]):
        if values[i] < limit:
            return i
    return -1
