# cython: language_level=3, boundscheck=False, wraparound=False, cdivision=True, initializedcheck=False
"""Compiled candidate scoring; same contract as ``_kernels_py.candidate_values``."""

import numpy as np
cimport numpy as cnp
from libc.math cimport erf, sqrt, fabs

cnp.import_array()

cdef enum:
    MSE = 0
    ATE = 1
    AUQ = 2
    ERUPT = 3


cdef inline double _erf_ratio(double num, double var) nogil:
    if var > 0.0:
        return erf(num / sqrt(2.0 * var))
    if num > 0.0:
        return 1.0
    if num < 0.0:
        return -1.0
    return 0.0


cdef inline void _arm(double a, double b, double th, double n, double *bias, double *var) nogil:
    cdef double den = a + b + n
    if den > 0.0:
        bias[0] = (a - (a + b) * th) / den
        var[0] = th * (1.0 - th) * n / (den * den)
    else:
        # empty arm under a zero prior counts as half an observation
        bias[0] = 0.0
        var[0] = 2.0 * th * (1.0 - th)


cdef inline double _neff(double a, double b, double n) nogil:
    cdef double ne = n + a + b
    return ne if ne > 0.0 else 0.5


def candidate_values(int kind, p, alpha, beta, theta, n, double cost=0.0):
    cdef double[::1] pv = np.ascontiguousarray(p, dtype=np.float64)
    cdef double[:, ::1] av = np.ascontiguousarray(alpha, dtype=np.float64)
    cdef double[:, ::1] bv = np.ascontiguousarray(beta, dtype=np.float64)
    cdef double[:, ::1] tv = np.ascontiguousarray(theta, dtype=np.float64)
    cdef double[:, ::1] nv = np.ascontiguousarray(n, dtype=np.float64)
    cdef Py_ssize_t k = pv.shape[0]
    out_arr = np.empty((k, 2), dtype=np.float64)
    cdef double[:, ::1] out = out_arr
    if kind == MSE or kind == ATE:
        _bias_var_kernel(kind, pv, av, bv, tv, nv, out)
    elif kind == ERUPT:
        _erupt_kernel(pv, av, bv, tv, nv, cost, out)
    elif kind == AUQ:
        work = np.empty(3 * k, dtype=np.float64)
        _auq_kernel(pv, av, bv, tv, nv, work, out)
    else:
        raise ValueError(f"unknown reward kind {kind}")
    return out_arr


cdef void _bias_var_kernel(int kind, double[::1] p, double[:, ::1] a, double[:, ::1] b,
                           double[:, ::1] th, double[:, ::1] n, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t k = p.shape[0]
    cdef Py_ssize_t i
    cdef int t
    cdef double e0, e1, v0, v1, e0n, e1n, v0n, v1n
    cdef double bias, var, nb, nvar, bnew
    cdef double total = 0.0, B = 0.0, V = 0.0
    for i in range(k):
        _arm(a[i, 0], b[i, 0], th[i, 0], n[i, 0], &e0, &v0)
        _arm(a[i, 1], b[i, 1], th[i, 1], n[i, 1], &e1, &v1)
        bias = e1 - e0
        var = v0 + v1
        total += p[i] * (bias * bias + var)
        B += p[i] * bias
        V += p[i] * p[i] * var
    for i in range(k):
        _arm(a[i, 0], b[i, 0], th[i, 0], n[i, 0], &e0, &v0)
        _arm(a[i, 1], b[i, 1], th[i, 1], n[i, 1], &e1, &v1)
        _arm(a[i, 0], b[i, 0], th[i, 0], n[i, 0] + 1.0, &e0n, &v0n)
        _arm(a[i, 1], b[i, 1], th[i, 1], n[i, 1] + 1.0, &e1n, &v1n)
        bias = e1 - e0
        var = v0 + v1
        for t in range(2):
            if t == 0:
                nb = e1 - e0n
                nvar = v0n + v1
            else:
                nb = e1n - e0
                nvar = v0 + v1n
            if kind == MSE:
                out[i, t] = -total + p[i] * (bias * bias + var) - p[i] * (nb * nb + nvar)
            else:
                bnew = B + p[i] * (nb - bias)
                out[i, t] = -bnew * bnew - (V + p[i] * p[i] * (nvar - var))


cdef void _erupt_kernel(double[::1] p, double[:, ::1] a, double[:, ::1] b, double[:, ::1] th,
                        double[:, ::1] n, double cost, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t k = p.shape[0]
    cdef Py_ssize_t i
    cdef int t
    cdef double total = 0.0, mu, s, cv, ne, s_new, term
    for i in range(k):
        mu = th[i, 1] - th[i, 0] - cost
        s = (th[i, 0] * (1.0 - th[i, 0]) / _neff(a[i, 0], b[i, 0], n[i, 0])
             + th[i, 1] * (1.0 - th[i, 1]) / _neff(a[i, 1], b[i, 1], n[i, 1]))
        total += 0.5 * p[i] * (1.0 + _erf_ratio(mu, s)) * mu
    for i in range(k):
        mu = th[i, 1] - th[i, 0] - cost
        s = (th[i, 0] * (1.0 - th[i, 0]) / _neff(a[i, 0], b[i, 0], n[i, 0])
             + th[i, 1] * (1.0 - th[i, 1]) / _neff(a[i, 1], b[i, 1], n[i, 1]))
        term = 0.5 * p[i] * (1.0 + _erf_ratio(mu, s)) * mu
        for t in range(2):
            cv = th[i, t] * (1.0 - th[i, t])
            ne = _neff(a[i, t], b[i, t], n[i, t])
            s_new = s + cv / (n[i, t] + 1.0 + a[i, t] + b[i, t]) - cv / ne
            out[i, t] = total - term + 0.5 * p[i] * (1.0 + _erf_ratio(mu, s_new)) * mu


cdef void _auq_kernel(double[::1] p, double[:, ::1] a, double[:, ::1] b, double[:, ::1] th,
                      double[:, ::1] n, double[::1] work, double[:, ::1] out) noexcept nogil:
    cdef Py_ssize_t k = p.shape[0]
    cdef Py_ssize_t i, j
    cdef double ptot = 0.0, const = 0.0, half_total = 0.0
    cdef double w, gap, cv, ne, r0, r1, sn0, sn1
    cdef double *u = &work[0]
    cdef double *s = u + k
    cdef double *rows = u + 2 * k
    for i in range(k):
        ptot += p[i]
        u[i] = th[i, 1] - th[i, 0]
        s[i] = (th[i, 0] * (1.0 - th[i, 0]) / _neff(a[i, 0], b[i, 0], n[i, 0])
                + th[i, 1] * (1.0 - th[i, 1]) / _neff(a[i, 1], b[i, 1], n[i, 1]))
        rows[i] = 0.0
    for i in range(k):
        const += p[i] * u[i] * (ptot - p[i])
        for j in range(i + 1, k):
            gap = fabs(u[i] - u[j])
            w = 0.5 * p[i] * p[j] * gap
            if w != 0.0:
                w = w * _erf_ratio(gap, s[i] + s[j])
                rows[i] += w
                rows[j] += w
    for i in range(k):
        half_total += rows[i]
    half_total = 0.5 * const + 0.5 * half_total
    for i in range(k):
        cv = th[i, 0] * (1.0 - th[i, 0])
        ne = _neff(a[i, 0], b[i, 0], n[i, 0])
        sn0 = s[i] + cv / (n[i, 0] + 1.0 + a[i, 0] + b[i, 0]) - cv / ne
        cv = th[i, 1] * (1.0 - th[i, 1])
        ne = _neff(a[i, 1], b[i, 1], n[i, 1])
        sn1 = s[i] + cv / (n[i, 1] + 1.0 + a[i, 1] + b[i, 1]) - cv / ne
        r0 = 0.0
        r1 = 0.0
        for j in range(k):
            if j == i:
                continue
            gap = fabs(u[i] - u[j])
            w = 0.5 * p[i] * p[j] * gap
            if w != 0.0:
                r0 += w * _erf_ratio(gap, sn0 + s[j])
                r1 += w * _erf_ratio(gap, sn1 + s[j])
        out[i, 0] = half_total - rows[i] + r0
        out[i, 1] = half_total - rows[i] + r1

