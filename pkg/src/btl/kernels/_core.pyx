# cython: boundscheck=False, wraparound=False, cdivision=True
"""Compiled mirror of btl.kernels.pure (same functions, same semantics).

The loops fuse the per-bubble terms so the tower evaluation makes a single
pass over the point batch without numpy temporaries.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport pow, sqrt

cnp.import_array()


cdef inline double _alpha(double n) nogil:
    return pow(n * (n - 2.0), (n - 2.0) / 4.0)


def u_val(int n, double delta, const double[::1] xi, const double[:, ::1] X):
    cdef Py_ssize_t M = X.shape[0], nd = X.shape[1], i, j
    cdef double d2, t, a = _alpha(n), e = (n - 2.0) / 2.0
    out_arr = np.empty(M)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(M):
            d2 = delta * delta
            for j in range(nd):
                t = X[i, j] - xi[j]
                d2 += t * t
            out[i] = a * pow(delta / d2, e)
    return out_arr


def u_grad(int n, double delta, const double[::1] xi, const double[:, ::1] X):
    cdef Py_ssize_t M = X.shape[0], nd = X.shape[1], i, j
    cdef double d2, t, w
    cdef double c = -_alpha(n) * (n - 2.0) * pow(delta, (n - 2.0) / 2.0)
    out_arr = np.empty((M, nd))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(M):
            d2 = delta * delta
            for j in range(nd):
                t = X[i, j] - xi[j]
                d2 += t * t
            w = c / pow(d2, n / 2.0)
            for j in range(nd):
                out[i, j] = w * (X[i, j] - xi[j])
    return out_arr


def psi0_val(int n, double delta, const double[::1] xi, const double[:, ::1] X):
    cdef Py_ssize_t M = X.shape[0], nd = X.shape[1], i, j
    cdef double r2, t
    cdef double c = _alpha(n) * ((n - 2.0) / 2.0) * pow(delta, (n - 4.0) / 2.0)
    out_arr = np.empty(M)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(M):
            r2 = 0.0
            for j in range(nd):
                t = X[i, j] - xi[j]
                r2 += t * t
            out[i] = c * (r2 - delta * delta) / pow(delta * delta + r2, n / 2.0)
    return out_arr


def psi_all(int n, double delta, const double[::1] xi, const double[:, ::1] X):
    cdef Py_ssize_t M = X.shape[0], nd = X.shape[1], i, j
    cdef double d2, t, w
    cdef double c = _alpha(n) * (n - 2.0) * pow(delta, (n - 2.0) / 2.0)
    out_arr = np.empty((M, nd))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(M):
            d2 = delta * delta
            for j in range(nd):
                t = X[i, j] - xi[j]
                d2 += t * t
            w = c / pow(d2, n / 2.0)
            for j in range(nd):
                out[i, j] = w * (X[i, j] - xi[j])
    return out_arr


cdef inline double _s_val_one(double R, const double[::1] y, const double[:, ::1] X,
                              Py_ssize_t i, Py_ssize_t nd) nogil:
    cdef double x2 = 0.0, y2 = 0.0, xy = 0.0
    cdef Py_ssize_t j
    for j in range(nd):
        x2 += X[i, j] * X[i, j]
        y2 += y[j] * y[j]
        xy += X[i, j] * y[j]
    return x2 * y2 - 2.0 * R * R * xy + R * R * R * R


def h_val(int n, double R, const double[::1] y, const double[:, ::1] X):
    cdef Py_ssize_t M = X.shape[0], nd = X.shape[1], i
    cdef double c = pow(R, n - 2.0), e = -(n - 2.0) / 2.0
    out_arr = np.empty(M)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(M):
            out[i] = c * pow(_s_val_one(R, y, X, i, nd), e)
    return out_arr


def h_grad_x(int n, double R, const double[::1] y, const double[:, ::1] X):
    cdef Py_ssize_t M = X.shape[0], nd = X.shape[1], i, j
    cdef double s, w, y2
    cdef double c = -(n - 2.0) * pow(R, n - 2.0)
    out_arr = np.empty((M, nd))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(M):
            y2 = 0.0
            for j in range(nd):
                y2 += y[j] * y[j]
            s = _s_val_one(R, y, X, i, nd)
            w = c / pow(s, n / 2.0)
            for j in range(nd):
                out[i, j] = w * (X[i, j] * y2 - R * R * y[j])
    return out_arr


def h_grad_y(int n, double R, const double[::1] y, const double[:, ::1] X):
    cdef Py_ssize_t M = X.shape[0], nd = X.shape[1], i, j
    cdef double s, w, x2
    cdef double c = -(n - 2.0) * pow(R, n - 2.0)
    out_arr = np.empty((M, nd))
    cdef double[:, ::1] out = out_arr
    with nogil:
        for i in range(M):
            x2 = 0.0
            for j in range(nd):
                x2 += X[i, j] * X[i, j]
            s = _s_val_one(R, y, X, i, nd)
            w = c / pow(s, n / 2.0)
            for j in range(nd):
                out[i, j] = w * (y[j] * x2 - R * R * X[i, j])
    return out_arr


def tower_val(int n, const double[::1] center, double R, const double[::1] xi0,
              const double[::1] deltas, const double[:, ::1] xis, const double[::1] signs,
              const double[::1] hcoefs, const double[::1] holecoefs, const double[:, ::1] X):
    """Main-term projected tower: sum of sign_i * (U_i - hcoef_i H(.,xi_i)
    - holecoef_i |x - xi0|^(2-n))."""
    cdef Py_ssize_t M = X.shape[0], nd = X.shape[1], k = deltas.shape[0]
    cdef Py_ssize_t i, j, b
    cdef double d2, t, x2, y2, xy, s, r0sq, hole, a = _alpha(n)
    cdef double eu = (n - 2.0) / 2.0, cH = pow(R, n - 2.0), eh = -(n - 2.0) / 2.0
    cdef double R2 = R * R, acc
    out_arr = np.empty(M)
    cdef double[::1] out = out_arr
    with nogil:
        for i in range(M):
            r0sq = 0.0
            for j in range(nd):
                t = X[i, j] - xi0[j]
                r0sq += t * t
            hole = pow(r0sq, (2.0 - n) / 2.0)
            acc = 0.0
            for b in range(k):
                d2 = deltas[b] * deltas[b]
                x2 = 0.0
                y2 = 0.0
                xy = 0.0
                for j in range(nd):
                    t = X[i, j] - xis[b, j]
                    d2 += t * t
                    x2 += (X[i, j] - center[j]) * (X[i, j] - center[j])
                    y2 += (xis[b, j] - center[j]) * (xis[b, j] - center[j])
                    xy += (X[i, j] - center[j]) * (xis[b, j] - center[j])
                s = x2 * y2 - 2.0 * R2 * xy + R2 * R2
                acc += signs[b] * (a * pow(deltas[b] / d2, eu)
                                   - hcoefs[b] * cH * pow(s, eh)
                                   - holecoefs[b] * hole)
            out[i] = acc
    return out_arr


def tower_val_grad(int n, const double[::1] center, double R, const double[::1] xi0,
                   const double[::1] deltas, const double[:, ::1] xis, const double[::1] signs,
                   const double[::1] hcoefs, const double[::1] holecoefs,
                   const double[:, ::1] X):
    cdef Py_ssize_t M = X.shape[0], nd = X.shape[1], k = deltas.shape[0]
    cdef Py_ssize_t i, j, b
    cdef double d2, t, x2, y2, xy, s, r0sq, hole, wg, wh, a = _alpha(n)
    cdef double eu = (n - 2.0) / 2.0, cH = pow(R, n - 2.0)
    cdef double cHg = -(n - 2.0) * pow(R, n - 2.0)
    cdef double R2 = R * R, acc, holegw
    val_arr = np.empty(M)
    grad_arr = np.zeros((M, nd))
    cdef double[::1] val = val_arr
    cdef double[:, ::1] grad = grad_arr
    with nogil:
        for i in range(M):
            r0sq = 0.0
            for j in range(nd):
                t = X[i, j] - xi0[j]
                r0sq += t * t
            hole = pow(r0sq, (2.0 - n) / 2.0)
            holegw = (2.0 - n) * pow(r0sq, -n / 2.0)
            acc = 0.0
            for b in range(k):
                d2 = deltas[b] * deltas[b]
                x2 = 0.0
                y2 = 0.0
                xy = 0.0
                for j in range(nd):
                    t = X[i, j] - xis[b, j]
                    d2 += t * t
                    x2 += (X[i, j] - center[j]) * (X[i, j] - center[j])
                    y2 += (xis[b, j] - center[j]) * (xis[b, j] - center[j])
                    xy += (X[i, j] - center[j]) * (xis[b, j] - center[j])
                s = x2 * y2 - 2.0 * R2 * xy + R2 * R2
                acc += signs[b] * (a * pow(deltas[b] / d2, eu)
                                   - hcoefs[b] * cH * pow(s, -eu)
                                   - holecoefs[b] * hole)
                wg = -a * (n - 2.0) * pow(deltas[b], eu) / pow(d2, n / 2.0)
                wh = cHg / pow(s, n / 2.0)
                for j in range(nd):
                    grad[i, j] += signs[b] * (
                        wg * (X[i, j] - xis[b, j])
                        - hcoefs[b] * wh * ((X[i, j] - center[j]) * y2
                                            - R2 * (xis[b, j] - center[j]))
                        - holecoefs[b] * holegw * (X[i, j] - xi0[j]))
            val[i] = acc
    return val_arr, grad_arr
