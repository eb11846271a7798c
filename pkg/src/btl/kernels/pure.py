"""Numpy implementations of the point-batch kernels.

This is the reference backend; ``btl.kernels._core`` is a compiled mirror
of the same functions.  Every function takes C-contiguous float64 arrays,
a point batch ``X`` of shape (M, n), and returns per-point values.

Conventions: the standard bubble is

    U(x) = alpha_n * (delta / (delta^2 + |x - xi|^2))^((n-2)/2),
    alpha_n = (n (n-2))^((n-2)/4),

its scale/center derivatives are ``psi0 = dU/d(delta)`` and
``psi_j = dU/d(xi_j)``, and the regular part of the Dirichlet Green
function of the ball B(0, R) is, via the image identity,

    H(x, y) = R^(n-2) * s(x, y)^(-(n-2)/2),
    s(x, y) = |x|^2 |y|^2 - 2 R^2 <x, y> + R^4.
"""

import numpy as np


def _alpha(n):
    return (n * (n - 2.0)) ** ((n - 2.0) / 4.0)


def u_val(n, delta, xi, X):
    d2 = delta * delta + ((X - xi) ** 2).sum(axis=1)
    return _alpha(n) * (delta / d2) ** ((n - 2.0) / 2.0)


def u_grad(n, delta, xi, X):
    diff = X - xi
    d2 = delta * delta + (diff ** 2).sum(axis=1)
    c = -_alpha(n) * (n - 2.0) * delta ** ((n - 2.0) / 2.0)
    return c * diff / (d2 ** (n / 2.0))[:, None]


def psi0_val(n, delta, xi, X):
    r2 = ((X - xi) ** 2).sum(axis=1)
    d2 = delta * delta + r2
    c = _alpha(n) * ((n - 2.0) / 2.0) * delta ** ((n - 4.0) / 2.0)
    return c * (r2 - delta * delta) / d2 ** (n / 2.0)


def psi_all(n, delta, xi, X):
    diff = X - xi
    d2 = delta * delta + (diff ** 2).sum(axis=1)
    c = _alpha(n) * (n - 2.0) * delta ** ((n - 2.0) / 2.0)
    return c * diff / (d2 ** (n / 2.0))[:, None]


def _s_val(R, y, X):
    return ((X ** 2).sum(axis=1) * (y ** 2).sum()
            - 2.0 * R * R * (X @ y) + R ** 4)


def h_val(n, R, y, X):
    return R ** (n - 2.0) * _s_val(R, y, X) ** (-(n - 2.0) / 2.0)


def h_grad_x(n, R, y, X):
    s = _s_val(R, y, X)
    c = -(n - 2.0) * R ** (n - 2.0)
    return c * (X * (y ** 2).sum() - R * R * y) / (s ** (n / 2.0))[:, None]


def h_grad_y(n, R, y, X):
    s = _s_val(R, y, X)
    c = -(n - 2.0) * R ** (n - 2.0)
    return (c * (y * (X ** 2).sum(axis=1)[:, None] - R * R * X)
            / (s ** (n / 2.0))[:, None])


def tower_val(n, center, R, xi0, deltas, xis, signs, hcoefs, holecoefs, X):
    """Main-term projected tower: sum of sign_i * (U_i - hcoef_i H(.,xi_i)
    - holecoef_i |x - xi0|^(2-n))."""
    Xc = X - center
    r0 = np.sqrt(((X - xi0) ** 2).sum(axis=1))
    hole = r0 ** (2.0 - n)
    V = np.zeros(X.shape[0])
    for i in range(len(deltas)):
        V += signs[i] * (u_val(n, deltas[i], xis[i], X)
                         - hcoefs[i] * h_val(n, R, xis[i] - center, Xc)
                         - holecoefs[i] * hole)
    return V


def tower_val_grad(n, center, R, xi0, deltas, xis, signs, hcoefs, holecoefs, X):
    Xc = X - center
    diff0 = X - xi0
    r0sq = (diff0 ** 2).sum(axis=1)
    hole = r0sq ** ((2.0 - n) / 2.0)
    hole_grad = (2.0 - n) * diff0 * (r0sq ** (-n / 2.0))[:, None]
    V = np.zeros(X.shape[0])
    G = np.zeros_like(X)
    for i in range(len(deltas)):
        yi = xis[i] - center
        V += signs[i] * (u_val(n, deltas[i], xis[i], X)
                         - hcoefs[i] * h_val(n, R, yi, Xc)
                         - holecoefs[i] * hole)
        G += signs[i] * (u_grad(n, deltas[i], xis[i], X)
                         - hcoefs[i] * h_grad_x(n, R, yi, Xc)
                         - holecoefs[i] * hole_grad)
    return V, G
