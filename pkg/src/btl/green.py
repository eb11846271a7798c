"""Green function of the ball, perforated-ball model, asymptotic projections.

After translating the ball center to the origin, the regular part of the
Dirichlet Green function has the image closed form

    H(x, y) = R^(n-2) (|x|^2 |y|^2 - 2 R^2 <x,y> + R^4)^(-(n-2)/2),

which is symmetric, harmonic in each argument, equals R^(2-n) at y = 0, and
reduces G = gamma_n (|x-y|^(2-n) - H) to zero on |x| = R.

Projections onto the perforated ball are assembled from the leading terms of
their small-eps expansions (regular-part term plus the eps^(n-2) hole term);
the dropped remainders are only ever bounded, in ``projection_defect``.
"""

import warnings
from dataclasses import dataclass

import numpy as np

from . import kernels
from .bubbles import Bubble, _as_batch, _ret
from .constants import dim_constants


class RegimeWarning(UserWarning):
    """Asymptotic projection evaluated outside its small-parameter regime."""


@dataclass(frozen=True)
class Ball:
    n: int
    center: np.ndarray
    radius: float

    def __post_init__(self):
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        c = np.ascontiguousarray(self.center, dtype=float)
        if c.shape != (self.n,):
            raise ValueError(f"center must have shape ({self.n},)")
        c.flags.writeable = False
        object.__setattr__(self, "center", c)


@dataclass(frozen=True)
class PerforatedBall:
    """Omega_eps = B(center, radius) minus the closed hole B(xi0, epsilon)."""
    n: int
    center: np.ndarray
    radius: float
    xi0: np.ndarray
    epsilon: float

    def __post_init__(self):
        c = np.ascontiguousarray(self.center, dtype=float)
        x0 = np.ascontiguousarray(self.xi0, dtype=float)
        if c.shape != (self.n,) or x0.shape != (self.n,):
            raise ValueError(f"center and xi0 must have shape ({self.n},)")
        if not self.radius > 0:
            raise ValueError("radius must be positive")
        gap = self.radius - float(np.linalg.norm(x0 - c))
        if not 0 < self.epsilon < gap:
            raise ValueError(
                f"hole B(xi0, {self.epsilon}) not strictly inside the ball "
                f"(distance from xi0 to boundary is {gap})")
        for a in (c, x0):
            a.flags.writeable = False
        object.__setattr__(self, "center", c)
        object.__setattr__(self, "xi0", x0)

    @property
    def ball(self) -> Ball:
        return Ball(self.n, self.center, self.radius)

    def boundary_gap(self) -> float:
        return self.radius - float(np.linalg.norm(self.xi0 - self.center))


def _ball_of(dom) -> Ball:
    return dom.ball if isinstance(dom, PerforatedBall) else dom


def h_value(dom, x, y):
    ball = _ball_of(dom)
    X, single = _as_batch(x)
    y = np.ascontiguousarray(y, dtype=float) - ball.center
    return _ret(kernels.h_val(ball.n, ball.radius, y, X - ball.center), single)


def h_grad_x(dom, x, y):
    ball = _ball_of(dom)
    X, single = _as_batch(x)
    y = np.ascontiguousarray(y, dtype=float) - ball.center
    return _ret(kernels.h_grad_x(ball.n, ball.radius, y, X - ball.center), single)


def h_grad_y(dom, x, y):
    """Derivative of H(x, y) in the pole y (the dH/dxi_j of the projections)."""
    ball = _ball_of(dom)
    X, single = _as_batch(x)
    y = np.ascontiguousarray(y, dtype=float) - ball.center
    return _ret(kernels.h_grad_y(ball.n, ball.radius, y, X - ball.center), single)


def green_ball(dom, x, y):
    """Dirichlet Green function of the ball and its regular part, as (G, H)."""
    ball = _ball_of(dom)
    X, single = _as_batch(x)
    y = np.ascontiguousarray(y, dtype=float)
    R = ball.radius
    ry = np.linalg.norm(y - ball.center)
    if ry >= R:
        raise ValueError("pole y must be strictly inside the ball")
    rx = np.linalg.norm(X - ball.center, axis=1)
    if np.any(rx > R * (1 + 1e-12)):
        raise ValueError("evaluation points must lie in the closed ball")
    dist = np.linalg.norm(X - y, axis=1)
    if np.any(dist == 0):
        raise ValueError("green_ball is singular at coincident points")
    gamma_n = dim_constants(ball.n).gamma_n
    H = kernels.h_val(ball.n, R, y - ball.center, X - ball.center)
    G = gamma_n * (dist ** (2.0 - ball.n) - H)
    return _ret(G, single), _ret(H, single)


def projection_coefficients(dom: PerforatedBall, b: Bubble):
    """(hcoef, holecoef) of the leading-term projection
    PU = U - hcoef*H(., xi) - holecoef*|x - xi0|^(2-n)."""
    n = b.n
    alpha = dim_constants(n).alpha_n
    off2 = float(((b.xi - dom.xi0) ** 2).sum())
    hcoef = alpha * b.delta ** ((n - 2.0) / 2.0)
    holecoef = (hcoef * (b.delta ** 2 + off2) ** (-(n - 2.0) / 2.0)
                * dom.epsilon ** (n - 2.0))
    return hcoef, holecoef


def check_regime(dom: PerforatedBall, b: Bubble):
    """Warn (never fail) when the Lemma-level smallness assumptions are off."""
    ratio = dom.epsilon / b.delta
    if ratio >= 0.1:
        warnings.warn(f"eps/delta = {ratio:.3g} >= 0.1: projection error "
                      "terms are not small", RegimeWarning, stacklevel=3)
    off = float(np.linalg.norm(b.xi - dom.xi0))
    if off > 10.0 * b.delta:
        warnings.warn(f"|xi - xi0| = {off:.3g} exceeds 10*delta", RegimeWarning,
                      stacklevel=3)


def _hole_pow(dom, X, n):
    r0sq = ((X - dom.xi0) ** 2).sum(axis=1)
    return r0sq ** ((2.0 - n) / 2.0)


def project_bubble(dom: PerforatedBall, b: Bubble, x, warn=True):
    if warn:
        check_regime(dom, b)
    X, single = _as_batch(x)
    hcoef, holecoef = projection_coefficients(dom, b)
    val = (kernels.u_val(b.n, b.delta, b.xi, X)
           - hcoef * kernels.h_val(b.n, dom.radius, b.xi - dom.center,
                                   X - dom.center)
           - holecoef * _hole_pow(dom, X, b.n))
    return _ret(b.sign * val, single)


def project_bubble_grad(dom: PerforatedBall, b: Bubble, x, warn=True):
    if warn:
        check_regime(dom, b)
    X, single = _as_batch(x)
    hcoef, holecoef = projection_coefficients(dom, b)
    n = b.n
    diff0 = X - dom.xi0
    r0sq = (diff0 ** 2).sum(axis=1)
    grad = (kernels.u_grad(n, b.delta, b.xi, X)
            - hcoef * kernels.h_grad_x(n, dom.radius, b.xi - dom.center,
                                       X - dom.center)
            - holecoef * (2.0 - n) * diff0 * (r0sq ** (-n / 2.0))[:, None])
    return _ret(b.sign * grad, single)


def project_psi0(dom: PerforatedBall, b: Bubble, x, warn=True):
    if warn:
        check_regime(dom, b)
    X, single = _as_batch(x)
    n = b.n
    alpha = dim_constants(n).alpha_n
    off2 = float(((b.xi - dom.xi0) ** 2).sum())
    c = alpha * ((n - 2.0) / 2.0) * b.delta ** ((n - 4.0) / 2.0)
    holec = (c * (off2 - b.delta ** 2) / (b.delta ** 2 + off2) ** (n / 2.0)
             * dom.epsilon ** (n - 2.0))
    val = (kernels.psi0_val(n, b.delta, b.xi, X)
           - c * kernels.h_val(n, dom.radius, b.xi - dom.center, X - dom.center)
           - holec * _hole_pow(dom, X, n))
    return _ret(b.sign * val, single)


def project_psij(dom: PerforatedBall, b: Bubble, x, j: int, warn=True):
    if not 1 <= j <= b.n:
        raise IndexError(f"axis index must be in 1..{b.n}, got {j}")
    if warn:
        check_regime(dom, b)
    X, single = _as_batch(x)
    n = b.n
    alpha = dim_constants(n).alpha_n
    off = b.xi - dom.xi0
    off2 = float((off ** 2).sum())
    hc = alpha * b.delta ** ((n - 2.0) / 2.0)
    holec = (alpha * (n - 2.0) * b.delta ** ((n - 2.0) / 2.0) * off[j - 1]
             / (b.delta ** 2 + off2) ** (n / 2.0) * dom.epsilon ** (n - 2.0))
    dh = kernels.h_grad_y(n, dom.radius, b.xi - dom.center, X - dom.center)
    val = (kernels.psi_all(n, b.delta, b.xi, X)[:, j - 1]
           - hc * dh[:, j - 1]
           + holec * _hole_pow(dom, X, n))
    return _ret(b.sign * val, single)


def exact_dirichlet_projection(dom: PerforatedBall, b: Bubble):
    """Ground-truth projection for the concentric radial case.

    When xi = xi0 = center, the harmonic correction is A + B r^(2-n) with
    A, B fixed by matching U on both boundary spheres.  Returns
    (value_fn, grad_fn) taking (M, n) batches.
    """
    n = b.n
    if (np.linalg.norm(b.xi - dom.center) > 1e-12 * dom.radius
            or np.linalg.norm(dom.xi0 - dom.center) > 1e-12 * dom.radius):
        raise ValueError("exact Dirichlet oracle requires xi = xi0 = center")
    alpha = dim_constants(n).alpha_n

    def u_radial(r):
        return alpha * (b.delta / (b.delta ** 2 + r * r)) ** ((n - 2.0) / 2.0)

    eps, R = dom.epsilon, dom.radius
    B = (u_radial(eps) - u_radial(R)) / (eps ** (2.0 - n) - R ** (2.0 - n))
    A = u_radial(R) - B * R ** (2.0 - n)

    def value_fn(x):
        X, single = _as_batch(x)
        r = np.linalg.norm(X - dom.center, axis=1)
        val = kernels.u_val(n, b.delta, b.xi, X) - A - B * r ** (2.0 - n)
        return _ret(b.sign * val, single)

    def grad_fn(x):
        X, single = _as_batch(x)
        diff = X - dom.center
        rsq = (diff ** 2).sum(axis=1)
        g = (kernels.u_grad(n, b.delta, b.xi, X)
             - B * (2.0 - n) * diff * (rsq ** (-n / 2.0))[:, None])
        return _ret(b.sign * g, single)

    return value_fn, grad_fn


@dataclass(frozen=True)
class DefectReport:
    """Max over the grid of |main terms| / (stated remainder envelope)."""
    ratio_u: float
    ratio_psi0: float
    ratio_psij: float
    # both candidate envelopes for the psi^j hole decay (the two O-forms)
    ratio_psij_alt_a: float
    ratio_psij_alt_b: float
    npoints: int

    def as_dict(self):
        return {k: getattr(self, k) for k in
                ("ratio_u", "ratio_psi0", "ratio_psij",
                 "ratio_psij_alt_a", "ratio_psij_alt_b", "npoints")}


def projection_defect(dom: PerforatedBall, b: Bubble, grid) -> DefectReport:
    X, _ = _as_batch(grid)
    if X.shape[0] == 0:
        raise ValueError("defect grid is empty")
    n, delta, eps = b.n, b.delta, dom.epsilon
    bu = b.unsigned()
    r0 = np.linalg.norm(X - dom.xi0, axis=1)
    if np.any(r0 <= eps):
        raise ValueError("defect grid must avoid the closed hole")
    rpow = r0 ** (2.0 - n)

    du = np.abs(kernels.u_val(n, delta, bu.xi, X) - project_bubble(dom, bu, X, warn=False))
    dp0 = np.abs(kernels.psi0_val(n, delta, bu.xi, X) - project_psi0(dom, bu, X, warn=False))
    dpj = np.zeros(X.shape[0])
    for j in range(1, n + 1):
        dpj = np.maximum(dpj, np.abs(kernels.psi_all(n, delta, bu.xi, X)[:, j - 1]
                                     - project_psij(dom, bu, X, j, warn=False)))

    env_u = delta ** ((n - 2.0) / 2.0) + eps ** (n - 2.0) * delta ** (-(n - 2.0) / 2.0) * rpow
    env_p0 = delta ** ((n - 4.0) / 2.0) + eps ** (n - 2.0) * delta ** (-n / 2.0) * rpow
    env_pj = delta ** ((n - 2.0) / 2.0) + eps ** (n - 2.0) * delta ** (-n / 2.0) * rpow
    scale_j = delta ** ((n - 2.0) / 2.0)
    env_a = scale_j * (1.0 + (eps ** (n - 1.0) / delta ** n) * rpow)
    env_b = scale_j * (1.0 + (eps / delta) ** (n - 1.0) * rpow)

    return DefectReport(
        ratio_u=float(np.max(du / env_u)),
        ratio_psi0=float(np.max(dp0 / env_p0)),
        ratio_psij=float(np.max(dpj / env_pj)),
        ratio_psij_alt_a=float(np.max(dpj / env_a)),
        ratio_psij_alt_b=float(np.max(dpj / env_b)),
        npoints=int(X.shape[0]))


@dataclass(frozen=True)
class WeightField:
    """Anisotropy weight a with batch value/gradient/hessian oracles."""
    value: object
    gradient: object
    hessian: object
    description: str

    def a0_grad0(self, xi0):
        xi0 = np.asarray(xi0, dtype=float)
        a0 = float(self.value(xi0[None, :])[0])
        g0 = np.asarray(self.gradient(xi0[None, :])[0], dtype=float)
        if not a0 > 0:
            raise ValueError(f"weight must be positive at xi0, got {a0}")
        return a0, g0


def constant_weight(c: float = 1.0) -> WeightField:
    if not c > 0:
        raise ValueError("constant weight must be positive")
    return WeightField(
        value=lambda X: np.full(X.shape[0], c),
        gradient=lambda X: np.zeros_like(X),
        hessian=lambda X: np.zeros((X.shape[0], X.shape[1], X.shape[1])),
        description=f"constant:{c!r}")


def affine_weight(g, c: float = 1.0) -> WeightField:
    """a(x) = c + <g, x>; positivity is the caller's burden on its domain."""
    g = np.asarray(g, dtype=float)
    return WeightField(
        value=lambda X: c + X @ g,
        gradient=lambda X: np.broadcast_to(g, X.shape).copy(),
        hessian=lambda X: np.zeros((X.shape[0], X.shape[1], X.shape[1])),
        description="affine:" + ",".join(repr(t) for t in g.tolist())
                    + f";c={c!r}")


def product_weight(exponents) -> WeightField:
    """a(x) = prod_i x_i^(l_i) over the first m coordinates (x_i > 0 needed)."""
    ls = np.asarray(exponents, dtype=float)
    m = len(ls)

    def value(X):
        return np.prod(X[:, :m] ** ls, axis=1)

    def gradient(X):
        a = value(X)
        G = np.zeros_like(X)
        G[:, :m] = a[:, None] * ls / X[:, :m]
        return G

    def hessian(X):
        a = value(X)
        n = X.shape[1]
        H = np.zeros((X.shape[0], n, n))
        for i in range(m):
            for j in range(m):
                if i == j:
                    H[:, i, i] = a * ls[i] * (ls[i] - 1.0) / X[:, i] ** 2
                else:
                    H[:, i, j] = a * ls[i] * ls[j] / (X[:, i] * X[:, j])
        return H

    return WeightField(value=value, gradient=gradient, hessian=hessian,
                       description="product:" + ",".join(str(t) for t in
                                                         ls.tolist()))


def weight_min_on_ball(a: WeightField, ball: Ball, nsamples=4096, seed=0):
    """Sampled positivity floor of the weight over the ball."""
    rng = np.random.default_rng(seed)
    Z = rng.standard_normal((nsamples, ball.n))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    r = ball.radius * rng.random(nsamples) ** (1.0 / ball.n)
    X = ball.center + r[:, None] * Z
    return float(np.min(a.value(X)))
