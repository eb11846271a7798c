"""Reduced energy in the rate/center coordinates and its critical points.

With b = c2 <grad_a0, sigma_1> and the cumulative-rate substitution
d_1 = t_1, d_2 = t_1 t_2, ..., the reduced energy reads

    Psi~(t, sigma) = b t_1
                     + sum_{i=1}^{k-1} c4 a0 (1+|sigma_i|^2)^(-(n-2)/2) t_{i+1}^((n-2)/2)
                     + c3 a0 (1+|sigma_k|^2)^(-(n-2)) (t_1...t_k)^(-(n-2)).

For fixed sigma with b > 0 the t-gradient vanishes at a unique point with
the closed form implemented in ``closed_form_t`` (note: the coefficient of
t_i in the sum is (1+|sigma_{i-1}|^2)^(-(n-2)/2), so the scaling of t_i for
i >= 3 carries sigma_{i-1}, which is what makes the t_2 formula and the
stationarity system consistent).  Substituting gives the center landscape
Psi^(sigma), maximized at sigma_1 = grad_a0/|grad_a0|, sigma_i = 0.
"""

from dataclasses import dataclass
from fractions import Fraction

import numpy as np
from scipy.optimize import minimize

from .constants import DimConstants, dim_constants


@dataclass(frozen=True)
class ReducedConfig:
    n: int
    k: int
    a0: float
    grad_a0: np.ndarray
    const: DimConstants = None

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.a0 > 0:
            raise ValueError("a0 must be positive")
        g = np.ascontiguousarray(self.grad_a0, dtype=float)
        if g.shape != (self.n,):
            raise ValueError(f"grad_a0 must have shape ({self.n},)")
        g.flags.writeable = False
        object.__setattr__(self, "grad_a0", g)
        if self.const is None:
            object.__setattr__(self, "const", dim_constants(self.n))

    @property
    def b1(self):
        return self.const.c2 * float(np.linalg.norm(self.grad_a0))

    @property
    def b2(self):
        return self.const.c3 * self.a0 * (self.n - 2.0)


def _check_d(d, k):
    d = np.asarray(d, dtype=float)
    if d.shape != (k,) or np.any(d <= 0):
        raise ValueError(f"d must be a positive vector of length {k}")
    return d


def _check_sigma(sigma, k, n):
    s = np.asarray(sigma, dtype=float)
    if s.shape != (k, n):
        raise ValueError(f"sigma must have shape ({k}, {n})")
    return s


def psi(cfg: ReducedConfig, d, sigma) -> float:
    """Reduced energy in the (d, sigma) coordinates."""
    n, k, a0, c = cfg.n, cfg.k, cfg.a0, cfg.const
    d = _check_d(d, k)
    s = _check_sigma(sigma, k, cfg.n)
    s2 = (s ** 2).sum(axis=1)
    val = c.c2 * float(cfg.grad_a0 @ s[0]) * d[0]
    val += c.c3 * a0 * (1.0 + s2[k - 1]) ** (-(n - 2.0)) * d[k - 1] ** (-(n - 2.0))
    for i in range(k - 1):
        val += (c.c4 * a0 * (1.0 + s2[i]) ** (-(n - 2.0) / 2.0)
                * (d[i + 1] / d[i]) ** ((n - 2.0) / 2.0))
    return float(val)


def d_from_t(t):
    t = np.asarray(t, dtype=float)
    if np.any(t <= 0):
        raise ValueError("t entries must be positive")
    return np.cumprod(t)


def t_from_d(d):
    d = np.asarray(d, dtype=float)
    if np.any(d <= 0):
        raise ValueError("d entries must be positive")
    return d / np.concatenate([[1.0], d[:-1]])


def psi_tilde(cfg: ReducedConfig, t, sigma) -> float:
    return psi(cfg, d_from_t(t), sigma)


def psi_tilde_grad(cfg: ReducedConfig, t, sigma):
    """Analytic gradient of Psi~ as (dt (k,), dsigma (k, n))."""
    n, k, a0, c = cfg.n, cfg.k, cfg.a0, cfg.const
    t = np.asarray(t, dtype=float)
    s = _check_sigma(sigma, k, cfg.n)
    s2 = (s ** 2).sum(axis=1)
    e = (n - 2.0) / 2.0
    b = c.c2 * float(cfg.grad_a0 @ s[0])
    Q = c.c3 * a0 * (1.0 + s2[k - 1]) ** (-(n - 2.0)) * np.prod(t) ** (-(n - 2.0))

    gt = np.empty(k)
    gt[0] = b - (n - 2.0) * Q / t[0]
    for i in range(1, k):
        gt[i] = (e * c.c4 * a0 * (1.0 + s2[i - 1]) ** (-e) * t[i] ** (e - 1.0)
                 - (n - 2.0) * Q / t[i])

    gs = np.zeros_like(s)
    gs[0] += c.c2 * t[0] * cfg.grad_a0
    for i in range(k - 1):  # sigma_i factor of the t_{i+1} interaction term
        gs[i] += (c.c4 * a0 * t[i + 1] ** e
                  * (-(n - 2.0)) * s[i] * (1.0 + s2[i]) ** (-(n / 2.0)))
    gs[k - 1] += (Q / (1.0 + s2[k - 1]) ** (-(n - 2.0))
                  * (-2.0 * (n - 2.0)) * s[k - 1]
                  * (1.0 + s2[k - 1]) ** (-(n - 1.0)))
    return gt, gs


def closed_form_t(cfg: ReducedConfig, sigma):
    """Unique stationary t for fixed sigma with <grad_a0, sigma_1> > 0."""
    n, k, a0, c = cfg.n, cfg.k, cfg.a0, cfg.const
    s = _check_sigma(sigma, k, cfg.n)
    b = c.c2 * float(cfg.grad_a0 @ s[0])
    if not b > 0:
        raise ValueError("sigma outside the admissible set: "
                         "<grad_a0, sigma_1> must be positive")
    s2 = (s ** 2).sum(axis=1)
    beta = c.c3 * (n - 2.0) * a0
    if k == 1:
        d1 = (beta / (b * (1.0 + s2[0]) ** (n - 2.0))) ** (1.0 / (n - 1.0))
        return np.array([d1])
    expo = 2.0 / (n + 2.0 * k - 3.0)
    t2 = ((b / beta) * (1.0 + s2[0]) ** ((n + 2.0 * k - 5.0) / 2.0)
          / np.prod(1.0 + s2[1:])) ** expo
    t = np.empty(k)
    t[1] = t2
    t[0] = (beta / b) * (t2 / (1.0 + s2[0])) ** ((n - 2.0) / 2.0)
    for i in range(2, k):
        t[i] = (1.0 + s2[i - 1]) / (1.0 + s2[0]) * t2
    return t


def psi_hat(cfg: ReducedConfig, sigma) -> float:
    """Closed form of Psi~ at the stationary t(sigma)."""
    n, k, a0, c = cfg.n, cfg.k, cfg.a0, cfg.const
    s = _check_sigma(sigma, k, cfg.n)
    y = float(cfg.grad_a0 @ s[0])
    if not y > 0:
        raise ValueError("sigma outside the admissible set")
    s2 = (s ** 2).sum(axis=1)
    m = n + 2.0 * k - 3.0
    factor = (c.c2 ** (n - 2.0)
              * (c.c3 * a0 * (n - 2.0)) ** (2.0 * k - 1.0)) ** (1.0 / m)
    shape = (y / (1.0 + s2[0]) / np.prod(1.0 + s2[1:])) ** ((n - 2.0) / m)
    return float(m / (n - 2.0) * factor * shape)


def sigma0(cfg: ReducedConfig) -> np.ndarray:
    """The maximizer (grad_a0/|grad_a0|, 0, ..., 0) of Psi^."""
    g = np.linalg.norm(cfg.grad_a0)
    if not g > 0:
        raise ValueError("grad_a0 must be nonzero")
    s = np.zeros((cfg.k, cfg.n))
    s[0] = cfg.grad_a0 / g
    return s


def maximize_psi_hat(cfg: ReducedConfig, n_starts=20, seed=0):
    """Numerical ascent of Psi^ from random starts, against the closed form.

    Maximizing Psi^ is equivalent to minimizing
    -log(<g, s_1>/(1+|s_1|^2)) + sum_{i>=2} log(1+|s_i|^2), which is smooth
    on the admissible set with an analytic gradient.
    """
    g = cfg.grad_a0
    k, n = cfg.k, cfg.n
    s_star = sigma0(cfg)

    def neglog(x):
        s = x.reshape(k, n)
        y = float(g @ s[0])
        if y <= 0:
            return np.inf, np.zeros_like(x)
        s2 = (s ** 2).sum(axis=1)
        val = -np.log(y) + np.log(1.0 + s2[0]) + np.log(1.0 + s2[1:]).sum()
        gr = np.zeros_like(s)
        gr[0] = -g / y + 2.0 * s[0] / (1.0 + s2[0])
        gr[1:] = 2.0 * s[1:] / (1.0 + s2[1:, None])
        return float(val), gr.ravel()

    rng = np.random.default_rng(seed)
    dists, values = [], []
    for _ in range(n_starts):
        s_init = rng.standard_normal((k, n))
        s_init[0] = g / np.linalg.norm(g) * (0.5 + rng.random()) \
            + 0.3 * rng.standard_normal(n)
        if float(g @ s_init[0]) <= 0:
            s_init[0] = g / np.linalg.norm(g)
        res = minimize(neglog, s_init.ravel(), jac=True, method="BFGS",
                       options={"gtol": 1e-12, "maxiter": 500})
        s_found = res.x.reshape(k, n)
        dists.append(float(np.linalg.norm(s_found - s_star)))
        values.append(psi_hat(cfg, s_found))
    return {"sigma0": s_star, "max_start_distance": max(dists),
            "ascent_values": values, "psi_hat_at_sigma0": psi_hat(cfg, s_star)}


def hessian_blocks(cfg: ReducedConfig):
    """The (A1, A2, B, D) blocks of the Hessian at (t(sigma0), sigma0),
    with grad_a0 rotated to the first axis (k >= 3)."""
    if cfg.k < 3:
        raise ValueError("block structure is stated for k >= 3")
    n, k = cfg.n, cfg.k
    b1, b2 = cfg.b1, cfg.b2
    t2 = 2.0 ** ((n + 2.0 * k - 5.0) / (n + 2.0 * k - 3.0)) \
        * (b1 / b2) ** (2.0 / (n + 2.0 * k - 3.0))
    t = np.full(k, t2 / 2.0)
    t[0] = (b2 / b1) * (t2 / 2.0) ** ((n - 2.0) / 2.0)
    t[1] = t2
    f = np.prod(t) ** (2.0 - n)

    A1 = np.empty((k, k))
    for i in range(k):
        for j in range(k):
            A1[i, j] = (n - 1.0) / t[i] ** 2 if i == j else (n - 2.0) / (t[i] * t[j])
    A1 *= b2 * f

    A2 = np.zeros((k, k))
    A2[1, 1] = b2 * (n - 4.0) * t2 ** ((n - 6.0) / 2.0) / 2.0 ** (n / 2.0)
    for i in range(2, k):
        A2[i, i] = b2 * (n - 4.0) * t[i] ** ((n - 6.0) / 2.0) / 2.0

    B = np.zeros((k, n))
    B[0, 0] = b1
    B[1, 0] = -(n - 2.0) * b2 * t2 ** ((n - 4.0) / 2.0) / 2.0 ** (n / 2.0)

    D = np.zeros((n, n))
    D[0, 0] = (n - 2.0) * b2 * t2 ** ((n - 2.0) / 2.0) / 2.0 ** (n / 2.0)
    for j in range(1, n):
        D[j, j] = -b2 * t2 ** ((n - 2.0) / 2.0) / 2.0 ** ((n - 2.0) / 2.0)
    return A1, A2, B, D


def reduced_matrix(n: int, k: int):
    """The k x k rational matrix whose determinant is -(n + 2k - 3) times a
    positive constant (exactly -(n + 2k - 3) in the integer case n = 4)."""
    if k < 3:
        raise ValueError("reduced matrix is stated for k >= 3")
    F = Fraction
    M = [[F(0)] * k for _ in range(k)]
    M[0][0] = F(n - 1) - F(2, n - 2)
    M[0][1] = F(n - 1)
    M[1][0] = F(n - 1)
    M[1][1] = F(n - 2)
    for j in range(2, k):
        M[0][j] = F(1)
        M[1][j] = F(1)
    for i in range(2, k):
        M[i][0] = F(2 * (n - 2))
        M[i][1] = F(2 * (n - 2))
        for j in range(2, k):
            M[i][j] = F(3) if i == j else F(2)
    return M


def fraction_det(M):
    """Exact determinant by fraction-free-ish Gaussian elimination."""
    M = [row[:] for row in M]
    k = len(M)
    det = Fraction(1)
    for col in range(k):
        piv = next((r for r in range(col, k) if M[r][col] != 0), None)
        if piv is None:
            return Fraction(0)
        if piv != col:
            M[col], M[piv] = M[piv], M[col]
            det = -det
        det *= M[col][col]
        inv = 1 / M[col][col]
        for r in range(col + 1, k):
            factor = M[r][col] * inv
            for c in range(col, k):
                M[r][c] -= factor * M[col][c]
    return det


def reduced_matrix_det(n: int, k: int) -> Fraction:
    return fraction_det(reduced_matrix(n, k))


def fd_hessian(fn, x0, scales, h_rel=1e-3, richardson=True):
    """Central-difference Hessian with per-coordinate steps and one
    Richardson halving (entries span orders of magnitude here)."""
    x0 = np.asarray(x0, dtype=float)
    scales = np.asarray(scales, dtype=float)

    def hess_at(h):
        dim = len(x0)
        E = np.diag(h)
        f0 = fn(x0)
        H = np.empty((dim, dim))
        for i in range(dim):
            H[i, i] = (fn(x0 + 2 * E[i]) - 2 * f0 + fn(x0 - 2 * E[i])) / (4 * h[i] ** 2)
            for j in range(i + 1, dim):
                v = (fn(x0 + E[i] + E[j]) - fn(x0 + E[i] - E[j])
                     - fn(x0 - E[i] + E[j]) + fn(x0 - E[i] - E[j])) / (4 * h[i] * h[j])
                H[i, j] = H[j, i] = v
        return H

    h = h_rel * np.maximum(np.abs(x0), scales)
    H = hess_at(h)
    if richardson:
        H = (4.0 * hess_at(h / 2.0) - H) / 3.0
    return 0.5 * (H + H.T)


@dataclass(frozen=True)
class CriticalReport:
    t: np.ndarray
    sigma: np.ndarray
    value: float
    grad_norm: float
    rel_grad_norm: float
    hessian: np.ndarray
    det: float
    min_abs_eig: float
    schur_det: float | None
    reduced_det: Fraction | None
    reduced_C: float | None

    def as_dict(self):
        return {
            "t": self.t.tolist(), "sigma": self.sigma.tolist(),
            "value": self.value, "grad_norm": self.grad_norm,
            "rel_grad_norm": self.rel_grad_norm,
            "hessian_det": self.det, "min_abs_eig": self.min_abs_eig,
            "schur_det": self.schur_det,
            "reduced_det": None if self.reduced_det is None
            else float(self.reduced_det),
            "reduced_C": self.reduced_C,
        }


def nondegeneracy_check(cfg: ReducedConfig) -> CriticalReport:
    """Assemble the evidence that (t(sigma0), sigma0) is nondegenerate:
    analytic gradient norm, finite-difference Hessian determinant and
    smallest |eigenvalue|, the block Schur determinant (k >= 3), and the
    exact reduced-matrix determinant."""
    n, k = cfg.n, cfg.k
    s0 = sigma0(cfg)
    t0 = closed_form_t(cfg, s0)
    val = psi_tilde(cfg, t0, s0)
    gt, gs = psi_tilde_grad(cfg, t0, s0)
    gnorm = float(np.sqrt((gt ** 2).sum() + (gs ** 2).sum()))

    def f(x):
        return psi_tilde(cfg, x[:k], x[k:].reshape(k, n))

    x0 = np.concatenate([t0, s0.ravel()])
    scales = np.concatenate([t0, np.ones(k * n)])
    H = fd_hessian(f, x0, scales)
    eigs = np.linalg.eigvalsh(H)
    det = float(np.linalg.det(H))

    schur = None
    red_det = None
    red_C = None
    if k >= 3:
        A1, A2, B, D = hessian_blocks(cfg)
        A = A1 + A2
        schur = float(np.linalg.det(A - B @ np.linalg.solve(D, B.T)))
        red_det = reduced_matrix_det(n, k)
        red_C = float(-red_det / (n + 2 * k - 3))

    return CriticalReport(t=t0, sigma=s0, value=val, grad_norm=gnorm,
                          rel_grad_norm=gnorm / abs(val), hessian=H, det=det,
                          min_abs_eig=float(np.min(np.abs(eigs))),
                          schur_det=schur, reduced_det=red_det, reduced_C=red_C)
