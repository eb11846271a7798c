"""Bubble family, its linearization kernels, tower rates, annuli, torus lift.

The tower over a hole of radius eps uses the scale ladder

    delta_i = eps^theta_i * d_i,   theta_i = ((n-2) + 2(i-1)) / ((n-1) + 2(k-1)),

centers xi_i = xi0 + delta_i sigma_i, and alternating signs starting from
``sign_convention`` for the first (widest) bubble.
"""

from dataclasses import dataclass

import numpy as np

from . import kernels
from .constants import dim_constants


def _as_batch(x, n=None):
    """Accept a single point or an (M, n) batch; report which it was."""
    X = np.ascontiguousarray(x, dtype=float)
    if X.ndim == 1:
        X = X[None, :]
        single = True
    elif X.ndim == 2:
        single = False
    else:
        raise ValueError(f"points must have shape (n,) or (M, n), got {X.shape}")
    if n is not None and X.shape[1] != n:
        raise ValueError(f"points have dimension {X.shape[1]}, expected {n}")
    return X, single


def _ret(v, single):
    return v[0] if single else v


@dataclass(frozen=True)
class Bubble:
    """One standard bubble: scale delta > 0, center xi in R^n, sign +-1."""
    n: int
    delta: float
    xi: np.ndarray
    sign: int = 1

    def __post_init__(self):
        if self.n < 3:
            raise ValueError("bubble dimension must be >= 3")
        if not self.delta > 0:
            raise ValueError(f"delta must be positive, got {self.delta}")
        if self.sign not in (-1, 1):
            raise ValueError("sign must be +1 or -1")
        xi = np.ascontiguousarray(self.xi, dtype=float)
        if xi.shape != (self.n,):
            raise ValueError(f"xi must have shape ({self.n},), got {xi.shape}")
        xi.flags.writeable = False
        object.__setattr__(self, "xi", xi)

    def peak_height(self) -> float:
        return dim_constants(self.n).alpha_n * self.delta ** (-(self.n - 2) / 2.0)

    def unsigned(self) -> "Bubble":
        return self if self.sign == 1 else Bubble(self.n, self.delta, self.xi, 1)


def bubble_value(b: Bubble, x):
    X, single = _as_batch(x, b.n)
    return _ret(b.sign * kernels.u_val(b.n, b.delta, b.xi, X), single)


def bubble_grad(b: Bubble, x):
    X, single = _as_batch(x, b.n)
    return _ret(b.sign * kernels.u_grad(b.n, b.delta, b.xi, X), single)


def psi0_value(b: Bubble, x):
    """dU/d(delta), the scale kernel of the linearized equation."""
    X, single = _as_batch(x, b.n)
    return _ret(b.sign * kernels.psi0_val(b.n, b.delta, b.xi, X), single)


def psij_value(b: Bubble, x, j: int):
    """dU/d(xi_j) for j = 1..n, the translation kernels."""
    if not 1 <= j <= b.n:
        raise IndexError(f"axis index must be in 1..{b.n}, got {j}")
    X, single = _as_batch(x, b.n)
    return _ret(b.sign * kernels.psi_all(b.n, b.delta, b.xi, X)[:, j - 1], single)


def theta_exponents(n: int, k: int) -> np.ndarray:
    """Concentration-rate exponents theta_1 < ... < theta_k < 1."""
    i = np.arange(1, k + 1, dtype=float)
    return ((n - 2.0) + 2.0 * (i - 1.0)) / ((n - 1.0) + 2.0 * (k - 1.0))


@dataclass(frozen=True)
class TowerConfig:
    """Finite-dimensional reduction coordinates of a k-bubble tower."""
    n: int
    k: int
    epsilon: float
    d: np.ndarray
    sigma: np.ndarray
    xi0: np.ndarray
    sign_convention: int = 1

    def __post_init__(self):
        if self.k < 1:
            raise ValueError("k must be >= 1")
        if not self.epsilon > 0:
            raise ValueError("epsilon must be positive")
        if self.sign_convention not in (-1, 1):
            raise ValueError("sign_convention must be +1 or -1")
        d = np.ascontiguousarray(self.d, dtype=float)
        sigma = np.ascontiguousarray(self.sigma, dtype=float)
        xi0 = np.ascontiguousarray(self.xi0, dtype=float)
        if d.shape != (self.k,):
            raise ValueError(f"d must have shape ({self.k},), got {d.shape}")
        if np.any(d <= 0):
            raise ValueError("all rate factors d_i must be positive")
        if sigma.shape != (self.k, self.n):
            raise ValueError(f"sigma must have shape ({self.k}, {self.n})")
        if xi0.shape != (self.n,):
            raise ValueError(f"xi0 must have shape ({self.n},)")
        for a in (d, sigma, xi0):
            a.flags.writeable = False
        object.__setattr__(self, "d", d)
        object.__setattr__(self, "sigma", sigma)
        object.__setattr__(self, "xi0", xi0)
        deltas = self.deltas()
        if np.any(np.diff(deltas) >= 0):
            raise ValueError(
                f"epsilon={self.epsilon} too large for d={d.tolist()}: "
                f"derived scales {deltas.tolist()} are not strictly decreasing")

    def deltas(self) -> np.ndarray:
        return self.epsilon ** theta_exponents(self.n, self.k) * self.d

    def signs(self) -> np.ndarray:
        return self.sign_convention * (-1.0) ** np.arange(self.k)


def rates(cfg: TowerConfig) -> list[Bubble]:
    """The k bubbles of the tower, widest first, alternating signs."""
    deltas = cfg.deltas()
    signs = cfg.signs()
    return [Bubble(cfg.n, float(deltas[i]),
                   cfg.xi0 + deltas[i] * cfg.sigma[i], int(signs[i]))
            for i in range(cfg.k)]


@dataclass(frozen=True)
class AnnulusDecomposition:
    """Disjoint annuli around xi0 covering [epsilon, rho], one per bubble.

    Annulus l (outermost first) spans sqrt(delta_l delta_{l+1}) to
    sqrt(delta_{l-1} delta_l) with the ghost scales delta_0 = rho^2/delta_1
    and delta_{k+1} = eps^2/delta_k, so the outermost outer radius is rho
    and the innermost inner radius is exactly eps.
    """
    rho: float
    radii: tuple  # ((r_in, r_out), ...) outermost first
    deltas: tuple

    def __len__(self):
        return len(self.radii)


def annuli(cfg: TowerConfig, rho: float) -> AnnulusDecomposition:
    deltas = cfg.deltas()
    ext = np.concatenate([[rho * rho / deltas[0]], deltas,
                          [cfg.epsilon ** 2 / deltas[-1]]])
    bounds = np.sqrt(ext[:-1] * ext[1:])  # k+1 radii, decreasing
    if np.any(np.diff(bounds) >= 0):
        raise ValueError(
            f"annulus radii {bounds.tolist()} not strictly decreasing "
            f"(epsilon={cfg.epsilon} too large for rho={rho})")
    radii = tuple((float(bounds[l + 1]), float(bounds[l])) for l in range(cfg.k))
    return AnnulusDecomposition(rho=float(rho), radii=radii,
                                deltas=tuple(float(t) for t in deltas))


def tower_value(cfg: TowerConfig, projection, x):
    """Alternating sum of projected bubbles; ``projection(bubble, x)`` must
    evaluate the projected bubble (sign included, it is linear)."""
    bs = rates(cfg)
    X, single = _as_batch(x)
    V = np.zeros(X.shape[0])
    for b in bs:
        V += np.asarray(projection(b, X), dtype=float)
    return _ret(V, single)


def torus_lift(u, y, shape, n_reduced=None):
    """Evaluate the rotation-invariant lift of u at y in R^N.

    ``shape`` lists the block dimensions (l_1, ..., l_m); y splits into m
    blocks y^i in R^(l_i + 1) followed by z, and the lift is
    u(|y^1|, ..., |y^m|, z).  Pass ``n_reduced`` (the arity of u) to get a
    dimension check N = n_reduced + sum(shape).
    """
    y = np.asarray(y, dtype=float)
    ls = tuple(int(l) for l in shape)
    if any(l < 1 for l in ls):
        raise ValueError("block dimensions must be >= 1")
    nblocks = sum(l + 1 for l in ls)
    if y.ndim != 1 or y.shape[0] < nblocks:
        raise ValueError(
            f"point has dimension {y.shape}, need at least {nblocks} for blocks {ls}")
    if n_reduced is not None and y.shape[0] != n_reduced + sum(ls):
        raise ValueError(
            f"point has dimension {y.shape[0]}, expected "
            f"{n_reduced + sum(ls)} = n + sum(shape)")
    parts = []
    pos = 0
    for l in ls:
        parts.append(np.linalg.norm(y[pos:pos + l + 1]))
        pos += l + 1
    reduced = np.concatenate([np.asarray(parts), y[pos:]])
    return u(reduced)
