"""Integration over annuli, balls, and the perforated ball.

Layout: angular x radial product.  The angular factor is a fixed product
Gauss-Jacobi rule on S^(n-1) (exact for spherical harmonics up to the
requested degree) for n <= 5, and a seeded Sobol point set mapped to the
sphere for n >= 6.  The radial factor is adaptive Gauss-Kronrod, run in
log r whenever the inner radius is positive, because the integrands here
are power laws with bumps at the bubble scales; those scales are passed
in as break points.

Everything is deterministic given (spec, inputs): the Sobol set is seeded
and the adaptive subdivision is reproducible.
"""

import math
import warnings
from dataclasses import dataclass, replace

import numpy as np
from scipy import integrate
from scipy.special import roots_jacobi
from scipy.stats import norm, qmc

from .constants import dim_constants


@dataclass(frozen=True)
class QuadratureSpec:
    rtol: float = 1e-9
    atol: float = 1e-12
    max_evals: int = 50_000_000
    seed: int = 0
    angular_degree: int = 21
    qmc_nodes: int = 2048  # power of two; used for n >= 6

    def __post_init__(self):
        if not (self.rtol > 0 and self.atol > 0):
            raise ValueError("tolerances must be positive")
        if self.max_evals < 1000:
            raise ValueError("max_evals must be >= 1000")


@dataclass(frozen=True)
class IntegralResult:
    value: float
    error: float
    neval: int
    converged: bool
    method: str

    @staticmethod
    def combine(parts, method):
        return IntegralResult(
            value=float(sum(p.value for p in parts)),
            error=float(math.sqrt(sum(p.error ** 2 for p in parts))),
            neval=int(sum(p.neval for p in parts)),
            converged=all(p.converged for p in parts),
            method=method)


_RULE_CACHE = {}


def sphere_rule(n, degree):
    """Product rule on S^(n-1): nodes (M, n) and weights summing to |S^(n-1)|.

    Gauss-Jacobi in each cos(theta_j) (weight (1-t^2)^((n-2-j)/2)) and a
    uniform azimuth; exact for polynomials of degree <= ``degree``.
    """
    key = (n, degree)
    if key in _RULE_CACHE:
        return _RULE_CACHE[key]
    m = (degree + 2) // 2
    mphi = degree + 1
    # start from the azimuth circle (t, weights)
    phi = 2.0 * np.pi * np.arange(mphi) / mphi
    pts = np.stack([np.cos(phi), np.sin(phi)], axis=1)
    wts = np.full(mphi, 2.0 * np.pi / mphi)
    for j in range(n - 2, 0, -1):  # fold in theta_j, innermost first
        a = (n - 2 - j) / 2.0
        t, w = roots_jacobi(m, a, a)
        sin_t = np.sqrt(1.0 - t ** 2)
        new = np.empty((len(t) * pts.shape[0], pts.shape[1] + 1))
        neww = np.empty(len(t) * pts.shape[0])
        for i in range(len(t)):
            rows = slice(i * pts.shape[0], (i + 1) * pts.shape[0])
            new[rows, 0] = t[i]
            new[rows, 1:] = sin_t[i] * pts
            neww[rows] = w[i] * wts
        pts, wts = new, neww
    pts = np.ascontiguousarray(pts)
    wts = np.ascontiguousarray(wts)
    _RULE_CACHE[key] = (pts, wts)
    return pts, wts


def sphere_rule_qmc(n, m, seed):
    """Seeded Sobol points pushed to S^(n-1); weights |S^(n-1)|/m."""
    key = ("qmc", n, m, seed)
    if key in _RULE_CACHE:
        return _RULE_CACHE[key]
    eng = qmc.Sobol(d=n, scramble=True, seed=seed)
    U = eng.random(m)
    Z = norm.ppf(np.clip(U, 1e-15, 1 - 1e-15))
    Z /= np.linalg.norm(Z, axis=1, keepdims=True)
    pts = np.ascontiguousarray(Z)
    wts = np.full(m, dim_constants(n).sphere_measure / m)
    _RULE_CACHE[key] = (pts, wts)
    return pts, wts


def _angular_rule(n, spec):
    if n <= 5:
        return sphere_rule(n, spec.angular_degree)
    return sphere_rule_qmc(n, spec.qmc_nodes, spec.seed)


def _radial_quad(g, r_in, r_out, spec, scales, n_ang):
    """Adaptive radial integral of g(r) on [r_in, r_out]; log substitution
    when r_in > 0.  Returns IntegralResult (neval counts point batches)."""
    limit = max(50, min(400, spec.max_evals // max(1, 21 * n_ang)))
    inner = [s for s in scales if r_in < s < r_out]
    with warnings.catch_warnings():
        warnings.simplefilter("ignore", integrate.IntegrationWarning)
        if r_in > 0:
            a, b = math.log(r_in), math.log(r_out)
            pts = sorted(math.log(s) for s in inner)
            out = integrate.quad(lambda u: g(math.exp(u)) * math.exp(u),
                                 a, b, epsabs=spec.atol, epsrel=spec.rtol,
                                 limit=limit, points=pts or None,
                                 full_output=1)
        else:
            out = integrate.quad(g, r_in, r_out, epsabs=spec.atol,
                                 epsrel=spec.rtol, limit=limit,
                                 points=sorted(inner) or None, full_output=1)
    value, err, info = out[0], out[1], out[2]
    converged = len(out) == 3
    return IntegralResult(value=float(value), error=float(err),
                          neval=int(info["neval"]) * n_ang,
                          converged=converged, method="radial-angular")


def integrate_annulus(f, center, r_in, r_out, n, spec, scales=()):
    """Integral of f over the annulus r_in <= |x - center| <= r_out.

    ``f`` maps an (M, n) batch to (M,) values; ``scales`` are radii of known
    integrand features (bubble scales) used as radial break points.
    """
    if not 0 <= r_in < r_out:
        raise ValueError(f"need 0 <= r_in < r_out, got ({r_in}, {r_out})")
    center = np.asarray(center, dtype=float)
    dirs, w = _angular_rule(n, spec)

    def g(r):
        vals = f(np.ascontiguousarray(center + r * dirs))
        return r ** (n - 1.0) * float(np.asarray(vals) @ w)

    res = _radial_quad(g, r_in, r_out, spec, scales, len(w))
    method = res.method + ("-qmc" if n >= 6 else "")
    return replace(res, method=method)


def integrate_ball(f, center, radius, n, spec, scales=()):
    return integrate_annulus(f, center, 0.0, radius, n, spec, scales)


def _crescent_radius(bvec, m2, r_guard_sq):
    # smallest r (per direction) with |c + r w - xi0| >= r_guard
    disc = np.maximum(bvec ** 2 - m2 + r_guard_sq, 0.0)
    return bvec + np.sqrt(disc)


def integrate_crescent(f, dom, r_guard, spec):
    """Integral over B(center, R) minus B(xi0, r_guard), the piece of the far
    region not covered by the annulus around xi0 (empty when concentric)."""
    n, R = dom.n, dom.radius
    dirs, w = _angular_rule(n, spec)
    off = dom.xi0 - dom.center
    m2 = float(off @ off)
    bvec = dirs @ off
    r_lo = _crescent_radius(bvec, m2, r_guard * r_guard)
    glnodes, glweights = np.polynomial.legendre.leggauss(32)
    coarse_n, coarse_w = np.polynomial.legendre.leggauss(16)

    def piece(nodes, weights):
        total = 0.0
        for i in range(len(w)):
            a, b = r_lo[i], R
            if b <= a:
                continue
            r = 0.5 * (b - a) * nodes + 0.5 * (a + b)
            X = np.ascontiguousarray(dom.center + r[:, None] * dirs[i])
            total += w[i] * 0.5 * (b - a) * float(
                (np.asarray(f(X)) * r ** (n - 1.0)) @ weights)
        return total

    fine = piece(glnodes, glweights)
    coarse = piece(coarse_n, coarse_w)
    err = abs(fine - coarse)
    return IntegralResult(value=fine, error=max(err, spec.atol),
                          neval=len(w) * 48, converged=True,
                          method="crescent-gl")


def perforated_pieces(dom, ann):
    """Region list covering Omega_eps: the annuli, the far annulus around
    xi0, and (off-center only) the crescent up to the outer boundary."""
    pieces = [("annulus", r_in, r_out) for (r_in, r_out) in ann.radii]
    r_far = dom.boundary_gap()
    if ann.rho < r_far:
        pieces.append(("annulus", ann.rho, r_far))
    if np.linalg.norm(dom.xi0 - dom.center) > 1e-14 * dom.radius:
        pieces.append(("crescent", r_far, dom.radius))
    return pieces


def integrate_perforated(f, dom, ann, spec, skip_annulus=None):
    """Integral of f over Omega_eps as the sum over the decomposition.

    ``skip_annulus`` (1-based, outermost first) omits one bubble annulus,
    giving the complement integral over Omega_eps minus A_l.
    """
    parts = []
    scales = ann.deltas
    for idx, piece in enumerate(perforated_pieces(dom, ann)):
        if skip_annulus is not None and idx == skip_annulus - 1:
            continue
        if piece[0] == "annulus":
            parts.append(integrate_annulus(f, dom.xi0, piece[1], piece[2],
                                           dom.n, spec, scales=scales))
        else:
            parts.append(integrate_crescent(f, dom, piece[1], spec))
    return IntegralResult.combine(parts, "perforated")


def integrate_annulus_index(f, dom, ann, spec, l):
    """Integral over the single tower annulus A_l (1-based, outermost first)."""
    r_in, r_out = ann.radii[l - 1]
    return integrate_annulus(f, dom.xi0, r_in, r_out, dom.n, spec,
                             scales=ann.deltas)
