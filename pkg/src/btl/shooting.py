"""Radial shooting for sign-changing solutions on the annulus (eps, 1).

The critical radial equation u'' + (n-1)/r u' + |u|^(p-1) u = 0 with
u(eps) = 0 is integrated from a trial slope s; the node count of the
trajectory is a staircase in |s|, so bisecting the boundary value u(1)
between consecutive staircase steps lands on a solution with a prescribed
number of interior zeros.  Per-layer concentration scales are recovered
from peak heights via height = alpha_n delta^(-(n-2)/2).

Caveat carried into every report: this harness runs the isotropic weight
(a = 1, concentric hole).  The anisotropic rate law whose exponents it is
compared against is driven by a nonzero weight gradient, so the comparison
is a cross-check of the exponent format, not a theorem reproduction.
"""

import math
import os
from dataclasses import dataclass, field

import numpy as np
from scipy.integrate import cumulative_simpson, simpson, solve_ivp
from scipy.optimize import brentq

from .bubbles import theta_exponents
from .constants import dim_constants

CROSS_CHECK_CAVEAT = ("isotropic radial harness (a=1): measured exponents "
                      "are a cross-check of the rate-law format, not a "
                      "reproduction of the anisotropic construction")


@dataclass(frozen=True)
class RadialProblem:
    n: float
    eps: float
    r_outer: float = 1.0

    def __post_init__(self):
        if not 0 < self.eps < self.r_outer:
            raise ValueError("need 0 < eps < r_outer")
        if self.n < 3:
            raise ValueError("dimension must be >= 3")

    @property
    def p(self) -> float:
        return (self.n + 2.0) / (self.n - 2.0)


@dataclass
class Trajectory:
    prob: RadialProblem
    s: float
    sol: object                  # OdeSolution (dense output)
    u_end: float
    zeros: np.ndarray            # interior zero radii
    extrema: np.ndarray          # (r, u) rows at u' = 0
    blowup_radius: float | None

    def u(self, r):
        return self.sol(np.asarray(r, dtype=float))[0]

    def du(self, r):
        return self.sol(np.asarray(r, dtype=float))[1]

    @property
    def max_abs_u(self) -> float:
        peak = np.max(np.abs(self.extrema[:, 1])) if len(self.extrema) else 0.0
        return max(peak, abs(self.u_end), abs(self.s) * 1e-12)


def integrate_radial(prob: RadialProblem, s: float, rtol=1e-11,
                     blowup_cap=1e9) -> Trajectory:
    """Integrate from u(eps) = 0, u'(eps) = s with dense output and event
    detection for zeros, extrema, and blow-up."""
    n, p = prob.n, prob.p

    def rhs(r, y):
        u, v = y
        return (v, -(n - 1.0) / r * v - abs(u) ** (p - 1.0) * u)

    def ev_zero(r, y):
        return y[0]

    def ev_extremum(r, y):
        return y[1]

    def ev_blow(r, y):
        return abs(y[0]) - blowup_cap

    ev_blow.terminal = True
    sol = solve_ivp(rhs, (prob.eps, prob.r_outer), [0.0, s], method="DOP853",
                    rtol=rtol, atol=1e-13, dense_output=True,
                    events=[ev_zero, ev_extremum, ev_blow])
    blow = float(sol.t_events[2][0]) if len(sol.t_events[2]) else None
    zeros = sol.t_events[0]
    zeros = zeros[(zeros > prob.eps * (1 + 1e-12))
                  & (zeros < prob.r_outer * (1 - 1e-12))]
    ext_r = sol.t_events[1]
    ext_r = ext_r[ext_r > prob.eps * (1 + 1e-12)]
    ext = (np.stack([ext_r, sol.sol(ext_r)[0]], axis=1)
           if len(ext_r) else np.zeros((0, 2)))
    u_end = float(sol.y[0, -1]) if blow is None else math.nan
    return Trajectory(prob=prob, s=s, sol=sol.sol, u_end=u_end,
                      zeros=np.asarray(zeros), extrema=ext,
                      blowup_radius=blow)


def node_count(traj: Trajectory) -> int:
    return int(len(traj.zeros))


@dataclass
class ShotResult:
    prob: RadialProblem
    nodes: int
    s: float
    residual: float              # |u(1)| / max |u|
    node_radii: np.ndarray
    peaks: np.ndarray            # (radius, height) per layer, outermost scale first
    layer_deltas: np.ndarray
    energy: float
    scan: list = field(default_factory=list)   # (s, node_count) staircase table
    trajectory: Trajectory = None

    def as_dict(self):
        return {"n": self.prob.n, "eps": self.prob.eps, "nodes": self.nodes,
                "s": self.s, "residual": self.residual,
                "node_radii": self.node_radii.tolist(),
                "peak_radii": self.peaks[:, 0].tolist(),
                "peak_heights": self.peaks[:, 1].tolist(),
                "layer_deltas": self.layer_deltas.tolist(),
                "energy": self.energy,
                "caveat": CROSS_CHECK_CAVEAT}


def _layer_peaks(traj: Trajectory) -> np.ndarray:
    """One (radius, |height|) per nodal arc, ordered by increasing radius."""
    prob = traj.prob
    bounds = np.concatenate([[prob.eps], traj.zeros, [prob.r_outer]])
    peaks = []
    for a, b in zip(bounds[:-1], bounds[1:]):
        inside = traj.extrema[(traj.extrema[:, 0] > a)
                              & (traj.extrema[:, 0] < b)]
        if len(inside) == 0:
            continue
        i = int(np.argmax(np.abs(inside[:, 1])))
        peaks.append((inside[i, 0], abs(inside[i, 1])))
    return np.asarray(peaks)


def radial_energy(traj: Trajectory, m=20001) -> float:
    """H1-energy of the radial profile over the annulus."""
    prob = traj.prob
    n, p = prob.n, prob.p
    dc = dim_constants(int(round(n))) if float(n).is_integer() else None
    smeas = dc.sphere_measure if dc else (
        2.0 * math.pi ** (n / 2.0) / math.gamma(n / 2.0))
    r = np.linspace(prob.eps, prob.r_outer, m)
    y = traj.sol(r)
    integrand = (0.5 * y[1] ** 2 - np.abs(y[0]) ** (p + 1.0) / (p + 1.0)) \
        * r ** (n - 1.0)
    return float(smeas * simpson(integrand, x=r))


def momentum_residual(traj: Trajectory, m=20001) -> float:
    """Max defect of the first integral (r^(n-1) u')' = -r^(n-1)|u|^(p-1)u,
    relative to the flux scale: an integral-form PDE residual of the dense
    output, independent of the stepper's own error estimate."""
    prob = traj.prob
    n, p = prob.n, prob.p
    r = np.linspace(prob.eps, prob.r_outer, m)
    y = traj.sol(r)
    flux = r ** (n - 1.0) * y[1]
    source = r ** (n - 1.0) * np.abs(y[0]) ** (p - 1.0) * y[0]
    acc = cumulative_simpson(source, x=r, initial=0.0)
    defect = flux - flux[0] + acc
    return float(np.max(np.abs(defect)) / np.max(np.abs(flux)))


def find_k_node_solution(prob: RadialProblem, nodes: int, s_start=1e-2,
                         s_cap=1e14, growth=2.0, rtol=1e-11) -> ShotResult:
    """Locate the slope whose trajectory has exactly ``nodes`` interior
    zeros and u(1) = 0, by staircase scan plus boundary-value bisection."""
    if nodes < 0:
        raise ValueError("nodes must be >= 0")
    scan = []
    s = s_start
    for _ in range(60):  # back off if the starting slope already overshoots
        traj = integrate_radial(prob, s, rtol=rtol)
        nc = node_count(traj) if traj.blowup_radius is None else 10 ** 9
        if nc <= nodes:
            break
        s /= 4.0
    s_lo = None
    s_hi = None
    prev_s, prev_n = None, -1
    while s <= s_cap:
        traj = integrate_radial(prob, s, rtol=rtol)
        nc = node_count(traj) if traj.blowup_radius is None else 10 ** 9
        scan.append((s, nc))
        if prev_n > nc:
            raise RuntimeError(f"node-count staircase not monotone: {scan}")
        if nc >= nodes + 1 and prev_s is not None and prev_n <= nodes:
            s_lo, s_hi = prev_s, s
            break
        prev_s, prev_n = s, nc
        s *= growth
    if s_lo is None:
        raise RuntimeError(
            f"no slope bracket found for {nodes} nodes up to s={s_cap}; "
            f"scan table: {scan}")
    # refine the bracket so node counts are exactly (nodes, nodes+1)
    for _ in range(80):
        mid = math.sqrt(s_lo * s_hi)
        nc = node_count(integrate_radial(prob, mid, rtol=rtol))
        if nc <= nodes:
            s_lo = mid
        else:
            s_hi = mid
        if s_hi / s_lo < 1.0001:
            break

    def boundary(sval):
        return integrate_radial(prob, sval, rtol=rtol).u_end

    s_star = brentq(boundary, s_lo, s_hi, xtol=1e-300, rtol=9e-16,
                    maxiter=200)
    traj = integrate_radial(prob, s_star, rtol=rtol)
    peaks = _layer_peaks(traj)
    n = prob.n
    alpha = (n * (n - 2.0)) ** ((n - 2.0) / 4.0)
    deltas = (alpha / peaks[:, 1]) ** (2.0 / (n - 2.0)) if len(peaks) \
        else np.zeros(0)
    return ShotResult(prob=prob, nodes=nodes, s=s_star,
                      residual=abs(traj.u_end) / traj.max_abs_u,
                      node_radii=traj.zeros, peaks=peaks,
                      layer_deltas=deltas, energy=radial_energy(traj),
                      scan=scan, trajectory=traj)


def worker_count() -> int:
    """Worker cap from BTL_THREADS (default 1: fully sequential)."""
    try:
        return max(1, int(os.environ.get("BTL_THREADS", "1")))
    except ValueError:
        return 1


def exponent_regression(n, layers, eps_grid, rtol=1e-11) -> dict:
    """Shoot a (layers-1)-node solution per epsilon and regress each layer
    scale against the predicted exponent ladder.

    Layer 1 is the widest (outermost) scale, so recovered deltas are matched
    to theta_i in decreasing-delta order.  Independent epsilon points run on
    up to BTL_THREADS workers; results merge by index.
    """
    if layers < 1:
        raise ValueError("layers must be >= 1")
    eps_grid = sorted(float(e) for e in eps_grid)
    if len(eps_grid) < 2:
        raise ValueError("need at least 2 epsilon values")
    thetas = theta_exponents(n, layers)
    results = {}
    missing = []

    def solve_one(eps):
        return find_k_node_solution(RadialProblem(n=n, eps=eps),
                                    layers - 1, rtol=rtol)

    nw = min(worker_count(), len(eps_grid))
    if nw > 1:
        from concurrent.futures import ThreadPoolExecutor
        with ThreadPoolExecutor(max_workers=nw) as pool:
            futures = {eps: pool.submit(solve_one, eps) for eps in eps_grid}
        for eps in eps_grid:
            try:
                results[eps] = futures[eps].result()
            except RuntimeError as exc:
                missing.append((eps, str(exc)))
    else:
        for eps in eps_grid:
            try:
                results[eps] = solve_one(eps)
            except RuntimeError as exc:
                missing.append((eps, str(exc)))
    if len(results) < 2:
        raise RuntimeError(f"not enough solutions for a fit; missing={missing}")

    table = []
    used = sorted(results)
    logs_eps = np.log(used)
    for i in range(layers):
        # deltas sorted decreasing = increasing concentration = layer order
        ds = np.array([np.sort(results[e].layer_deltas)[::-1][i]
                       for e in used])
        slope = float(np.polyfit(logs_eps, np.log(ds), 1)[0])
        d_hat = ds * np.asarray(used) ** (-thetas[i])
        spread = float((d_hat.max() - d_hat.min()) / d_hat.mean())
        table.append({"layer": i + 1, "theta_hat": slope,
                      "theta": float(thetas[i]),
                      "gap": abs(slope - float(thetas[i])),
                      "d_hat": d_hat.tolist(), "d_hat_spread": spread})
    return {"n": n, "layers": layers, "eps_used": used,
            "missing": missing, "per_layer": table,
            "caveat": CROSS_CHECK_CAVEAT,
            "results": {e: results[e] for e in used}}
