"""Energy of tower ansaetze and desk-scale checks of its leading expansion.

The energy on the perforated ball is

    I(u) = 1/2 int a |grad u|^2 - 1/(p+1) int a |u|^(p+1),  p+1 = 2n/(n-2),

evaluated on V = sum_i sign_i PU_i with the main-term projections; the
prediction under test is J(eps) ~ c1 k a(xi0) + Psi(d, sigma) eps^theta
with theta = (n-2)/((n-1) + 2(k-1)).

The lemma-level checks compute single interaction integrals over the tower
annuli and compare against their predicted leading terms or decay orders.
Where the source formulas admit two candidate index forms (the i = l-1
interaction, the gradient-coupling sign), both candidates are reported and
the harness states which one the measured integral matches.
"""

import math
from dataclasses import dataclass

import numpy as np

from .bubbles import TowerConfig, annuli, rates, theta_exponents
from .constants import dim_constants
from .green import (PerforatedBall, WeightField, project_bubble_grad,
                    project_psi0, project_psij, projection_coefficients)
from . import kernels
from .quadrature import (IntegralResult, QuadratureSpec, integrate_annulus_index,
                         integrate_perforated)
from .reduced import ReducedConfig, closed_form_t, d_from_t, psi, sigma0


@dataclass(frozen=True)
class FieldOracle:
    """A scalar field with a gradient oracle, both over (M, n) batches."""
    value: object
    grad: object


def tower_params(cfg: TowerConfig, dom: PerforatedBall):
    bs = rates(cfg)
    deltas = np.ascontiguousarray([b.delta for b in bs])
    xis = np.ascontiguousarray(np.stack([b.xi for b in bs]))
    signs = np.ascontiguousarray([float(b.sign) for b in bs])
    coefs = [projection_coefficients(dom, b) for b in bs]
    hcoefs = np.ascontiguousarray([c[0] for c in coefs])
    holecoefs = np.ascontiguousarray([c[1] for c in coefs])
    return deltas, xis, signs, hcoefs, holecoefs


def tower_field(cfg: TowerConfig, dom: PerforatedBall) -> FieldOracle:
    """V and grad V assembled analytically from the projection main terms."""
    deltas, xis, signs, hcoefs, holecoefs = tower_params(cfg, dom)
    args = (cfg.n, dom.center, dom.radius, dom.xi0,
            deltas, xis, signs, hcoefs, holecoefs)

    def value(X):
        return kernels.tower_val(*args, np.ascontiguousarray(X, dtype=float))

    def grad(X):
        return kernels.tower_val_grad(*args,
                                      np.ascontiguousarray(X, dtype=float))[1]

    return FieldOracle(value=value, grad=grad)


def default_rho(dom: PerforatedBall) -> float:
    return 0.5 * dom.boundary_gap()


def energy_functional(field: FieldOracle, dom: PerforatedBall,
                      weight: WeightField, ann, spec: QuadratureSpec
                      ) -> IntegralResult:
    n = dom.n
    pp1 = 2.0 * n / (n - 2.0)

    def integrand(X):
        a = weight.value(X)
        g = field.grad(X)
        v = field.value(X)
        return a * (0.5 * (g ** 2).sum(axis=1) - np.abs(v) ** pp1 / pp1)

    return integrate_perforated(integrand, dom, ann, spec)


def tower_energy(cfg: TowerConfig, dom: PerforatedBall, weight: WeightField,
                 spec: QuadratureSpec, rho=None) -> IntegralResult:
    ann = annuli(cfg, rho if rho is not None else default_rho(dom))
    return energy_functional(tower_field(cfg, dom), dom, weight, ann, spec)


@dataclass(frozen=True)
class TowerSetup:
    """A tower family over a shrinking hole: everything but epsilon."""
    n: int
    k: int
    center: np.ndarray
    radius: float
    xi0: np.ndarray
    weight: WeightField
    d: np.ndarray
    sigma: np.ndarray
    sign_convention: int = 1

    def domain(self, eps) -> PerforatedBall:
        return PerforatedBall(self.n, self.center, self.radius, self.xi0, eps)

    def config(self, eps) -> TowerConfig:
        return TowerConfig(n=self.n, k=self.k, epsilon=eps, d=self.d,
                           sigma=self.sigma, xi0=self.xi0,
                           sign_convention=self.sign_convention)

    def reduced(self) -> ReducedConfig:
        a0, g0 = self.weight.a0_grad0(self.xi0)
        return ReducedConfig(n=self.n, k=self.k, a0=a0, grad_a0=g0)


def critical_setup(n, k, center, radius, xi0, weight,
                   sign_convention=1) -> TowerSetup:
    """Tower setup with (d, sigma) at the closed-form critical point of the
    reduced energy for this weight."""
    a0, g0 = weight.a0_grad0(np.asarray(xi0, dtype=float))
    red = ReducedConfig(n=n, k=k, a0=a0, grad_a0=g0)
    s0 = sigma0(red)
    d0 = d_from_t(closed_form_t(red, s0))
    return TowerSetup(n=n, k=k, center=np.asarray(center, dtype=float),
                      radius=radius, xi0=np.asarray(xi0, dtype=float),
                      weight=weight, d=d0, sigma=s0,
                      sign_convention=sign_convention)


@dataclass(frozen=True)
class ExpansionReport:
    eps_grid: tuple
    j_values: tuple
    j_errors: tuple
    converged: tuple
    c1k_a0: float
    signal: tuple           # J - c1 k a0 per grid point
    valid: tuple            # signal > 0 and converged
    theta: float
    theta_hat: float
    coef_hat: float         # exp(intercept) of the log-log fit
    psi_pred: float
    ratio_finest: float     # signal / (psi_pred eps^theta) at smallest eps
    notes: str = ""

    def as_dict(self):
        return {k: getattr(self, k) if not isinstance(getattr(self, k), tuple)
                else list(getattr(self, k)) for k in self.__dataclass_fields__}


def expansion_fit(setup: TowerSetup, eps_grid, spec: QuadratureSpec
                  ) -> ExpansionReport:
    """Fit log(J - c1 k a0) against log eps and compare slope/coefficient
    with the predicted exponent and Psi(d, sigma)."""
    eps_grid = sorted(float(e) for e in eps_grid)
    if len(eps_grid) < 3:
        raise ValueError("need at least 3 epsilon grid points")
    dc = dim_constants(setup.n)
    red = setup.reduced()
    a0 = red.a0
    base = dc.c1 * setup.k * a0
    psi_pred = psi(red, setup.d, setup.sigma)
    theta = float(theta_exponents(setup.n, setup.k)[0])

    js, errs, conv = [], [], []
    for eps in eps_grid:
        res = tower_energy(setup.config(eps), setup.domain(eps),
                           setup.weight, spec)
        js.append(res.value)
        errs.append(res.error)
        conv.append(res.converged)
    signal = [j - base for j in js]
    valid = [s > 0 and c for s, c in zip(signal, conv)]
    notes = ""
    if not all(valid):
        notes = "some grid points dropped (nonpositive signal or quadrature flag)"
    xs = np.log([e for e, v in zip(eps_grid, valid) if v])
    ys = np.log([s for s, v in zip(signal, valid) if v])
    if len(xs) < 2:
        raise ValueError("fewer than 2 usable grid points for the fit")
    slope, intercept = np.polyfit(xs, ys, 1)
    i_fin = next(i for i, v in enumerate(valid) if v)
    ratio_finest = signal[i_fin] / (psi_pred * eps_grid[i_fin] ** theta)
    return ExpansionReport(
        eps_grid=tuple(eps_grid), j_values=tuple(js), j_errors=tuple(errs),
        converged=tuple(conv), c1k_a0=base, signal=tuple(signal),
        valid=tuple(valid), theta=theta, theta_hat=float(slope),
        coef_hat=float(math.exp(intercept)), psi_pred=psi_pred,
        ratio_finest=float(ratio_finest), notes=notes)


def _loglog_slope(eps_grid, values):
    pairs = [(e, v) for e, v in zip(eps_grid, values) if v > 0]
    if len(pairs) < 2:
        return float("nan")
    xs = np.log([p[0] for p in pairs])
    ys = np.log([p[1] for p in pairs])
    return float(np.polyfit(xs, ys, 1)[0])


def _pu_minus_u_fn(dom, b):
    """Main-term projection defect PU - U of one (unsigned) bubble."""
    hcoef, holecoef = projection_coefficients(dom, b)
    n = b.n

    def fn(X):
        X = np.ascontiguousarray(X, dtype=float)
        r0sq = ((X - dom.xi0) ** 2).sum(axis=1)
        return -(hcoef * kernels.h_val(n, dom.radius, b.xi - dom.center,
                                       X - dom.center)
                 + holecoef * r0sq ** ((2.0 - n) / 2.0))

    return fn


def _u_fn(b):
    return lambda X: kernels.u_val(b.n, b.delta, b.xi,
                                   np.ascontiguousarray(X, dtype=float))


def lemma32_check(item: str, setup: TowerSetup, eps_grid,
                  spec: QuadratureSpec, l=None, i=None) -> dict:
    """Measure one interaction integral per epsilon and compare with its
    predicted leading term ((i)-(iii)) or decay order ((iv)-(vi))."""
    item = item.lower()
    if item not in ("i", "ii", "iii", "iv", "v", "vi"):
        raise ValueError(f"unknown item {item!r}")
    n, k = setup.n, setup.k
    dc = dim_constants(n)
    a0, g0 = setup.weight.a0_grad0(setup.xi0)
    theta = float(theta_exponents(n, k)[0])
    D = (n - 1.0) + 2.0 * (k - 1.0)
    p = (n + 2.0) / (n - 2.0)
    nn = (n * (n - 2.0)) ** (n / 2.0)
    l = l if l is not None else (1 if item in ("i",) else k)
    if item in ("iii", "iv", "v", "vi") and i is None:
        i = l + 1 if l < k else l - 1
    if item == "iii" and not (i == l + 1 or i == l - 1):
        raise ValueError("item iii compares neighbor indices i = l +- 1")

    rows = []
    for eps in sorted(float(e) for e in eps_grid):
        cfg = setup.config(eps)
        dom = setup.domain(eps)
        ann = annuli(cfg, default_rho(dom))
        bs = [b.unsigned() for b in rates(cfg)]
        ul = bs[l - 1]
        s2 = (setup.sigma ** 2).sum(axis=1)
        row = {"eps": eps}

        if item == "i":
            f = lambda X: (setup.weight.value(np.asarray(X))
                           * _u_fn(ul)(X) ** (p + 1.0))
            res = integrate_annulus_index(f, dom, ann, spec, l)
            corr = float(g0 @ setup.sigma[0]) * setup.d[0] * eps ** theta \
                if l == 1 else 0.0
            pred = nn * (a0 + corr) * dc.bubble_mass
            row.update(measured=res.value, predicted=pred,
                       ratio=res.value / pred,
                       base=nn * a0 * dc.bubble_mass,
                       correction_measured=res.value - nn * a0 * dc.bubble_mass,
                       correction_predicted=nn * corr * dc.bubble_mass,
                       error=res.error)

        elif item == "ii":
            diff = _pu_minus_u_fn(dom, ul)
            f = lambda X: _u_fn(ul)(X) ** p * diff(X)
            res = integrate_annulus_index(f, dom, ann, spec, l)
            pred = 0.0
            if l == k:
                pred = (-nn * dc.ball_volume / (1.0 + s2[k - 1]) ** (n - 2.0)
                        / setup.d[k - 1] ** (n - 2.0) * eps ** theta)
            row.update(measured=res.value, predicted=pred,
                       ratio=res.value / pred if pred else float("nan"),
                       error=res.error)

        elif item == "iii":
            ui = bs[i - 1]
            f = lambda X: _u_fn(ul)(X) ** p * _u_fn(ui)(X)
            res = integrate_annulus_index(f, dom, ann, spec, l)
            if i == l + 1:
                shape = (1.0 + s2[l - 1]) ** (-(n - 2.0) / 2.0)
                rate = (setup.d[l] / setup.d[l - 1]) ** ((n - 2.0) / 2.0)
                pred_a = pred_b = nn * dc.ball_volume * shape * rate * eps ** theta
            else:  # i = l - 1: displayed form vs corrected-rate form
                shape = (1.0 + s2[l - 2]) ** (-(n - 2.0) / 2.0)
                rate_disp = ((setup.d[l] / setup.d[l - 1]) ** ((n - 2.0) / 2.0)
                             if l < k else float("nan"))
                rate_alt = (setup.d[l - 1] / setup.d[l - 2]) ** ((n - 2.0) / 2.0)
                pred_a = nn * dc.ball_volume * shape * rate_disp * eps ** theta
                pred_b = nn * dc.ball_volume * shape * rate_alt * eps ** theta
            row.update(measured=res.value, predicted_displayed=pred_a,
                       predicted_alternate=pred_b,
                       ratio_displayed=res.value / pred_a,
                       ratio_alternate=res.value / pred_b, error=res.error)

        elif item == "iv":
            diff = _pu_minus_u_fn(dom, ul)
            f1 = lambda X: np.abs(diff(X)) ** (p + 1.0)
            f2 = lambda X: _u_fn(bs[i - 1])(X) ** (p + 1.0)
            r1 = integrate_annulus_index(f1, dom, ann, spec, l)
            r2 = integrate_annulus_index(f2, dom, ann, spec, l)
            row.update(defect_power=r1.value, other_power=r2.value,
                       error=math.hypot(r1.error, r2.error))

        elif item == "v":
            ui = bs[i - 1]
            a_of = setup.weight.value
            f1 = lambda X: a_of(np.asarray(X)) * _u_fn(ul)(X) ** (p + 1.0)
            r1 = integrate_perforated(f1, dom, ann, spec, skip_annulus=l)
            diff_i = _pu_minus_u_fn(dom, ui)
            f2 = lambda X: a_of(np.asarray(X)) * _u_fn(ul)(X) ** p * diff_i(X)
            r2 = integrate_perforated(f2, dom, ann, spec)
            f3 = lambda X: a_of(np.asarray(X)) * _u_fn(ul)(X) ** p * _u_fn(ui)(X)
            r3 = integrate_perforated(f3, dom, ann, spec, skip_annulus=l)
            row.update(outside_power=r1.value, cross_defect=abs(r2.value),
                       outside_cross=r3.value)

        elif item == "vi":
            ui = bs[i - 1]
            a_of = setup.weight.value
            da = lambda X: a_of(np.asarray(X)) - a0
            diff = _pu_minus_u_fn(dom, ul)
            f1 = lambda X: da(X) * _u_fn(ul)(X) ** p * diff(X)
            f2 = lambda X: da(X) * _u_fn(ul)(X) ** p * _u_fn(ui)(X)
            r1 = integrate_perforated(f1, dom, ann, spec)
            r2 = integrate_perforated(f2, dom, ann, spec)
            row.update(weighted_defect=abs(r1.value),
                       weighted_cross=abs(r2.value))

        rows.append(row)

    report = {"item": item, "l": l, "i": i, "theta": theta, "rows": rows}
    eps_list = [r["eps"] for r in rows]
    if item in ("i", "ii"):
        report["ratios"] = [r["ratio"] for r in rows]
    if item == "iii":
        ra = [abs(r["ratio_displayed"] - 1.0) for r in rows]
        rb = [abs(r["ratio_alternate"] - 1.0) for r in rows]
        report["matching_form"] = ("displayed" if ra[0] <= rb[0]
                                   else "alternate (d_l/d_{l-1})")
    if item == "iv":
        report["slope_defect_power"] = _loglog_slope(
            eps_list, [r["defect_power"] for r in rows])
        report["slope_other_power"] = _loglog_slope(
            eps_list, [r["other_power"] for r in rows])
        report["required_order"] = n / D
    if item == "v":
        report["slopes"] = {
            "outside_power": _loglog_slope(eps_list, [abs(r["outside_power"]) for r in rows]),
            "cross_defect": _loglog_slope(eps_list, [r["cross_defect"] for r in rows]),
            "outside_cross": _loglog_slope(eps_list, [abs(r["outside_cross"]) for r in rows]),
        }
    if item == "vi":
        report["slopes"] = {
            "weighted_defect": _loglog_slope(eps_list, [r["weighted_defect"] for r in rows]),
            "weighted_cross": _loglog_slope(eps_list, [r["weighted_cross"] for r in rows]),
        }
    return report


def lemma33_check(setup: TowerSetup, eps_grid, spec: QuadratureSpec,
                  i=1, l=1, j=1) -> dict:
    """Gradient-coupling integrals int (grad a . grad PU_i) (eps^theta_l
    P psi_l^j) and int (grad a . grad PU_i) P U_l over Omega_eps.

    For (i, l) = (1, 1) and j >= 1 the leading size is |c2 da/dx_j(xi0)|
    times eps^theta; the sign convention of the source display is reported
    against the measured sign rather than assumed.  The j = 0 pairing and
    the PU_l pairing must decay strictly faster than eps^theta.
    """
    n, k = setup.n, setup.k
    dc = dim_constants(n)
    a0, g0 = setup.weight.a0_grad0(setup.xi0)
    thetas = theta_exponents(n, k)
    theta = float(thetas[0])

    rows = []
    for eps in sorted(float(e) for e in eps_grid):
        cfg = setup.config(eps)
        dom = setup.domain(eps)
        ann = annuli(cfg, default_rho(dom))
        bs = [b.unsigned() for b in rates(cfg)]
        bi, bl = bs[i - 1], bs[l - 1]
        scale_l = eps ** float(thetas[l - 1])

        def gradcouple(pair_fn):
            def f(X):
                X = np.ascontiguousarray(X, dtype=float)
                ga = setup.weight.gradient(X)
                gu = project_bubble_grad(dom, bi, X, warn=False)
                return (ga * gu).sum(axis=1) * pair_fn(X)
            return integrate_perforated(f, dom, ann, spec)

        r_j = gradcouple(lambda X: scale_l * project_psij(dom, bl, X, j,
                                                          warn=False))
        r_0 = gradcouple(lambda X: scale_l * project_psi0(dom, bl, X,
                                                          warn=False))
        r_u = gradcouple(lambda X: np.asarray(
            kernels.u_val(n, bl.delta, bl.xi, X)
            + _pu_minus_u_fn(dom, bl)(X)))
        pred = dc.c2 * float(g0[j - 1]) * eps ** theta
        rows.append({"eps": eps, "measured_j": r_j.value,
                     "predicted_displayed": pred,
                     "ratio": r_j.value / pred if pred else float("nan"),
                     "abs_ratio": abs(r_j.value / pred) if pred else float("nan"),
                     "measured_j0": r_0.value, "error_j0": r_0.error,
                     "measured_ul": r_u.value, "error_ul": r_u.error,
                     "error": r_j.error})

    def noisy_slope(vkey, ekey):
        # a value indistinguishable from quadrature noise carries no decay
        # information (happens when the integral is exactly zero, e.g. the
        # PU_l pairing under an affine weight); the floor is relative to the
        # leading j-coupling at the same epsilon
        pts = [(r["eps"], abs(r[vkey])) for r in rows
               if abs(r[vkey]) > max(10.0 * r[ekey],
                                     1e-4 * abs(r["measured_j"]))]
        if len(pts) < 2:
            return None
        return _loglog_slope([p[0] for p in pts], [p[1] for p in pts])

    eps_list = [r["eps"] for r in rows]
    report = {"i": i, "l": l, "j": j, "theta": theta, "rows": rows,
              "slope_j0": noisy_slope("measured_j0", "error_j0"),
              "slope_ul": noisy_slope("measured_ul", "error_ul")}
    if rows and rows[0]["predicted_displayed"]:
        report["measured_sign"] = float(np.sign(rows[0]["measured_j"]))
        report["sign_matches_displayed"] = bool(
            np.sign(rows[0]["measured_j"])
            == np.sign(rows[0]["predicted_displayed"]))
    return report
