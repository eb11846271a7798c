"""Single command-line entry point (``btl``).

Subcommands: constants, project, critical-point, expansion, lemma-check,
shoot, report.  Reports are deterministic for a fixed config and seed (no
timestamps, sorted keys, shortest-roundtrip floats) and embed the tool
version, the config echo, and per-value provenance.  Exit codes: 0 ok,
1 malformed config, 2 non-converged quadrature, 3 failed --assert.
"""

import argparse
import json
import math
import os
import sys
import tempfile

import numpy as np

from . import __version__, kernels
from .bubbles import Bubble, theta_exponents
from .constants import dim_constants
from .expansion import TowerSetup, critical_setup, expansion_fit, \
    lemma32_check, lemma33_check
from .green import PerforatedBall, affine_weight, constant_weight, \
    product_weight, project_bubble
from .quadrature import QuadratureSpec
from .reduced import ReducedConfig, closed_form_t, d_from_t, \
    maximize_psi_hat, nondegeneracy_check, sigma0
from .shooting import RadialProblem, exponent_regression, find_k_node_solution

EXIT_OK, EXIT_CONFIG, EXIT_NONCONVERGED, EXIT_ASSERT = 0, 1, 2, 3


class ConfigError(Exception):
    pass


def _vector(text):
    try:
        return np.array([float(t) for t in text.split(",")])
    except ValueError as exc:
        raise ConfigError(f"bad vector {text!r}: {exc}") from None


def _floats(text):
    try:
        return [float(t) for t in text.split(",")]
    except ValueError as exc:
        raise ConfigError(f"bad list {text!r}: {exc}") from None


def parse_weight(text, n):
    """constant[:c] | affine:g1,...,gn[:c] | product:l1[,l2...]"""
    kind, _, rest = text.partition(":")
    if kind == "constant":
        return constant_weight(float(rest) if rest else 1.0)
    if kind == "affine":
        gpart, _, cpart = rest.partition(":")
        g = _vector(gpart)
        if g.shape != (n,):
            raise ConfigError(f"affine weight needs {n} gradient entries")
        return affine_weight(g, float(cpart) if cpart else 1.0)
    if kind == "product":
        ls = _floats(rest)
        if not 1 <= len(ls) <= n:
            raise ConfigError("product weight needs 1..n exponents")
        return product_weight(ls)
    raise ConfigError(f"unknown weight spec {text!r}")


def _jsonify(obj):
    if isinstance(obj, dict):
        return {str(k): _jsonify(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_jsonify(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _jsonify(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        v = float(obj)
        return None if math.isnan(v) else v
    if isinstance(obj, (np.integer,)):
        return int(obj)
    if isinstance(obj, (np.bool_,)):
        return bool(obj)
    return obj


def atomic_write(path, text):
    d = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=d, prefix=".btl-")
    try:
        with os.fdopen(fd, "w") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def emit(text, out):
    if out:
        atomic_write(out, text if text.endswith("\n") else text + "\n")
    else:
        sys.stdout.write(text if text.endswith("\n") else text + "\n")


def make_report(command, config, results, provenance):
    return {"schema": 1, "tool": "btl", "version": __version__,
            "command": command, "config": _jsonify(config),
            "results": _jsonify(results), "provenance": provenance}


def dump_report(report, out):
    emit(json.dumps(_jsonify(report), sort_keys=True, indent=2), out)


def _quad_spec(args):
    kw = {}
    if getattr(args, "rtol", None) is not None:
        kw["rtol"] = args.rtol
    if getattr(args, "seed", None) is not None:
        kw["seed"] = args.seed
    return QuadratureSpec(**kw)


def cmd_constants(args):
    dc = dim_constants(args.n)
    data = dc.as_dict()
    if args.json:
        emit(json.dumps(_jsonify(data), sort_keys=False, indent=2), args.out)
    else:
        lines = [f"{k} = {v!r}" for k, v in data.items()]
        emit("\n".join(lines), args.out)
    return EXIT_OK


def cmd_project(args):
    n = args.n
    center = _vector(args.center) if args.center else np.zeros(n)
    xi0 = _vector(args.xi0) if args.xi0 else center.copy()
    xi = _vector(args.xi) if args.xi else xi0.copy()
    dom = PerforatedBall(n, center, args.radius, xi0, args.eps)
    b = Bubble(n, args.delta, xi, args.sign)
    raw = np.loadtxt(args.grid_file, delimiter=",", ndmin=2, comments="#",
                     skiprows=1 if _has_header(args.grid_file) else 0)
    if raw.shape[1] != n:
        raise ConfigError(f"grid file has {raw.shape[1]} columns, need {n}")
    X = np.ascontiguousarray(raw, dtype=float)
    from .bubbles import bubble_value
    u = bubble_value(b, X)
    pu = project_bubble(dom, b, X)
    header = ",".join([f"x{i+1}" for i in range(n)] + ["U", "PU", "defect"])
    rows = [header]
    for row, uu, pp in zip(X, u, pu):
        rows.append(",".join([repr(float(t)) for t in row]
                             + [repr(float(uu)), repr(float(pp)),
                                repr(float(uu - pp))]))
    emit("\n".join(rows), args.out)
    return EXIT_OK


def _has_header(path):
    with open(path) as fh:
        first = fh.readline().strip()
    if not first:
        return False
    head = first.split(",")[0].strip()
    try:
        float(head)
        return False
    except ValueError:
        return True


def cmd_critical_point(args):
    cfg = ReducedConfig(n=args.n, k=args.k, a0=args.a0,
                        grad_a0=_vector(args.grad_a))
    rep = nondegeneracy_check(cfg)
    asc = maximize_psi_hat(cfg, n_starts=args.starts, seed=args.seed or 0)
    d = d_from_t(rep.t)
    results = {"sigma0": rep.sigma, "t": rep.t, "d": d,
               "psi_value": rep.value, "grad_norm": rep.grad_norm,
               "rel_grad_norm": rep.rel_grad_norm,
               "hessian_det": rep.det, "min_abs_eig": rep.min_abs_eig,
               "schur_det": rep.schur_det,
               "reduced_det": None if rep.reduced_det is None
               else float(rep.reduced_det),
               "reduced_C": rep.reduced_C,
               "ascent_max_distance": asc["max_start_distance"]}
    report = make_report("critical-point", vars(args) | {"func": None},
                         results,
                         {"sigma0": "closed-form", "t": "closed-form",
                          "psi_value": "closed-form",
                          "hessian_det": "finite-difference",
                          "ascent_max_distance": "numerical-ascent"})
    if args.json or args.out:
        dump_report(report, args.out)
    else:
        emit(json.dumps(_jsonify(results), sort_keys=True, indent=2), None)
    if args.check:
        ok = (rep.rel_grad_norm <= 1e-8 and rep.det != 0
              and rep.min_abs_eig > 0
              and asc["max_start_distance"] <= 1e-6)
        if not ok:
            return EXIT_ASSERT
    return EXIT_OK


def _setup_from_args(args):
    n, k = args.n, args.k
    center = _vector(args.center) if args.center else np.zeros(n)
    xi0 = _vector(args.xi0) if args.xi0 else center.copy()
    weight = parse_weight(args.weight, n)
    d = _vector(args.d) if getattr(args, "d", None) else None
    sigma1 = _vector(args.sigma1) if getattr(args, "sigma1", None) else None
    _, g0 = weight.a0_grad0(xi0)
    if d is None and sigma1 is None and np.linalg.norm(g0) > 0:
        return critical_setup(n, k, center, args.radius, xi0, weight,
                              sign_convention=args.sign_convention)
    # no critical point without a weight gradient: explicit or unit rates
    sigma = np.zeros((k, n))
    if sigma1 is not None:
        if sigma1.shape != (n,):
            raise ConfigError(f"--sigma1 needs {n} entries")
        sigma[0] = sigma1
    if d is None:
        d = np.ones(k)
    if d.shape != (k,):
        raise ConfigError(f"--d needs {k} entries")
    return TowerSetup(n=n, k=k, center=center, radius=args.radius, xi0=xi0,
                      weight=weight, d=d, sigma=sigma,
                      sign_convention=args.sign_convention)


def cmd_expansion(args):
    setup = _setup_from_args(args)
    spec = _quad_spec(args)
    eps_grid = _floats(args.eps_grid)
    rep = expansion_fit(setup, eps_grid, spec)
    results = rep.as_dict()
    results["kernel_backend"] = kernels.BACKEND
    report = make_report("expansion", _echo_args(args), results, {
        "j_values": "quadrature", "theta_hat": "fit", "coef_hat": "fit",
        "psi_pred": "closed-form", "theta": "closed-form"})
    dump_report(report, args.out)
    if not all(rep.converged):
        return EXIT_NONCONVERGED
    if args.check:
        if not (abs(rep.theta_hat - rep.theta) <= 0.1
                and abs(rep.ratio_finest - 1.0) <= 0.15):
            return EXIT_ASSERT
    return EXIT_OK


def cmd_lemma_check(args):
    setup = _setup_from_args(args)
    spec = _quad_spec(args)
    eps_grid = _floats(args.eps_grid)
    if args.item == "33":
        rep = lemma33_check(setup, eps_grid, spec, i=args.i or 1,
                            l=args.l or 1, j=args.j or 1)
        prov = {"rows": "quadrature", "slope_j0": "fit", "slope_ul": "fit"}
    else:
        rep = lemma32_check(args.item, setup, eps_grid, spec,
                            l=args.l, i=args.i)
        prov = {"rows": "quadrature"}
    report = make_report("lemma-check", _echo_args(args), rep, prov)
    dump_report(report, args.out)
    if args.check:
        if args.item == "ii":
            finest = rep["rows"][0]
            if not abs(finest["ratio"] - 1.0) <= 0.10:
                return EXIT_ASSERT
        if args.item == "33":
            finest = rep["rows"][0]
            if not abs(finest["abs_ratio"] - 1.0) <= 0.15:
                return EXIT_ASSERT
    return EXIT_OK


def cmd_shoot(args):
    if not args.eps and not args.eps_grid:
        raise ConfigError("shoot needs --eps or --eps-grid")
    eps_list = _floats(args.eps_grid) if args.eps_grid else [args.eps]
    layers = args.k
    nodes = layers - 1
    rows = []
    summary = {"n": args.n, "layers": layers}
    if len(eps_list) >= 2:
        rep = exponent_regression(args.n, layers, eps_list, rtol=args.ode_rtol)
        shots = rep.pop("results")
        summary.update({k: v for k, v in rep.items()})
        for eps in rep["eps_used"]:
            rows.append(shots[eps])
    else:
        shot = find_k_node_solution(RadialProblem(n=args.n, eps=eps_list[0]),
                                    nodes, rtol=args.ode_rtol)
        rows.append(shot)
        summary["caveat"] = shot.as_dict()["caveat"]
    header = (["eps", "s", "residual", "energy"]
              + [f"node_r{i+1}" for i in range(nodes)]
              + [f"layer_delta{i+1}" for i in range(layers)])
    lines = [",".join(header)]
    for shot in rows:
        deltas = np.sort(shot.layer_deltas)[::-1]
        vals = ([shot.prob.eps, shot.s, shot.residual, shot.energy]
                + list(shot.node_radii) + list(deltas))
        lines.append(",".join(repr(float(v)) for v in vals))
    lines.append("# summary: " + json.dumps(_jsonify(summary),
                                            sort_keys=True))
    emit("\n".join(lines), args.out)
    if args.check and len(eps_list) >= 2:
        layer1 = summary["per_layer"][0]
        if not layer1["gap"] <= 0.15:
            return EXIT_ASSERT
    return EXIT_OK


def cmd_report(args):
    with open(args.infile) as fh:
        rep = json.load(fh)
    if rep.get("schema") != 1:
        raise ConfigError(f"unsupported report schema: {rep.get('schema')}")
    lines = [f"tool: {rep.get('tool')} {rep.get('version')}",
             f"command: {rep.get('command')}"]
    res = rep.get("results", {})
    for key in sorted(res):
        val = res[key]
        if isinstance(val, (list, dict)):
            lines.append(f"{key}: {json.dumps(val)[:120]}")
        else:
            lines.append(f"{key}: {val}")
    emit("\n".join(lines), args.out)
    return EXIT_OK


def _echo_args(args):
    # the output path is where the report lands, not part of what it means
    cfg = {k: v for k, v in vars(args).items() if k not in ("func", "out")}
    cfg["kernel_backend"] = kernels.BACKEND
    return cfg


def build_parser():
    ap = argparse.ArgumentParser(
        prog="btl",
        description="bubble-tower numerics: constants, projections, reduced-"
                    "energy critical points, energy expansions, shooting")
    ap.add_argument("--version", action="version", version=__version__)
    sub = ap.add_subparsers(dest="command", required=True)

    p = sub.add_parser("constants", help="dimensional constants")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.set_defaults(func=cmd_constants)

    p = sub.add_parser("project", help="projection of one bubble on a grid")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--radius", "--R", type=float, default=1.0)
    p.add_argument("--center")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--delta", type=float, required=True)
    p.add_argument("--xi0")
    p.add_argument("--xi")
    p.add_argument("--sign", type=int, default=1)
    p.add_argument("--grid-file", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_project)

    p = sub.add_parser("critical-point", help="closed-form critical point "
                                              "and nondegeneracy evidence")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True)
    p.add_argument("--a0", type=float, default=1.0)
    p.add_argument("--grad-a", required=True)
    p.add_argument("--starts", type=int, default=20)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--json", action="store_true")
    p.add_argument("--out")
    p.add_argument("--assert", dest="check", action="store_true")
    p.set_defaults(func=cmd_critical_point)

    def tower_args(p):
        p.add_argument("--n", type=int, required=True)
        p.add_argument("--k", type=int, required=True)
        p.add_argument("--weight", default="constant")
        p.add_argument("--center")
        p.add_argument("--xi0")
        p.add_argument("--radius", type=float, default=1.0)
        p.add_argument("--sign-convention", type=int, default=1,
                       choices=(-1, 1))
        p.add_argument("--d", help="explicit rate factors (default: "
                                   "closed-form critical point)")
        p.add_argument("--sigma1", help="explicit first center offset")
        p.add_argument("--eps-grid", required=True)
        p.add_argument("--rtol", type=float)
        p.add_argument("--seed", type=int)
        p.add_argument("--out")
        p.add_argument("--assert", dest="check", action="store_true")

    p = sub.add_parser("expansion", help="energy expansion exponent/"
                                         "coefficient fit")
    tower_args(p)
    p.set_defaults(func=cmd_expansion)

    p = sub.add_parser("lemma-check", help="interaction-integral checks")
    tower_args(p)
    p.add_argument("--item", required=True,
                   choices=["i", "ii", "iii", "iv", "v", "vi", "33"])
    p.add_argument("--l", type=int)
    p.add_argument("--i", type=int)
    p.add_argument("--j", type=int)
    p.set_defaults(func=cmd_lemma_check)

    p = sub.add_parser("shoot", help="radial shooting on the annulus")
    p.add_argument("--n", type=int, required=True)
    p.add_argument("--k", type=int, required=True,
                   help="number of layers (bubbles); interior nodes = k-1")
    p.add_argument("--eps", type=float)
    p.add_argument("--eps-grid")
    p.add_argument("--ode-rtol", type=float, default=1e-11)
    p.add_argument("--out")
    p.add_argument("--assert", dest="check", action="store_true")
    p.set_defaults(func=cmd_shoot)

    p = sub.add_parser("report", help="summarize a JSON report")
    p.add_argument("--in", dest="infile", required=True)
    p.add_argument("--out")
    p.set_defaults(func=cmd_report)
    return ap


def main(argv=None):
    ap = build_parser()
    try:
        args = ap.parse_args(argv)
    except SystemExit as exc:
        # argparse exits 2 on usage errors; config errors are exit 1 here
        if exc.code not in (0, None):
            return EXIT_CONFIG
        return 0
    try:
        return args.func(args)
    except (ConfigError, OSError, ValueError) as exc:
        print(f"btl: error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
