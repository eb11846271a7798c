import math

import numpy as np
import pytest

from btl.bubbles import Bubble, bubble_value
from btl.constants import dim_constants
from btl.green import (Ball, PerforatedBall, RegimeWarning, affine_weight,
                       constant_weight, exact_dirichlet_projection,
                       green_ball, h_value, h_grad_x, h_grad_y,
                       product_weight, project_bubble, project_bubble_grad,
                       project_psi0, project_psij, projection_defect,
                       weight_min_on_ball)


def fd_laplacian(f, x, h):
    n = len(x)
    out = -2.0 * n * f(x)
    for j in range(n):
        e = np.zeros(n)
        e[j] = h
        out += f(x + e) + f(x - e)
    return out / (h * h)


BALL = Ball(4, np.zeros(4), 1.0)


def test_green_vanishes_on_boundary():
    rng = np.random.default_rng(0)
    y = np.array([0.2, -0.1, 0.3, 0.0])
    for _ in range(20):
        x = rng.standard_normal(4)
        x /= np.linalg.norm(x)
        G, H = green_ball(BALL, x, y)
        assert abs(G) < 1e-10


def test_green_symmetry():
    rng = np.random.default_rng(1)
    for _ in range(20):
        x = 0.9 * rng.random() * _unit(rng)
        y = 0.9 * rng.random() * _unit(rng)
        if np.linalg.norm(x - y) < 1e-3:
            continue
        Gxy, _ = green_ball(BALL, x, y)
        Gyx, _ = green_ball(BALL, y, x)
        assert abs(Gxy - Gyx) <= 1e-12 * abs(Gxy)


def _unit(rng):
    v = rng.standard_normal(4)
    return v / np.linalg.norm(v)


def test_green_centered_pole_value():
    # n=4, unit ball, y=0, |x|=1/2: G = gamma_4 (1/|x|^2 - 1) = 3/(4 pi^2)
    x = np.array([0.5, 0, 0, 0])
    G, H = green_ball(BALL, x, np.zeros(4))
    assert abs(H - 1.0) < 1e-14
    assert abs(G - 3.0 / (4.0 * math.pi ** 2)) < 1e-14


def test_green_errors():
    with pytest.raises(ValueError):
        green_ball(BALL, np.array([0.2, 0, 0, 0]), np.array([0.2, 0, 0, 0]))
    with pytest.raises(ValueError):
        green_ball(BALL, np.array([1.5, 0, 0, 0]), np.zeros(4))
    with pytest.raises(ValueError):
        green_ball(BALL, np.array([0.5, 0, 0, 0]), np.array([1.5, 0, 0, 0]))


def test_regular_part_harmonic():
    y = np.array([0.3, 0.1, -0.2, 0.05])
    rng = np.random.default_rng(2)
    pts = [0.6 * rng.random() * _unit(rng) for _ in range(10)]

    def resid(h):
        return np.linalg.norm([fd_laplacian(
            lambda z: h_value(BALL, z, y), x, h) for x in pts])

    order = math.log2(resid(2e-2) / resid(1e-2))
    assert order > 1.8
    assert resid(1e-2) < 1e-2


def test_regular_part_gradients_match_fd():
    y = np.array([0.25, -0.15, 0.1, 0.0])
    x = np.array([0.4, 0.2, -0.3, 0.1])
    h = 1e-6
    gx = h_grad_x(BALL, x, y)
    gy = h_grad_y(BALL, x, y)
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fdx = (h_value(BALL, x + e, y) - h_value(BALL, x - e, y)) / (2 * h)
        fdy = (h_value(BALL, x, y + e) - h_value(BALL, x, y - e)) / (2 * h)
        assert abs(fdx - gx[j]) < 1e-8
        assert abs(fdy - gy[j]) < 1e-8


def test_perforated_ball_validation():
    with pytest.raises(ValueError):
        PerforatedBall(4, np.zeros(4), 1.0, np.array([0.9, 0, 0, 0]), 0.2)
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.array([0.2, 0, 0, 0]), 0.05)
    assert abs(dom.boundary_gap() - 0.8) < 1e-15


def test_projection_limits_to_unperforated():
    # eps -> 0 with delta fixed: PU -> U - alpha_n delta^((n-2)/2) H(., xi)
    delta = 0.3
    b = Bubble(4, delta, np.zeros(4))
    x = np.array([0.5, 0.1, 0.0, 0.0])
    dc = dim_constants(4)
    target = bubble_value(b, x) - dc.alpha_n * delta * h_value(BALL, x, b.xi)
    vals = []
    for eps in (1e-3, 1e-5, 1e-7):
        dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), eps)
        vals.append(project_bubble(dom, b, x, warn=False))
    gaps = [abs(v - target) for v in vals]
    assert gaps[2] < 1e-12
    assert gaps[0] > gaps[1] > gaps[2]


def test_projection_regime_warning():
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), 0.05)
    b = Bubble(4, 0.1, np.zeros(4))  # eps/delta = 0.5
    with pytest.warns(RegimeWarning):
        project_bubble(dom, b, np.array([0.5, 0, 0, 0]))


def test_projection_vanishes_near_hole_boundary():
    # main-term PU on |x - xi0| = eps is zero up to the dropped-term
    # envelope: at the hole boundary the eps^(n-2)|x-xi0|^(2-n) term is O(1),
    # so the residual scale is delta^((n-2)/2)
    delta, ratio = 0.1, 0.02
    eps = ratio * delta
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), eps)
    b = Bubble(4, delta, np.zeros(4))
    rng = np.random.default_rng(3)
    dc = dim_constants(4)
    envelope = 2.0 * dc.alpha_n * delta ** ((4 - 2) / 2.0)
    peak = project_bubble(dom, b, np.array([delta, 0, 0, 0.0]), warn=False)
    for _ in range(10):
        x = eps * _unit(rng)
        v = project_bubble(dom, b, x, warn=False)
        assert abs(v) <= envelope
        assert abs(v) < 0.05 * abs(peak)


def test_exact_dirichlet_oracle_matches_asymptotic():
    # acceptance-level: eps/delta = 0.05, n = 4, concentric
    delta = 0.1
    eps = 0.05 * delta
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), eps)
    b = Bubble(4, delta, np.zeros(4))
    vfn, gfn = exact_dirichlet_projection(dom, b)
    rng = np.random.default_rng(4)
    radii = np.geomspace(eps * 1.01, 0.99, 60)
    X = np.ascontiguousarray(radii[:, None] * np.stack([_unit(rng) for _ in radii]))
    exact = vfn(X)
    asym = project_bubble(dom, b, X, warn=False)
    sup = np.max(np.abs(exact))
    assert np.max(np.abs(exact - asym)) <= 0.05 * sup
    # oracle gradient consistent with FD of the oracle
    x0 = X[10]
    h = 1e-6
    g = gfn(x0)
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (vfn(x0 + e) - vfn(x0 - e)) / (2 * h)
        assert abs(fd - g[j]) <= 1e-8 * (1.0 + abs(g[j]))


def test_exact_oracle_requires_concentric():
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), 0.01)
    with pytest.raises(ValueError):
        exact_dirichlet_projection(dom, Bubble(4, 0.2, np.array([0.1, 0, 0, 0])))


def test_projection_bounds_pointwise():
    # 0 <= PU <= U up to small slack in the good regime
    delta = 0.1
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), 0.05 * delta)
    b = Bubble(4, delta, np.zeros(4))
    rng = np.random.default_rng(5)
    radii = np.geomspace(0.05 * delta * 1.05, 0.99, 200)
    X = np.ascontiguousarray(radii[:, None] * np.stack([_unit(rng) for _ in radii]))
    u = bubble_value(b, X)
    pu = project_bubble(dom, b, X, warn=False)
    slack = 1e-3 * b.peak_height()
    assert np.all(pu <= u + 1e-12)
    assert np.all(pu >= -slack)


def test_projection_grad_matches_fd():
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), 0.002)
    b = Bubble(4, 0.2, np.array([0.05, 0, 0, 0]))
    x = np.array([0.3, -0.2, 0.1, 0.4])
    g = project_bubble_grad(dom, b, x, warn=False)
    h = 1e-6
    for j in range(4):
        e = np.zeros(4)
        e[j] = h
        fd = (project_bubble(dom, b, x + e, warn=False)
              - project_bubble(dom, b, x - e, warn=False)) / (2 * h)
        assert abs(fd - g[j]) < 1e-7


def test_project_psi0_fd_consistency():
    # d/d(delta) of project_bubble tracks project_psi0 up to dropped terms
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), 1e-4)
    x = np.array([0.4, 0.1, 0.0, 0.2])
    delta, h = 0.1, 1e-6
    fd = (project_bubble(dom, Bubble(4, delta + h, np.zeros(4)), x, warn=False)
          - project_bubble(dom, Bubble(4, delta - h, np.zeros(4)), x,
                           warn=False)) / (2 * h)
    val = project_psi0(dom, Bubble(4, delta, np.zeros(4)), x, warn=False)
    # the two differ by d/d(delta) of the dropped O-terms; report-level bound
    assert abs(fd - val) < 5e-3 * max(1.0, abs(val))


def test_psij_hole_term_vanishes_at_center():
    # xi = xi0 kills the (xi - xi0)_j factor: P psi^j = psi^j - hcoef dH/dxi_j
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), 1e-3)
    b = Bubble(4, 0.1, np.zeros(4))
    x = np.array([0.3, 0.2, -0.1, 0.0])
    dc = dim_constants(4)
    from btl.bubbles import psij_value
    expected = psij_value(b, x, 2) - dc.alpha_n * b.delta * h_grad_y(BALL, x, b.xi)[1]
    assert abs(project_psij(dom, b, x, 2, warn=False) - expected) < 1e-14


def test_defect_report_far_point():
    # far from the hole the defect is dominated by the H-term
    delta = 0.05
    dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), delta ** 2)
    b = Bubble(4, delta, np.zeros(4))
    dc = dim_constants(4)
    x = np.array([[0.5, 0.0, 0.0, 0.0]])
    rep = projection_defect(dom, b, x)
    expected = dc.alpha_n * delta * h_value(BALL, x[0], b.xi)
    env = delta + dom.epsilon ** 2 / delta * 0.5 ** (-2)
    # H-term dominates far from the hole; the hole term adds ~1%
    assert abs(rep.ratio_u - expected / env) <= 0.05 * rep.ratio_u


def test_defect_ratios_bounded_under_delta_halving():
    rng = np.random.default_rng(6)
    dirs = np.stack([_unit(rng) for _ in range(50)])
    ratios = []
    for step in range(4):
        delta = 0.2 / 2 ** step
        dom = PerforatedBall(4, np.zeros(4), 1.0, np.zeros(4), delta ** 2)
        b = Bubble(4, delta, np.zeros(4))
        radii = np.geomspace(2 * delta ** 2, 0.9, 50)
        X = np.ascontiguousarray(radii[:, None] * dirs)
        rep = projection_defect(dom, b, X)
        ratios.append((rep.ratio_u, rep.ratio_psi0, rep.ratio_psij))
    arr = np.array(ratios)
    assert np.all(arr < 10.0)
    with pytest.raises(ValueError):
        projection_defect(dom, b, np.zeros((0, 4)))


def test_weights():
    w = constant_weight(2.0)
    X = np.array([[0.1, 0.2, 0.3, 0.4], [0.0, 0.0, 0.0, 0.0]])
    assert np.allclose(w.value(X), 2.0)
    assert np.allclose(w.gradient(X), 0.0)

    g = np.array([0.25, 0, 0, 0])
    wa = affine_weight(g)
    assert np.allclose(wa.value(X), 1.0 + 0.25 * X[:, 0])
    assert np.allclose(wa.gradient(X)[0], g)
    a0, g0 = wa.a0_grad0(np.zeros(4))
    assert a0 == 1.0 and np.allclose(g0, g)

    wp = product_weight([2.0, 1.0])
    Xp = np.array([[2.0, 3.0, 0.5, 0.5]])
    assert np.allclose(wp.value(Xp), 12.0)
    assert np.allclose(wp.gradient(Xp)[0, :2], [12.0, 4.0])
    hess = wp.hessian(Xp)[0]
    assert abs(hess[0, 0] - 2.0 * 3.0) < 1e-12      # d2/dx1^2 = 2 x2
    assert abs(hess[0, 1] - 2.0 * 2.0) < 1e-12      # mixed = 2 x1
    floor = weight_min_on_ball(wp, Ball(4, np.array([2.0, 3.0, 0, 0]), 0.5))
    assert floor > 0
