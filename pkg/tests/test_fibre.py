import numpy as np
import pytest

from bakerskew.baker import BakerSystem
from bakerskew.errors import RootSeparationError
from bakerskew.fibre import (
    ArctanFamily,
    bound_constants,
    eval_derivs,
    fixed_points,
    orbit_compose,
    orbit_compose_batch,
)

# fixed-point locations frozen from a scipy.optimize.brentq oracle on
# arctan(1.1 y) + eps*cos(2 pi x) - y (see test bodies for the scan oracle)
YSTAR_EPS0 = 0.517513387125962
FP_019_X0 = 0.609986
FP_019_X13_STABLE = (-0.567787, 0.451194)
FP_04_X0 = 0.687464
FP_04_X13 = -0.6141


def test_eval_derivs_examples():
    fam = ArctanFamily(1.1, 0.1)
    rec = eval_derivs(fam, 0.0, 0.0)
    assert rec.f == pytest.approx(0.1, abs=1e-15)
    assert rec.f_y == pytest.approx(1.1, abs=1e-15)
    # schwarzian at y=0 equals -2 r^2 for any x (symbolic differentiation)
    for x in (0.0, 0.3, 0.77):
        assert eval_derivs(fam, x, 0.0).schwarzian == pytest.approx(-2.42, abs=1e-12)
    assert eval_derivs(ArctanFamily(1.1, 0.0), 0.42, 0.0).f == pytest.approx(0.0, abs=1e-15)


def test_monotonicity_random():
    fam = ArctanFamily(1.1, 0.1)
    rng = np.random.default_rng(3)
    x = rng.random(1000)
    y1 = rng.uniform(-0.86, 0.86, 1000)
    y2 = y1 + rng.uniform(1e-6, 0.5, 1000)
    assert np.all(fam.value(x, y1) < fam.value(x, y2))


def test_derivative_consistency_finite_differences():
    fam = ArctanFamily(1.1, 0.1)
    rng = np.random.default_rng(11)
    x = rng.random(1000)
    y = rng.uniform(-0.86, 0.86, 1000)
    h = 1e-5
    fd_y = (fam.value(x, y + h) - fam.value(x, y - h)) / (2 * h)
    fd_x = (fam.value(x + h, y) - fam.value(x - h, y)) / (2 * h)
    rec = eval_derivs(fam, x, y)
    assert np.max(np.abs(fd_y - rec.f_y) / np.abs(rec.f_y)) < 1e-6
    scale = np.maximum(np.abs(rec.f_xpart), 1e-3)
    assert np.max(np.abs(fd_x - rec.f_xpart) / scale) < 1e-6


def test_schwarzian_negative_on_grid():
    fam = ArctanFamily(1.1, 0.1)
    xs = np.linspace(0, 1, 200)
    ys = np.linspace(-0.86, 0.86, 200)
    X, Y = np.meshgrid(xs, ys)
    assert np.max(eval_derivs(fam, X, Y).schwarzian) < 0


def scan_roots_oracle(fam, x, lo=-0.9, hi=0.9, n=40001):
    """Independent root scan: dense grid + mid-point refinement by np.interp."""
    ys = np.linspace(lo, hi, n)
    g = fam.value(x, ys) - ys
    roots = []
    for i in np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]:
        a, b = ys[i], ys[i + 1]
        for _ in range(80):
            m = 0.5 * (a + b)
            if np.sign(fam.value(x, m) - m) == np.sign(fam.value(x, a) - a):
                a = m
            else:
                b = m
        roots.append(0.5 * (a + b))
    return roots


@pytest.mark.parametrize(
    "eps,x,expected,expected_stable",
    [
        (0.019, 0.0, [FP_019_X0], [FP_019_X0]),
        (0.019, 1 / 3, None, list(FP_019_X13_STABLE)),
        (0.04, 0.0, [FP_04_X0], [FP_04_X0]),
        (0.04, 1 / 3, [FP_04_X13], [FP_04_X13]),
    ],
)
def test_fixed_points_paper_values(eps, x, expected, expected_stable):
    fam = ArctanFamily(1.1, eps)
    fps = fixed_points(fam, x, (-0.86, 0.86))
    if expected is not None:
        assert len(fps) == len(expected)
        for fp, want in zip(fps, expected):
            assert fp.y == pytest.approx(want, abs=5e-3)
    stable = [fp.y for fp in fps if fp.stability == "stable"]
    assert len(stable) == len(expected_stable)
    for got, want in zip(stable, expected_stable):
        assert got == pytest.approx(want, abs=5e-3)
    # cross-check against the independent scan oracle
    oracle = scan_roots_oracle(fam, x)
    assert len(oracle) == len(fps)
    for fp, want in zip(fps, oracle):
        assert fp.y == pytest.approx(want, abs=1e-9)


def test_fixed_points_residual_contract():
    fam = ArctanFamily(1.1, 0.019)
    for fp in fixed_points(fam, 1 / 3, (-0.86, 0.86), tol=1e-12):
        assert abs(float(fam.value(1 / 3, fp.y)) - fp.y) <= 1e-12 * (1 + abs(fp.y))


def test_fixed_points_three_count_and_unstable_middle():
    fam = ArctanFamily(1.1, 0.019)
    fps = fixed_points(fam, 1 / 3, (-0.86, 0.86))
    assert [fp.stability for fp in fps] == ["stable", "unstable", "stable"]


def test_fixed_points_scan_separation_error():
    fam = ArctanFamily(1.1, 0.019)
    with pytest.raises(RootSeparationError):
        fixed_points(fam, 1 / 3, (-0.86, 0.86), scan_cells=2)


def test_orbit_compose_basics():
    fam = ArctanFamily(1.1, 0.0)
    sys = BakerSystem(0.5)
    res = orbit_compose(fam, sys, 0.37, 0.2, 0)
    assert res == (0.2, 0.0)
    res = orbit_compose(fam, sys, 0.37, 0.0, 100)
    assert res.y_n == pytest.approx(0.0, abs=1e-14)
    assert res.log_deriv_sum == pytest.approx(100 * np.log(1.1), rel=1e-13)


def test_orbit_compose_matches_nested_evaluation():
    # step-by-step reference evaluation, n=3
    fam = ArctanFamily(1.1, 0.019)
    sys = BakerSystem(0.5)
    x, y = 0.123, 0.5
    x1 = sys.tau(x)
    x2 = sys.tau(x1)
    y1 = float(fam.value(x, y))
    y2 = float(fam.value(x1, y1))
    y3 = float(fam.value(x2, y2))
    logsum = float(
        np.log(fam.dy(x, y)) + np.log(fam.dy(x1, y1)) + np.log(fam.dy(x2, y2))
    )
    res = orbit_compose(fam, sys, x, y, 3)
    assert res.y_n == pytest.approx(y3, abs=1e-15)
    assert res.log_deriv_sum == pytest.approx(logsum, abs=1e-14)


@pytest.mark.parametrize("n", [5, 20])
def test_orbit_chain_rule_vs_finite_difference(n):
    fam = ArctanFamily(1.1, 0.019)
    sys = BakerSystem(0.5)
    rng = np.random.default_rng(5)
    for _ in range(20):
        x = rng.random()
        y = rng.uniform(-0.5, 0.5)
        h = 1e-7
        up = orbit_compose(fam, sys, x, y + h, n).y_n
        dn = orbit_compose(fam, sys, x, y - h, n).y_n
        fd = np.log((up - dn) / (2 * h))
        assert fd == pytest.approx(orbit_compose(fam, sys, x, y, n).log_deriv_sum, rel=1e-4)


def test_orbit_compose_true_skew_driving():
    fam = ArctanFamily(1.1, 0.019)
    sys = BakerSystem(0.5)
    # xi = 0 keeps the branch word at 0, so x contracts by halving each step
    res = orbit_compose(fam, sys, 1.0 - 1e-9, 0.1, 2, xi=0.0)
    x1 = sys.contract(0.0, 1.0 - 1e-9)
    y1 = float(fam.value(1.0 - 1e-9, 0.1))
    assert res.y_n == pytest.approx(float(fam.value(x1, y1)), abs=1e-14)


def test_orbit_compose_batch_matches_scalar():
    fam = ArctanFamily(1.1, 0.04)
    sys = BakerSystem(0.5)
    rng = np.random.default_rng(9)
    xs = rng.random(8)
    ys = rng.uniform(-0.8, 0.8, 8)
    yn, sums, marks = orbit_compose_batch(fam, sys, xs, ys, 12, checkpoints=(6, 12))
    for i in range(8):
        ref = orbit_compose(fam, sys, xs[i], ys[i], 12)
        assert yn[i] == pytest.approx(ref.y_n, abs=1e-13)
        assert sums[i] == pytest.approx(ref.log_deriv_sum, abs=1e-12)
    assert set(marks) == {6, 12}


def test_bound_constants_certified_point():
    fam = ArctanFamily(1.1, 0.1)
    sys = BakerSystem(0.5)
    bc = bound_constants(fam, sys, (-0.86, 0.86))
    # closed forms: inf f' = r/(1+(rM)^2), sup|A| = 2 pi eps (1+(rM)^2)/r
    inf_fy = 1.1 / (1 + (1.1 * 0.86) ** 2)
    assert bc.gamma_norm == pytest.approx(0.5 / inf_fy * 1.05, rel=1e-3)
    assert bc.gamma_norm < 1.0
    assert bc.sup_a == pytest.approx(2 * np.pi * 0.1 / inf_fy * 1.05, rel=1e-3)
    assert np.isfinite(bc.x3_sup_bound) and bc.x3_sup_bound < 15.0


def test_inverse_y_bisection_and_closed_form():
    fam = ArctanFamily(1.1, 0.03)
    xs = np.linspace(0, 1, 13)
    ys = np.linspace(-0.7, 0.7, 13)
    targets = fam.value(xs, ys)
    inv = fam.inverse_y(xs, targets, -0.86, 0.86)
    assert np.max(np.abs(inv - ys)) < 1e-12
    # generic bisection path (FibreFamily.inverse_y) agrees with closed form
    from bakerskew.fibre import FibreFamily

    inv2 = FibreFamily.inverse_y(fam, xs, targets, -0.86, 0.86)
    assert np.max(np.abs(inv2 - ys)) < 1e-10
    # out-of-range target yields NaN
    assert np.isnan(FibreFamily.inverse_y(fam, 0.0, 2.0, -0.86, 0.86))
