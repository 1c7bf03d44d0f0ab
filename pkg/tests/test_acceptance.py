"""Acceptance suite: one test per criterion, at the stated tolerances.

Each test prints a PASS line so a full run reads as a checklist.  Sizes and
tolerances are pinned here, not configurable.
"""

import time

import numpy as np
import pytest

from bakerskew.baker import BakerSystem
from bakerskew.classify import classify_scenario, two_step_derivative_sup
from bakerskew.config import preset_config
from bakerskew.cli import run_trajectories
from bakerskew.dimension import dimension_estimate, negative_strip_bound
from bakerskew.fibre import ArctanFamily, fixed_points, orbit_compose_batch
from bakerskew.graphs import GraphGrid, middle_graph, pullback_graph
from bakerskew.hypotheses import check_hypotheses, scan_region
from bakerskew.lyapunov import MeasureModel, forward_exponent_batch, measure_exponent
from bakerskew.stablefibre import (
    build_field,
    equivariance_residual,
    functional_equation_residual,
    integrate_fibre,
)

SYS = BakerSystem(0.5)
J, I = (-0.86, 0.86), (-0.858, 0.858)


def ok(name: str, detail: str = ""):
    print(f"ACCEPTANCE PASS: {name}" + (f" [{detail}]" if detail else ""))


def test_hypothesis_certification():
    fam = ArctanFamily(1.1, 0.1)
    t0 = time.time()
    cert = check_hypotheses(fam, SYS, I, J, 1000)
    elapsed = time.time() - t0
    assert cert.passed
    assert cert.expansion_margin >= 0.15
    assert elapsed < 10.0
    ok(
        "hypothesis certification (0.86, 1.1, 0.1, 1/2)",
        f"expansion margin {cert.expansion_margin:.4f}, {elapsed:.1f}s at 1000^2",
    )


def test_region_scan_triangle():
    t0 = time.time()
    scan = scan_region(0.1, (0.70, 0.99), (0.95, 1.30), grid=(100, 100))
    elapsed = time.time() - t0
    Mg, rg = np.meshgrid(scan.M_values, scan.r_values, indexing="ij")
    triangle = (rg >= 1.0) & (rg <= Mg + 0.24) & (Mg <= 0.98)
    assert triangle.sum() > 2000
    assert np.all(scan.passed[triangle])
    assert elapsed < 300.0
    ok(
        "region scan eps=0.1 triangle",
        f"{int(triangle.sum())} grid points pass, {elapsed:.0f}s for 100x100",
    )


def test_fixed_points_figure_captions():
    fam19 = ArctanFamily(1.1, 0.019)
    fps = fixed_points(fam19, 0.0, J)
    assert len(fps) == 1
    assert fps[0].y == pytest.approx(0.610, abs=5e-3)
    fps13 = fixed_points(fam19, 1 / 3, J)
    assert len(fps13) == 3
    stable = [fp.y for fp in fps13 if fp.stability == "stable"]
    assert stable[0] == pytest.approx(-0.568, abs=5e-3)
    assert stable[1] == pytest.approx(0.451, abs=5e-3)
    fam04 = ArctanFamily(1.1, 0.04)
    fps0 = fixed_points(fam04, 0.0, J)
    assert len(fps0) == 1 and fps0[0].y == pytest.approx(0.687, abs=5e-3)
    fps13b = fixed_points(fam04, 1 / 3, J)
    assert len(fps13b) == 1 and fps13b[0].y == pytest.approx(-0.614, abs=5e-3)
    ok("fixed points at eps=0.019 and 0.04 (figure captions)")


def test_case_detection():
    budget = 600.0
    t0 = time.time()
    rep18 = classify_scenario(ArctanFamily(1.1, 0.018), SYS, J, I, N_x=4096, depth=200)
    t18 = time.time() - t0
    assert rep18.case == "A"
    assert rep18.min_gap > 0
    assert t18 < budget

    t0 = time.time()
    rep19 = classify_scenario(ArctanFamily(1.1, 0.019), SYS, J, I, N_x=4096, depth=200)
    t19 = time.time() - t0
    assert rep19.case == "B" and rep19.grade == "certified"
    assert any(p == 1 for _, p, _ in rep19.pinched_points)
    assert t19 < budget

    t0 = time.time()
    rep04 = classify_scenario(ArctanFamily(1.1, 0.04), SYS, J, I, N_x=4096, depth=200)
    t04 = time.time() - t0
    assert rep04.case == "B" and rep04.grade == "certified"
    assert {p for _, p, _ in rep04.pinched_points} <= {1, 2}
    assert t04 < budget
    ok(
        "case detection (A at 0.018; B certified at 0.019, 0.04)",
        f"runs {t18:.0f}/{t19:.0f}/{t04:.0f}s < 600s",
    )


def test_phi_plus_lower_bound():
    up = pullback_graph(ArctanFamily(1.1, 0.019), SYS, "upper", 4096, 200, 0.86)
    assert np.min(up.values) > 0.3
    ok("phi+ > 0.3 at eps=0.019 (depth 200, grid 4096)", f"min {np.min(up.values):.4f}")


def test_contraction_constants():
    s18 = two_step_derivative_sup(ArctanFamily(1.1, 0.018), SYS, 0.3, J)
    assert s18 < 0.99
    s19 = two_step_derivative_sup(ArctanFamily(1.1, 0.019), SYS, 0.3, J)
    assert s19 < 0.997
    ok("contraction constants", f"sup {s18:.4f} < 0.99, {s19:.4f} < 0.997 (padded)")


def test_strip_bound():
    verdict = negative_strip_bound(ArctanFamily(1.1, 0.019), SYS, -0.1, (0.25, 0.75))
    assert verdict.passed
    assert verdict.implied_bound == pytest.approx(1.5)
    ok("negative strip bound at eps=0.019", f"dim_H {{phi- < -0.1}} >= {verdict.implied_bound}")


@pytest.fixture(scope="module")
def field18():
    return build_field(ArctanFamily(1.1, 0.018), SYS, J, I)


def test_stable_fibre_functional_equation(field18):
    rng = np.random.default_rng(31)
    res = functional_equation_residual(
        field18, rng.random(1000), rng.random(1000), rng.uniform(-0.86, 0.86, 1000)
    )
    assert np.max(res) <= 2.0 * field18.tail_bound
    ok(
        "X3 functional equation at 1000 random points",
        f"max residual {np.max(res):.2e} <= 2 tail {2 * field18.tail_bound:.2e}",
    )


def test_stable_fibre_equivariance(field18):
    fb = integrate_fibre(field18, 0.3, 0.5, 0.55, 1e-4)
    rep = equivariance_residual(fb, field18, 10)
    budget = 1e-6  # integration + interpolation allowance
    assert rep.residual <= rep.envelope + budget
    assert rep.envelope == pytest.approx(
        field18.slope_bound * 2.0**-10 * (fb.us[-1] - fb.us[0]), rel=1e-12
    )
    ok(
        "equivariance residual at n=10",
        f"{rep.residual:.2e} <= envelope {rep.envelope:.2e} + {budget:g}",
    )


def test_stable_fibre_exponent_constancy(field18):
    fam = field18.fam
    rng = np.random.default_rng(9)
    improved = 0
    for _ in range(20):
        xi, x = rng.random(), rng.random()
        y = rng.uniform(-0.5, 0.5)
        fb = integrate_fibre(field18, xi, x, y, 1e-4)
        us = rng.uniform(fb.us[0], fb.us[-1], 5)
        pts_x = np.concatenate([[x], us])
        pts_y = np.concatenate([[y], fb.interp(us)])
        seed = int(rng.integers(1 << 30))
        digits = SYS.generic_orbit(10_000, np.random.default_rng(seed), start=np.array([xi]))[1]
        digits = np.repeat(digits, 6, axis=1)
        gaps = {}
        for n in (1000, 10_000):
            _, total, _ = orbit_compose_batch(
                fam, SYS, pts_x, pts_y, n, contraction_digits=digits[:n]
            )
            lam = total / n
            gaps[n] = np.max(np.abs(lam[1:] - lam[0]))
        if gaps[10_000] < gaps[1000]:
            improved += 1
    assert improved >= 18
    ok("exponent constancy along fibres", f"{improved}/20 anchors improved at n=1e4")


def test_exponent_trichotomy():
    fam = ArctanFamily(1.1, 0.018)
    up = pullback_graph(fam, SYS, "upper", 4096, 200, 0.86)
    lo = pullback_graph(fam, SYS, "lower", 4096, 200, 0.86)
    mid = middle_graph(fam, SYS, 4096, 250, 0.0, J=J, seed=0)
    leb = MeasureModel("lebesgue", seed=3)
    lams = [
        measure_exponent(fam, SYS, up, leb, samples=131_072),
        measure_exponent(fam, SYS, lo, leb, samples=131_072),
        measure_exponent(fam, SYS, mid, leb, residual_threshold=np.inf),
    ]
    rng = np.random.default_rng(7)
    xs = rng.random(50)
    ys = rng.uniform(-0.86, 0.86, 50)
    xis = rng.random(50)
    ests = forward_exponent_batch(fam, SYS, xs, ys, 10_000, xis=xis, seed=123)
    worst = 0.0
    for est in ests:
        ratios = [
            abs(est.value - lam.value) / max(np.hypot(est.stderr, lam.stderr), 1e-12)
            for lam in lams
        ]
        worst = max(worst, min(ratios))
        assert min(ratios) <= 3.0
    ok("exponent trichotomy at eps=0.018", f"50 points, worst ratio {worst:.2f} <= 3 se")


def test_dimension_estimator_sanity():
    t0 = time.time()
    fam = ArctanFamily(1.1, 0.019)
    xs = np.arange(512) / 512
    const_neg = GraphGrid(xs, np.full(512, 0.6), "upper", 1, 0.86)
    est_neg = dimension_estimate(fam, SYS, const_neg, 8)
    assert est_neg.value == 2.0
    const_pos = GraphGrid(xs, np.full(512, 0.05), "upper", 1, 0.86)
    est_pos = dimension_estimate(fam, SYS, const_pos, 8, check_gap=False)
    assert est_pos.verdict == "P empty / case A"

    up = pullback_graph(fam, SYS, "upper", 4096, 200, 0.86)
    est10 = dimension_estimate(fam, SYS, up, 10)
    assert est10.gap_diagnostic < 1e-2
    est8 = dimension_estimate(fam, SYS, up, 8)
    assert abs(est8.s_star - est10.s_star) < 5e-2
    # an active-constraint potential exercises the same bounds
    mixed = GraphGrid(
        np.arange(1024) / 1024,
        np.where(np.arange(1024) / 1024 < 15 / 16, 0.05, 0.6),
        "upper",
        1,
        0.86,
    )
    m10 = dimension_estimate(fam, SYS, mixed, 10)
    m8 = dimension_estimate(fam, SYS, mixed, 8)
    assert m10.gap_diagnostic < 1e-2
    assert abs(m8.s_star - m10.s_star) < 5e-2
    elapsed = time.time() - t0
    assert elapsed < 900.0
    ok(
        "dimension estimator sanity",
        f"degenerate cases exact, duality gaps {est10.gap_diagnostic:.1e}/"
        f"{m10.gap_diagnostic:.1e} < 1e-2, order drift {abs(m8.s_star - m10.s_star):.3f} "
        f"< 5e-2, {elapsed:.0f}s < 900s",
    )


def test_crossing_phenomenology():
    cfg04 = preset_config("fig1c")
    counts04, _ = run_trajectories(cfg04)
    assert cfg04.traj_steps == 10_000_000
    assert counts04[0] >= 1
    cfg08 = preset_config("fig2")
    assert cfg08.seed == cfg04.seed  # same seed policy
    counts08, _ = run_trajectories(cfg08)
    assert counts08[0] > counts04[0]
    ok(
        "crossing phenomenology",
        f"eps=0.04: {counts04[0]} crossings, eps=0.08: {counts08[0]} (same seed, 1e7 steps)",
    )
