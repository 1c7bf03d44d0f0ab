import numpy as np
import pytest

from bakerskew.baker import BakerSystem
from bakerskew.classify import (
    _decide_case,
    classify_scenario,
    periodic_pinch_test,
    two_step_derivative_sup,
    two_step_strip_invariant,
)
from bakerskew.fibre import ArctanFamily

SYS = BakerSystem(0.5)
J = (-0.86, 0.86)


def test_pinch_probe_eps019():
    fam = ArctanFamily(1.1, 0.019)
    probes = periodic_pinch_test(fam, SYS, 2, J)
    by_x = {round(p.x, 6): p for p in probes}
    p0 = by_x[0.0]
    assert p0.pinched and len(p0.fixed_points) == 1
    assert p0.fixed_points[0].y == pytest.approx(0.610, abs=5e-3)
    p13 = by_x[round(1 / 3, 6)]
    assert not p13.pinched and len(p13.fixed_points) == 3
    stable = [fp.y for fp in p13.fixed_points if fp.stability == "stable"]
    assert stable[0] == pytest.approx(-0.568, abs=5e-3)
    assert stable[1] == pytest.approx(0.451, abs=5e-3)


def test_pinch_probe_eps004():
    fam = ArctanFamily(1.1, 0.04)
    probes = periodic_pinch_test(fam, SYS, 2, J)
    by_x = {round(p.x, 6): p for p in probes}
    assert by_x[0.0].pinched
    assert by_x[0.0].fixed_points[0].y == pytest.approx(0.687, abs=5e-3)
    p13 = by_x[round(1 / 3, 6)]
    assert p13.pinched
    assert p13.fixed_points[0].y == pytest.approx(-0.614, abs=5e-3)


def test_pinch_probe_period_cap():
    with pytest.raises(ValueError):
        periodic_pinch_test(ArctanFamily(1.1, 0.019), SYS, 13, J)


def test_decision_table():
    assert _decide_case(True, False, 0.5, 1e-3) == ("B", "certified")
    assert _decide_case(True, True, 0.0, 1e-3) == ("B", "certified")
    # exponent exclusion forbids case A even with a positive gap
    case, grade = _decide_case(False, True, 0.5, 1e-3)
    assert case == "B" and "exponent" in grade
    assert _decide_case(False, False, 0.5, 1e-3) == ("A", "evidence")
    case, grade = _decide_case(False, False, 1e-6, 1e-3)
    assert case == "B" and "grid-level" in grade


def test_contraction_constants_paper_bounds():
    s18 = two_step_derivative_sup(ArctanFamily(1.1, 0.018), SYS, 0.3, J)
    assert s18 < 0.99
    s19 = two_step_derivative_sup(ArctanFamily(1.1, 0.019), SYS, 0.3, J)
    assert s19 < 0.997


def test_strip_invariance_sides():
    up18, dn18 = two_step_strip_invariant(ArctanFamily(1.1, 0.018), SYS, 0.3)
    assert up18 and dn18
    up19, dn19 = two_step_strip_invariant(ArctanFamily(1.1, 0.019), SYS, 0.3)
    assert up19 and not dn19
    up04, dn04 = two_step_strip_invariant(ArctanFamily(1.1, 0.04), SYS, 0.3)
    assert not up04 and not dn04


@pytest.fixture(scope="module")
def reports():
    out = {}
    for eps in (0.018, 0.019, 0.04):
        out[eps] = classify_scenario(
            ArctanFamily(1.1, eps), SYS, N_x=2048, depth=200
        )
    return out


def test_case_a_eps018(reports):
    rep = reports[0.018]
    assert rep.case == "A" and rep.grade == "evidence"
    assert rep.subcase == "A1"
    assert rep.min_gap > 0
    assert not rep.pinched_points
    assert rep.band_separation[0] > 0.1 and rep.band_separation[1] > 0.1
    assert rep.exponents["middle|lebesgue"].value > 0


def test_case_b_eps019(reports):
    rep = reports[0.019]
    assert rep.case == "B" and rep.grade == "certified"
    assert rep.subcase == "B2-i suggested"
    assert [round(x, 6) for x, _, _ in rep.pinched_points] == [0.0]
    assert rep.strip_invariant == (True, False)
    # non-smooth pinched graph: fibres do not coincide with it
    assert rep.fibre_match > 1e-3


def test_case_b_eps004_inconclusive(reports):
    rep = reports[0.04]
    assert rep.case == "B" and rep.grade == "certified"
    assert rep.subcase == "inconclusive"
    xs = sorted(round(x, 6) for x, _, _ in rep.pinched_points)
    assert xs == [0.0, round(1 / 3, 6), round(2 / 3, 6)]
    signs = {np.sign(y) for _, _, y in rep.pinched_points}
    assert signs == {1.0, -1.0}


def test_b2ii_detected_for_shared_fixed_graph():
    # r < 1: every branch fixes y = 0, the pinched graph is the zero fibre
    rep = classify_scenario(ArctanFamily(0.9, 0.0), SYS, N_x=1024, depth=150)
    assert rep.case == "B" and rep.subcase == "B2-ii"
    assert rep.fibre_match < 1e-3
    # B2-ii consistency: a different xi anchor agrees to the same tolerance
    assert rep.fibre_match_cross_xi < 1e-3


def test_a_case_min_gap_positive_after_refinement(reports):
    rep = reports[0.018]
    assert rep.min_gap > 0
    assert rep.min_gap <= rep.min_gap_coarse + 1e-12


def test_report_serialization(tmp_path, reports):
    rep = reports[0.019]
    lines = rep.lines()
    assert lines[0] == "case: B"
    assert any(ln.startswith("exponent[") for ln in lines)
    path = rep.margins_csv(str(tmp_path / "margins.csv"))
    head = open(path).readline().strip()
    assert head == "criterion,value"
