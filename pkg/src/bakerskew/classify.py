"""Case A/B decision and subcase evidence gathering.

Case B is certified by periodic pinching: a tau-periodic point whose
composed fibre map has a unique fixed point forces phi- = phi+ over it.
Case A is evidence-grade only (positive refined gap, no pinching found, no
exponent exclusion).  Subcases are graded by strip invariance/contraction
certificates, separation of the middle-graph stable fibre from the bands,
and coincidence of the pinched graph with integrated stable fibres; B1 vs
B2 is never certified.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baker import BakerSystem
from .fibre import FibreFamily, FixedPoint
from .graphs import GraphGrid, PinchScan, middle_graph, pinched_scan, pullback_graph
from .hypotheses import padded_extrema
from .lyapunov import (
    ExponentEstimate,
    MeasureModel,
    measure_exponent,
    middle_exponent_with_provenance,
)
from .stablefibre import build_field, integrate_fibre
from .util import write_csv


@dataclass(frozen=True)
class PinchProbe:
    """Fixed-point census of the composed fibre map over one periodic orbit."""

    x: float
    period: int
    fixed_points: tuple[FixedPoint, ...]
    pinched: bool


def _composed_orbit(sys: BakerSystem, x: float, period: int) -> np.ndarray:
    """Base points tau x, ..., tau^p x of the pullback composition at x."""
    orbit = sys.tau_orbit(np.array([x]), period)[:, 0]
    return orbit[1:]


def _composed_map(fam: FibreFamily, orbit: np.ndarray, y: np.ndarray) -> np.ndarray:
    out = np.asarray(y, dtype=float)
    for xb in orbit[::-1]:
        out = fam.value(xb, out)
    return out


def _composed_fixed_points(
    fam: FibreFamily,
    orbit: np.ndarray,
    bracket: tuple[float, float],
    tol: float = 1e-12,
    cells: int = 10_000,
) -> list[FixedPoint]:
    lo, hi = bracket
    ys = np.linspace(lo, hi, cells + 1)
    g = _composed_map(fam, orbit, ys) - ys
    hits = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
    roots = []
    for i in hits:
        a, b = ys[i], ys[i + 1]
        ga = float(_composed_map(fam, orbit, np.array([a]))[0] - a)
        while b - a > tol * (1.0 + abs(a)):
            m = 0.5 * (a + b)
            gm = float(_composed_map(fam, orbit, np.array([m]))[0] - m)
            if gm == 0.0:
                a = b = m
                break
            if np.sign(gm) == np.sign(ga):
                a, ga = m, gm
            else:
                b = m
        root = 0.5 * (a + b)
        # chain-rule derivative of the composition at the root
        deriv = 1.0
        ycur = root
        for xb in orbit[::-1]:
            deriv *= float(fam.dy(xb, ycur))
            ycur = float(fam.value(xb, ycur))
        stability = "stable" if deriv < 1 else ("unstable" if deriv > 1 else "neutral")
        roots.append(FixedPoint(float(root), float(deriv), stability))
    for i in np.nonzero(g == 0.0)[0]:
        roots.append(FixedPoint(float(ys[i]), float("nan"), "neutral"))
    return sorted(roots)


def periodic_pinch_test(
    fam: FibreFamily,
    sys: BakerSystem,
    max_period: int,
    bracket: tuple[float, float] = (-0.86, 0.86),
) -> list[PinchProbe]:
    """Fixed points of the composed fibre maps over all tau-periodic points
    of period <= max_period; a unique fixed point pins phi- = phi+ there."""
    if max_period > 12:
        raise ValueError("max_period is capped at 12 (2^p orbit words)")
    probes = []
    for p in range(1, max_period + 1):
        for x in sys.periodic_points(p, primitive_only=(p > 1)):
            orbit = _composed_orbit(sys, float(x), p)
            fps = _composed_fixed_points(fam, orbit, bracket)
            probes.append(PinchProbe(float(x), p, tuple(fps), len(fps) == 1))
    return probes


def two_step_derivative_sup(
    fam: FibreFamily,
    sys: BakerSystem,
    band: float,
    J: tuple[float, float],
    grid: int = 1000,
    side: str = "both",
) -> float:
    """Padded sup of (f_x o f_{tau x})'(y) over x in T and the strip(s)
    band <= |y| <= |J| (side: "upper", "lower" or "both").

    The x-grid is split at the branch boundary so the padding model only
    sees smooth pieces.
    """
    strips = {
        "upper": ((band, J[1]),),
        "lower": ((J[0], -band),),
        "both": ((band, J[1]), (J[0], -band)),
    }[side]
    sup = -np.inf
    a = sys.a
    for x_lo, x_hi in ((0.0, a), (a, 1.0)):
        xs = np.linspace(x_lo, x_hi, grid + 1)
        # evaluate tau by the branch formula of this piece
        txs = (xs - x_lo) / (x_hi - x_lo)
        for y_lo, y_hi in strips:
            ys = np.linspace(y_lo, y_hi, grid + 1)
            X, Y = np.meshgrid(xs, ys, indexing="ij")
            TX = np.broadcast_to(txs[:, None], X.shape)
            inner = fam.value(TX, Y)
            vals = fam.dy(X, inner) * fam.dy(TX, Y)
            _, hi_pad, _ = padded_extrema(
                vals, (x_hi - x_lo) / grid, (y_hi - y_lo) / grid
            )
            sup = max(sup, hi_pad)
    return float(sup)


def two_step_strip_invariant(
    fam: FibreFamily,
    sys: BakerSystem,
    band: float,
    grid: int = 4000,
) -> tuple[bool, bool]:
    """Padded per-side check that the two-step maps leave {y > band} resp.
    {y < -band} invariant: f_x(f_{tau x}(+-band)) beyond +-band for all x.

    At the pinching transition only one side survives (orbits near the
    pinched periodic point leak out of the other strip), so the sides are
    reported separately.
    """
    up_ok, dn_ok = True, True
    a = sys.a
    for x_lo, x_hi in ((0.0, a), (a, 1.0)):
        xs = np.linspace(x_lo, x_hi, grid + 1)
        txs = (xs - x_lo) / (x_hi - x_lo)
        up = fam.value(xs, fam.value(txs, np.full(grid + 1, band)))
        dn = fam.value(xs, fam.value(txs, np.full(grid + 1, -band)))
        up_lo, _, _ = padded_extrema(up, (x_hi - x_lo) / grid, 0.0)
        _, dn_hi, _ = padded_extrema(dn, (x_hi - x_lo) / grid, 0.0)
        up_ok = up_ok and up_lo > band
        dn_ok = dn_ok and dn_hi < -band
    return bool(up_ok), bool(dn_ok)


def _decide_case(
    pinch_certified: bool, exponent_excludes_a: bool, refined_gap: float, tol: float
) -> tuple[str, str]:
    """(case, grade) per the decision invariants."""
    if pinch_certified:
        return "B", "certified"
    if exponent_excludes_a:
        return "B", "evidence (exponent exclusion)"
    if refined_gap > tol:
        return "A", "evidence"
    return "B", "evidence (grid-level pinching)"


@dataclass
class ClassificationReport:
    case: str
    grade: str
    subcase: str
    pinched_points: list[tuple[float, int, float]]  # (x, period, fixed-point y)
    min_gap: float
    min_gap_coarse: float
    pinched_fraction: float
    band: float
    strip_invariant: tuple[bool, bool]
    contraction_sup: float
    band_separation: tuple[float, float] | None
    fibre_match: float | None
    fibre_match_cross_xi: float | None
    multi_point_oscillation: float | None
    exponents: dict[str, ExponentEstimate] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    def lines(self) -> list[str]:
        out = [
            f"case: {self.case}",
            f"grade: {self.grade}",
            f"subcase: {self.subcase}",
            f"min_gap_refined: {self.min_gap!r}",
            f"min_gap_coarse: {self.min_gap_coarse!r}",
            f"pinched_fraction: {self.pinched_fraction!r}",
            f"pinched_periodic_points: "
            + "; ".join(f"x={x!r} p={p} y={y!r}" for x, p, y in self.pinched_points),
            f"strip_band: {self.band!r}",
            f"strip_invariant_upper: {self.strip_invariant[0]}",
            f"strip_invariant_lower: {self.strip_invariant[1]}",
            f"two_step_contraction_sup: {self.contraction_sup!r}",
        ]
        if self.band_separation is not None:
            out.append(
                f"band_separation: upper={self.band_separation[0]!r} "
                f"lower={self.band_separation[1]!r}"
            )
        if self.fibre_match is not None:
            out.append(f"fibre_match_sup_distance: {self.fibre_match!r}")
        if self.fibre_match_cross_xi is not None:
            out.append(f"fibre_match_cross_xi: {self.fibre_match_cross_xi!r}")
        if self.multi_point_oscillation is not None:
            out.append(f"multi_point_oscillation: {self.multi_point_oscillation!r}")
        for name, est in self.exponents.items():
            out.append(
                f"exponent[{name}]: {est.value!r} stderr={est.stderr!r}"
                + (f" ({est.provenance})" if est.provenance else "")
            )
        for note in self.notes:
            out.append(f"note: {note}")
        return out

    def margins_csv(self, path: str) -> str:
        rows = [
            ("min_gap_refined", self.min_gap),
            ("min_gap_coarse", self.min_gap_coarse),
            ("pinched_fraction", self.pinched_fraction),
            ("two_step_contraction_sup", self.contraction_sup),
            ("strip_invariant_upper", int(self.strip_invariant[0])),
            ("strip_invariant_lower", int(self.strip_invariant[1])),
        ]
        if self.band_separation is not None:
            rows += [
                ("band_separation_upper", self.band_separation[0]),
                ("band_separation_lower", self.band_separation[1]),
            ]
        if self.fibre_match is not None:
            rows.append(("fibre_match_sup_distance", self.fibre_match))
        if self.fibre_match_cross_xi is not None:
            rows.append(("fibre_match_cross_xi", self.fibre_match_cross_xi))
        if self.multi_point_oscillation is not None:
            rows.append(("multi_point_oscillation", self.multi_point_oscillation))
        for name, est in self.exponents.items():
            rows.append((f"exponent_{name}", est.value))
        return write_csv(path, ["criterion", "value"], rows)


def classify_scenario(
    fam: FibreFamily,
    sys: BakerSystem,
    J: tuple[float, float] = (-0.86, 0.86),
    I: tuple[float, float] = (-0.858, 0.858),
    N_x: int = 4096,
    depth: int = 200,
    max_period: int = 2,
    pinch_tol: float = 1e-3,
    band: float = 0.3,
    band_sep_threshold: float = 0.1,
    fibre_match_tol: float = 1e-3,
    measures: tuple[MeasureModel, ...] = (MeasureModel("lebesgue", seed=3),),
    samples: int = 50_000,
    fibre_step: float = 1e-4,
    middle_seed: int = 0,
) -> ClassificationReport:
    """Full decision pipeline; uncertainty is returned as data, not raised."""
    upper = pullback_graph(fam, sys, "upper", N_x, depth, abs(J[1]))
    lower = pullback_graph(fam, sys, "lower", N_x, depth, abs(J[1]))
    middle = middle_graph(fam, sys, N_x, depth + 50, 0.0, J=J, seed=middle_seed)
    scan = pinched_scan(upper, lower, pinch_tol, fam, sys)

    probes = periodic_pinch_test(fam, sys, max_period, J)
    pinched = [
        (pr.x, pr.period, pr.fixed_points[0].y) for pr in probes if pr.pinched
    ]

    exponents: dict[str, ExponentEstimate] = {}
    excludes_a = False
    for mu in measures:
        lam_up = measure_exponent(fam, sys, upper, mu, samples)
        lam_dn = measure_exponent(fam, sys, lower, mu, samples)
        lam_mid = middle_exponent_with_provenance(
            fam, sys, middle, upper, lower, mu, samples
        )
        exponents[f"upper|{mu.label()}"] = lam_up
        exponents[f"lower|{mu.label()}"] = lam_dn
        exponents[f"middle|{mu.label()}"] = lam_mid
        if lam_mid.value + 3 * lam_mid.stderr < 0:
            excludes_a = True

    case, grade = _decide_case(bool(pinched), excludes_a, scan.min_gap, pinch_tol)

    notes: list[str] = []
    strip_up, strip_dn = two_step_strip_invariant(fam, sys, band)
    contraction = two_step_derivative_sup(fam, sys, band, J)

    band_separation = None
    fibre_match = None
    fibre_cross = None
    oscillation = None
    subcase = "inconclusive"

    if case == "A":
        field_ = build_field(fam, sys, J, I)
        i0 = N_x // 3
        fb = integrate_fibre(
            field_, middle.xi0, float(middle.xs[i0]), float(middle.values[i0]), fibre_step
        )
        on_grid = fb.interp(upper.xs)
        ok = np.isfinite(on_grid)
        sep_up = float(np.min(upper.values[ok] - on_grid[ok]))
        sep_dn = float(np.min(on_grid[ok] - lower.values[ok]))
        band_separation = (sep_up, sep_dn)
        match_up = float(np.max(np.abs(upper.values[ok] - on_grid[ok])))
        match_dn = float(np.max(np.abs(lower.values[ok] - on_grid[ok])))
        fibre_match = min(match_up, match_dn)
        if sep_up > band_sep_threshold and sep_dn > band_sep_threshold:
            subcase = "A1"
        elif fibre_match < fibre_match_tol:
            subcase = "A2+" if match_up < match_dn else "A2-"
        notes.append(
            "case A is evidence-grade: a finer grid could reveal pinching"
        )
    else:
        pinched_signs = {np.sign(y) for _, _, y in pinched}
        one_sided = len(pinched_signs) == 1 and all(abs(y) > band for _, _, y in pinched)
        side = "upper" if (not pinched or pinched[0][2] > 0) else "lower"
        side_strip = strip_up if side == "upper" else strip_dn
        side_contraction = two_step_derivative_sup(fam, sys, band, J, side=side)

        def fibre_scores(target: GraphGrid):
            field_ = build_field(fam, sys, J, I)
            scores = []
            for xi_anchor in (0.2, 0.7):
                i0 = N_x // 2
                fb = integrate_fibre(
                    field_, xi_anchor, float(target.xs[i0]), float(target.values[i0]),
                    fibre_step,
                )
                on_grid = fb.interp(target.xs)
                ok = np.isfinite(on_grid)
                scores.append((np.abs(target.values[ok] - on_grid[ok]).max(), on_grid))
            match = float(min(s for s, _ in scores))
            both = np.isfinite(scores[0][1]) & np.isfinite(scores[1][1])
            cross = float(np.max(np.abs(scores[0][1][both] - scores[1][1][both])))
            return match, cross

        if side_strip and side_contraction < 1.0 and one_sided:
            # strip certificate: the pinched graph is the continuous bounding
            # graph on the pinched side (recurrence + uniform contraction)
            fibre_match, fibre_cross = fibre_scores(upper if side == "upper" else lower)
            subcase = (
                "B2-ii"
                if fibre_match < fibre_match_tol and fibre_cross < fibre_match_tol
                else "B2-i suggested"
            )
            notes.append(
                f"pinched graph identified with the {side} bounding graph via the "
                f"strip certificate (side contraction sup {side_contraction:.4f} < 1)"
            )
        elif scan.pinched_fraction > 0.5:
            # grid-level a.e. pinching: test the pinched graph (upper works;
            # the graphs coincide at grid tolerance) against stable fibres
            fibre_match, fibre_cross = fibre_scores(upper)
            if fibre_match < fibre_match_tol and fibre_cross < fibre_match_tol:
                subcase = "B2-ii"
            else:
                subcase = "inconclusive"
                notes.append("B1 vs B2 left inconclusive (the paper leaves these open)")
        else:
            notes.append("B1 vs B2 left inconclusive (the paper leaves these open)")
        if subcase == "inconclusive" and scan.pinched is not None and scan.pinched.any():
            # multi-point search: oscillation of the upper graph over refined
            # windows around grid-pinched points (reported, never certified)
            from .graphs import _pullback_values

            idx = np.nonzero(scan.pinched)[0][:8]
            h = upper.xs[1] - upper.xs[0]
            osc = 0.0
            for i in idx:
                win = np.mod(upper.xs[i] + np.linspace(-h, h, 33), 1.0)
                vu = _pullback_values(fam, sys, win, upper.depth, upper.anchor)
                vl = _pullback_values(fam, sys, win, lower.depth, lower.anchor)
                near = (vu - vl) < pinch_tol
                if near.sum() >= 2:
                    osc = max(osc, float(vu[near].max() - vu[near].min()))
            oscillation = osc

    if case == "B" and grade == "certified":
        notes.append("case B certified by periodic pinching (root count rigorous up to scan resolution)")
    return ClassificationReport(
        case=case,
        grade=grade,
        subcase=subcase,
        pinched_points=pinched,
        min_gap=scan.min_gap,
        min_gap_coarse=scan.min_gap_coarse,
        pinched_fraction=scan.pinched_fraction,
        band=band,
        strip_invariant=(strip_up, strip_dn),
        contraction_sup=contraction,
        band_separation=band_separation,
        fibre_match=fibre_match,
        fibre_match_cross_xi=fibre_cross,
        multi_point_oscillation=oscillation,
        exponents=exponents,
        notes=notes,
    )
