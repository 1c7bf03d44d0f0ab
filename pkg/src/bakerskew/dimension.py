"""Hausdorff dimension of the pinched set via transfer-operator pressure.

The variational value sup { h_nu / int log tau' : lambda(nu) <= 0 } is
computed two ways: a Lagrangian dual G(s) = inf_{q>=0} P(-q psi - s log tau')
with the pressure P as the log leading eigenvalue of the weighted transfer
matrix on n-cylinders (root of G(s) = 0 gives s*, dim = 1 + s*), and an
independent direct convex program over order-n Markov measures that serves
as the correctness oracle; disagreement beyond tolerance fails loudly.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .baker import BakerSystem
from .errors import DualityGapError, NonConvergenceError
from .fibre import FibreFamily
from .graphs import GraphGrid
from .hypotheses import padded_extrema
from .lyapunov import MeasureModel, measure_exponent
from .util import write_csv

PRESSURE_TOL = 1e-12
MAX_SWEEPS = 100_000
FLOOR = -50.0  # pressure below this on the q-ray means the constraint set is empty


@dataclass
class PressureModel:
    """Transfer-operator data on the 2^n cylinders of tau."""

    sys: BakerSystem
    order: int
    psi: np.ndarray  # potential per cylinder: log f'_x(phi(x)) at midpoints
    log_tau_prime: np.ndarray  # per cylinder, by first digit
    midpoints: np.ndarray
    sweeps: int = 0
    cache: dict = field(default_factory=dict)

    @property
    def n_cylinders(self) -> int:
        return 2**self.order


def cylinder_midpoints(sys: BakerSystem, order: int) -> np.ndarray:
    """Midpoints of all 2^order cylinders, indexed by the digit word as an
    integer with the first digit as most significant bit."""
    n = 2**order
    lo = np.zeros(n)
    length = np.ones(n)
    a = sys.a
    words = np.arange(n)
    for j in range(order):
        bit = (words >> (order - 1 - j)) & 1
        lo = lo + np.where(bit == 1, length * a, 0.0)
        length = length * np.where(bit == 1, 1.0 - a, a)
    return lo + 0.5 * length


def build_pressure_model(
    fam: FibreFamily, sys: BakerSystem, graph: GraphGrid, order: int
) -> PressureModel:
    """Sample psi(x) = log f'_x(phi(x)) at cylinder midpoints."""
    if order > 16:
        raise ValueError("cylinder order capped at 16 (matrix dimension 2^n)")
    mids = cylinder_midpoints(sys, order)
    phi = graph.interp(mids)
    if np.any(~np.isfinite(phi)):
        raise ValueError("graph has diverged values over some cylinders; choose another phi-hat")
    psi = np.log(fam.dy(mids, phi))
    first = (np.arange(2**order) >> (order - 1)) & 1
    ltp = np.where(first == 0, -np.log(sys.a), -np.log(1.0 - sys.a))
    return PressureModel(sys, order, np.asarray(psi), ltp, mids)


def pressure_eval(model: PressureModel, potential: np.ndarray) -> float:
    """log of the leading eigenvalue of L[w, w'] = e^{pot(w')} [w' refines w].

    Power iteration to relative tolerance 1e-12; the preimage cylinders of w
    are w' = b 2^{n-1} + (w >> 1).  The iteration runs on L + cI with a
    positive diagonal shift (same eigenvectors, spectrum shifted by c),
    which removes the stalling caused by a second eigenvalue near -lambda_1.
    Signals non-convergence past 1e5 sweeps.
    """
    potential = np.asarray(potential, dtype=float)
    if potential.shape != (model.n_cylinders,):
        raise ValueError("potential must be sampled per cylinder")
    if not np.all(np.isfinite(potential)):
        raise ValueError("potential must be finite on all cylinders")
    scale = float(np.max(potential))
    weights = np.exp(potential - scale)
    n = model.n_cylinders
    idx = np.arange(n)
    pre0 = idx >> 1
    pre1 = (1 << (model.order - 1)) + (idx >> 1)
    # max row sum bounds the Perron root from above
    shift = float(np.max(weights[pre0] + weights[pre1]))
    v = np.full(n, 1.0 / n)
    lam_old = 0.0
    for sweep in range(MAX_SWEEPS):
        w = weights[pre0] * v[pre0] + weights[pre1] * v[pre1] + shift * v
        lam = float(np.sum(w))
        v = w / lam
        if sweep > 0 and abs(lam - lam_old) <= PRESSURE_TOL * abs(lam):
            model.sweeps = sweep + 1
            return math.log(lam - shift) + scale
        lam_old = lam
    raise NonConvergenceError("power iteration did not converge within 1e5 sweeps")


def _pressure_qs(model: PressureModel, q: float, s: float) -> float:
    key = (round(q, 15), round(s, 15))
    if key not in model.cache:
        model.cache[key] = pressure_eval(model, -q * model.psi - s * model.log_tau_prime)
    return model.cache[key]


def _inf_over_q(model: PressureModel, s: float) -> tuple[float, float, bool]:
    """(inf_q P(-q psi - s log tau'), argmin q, hit_floor).

    P is convex in q; the bracket doubles until P rises or dives through the
    floor (no measure satisfies the constraint).
    """
    p0 = _pressure_qs(model, 0.0, s)
    q_hi = 1.0
    p_hi = _pressure_qs(model, q_hi, s)
    if p_hi >= p0:
        best = (p0, 0.0)
        lo, hi = 0.0, q_hi
    else:
        while True:
            q_next = 2.0 * q_hi
            p_next = _pressure_qs(model, q_next, s)
            if p_next < FLOOR:
                return p_next, q_next, True
            if p_next >= p_hi:
                lo, hi = q_hi / 2.0, q_next
                best = (p_hi, q_hi)
                break
            q_hi, p_hi = q_next, p_next
            if q_hi > 1e9:
                return p_hi, q_hi, True
    for _ in range(200):
        m1 = lo + (hi - lo) / 3.0
        m2 = hi - (hi - lo) / 3.0
        p1 = _pressure_qs(model, m1, s)
        p2 = _pressure_qs(model, m2, s)
        if p1 <= p2:
            hi = m2
            if p1 < best[0]:
                best = (p1, m1)
        else:
            lo = m1
            if p2 < best[0]:
                best = (p2, m2)
        if hi - lo < 1e-12 * (1.0 + hi):
            break
    if _pressure_qs(model, 0.0, s) <= best[0]:
        best = (_pressure_qs(model, 0.0, s), 0.0)
    return best[0], best[1], False


@dataclass(frozen=True)
class DimensionEstimate:
    value: float | None  # in [1, 2], or None when P is empty
    verdict: str  # "dim" | "P empty / case A"
    s_star: float | None
    q_star: float | None
    provenance: str
    order: int
    gap_diagnostic: float | None

    def row(self, scenario: str) -> tuple:
        return (
            scenario,
            self.provenance,
            self.order,
            self.q_star if self.q_star is not None else "",
            self.s_star if self.s_star is not None else "",
            self.value if self.value is not None else self.verdict,
            self.gap_diagnostic if self.gap_diagnostic is not None else "",
        )


def markov_program_s_star(model: PressureModel) -> float | None:
    """Direct constrained optimization over order-n Markov measures (oracle).

    Maximizes the conditional entropy h = -sum rel_entr(mu_w, m_prefix(w))
    over shift-stationary cylinder distributions subject to psi . mu <= 0;
    a = 1/2 only (constant denominator log 2).  Returns None if infeasible.
    """
    if model.sys.a != 0.5:
        raise ValueError("the direct Markov oracle is implemented for a = 1/2")
    import cvxpy as cp

    n = model.n_cylinders
    order = model.order
    mu = cp.Variable(n, nonneg=True)
    prefix = np.arange(n) >> 1
    M = np.zeros((n, n))
    for w in range(n):
        M[w, 2 * prefix[w]] = 1.0
        M[w, 2 * prefix[w] + 1] = 1.0
    constraints = [cp.sum(mu) == 1, model.psi @ mu <= 0]
    half = n // 2
    for v in range(half):
        constraints.append(mu[2 * v] + mu[2 * v + 1] == mu[v] + mu[v + half])
    problem = cp.Problem(cp.Maximize(cp.sum(-cp.rel_entr(mu, M @ mu))), constraints)
    try:
        problem.solve(solver=cp.CLARABEL)
    except cp.error.SolverError:
        problem.solve(solver=cp.SCS)
    if problem.status in ("infeasible", "infeasible_inaccurate"):
        return None
    if problem.status not in ("optimal", "optimal_inaccurate"):
        raise NonConvergenceError(f"Markov program ended with status {problem.status}")
    return float(problem.value) / math.log(2.0)


def dimension_estimate(
    fam: FibreFamily,
    sys: BakerSystem,
    graph: GraphGrid,
    order: int = 10,
    check_gap: bool = True,
    gap_tol: float = 1e-2,
) -> DimensionEstimate:
    """dim_H(P) = 1 + s* with s* solving G(s) = inf_q P(-q psi - s log tau') = 0.

    For a = 1/2, log tau' is constant and s* = inf_q P(-q psi)/log 2.  If the
    q-ray dives to -inf no invariant measure satisfies the constraint and the
    verdict is "P empty / case A".  With check_gap the direct Markov program
    must agree in s* within gap_tol, else DualityGapError.
    """
    model = build_pressure_model(fam, sys, graph, order)
    if sys.a == 0.5:
        g0, q_star, empty = _inf_over_q(model, 0.0)
        if empty:
            return DimensionEstimate(None, "P empty / case A", None, None, graph.kind, order, None)
        s_star = min(max(g0 / math.log(2.0), 0.0), 1.0)
    else:
        g0, q_star, empty = _inf_over_q(model, 0.0)
        if empty:
            return DimensionEstimate(None, "P empty / case A", None, None, graph.kind, order, None)
        lo_s, hi_s = 0.0, 1.0
        g_hi, q_hi, _ = _inf_over_q(model, 1.0)
        if g_hi > 0:
            s_star, q_star = 1.0, q_hi
        else:
            for _ in range(60):
                mid = 0.5 * (lo_s + hi_s)
                g_mid, q_star, _ = _inf_over_q(model, mid)
                if g_mid > 0:
                    lo_s = mid
                else:
                    hi_s = mid
            s_star = 0.5 * (lo_s + hi_s)
    gap = None
    if check_gap and sys.a == 0.5:
        direct = markov_program_s_star(model)
        if direct is None:
            raise DualityGapError(
                "direct Markov program infeasible while the dual found a root"
            )
        gap = abs(direct - s_star)
        if gap > gap_tol:
            raise DualityGapError(
                f"duality gap {gap:.3e} in s* exceeds {gap_tol:g} "
                f"(dual {s_star:.6f}, direct {direct:.6f})"
            )
    return DimensionEstimate(
        1.0 + s_star, "dim", float(s_star), float(q_star), graph.kind, order, gap
    )


# -- explicit lower bounds ---------------------------------------------------


@dataclass(frozen=True)
class BernoulliBound:
    p: float
    entropy: float
    lambda_hat: float
    stderr: float
    feasible: bool


@dataclass(frozen=True)
class BernoulliSweep:
    bounds: tuple[BernoulliBound, ...]
    best: float  # 1 + max feasible h/log 2, or 1.0 when nothing is feasible


def bernoulli_lower_bound(
    fam: FibreFamily,
    sys: BakerSystem,
    graph: GraphGrid,
    p_grid: tuple[float, ...] = (0.0, 0.1, 0.2, 0.3, 0.4, 0.5, 0.6, 0.7, 0.8, 0.9, 1.0),
    mc: int = 50_000,
    seed: int = 17,
) -> BernoulliSweep:
    """Feasible product measures give dim >= 1 + h(p)/log 2.

    lambda-hat is the Monte Carlo average of log f'_x(phi(x)) under
    Bernoulli(p) digit words; feasibility requires lambda-hat + 3 stderr <= 0.
    """
    if sys.a != 0.5:
        raise ValueError("bernoulli_lower_bound assumes a = 1/2")
    out = []
    best = 1.0
    for p in p_grid:
        mu = MeasureModel("bernoulli", p=float(p), seed=seed)
        h = mu.entropy_rate(sys)
        est = measure_exponent(fam, sys, graph, mu, samples=mc, residual_threshold=np.inf)
        feasible = est.value + 3.0 * est.stderr <= 0.0
        out.append(BernoulliBound(float(p), h, est.value, est.stderr, feasible))
        if feasible:
            best = max(best, 1.0 + h / math.log(2.0))
    return BernoulliSweep(tuple(out), best)


@dataclass(frozen=True)
class StripBoundVerdict:
    passed: bool
    sup_value: float
    threshold: float
    window: tuple[float, float]
    digits: tuple[int, ...]
    dim_component: float
    implied_bound: float | None


def negative_strip_bound(
    fam: FibreFamily,
    sys: BakerSystem,
    threshold: float = -0.1,
    x_window: tuple[float, float] = (0.25, 0.75),
    J: tuple[float, float] = (-0.86, 0.86),
    grid: int = 1000,
) -> StripBoundVerdict:
    """Quaternary-digit lower bound for dim_H { phi- < threshold }.

    If sup over x in the window and y in [J_lo, threshold] of
    f_x(f_{tau x}(y)) stays below the threshold (with padding), the two-step
    pullback keeps phi- below it over tau^{-1} of the quaternary digit set
    whose quarter cylinders fit in the window; the bound is
    1 + log(#digits)/log 4 (= 3/2 for the window [1/4, 3/4]).
    """
    if sys.a != 0.5:
        raise ValueError("negative_strip_bound assumes a = 1/2")
    digits = tuple(
        j for j in range(4) if x_window[0] <= j / 4 and (j + 1) / 4 <= x_window[1]
    )
    if len(digits) < 2:
        return StripBoundVerdict(False, np.nan, threshold, x_window, digits, 0.0, None)
    # hull of the digit set must sit inside the window (tau^2-invariance)
    hull = (min(digits) / 3.0, max(digits) / 3.0)
    if not (x_window[0] <= hull[0] and hull[1] <= x_window[1]):
        return StripBoundVerdict(False, np.nan, threshold, x_window, digits, 0.0, None)
    sup = -np.inf
    for x_lo, x_hi in ((x_window[0], 0.5), (0.5, x_window[1])):
        if x_hi <= x_lo:
            continue
        xs = np.linspace(x_lo, x_hi, grid + 1)
        txs = np.asarray(sys.tau(np.clip(xs, x_lo, np.nextafter(x_hi, x_lo))))
        ys = np.linspace(J[0], threshold, grid + 1)
        X, Y = np.meshgrid(xs, ys, indexing="ij")
        TX = np.broadcast_to(txs[:, None], X.shape)
        vals = fam.value(X, fam.value(TX, Y))
        _, hi_pad, _ = padded_extrema(vals, (x_hi - x_lo) / grid, (threshold - J[0]) / grid)
        sup = max(sup, float(hi_pad))
    dim_c = math.log(len(digits)) / math.log(4.0)
    passed = sup < threshold
    return StripBoundVerdict(
        passed, sup, threshold, x_window, digits, dim_c, 1.0 + dim_c if passed else None
    )


# -- consistency helpers ------------------------------------------------------


def markov_approx_entropy(sys: BakerSystem, order: int) -> tuple[float, float]:
    """(entropy rate of the order-n Markov approximation of Lebesgue,
    integral of log tau' against Lebesgue), both from cylinder masses."""
    n = 2**order
    words = np.arange(n)
    mass = np.ones(n)
    a = sys.a
    for j in range(order):
        bit = (words >> (order - 1 - j)) & 1
        mass *= np.where(bit == 1, 1.0 - a, a)
    prefix_mass = np.ones(n // 2)
    words_v = np.arange(n // 2)
    for j in range(order - 1):
        bit = (words_v >> (order - 2 - j)) & 1
        prefix_mass *= np.where(bit == 1, 1.0 - a, a)
    h = float(-(mass * np.log(mass)).sum() + (prefix_mass * np.log(prefix_mass)).sum())
    first = (words >> (order - 1)) & 1
    ltp = np.where(first == 0, -np.log(a), -np.log(1.0 - a))
    return h, float((mass * ltp).sum())


def write_dimension_csv(path: str, rows: list[tuple]) -> str:
    return write_csv(
        path,
        ["scenario", "phi_hat", "n", "q_star", "s_star", "dim", "gap_diagnostic"],
        rows,
    )
