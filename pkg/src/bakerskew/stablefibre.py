"""Strong stable vector field X3 and strong stable fibres.

X3(xi, x, y) = -sum_k Gamma^k(xi, x, y) * A(f^k(xi, x, y)) with
Gamma = sigma(xi)/f'_x(y) and A = (df/dx)/f'_x, truncated once the
geometric tail ||Gamma||^N sup|A|/(1-||Gamma||) is below target.  Strong
stable fibres solve ell'(u) = X3(xi, u, ell(u)) with ell(x) = y, integrated
by a classical fourth-order one-step scheme until u = 0, u = 1 or the
solution exits J.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from . import _kernels
from .baker import BakerSystem
from .errors import DomainError, FibreEscapeError
from .fibre import BoundConstants, FibreFamily, bound_constants
from .util import write_csv

J_SLACK = 1e-9


@dataclass(frozen=True)
class StableField:
    """Truncated series evaluator with certified tail bound."""

    fam: FibreFamily
    sys: BakerSystem
    J: tuple[float, float]
    I: tuple[float, float] | None
    constants: BoundConstants
    n_terms: int
    tail_bound: float
    slope_bound: float  # measured sup |X3| over I^2 x J, with safety factor
    eps0: float | None

    @property
    def delta(self) -> float | None:
        """Guaranteed half-width of fibre domains anchored in I (eps0 / L)."""
        if self.eps0 is None or self.slope_bound == 0.0:
            return None
        return self.eps0 / self.slope_bound

    def tail_at(self, n_terms: int) -> float:
        g = self.constants.gamma_norm
        return self.constants.sup_a * g**n_terms / (1.0 - g)


def _tail_terms(bc: BoundConstants, target: float) -> int:
    if bc.sup_a == 0.0:
        return 1
    g = bc.gamma_norm
    n = math.log(target * (1.0 - g) / bc.sup_a) / math.log(g)
    return max(1, int(math.ceil(n)))


def build_field(
    fam: FibreFamily,
    sys: BakerSystem,
    J: tuple[float, float],
    I: tuple[float, float] | None = None,
    tail_target: float = 1e-10,
    grid: int = 400,
    norm_grid: tuple[int, int, int] = (48, 48, 9),
) -> StableField:
    """Measure norms, choose the truncation, and bound the fibre slope.

    Raises FibreEscapeError if ||Gamma|| >= 1 (weak contraction violated:
    the series does not converge).
    """
    bc = bound_constants(fam, sys, J, grid)
    if bc.gamma_norm >= 1.0:
        raise FibreEscapeError(
            f"||Gamma|| = {bc.gamma_norm:.4f} >= 1; weak-contraction hypothesis fails on J"
        )
    n_terms = _tail_terms(bc, tail_target)
    tail = bc.sup_a * bc.gamma_norm**n_terms / (1.0 - bc.gamma_norm)
    field = StableField(fam, sys, J, I, bc, n_terms, tail, 0.0, None)
    # measured sup |X3| over a coarse 3-d grid, padded by the tail and safety
    nxi, nx, ny = norm_grid
    xi = np.linspace(0.0, 1.0, nxi)
    x = np.linspace(0.0, 1.0, nx)
    y = np.linspace(J[0], J[1], ny)
    XI, X, Y = np.meshgrid(xi, x, y, indexing="ij")
    vals = x3_eval(field, XI.ravel(), X.ravel(), Y.ravel())
    slope = (float(np.max(np.abs(vals))) + tail) * 1.05
    eps0 = None
    if I is not None:
        eps0 = min(I[0] - J[0], J[1] - I[1])
        if eps0 <= 0:
            raise ValueError("I must be contained in the interior of J")
    return StableField(fam, sys, J, I, bc, n_terms, tail, slope, eps0)


def x3_eval(field: StableField, xi, x, y) -> np.ndarray:
    """Truncated series along the forward skew orbit; error <= field.tail_bound.

    Vectorized over (xi, x, y); inputs must satisfy y in J (up to slack).
    """
    fam, sys = field.fam, field.sys
    xi = np.asarray(xi, dtype=float)
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    lo, hi = field.J
    span = hi - lo
    if np.any(y < lo - J_SLACK * span) or np.any(y > hi + J_SLACK * span):
        raise FibreEscapeError("x3_eval called with y outside J")
    shape = np.broadcast_shapes(xi.shape, x.shape, y.shape)
    cxi = np.broadcast_to(xi, shape).astype(float).copy()
    cx = np.broadcast_to(x, shape).astype(float).copy()
    cy = np.broadcast_to(y, shape).astype(float).copy()
    total = np.zeros(shape)
    weight = np.ones(shape)
    for _ in range(field.n_terms):
        fy = fam.dy(cx, cy)
        total += weight * fam.dx_part(cx, cy) / fy
        weight *= sys.sigma(cxi) / fy
        cy_new = fam.value(cx, cy)
        cx = sys.contract(cxi, cx)
        cxi = np.asarray(sys.tau(cxi))
        cy = np.asarray(cy_new)
    out = -total
    return out if out.ndim else float(out)


def functional_equation_residual(field: StableField, xi, x, y) -> np.ndarray:
    """|X3 + A - Gamma * X3 o f|; at truncation N this is exactly the dropped
    term, so it is bounded by 2x the certified tail."""
    fam, sys = field.fam, field.sys
    x3_here = x3_eval(field, xi, x, y)
    fy = fam.dy(x, y)
    a_term = fam.dx_part(x, y) / fy
    gamma = sys.sigma(xi) / fy
    xi1 = np.asarray(sys.tau(xi))
    x1 = np.asarray(sys.contract(xi, x))
    y1 = np.asarray(fam.value(x, y))
    x3_next = x3_eval(field, xi1, x1, y1)
    return np.abs(x3_here + a_term - gamma * x3_next)


@dataclass
class StableFibre:
    """Sampled solution u -> ell(u) of the strong stable IVP."""

    xi: float
    x_anchor: float
    y_anchor: float
    us: np.ndarray
    values: np.ndarray
    h: float
    n_terms: int
    domain_full: bool

    @property
    def domain(self) -> tuple[float, float]:
        return float(self.us[0]), float(self.us[-1])

    def interp(self, u) -> np.ndarray:
        u = np.asarray(u, dtype=float)
        out = np.interp(u, self.us, self.values, left=np.nan, right=np.nan)
        out = np.where((u < self.us[0]) | (u > self.us[-1]), np.nan, out)
        return out if out.ndim else float(out)

    @property
    def slope_max(self) -> float:
        return float(np.max(np.abs(np.diff(self.values) / np.diff(self.us))))

    def to_csv(self, path: str) -> str:
        rows = [
            (self.xi, self.x_anchor, self.y_anchor, u, v)
            for u, v in zip(self.us, self.values)
        ]
        return write_csv(path, ["xi", "x_anchor", "y_anchor", "u", "ell_u"], rows)


def _integrate_generic(field: StableField, xi, x, y, h):
    """Pure-Python fallback for families without a compiled kernel. Slow;
    intended for cross-checks and short domains."""
    lo, hi = field.J

    def rhs(u, w):
        return float(x3_eval(field, xi, u, min(max(w, lo), hi)))

    def rk4(u, w, step):
        k1 = rhs(u, w)
        k2 = rhs(u + 0.5 * step, w + 0.5 * step * k1)
        k3 = rhs(u + 0.5 * step, w + 0.5 * step * k2)
        k4 = rhs(u + step, w + step * k3)
        return w + (step / 6.0) * (k1 + 2 * k2 + 2 * k3 + k4)

    tiny = 1e-12

    def extend(direction):
        us, ws = [], []
        u, w = x, y
        while True:
            step = min(h, 1.0 - u) if direction > 0 else min(h, u)
            if step <= tiny:
                break
            w_new = rk4(u, w, direction * step)
            if not lo <= w_new <= hi:
                break
            u = min(u + step, 1.0) if direction > 0 else max(u - step, 0.0)
            w = w_new
            if direction > 0 and 1.0 - u <= tiny:
                u = 1.0
            if direction < 0 and u <= tiny:
                u = 0.0
            us.append(u)
            ws.append(w)
        return us, ws

    us_r, ws_r = extend(+1)
    us_l, ws_l = extend(-1)
    us = np.array(us_l[::-1] + [x] + us_r)
    ws = np.array(ws_l[::-1] + [y] + ws_r)
    return us, ws, bool(us[0] <= 0.0), bool(us[-1] >= 1.0)


def integrate_fibre(field: StableField, xi: float, x: float, y: float, h: float = 1e-4) -> StableFibre:
    """Strong stable fibre through (xi, x, y); stops at u=0, u=1 or J-exit.

    For anchors with y in I the domain is guaranteed to contain the
    delta-neighborhood of x with delta = eps0/L; a shorter domain indicates
    corrupted bounds and raises DomainError.
    """
    if h > 1e-3:
        raise ValueError("step h must be <= 1e-3")
    lo, hi = field.J
    if not lo <= y <= hi:
        raise FibreEscapeError("fibre anchor outside J")
    params = field.fam.kernel_params()
    if params is not None:
        r, eps = params
        us, ws, reached_l, reached_r = _kernels.integrate_arctan_fibre(
            float(xi), float(x), float(y), float(h), r, eps, field.sys.a,
            field.n_terms, lo, hi,
        )
    else:
        us, ws, reached_l, reached_r = _integrate_generic(field, xi, x, y, h)
    fibre = StableFibre(
        float(xi), float(x), float(y), us, ws, h, field.n_terms,
        bool(reached_l and reached_r),
    )
    delta = field.delta
    if delta is not None and field.I is not None and field.I[0] <= y <= field.I[1]:
        want_lo = max(0.0, x - delta)
        want_hi = min(1.0, x + delta)
        if us[0] > want_lo + h or us[-1] < want_hi - h:
            raise DomainError(
                f"fibre domain [{us[0]:.6f}, {us[-1]:.6f}] misses the guaranteed "
                f"delta-neighborhood [{want_lo:.6f}, {want_hi:.6f}]"
            )
    return fibre


@dataclass(frozen=True)
class EquivarianceReport:
    residual: float
    envelope: float
    excluded: int
    n: int


def skew_forward(fam: FibreFamily, sys: BakerSystem, xi, x, y, n: int):
    """n-fold forward skew-product image of (xi, x, y); vectorized."""
    cxi = np.asarray(xi, dtype=float).copy()
    cx = np.asarray(x, dtype=float).copy()
    cy = np.asarray(y, dtype=float).copy()
    for _ in range(n):
        cy = np.asarray(fam.value(cx, cy))
        cx = np.asarray(sys.contract(cxi, cx))
        cxi = np.asarray(sys.tau(cxi))
    return cxi, cx, cy


def equivariance_residual(
    fibre: StableFibre, field: StableField, n: int, subsample: int = 50
) -> EquivarianceReport:
    """max_u |f^n(ell(u)) - ell_n(pi_n(u))| over sampled u, with its
    theoretical envelope L * max(a, 1-a)^n * |domain|.

    Samples whose base image leaves the integrated domain of ell_n are
    excluded and counted.
    """
    fam, sys = field.fam, field.sys
    if n == 0:
        return EquivarianceReport(0.0, 0.0, 0, 0)
    idx = np.linspace(0, len(fibre.us) - 1, min(subsample, len(fibre.us))).astype(int)
    us = fibre.us[idx]
    vals = fibre.values[idx]
    xi_n, x_anchor_n, y_anchor_n = skew_forward(
        fam, sys, fibre.xi, fibre.x_anchor, fibre.y_anchor, n
    )
    fibre_n = integrate_fibre(field, float(xi_n), float(x_anchor_n), float(y_anchor_n), fibre.h)
    _, u_img, y_img = skew_forward(fam, sys, np.full(us.shape, fibre.xi), us, vals, n)
    pred = fibre_n.interp(u_img)
    ok = np.isfinite(pred)
    residual = float(np.max(np.abs(y_img[ok] - pred[ok]))) if np.any(ok) else np.nan
    width = fibre.us[-1] - fibre.us[0]
    envelope = field.slope_bound * max(sys.a, 1.0 - sys.a) ** n * width
    return EquivarianceReport(residual, envelope, int(np.sum(~ok)), n)
