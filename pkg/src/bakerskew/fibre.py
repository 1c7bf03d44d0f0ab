"""Fibre-map families f_x(y) and orbit composition.

A family provides f and its derivatives in closed form; the arctan family
f_x(y) = arctan(r*y) + eps*cos(2*pi*x) is the working example.  Orbits can
be driven either by the expanding factor tau on x (the default contract) or
by the true skew product, where x contracts along the branch word of xi.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple

import numpy as np

from .baker import BakerSystem
from .errors import FibreEscapeError, RootSeparationError


class DerivRecord(NamedTuple):
    f: np.ndarray
    f_y: np.ndarray
    f_xpart: np.ndarray
    f_yy: np.ndarray
    f_yyy: np.ndarray
    schwarzian: np.ndarray


class FixedPoint(NamedTuple):
    y: float
    derivative: float
    stability: str  # "stable" | "unstable" | "neutral"


class FibreFamily:
    """Base class; subclasses supply value/dy/dx_part/dyy/dyyy (vectorized)."""

    def value(self, x, y):
        raise NotImplementedError

    def dy(self, x, y):
        raise NotImplementedError

    def dx_part(self, x, y):
        raise NotImplementedError

    def dyy(self, x, y):
        raise NotImplementedError

    def dyyy(self, x, y):
        raise NotImplementedError

    # hook for the numba fast path; None means use the generic integrator
    def kernel_params(self):
        return None

    def inverse_y(self, x, target, lo: float, hi: float, iters: int = 100):
        """Solve f_x(w) = target for w in [lo, hi] by bisection (f_x increasing).

        Vectorized over x/target.  Targets outside f_x([lo,hi]) return NaN.
        """
        x = np.asarray(x, dtype=float)
        target = np.asarray(target, dtype=float)
        shape = np.broadcast_shapes(x.shape, target.shape)
        a = np.broadcast_to(np.full_like(target, lo, dtype=float), shape).copy()
        b = np.broadcast_to(np.full_like(target, hi, dtype=float), shape).copy()
        bad = (self.value(x, a) > target) | (self.value(x, b) < target)
        for _ in range(iters):
            mid = 0.5 * (a + b)
            below = self.value(x, mid) < target
            a = np.where(below, mid, a)
            b = np.where(below, b, mid)
        out = 0.5 * (a + b)
        out = np.where(bad, np.nan, out)
        return out if out.ndim else float(out)


@dataclass(frozen=True)
class ArctanFamily(FibreFamily):
    """f_x(y) = arctan(r*y) + eps*cos(2*pi*x), increasing with S f = -2r^2/(1+r^2 y^2)^2."""

    r: float = 1.1
    eps: float = 0.0

    def __post_init__(self):
        if self.r <= 0:
            raise ValueError("steepness r must be positive")
        if self.eps < 0:
            raise ValueError("forcing amplitude eps must be >= 0")

    def value(self, x, y):
        return np.arctan(self.r * np.asarray(y, dtype=float)) + self.eps * np.cos(
            2.0 * np.pi * np.asarray(x, dtype=float)
        )

    def dy(self, x, y):
        y = np.asarray(y, dtype=float)
        out = self.r / (1.0 + (self.r * y) ** 2) + np.zeros_like(np.asarray(x, dtype=float))
        return out

    def dx_part(self, x, y):
        x = np.asarray(x, dtype=float)
        out = -2.0 * np.pi * self.eps * np.sin(2.0 * np.pi * x) + np.zeros_like(
            np.asarray(y, dtype=float)
        )
        return out

    def dyy(self, x, y):
        y = np.asarray(y, dtype=float)
        r = self.r
        out = -2.0 * r**3 * y / (1.0 + (r * y) ** 2) ** 2 + np.zeros_like(
            np.asarray(x, dtype=float)
        )
        return out

    def dyyy(self, x, y):
        y = np.asarray(y, dtype=float)
        r = self.r
        q = 1.0 + (r * y) ** 2
        out = -2.0 * r**3 * (1.0 - 3.0 * (r * y) ** 2) / q**3 + np.zeros_like(
            np.asarray(x, dtype=float)
        )
        return out

    def inverse_y(self, x, target, lo: float, hi: float, iters: int = 100):
        """Closed form: y = tan(target - eps*cos(2 pi x))/r, clipped to the bracket."""
        x = np.asarray(x, dtype=float)
        target = np.asarray(target, dtype=float)
        core = target - self.eps * np.cos(2.0 * np.pi * x)
        out = np.where(
            np.abs(core) < 0.5 * np.pi, np.tan(np.clip(core, -1.55, 1.55)) / self.r, np.nan
        )
        out = np.where((out < lo) | (out > hi), np.nan, out)
        return out if out.ndim else float(out)

    def kernel_params(self):
        return (self.r, self.eps)


def eval_derivs(fam: FibreFamily, x, y) -> DerivRecord:
    """All derivatives plus the Schwarzian S f = f'''/f' - 1.5 (f''/f')^2.

    Raises FibreEscapeError if the family is non-monotone at (x, y).
    """
    f = fam.value(x, y)
    f_y = fam.dy(x, y)
    if np.any(np.asarray(f_y) <= 0.0):
        raise FibreEscapeError("family is not increasing: f_y <= 0 encountered")
    f_yy = fam.dyy(x, y)
    f_yyy = fam.dyyy(x, y)
    schwarzian = f_yyy / f_y - 1.5 * (f_yy / f_y) ** 2
    return DerivRecord(f, f_y, fam.dx_part(x, y), f_yy, f_yyy, schwarzian)


def fixed_points(
    fam: FibreFamily,
    x: float,
    bracket: tuple[float, float],
    tol: float = 1e-12,
    scan_cells: int = 10_000,
) -> list[FixedPoint]:
    """Fixed points of f_x on the bracket: sign-change scan, then bisection.

    The count is verified on a doubled scan; a mismatch raises
    RootSeparationError (caller should refine).  Stability is by f'(y) vs 1,
    with f' == 1 flagged neutral.
    """
    if tol <= 0:
        raise ValueError("tol must be positive")
    lo, hi = bracket
    if not lo < hi:
        raise ValueError("empty bracket")

    def scan(cells: int) -> list[tuple[float, float]]:
        ys = np.linspace(lo, hi, cells + 1)
        g = fam.value(x, ys) - ys
        idx = np.nonzero(np.sign(g[:-1]) * np.sign(g[1:]) < 0)[0]
        hits = [(ys[i], ys[i + 1]) for i in idx]
        # exact zeros on grid nodes
        for i in np.nonzero(g == 0.0)[0]:
            hits.append((ys[i], ys[i]))
        return hits

    hits = scan(scan_cells)
    if len(scan(2 * scan_cells)) != len(hits):
        raise RootSeparationError(
            f"scan with {scan_cells} cells does not separate roots; refine the scan"
        )

    out = []
    for ylo, yhi in sorted(hits):
        if ylo == yhi:
            root = ylo
        else:
            a, b = ylo, yhi
            ga = fam.value(x, a) - a
            while b - a > tol * (1.0 + abs(a)):
                mid = 0.5 * (a + b)
                gm = fam.value(x, mid) - mid
                if gm == 0.0:
                    a = b = mid
                    break
                if np.sign(gm) == np.sign(ga):
                    a, ga = mid, gm
                else:
                    b = mid
            root = 0.5 * (a + b)
        deriv = float(fam.dy(x, root))
        if deriv < 1.0:
            stability = "stable"
        elif deriv > 1.0:
            stability = "unstable"
        else:
            stability = "neutral"
        out.append(FixedPoint(float(root), deriv, stability))
    return out


class OrbitResult(NamedTuple):
    y_n: float
    log_deriv_sum: float


def orbit_compose(
    fam: FibreFamily,
    sys: BakerSystem,
    x: float,
    y: float,
    n: int,
    xi: float | None = None,
    guard: tuple[float, float] | None = None,
) -> OrbitResult:
    """Compose fibre maps along a base orbit, accumulating log f'.

    With xi=None the driving is the expanding orbit x, tau x, ... (equal in
    law to the skew product's fibre process); with xi given, the true skew
    orbit is used, where x contracts along the branch word of xi.
    """
    if n < 0:
        raise ValueError("n must be >= 0")
    ycur = float(y)
    xcur = float(x)
    xicur = float(xi) if xi is not None else None
    total = 0.0
    for j in range(n):
        deriv = float(fam.dy(xcur, ycur))
        if deriv <= 0.0:
            raise FibreEscapeError(f"non-monotone family at step {j}")
        total += np.log(deriv)
        ycur = float(fam.value(xcur, ycur))
        if guard is not None and not guard[0] <= ycur <= guard[1]:
            raise FibreEscapeError(f"fibre orbit left guard interval at step {j + 1}")
        if xicur is None:
            xcur = sys.tau(xcur)
        else:
            xcur = sys.contract(xicur, xcur)
            xicur = sys.tau(xicur)
    return OrbitResult(ycur, total)


def orbit_compose_batch(
    fam: FibreFamily,
    sys: BakerSystem,
    x: np.ndarray,
    y: np.ndarray,
    n: int,
    xi: np.ndarray | None = None,
    checkpoints: tuple[int, ...] = (),
    base_orbit: np.ndarray | None = None,
    contraction_digits: np.ndarray | None = None,
) -> tuple[np.ndarray, np.ndarray, dict[int, np.ndarray]]:
    """Vectorized orbit composition over many start points.

    Driving, in order of precedence: an explicit base orbit (n, batch) of
    x-values; contraction digits (n, batch) steering the true-skew branch
    word; a float xi array (exact float dynamics, fine for short orbits);
    otherwise the expanding float tau-orbit of x.  Long generic orbits at
    a = 1/2 must use one of the first two (see BakerSystem.generic_orbit).
    Returns (y_n, log-derivative sums, {checkpoint: partial sums}).
    """
    xcur = np.array(x, dtype=float, copy=True)
    ycur = np.array(y, dtype=float, copy=True)
    xicur = np.array(xi, dtype=float, copy=True) if xi is not None else None
    total = np.zeros_like(ycur)
    marks: dict[int, np.ndarray] = {}
    a = sys.a
    for j in range(n):
        if base_orbit is not None:
            xcur = base_orbit[j]
        total += np.log(fam.dy(xcur, ycur))
        ycur = fam.value(xcur, ycur)
        if base_orbit is not None:
            pass
        elif contraction_digits is not None:
            d = contraction_digits[j]
            xcur = np.where(d == 0, a * xcur, a + (1.0 - a) * xcur)
        elif xicur is None:
            xcur = sys.tau(xcur)
        else:
            xcur = sys.contract(xicur, xcur)
            xicur = sys.tau(xicur)
        if j + 1 in checkpoints:
            marks[j + 1] = total.copy()
    return ycur, total, marks


# -- bound constants over T x J ------------------------------------------


@dataclass(frozen=True)
class BoundConstants:
    """Grid-measured sup/inf constants on T x J with a 1.05 safety factor.

    gamma_norm = max sigma / inf f' must be < 1 for the strong stable
    construction; sup_a bounds |df/dx / f'|; c0 = sup |d(log f')/dy|;
    c_prime = sup |dA/dy| with the mixed partial taken by central differences.
    """

    gamma_norm: float
    sup_a: float
    c0: float
    c_prime: float
    inf_fy: float
    grid: int

    @property
    def x3_sup_bound(self) -> float:
        return self.sup_a / (1.0 - self.gamma_norm) if self.gamma_norm < 1.0 else np.inf


def bound_constants(
    fam: FibreFamily, sys: BakerSystem, J: tuple[float, float], grid: int = 400
) -> BoundConstants:
    """Measure the Appendix constants by grid maximization (factor 1.05)."""
    xs = np.linspace(0.0, 1.0, grid + 1)
    ys = np.linspace(J[0], J[1], grid + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    rec = eval_derivs(fam, X, Y)
    safety = 1.05
    inf_fy = float(np.min(rec.f_y)) / safety
    a_field = rec.f_xpart / rec.f_y
    sup_a = float(np.max(np.abs(a_field))) * safety
    c0 = float(np.max(np.abs(rec.f_yy / rec.f_y))) * safety
    hy = (J[1] - J[0]) / grid
    dady = np.gradient(a_field, hy, axis=1)
    c_prime = float(np.max(np.abs(dady))) * safety
    sigma_max = max(sys.a, 1.0 - sys.a)
    gamma_norm = sigma_max / inf_fy
    return BoundConstants(gamma_norm, sup_a, c0, c_prime, inf_fy, grid)
