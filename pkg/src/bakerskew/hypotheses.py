"""Numerical certification of the standing hypotheses on T x J.

Certifies, for a family and base system and closed intervals I inside J:
  * monotone fibre maps (inf f' > 0) and negative Schwarzian on T x J,
  * uniform expansion inf tau'(x) * f'_{tau x}(y) > 1,
  * invariance f(T^2 x J) inside the interior of I, with I inside J interior.

Extrema are taken on inclusive corner grids with a second-order padding:
on each cell the sup exceeds the best corner by at most h^2/8 times a bound
on the second derivative along each axis (applied per axis in sequence), and
the second-derivative bounds are measured gridwise with a 1.05 safety
factor.  This sharp model is needed because the certified example's
invariance margin is only a few 1e-4.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .baker import BakerSystem
from .errors import CertificateFailure
from .fibre import ArctanFamily, FibreFamily, eval_derivs
from .util import write_csv

SAFETY = 1.05


def padded_extrema(values: np.ndarray, hx: float, hy: float) -> tuple[float, float, float]:
    """(padded min, padded max, pad) for a field sampled on cell corners."""
    values = np.asarray(values, dtype=float)
    pad = 0.0
    if values.ndim == 1:
        values = values[:, None]
    # h^2/8 * sup|f''| with f'' estimated by double differences at step h:
    # the h^2 factors cancel, leaving |second difference|/8 per axis
    if values.shape[0] >= 3 and hx > 0.0:
        pad += np.max(np.abs(np.diff(values, 2, axis=0))) / 8.0
    if values.shape[1] >= 3 and hy > 0.0:
        pad += np.max(np.abs(np.diff(values, 2, axis=1))) / 8.0
    pad *= SAFETY
    return float(np.min(values) - pad), float(np.max(values) + pad), float(pad)


@dataclass(frozen=True)
class HypothesisCertificate:
    """Margins with padding already subtracted; pass iff all margins positive."""

    I: tuple[float, float]
    J: tuple[float, float]
    expansion_margin: float
    invariance_margin: float
    schwarzian_max: float
    monotone_min: float
    eps0: float
    grid: tuple[int, int]
    pads: dict = field(default_factory=dict)
    decisive: bool = True

    @property
    def passed(self) -> bool:
        return (
            self.expansion_margin > 0.0
            and self.invariance_margin > 0.0
            and self.schwarzian_max < 0.0
            and self.monotone_min > 0.0
            and self.eps0 > 0.0
        )

    @property
    def binding(self) -> str:
        """Name of the constraint with the smallest (worst) margin."""
        margins = {
            "expansion": self.expansion_margin,
            "invariance": self.invariance_margin,
            "schwarzian": -self.schwarzian_max,
            "monotone": self.monotone_min,
            "nesting": self.eps0,
        }
        return min(margins, key=margins.get)

    def lines(self) -> list[str]:
        return [
            f"pass: {self.passed}",
            f"binding: {self.binding}",
            f"I: [{self.I[0]!r}, {self.I[1]!r}]",
            f"J: [{self.J[0]!r}, {self.J[1]!r}]",
            f"expansion_margin: {self.expansion_margin!r}",
            f"invariance_margin: {self.invariance_margin!r}",
            f"schwarzian_max: {self.schwarzian_max!r}",
            f"monotone_min: {self.monotone_min!r}",
            f"eps0: {self.eps0!r}",
            f"grid: {self.grid[0]}x{self.grid[1]}",
            f"decisive: {self.decisive}",
        ]


def check_hypotheses(
    fam: FibreFamily,
    sys: BakerSystem,
    I: tuple[float, float],
    J: tuple[float, float],
    grid: int | tuple[int, int] = 1000,
) -> HypothesisCertificate:
    """Certificate for given intervals. grid counts cells per axis (>= 100).

    Fail verdicts are returned as data; only invalid intervals raise.
    """
    if not (J[0] < I[0] <= I[1] < J[1] or (J[0] <= I[0] <= I[1] <= J[1])):
        raise ValueError("need I inside J")
    nx, ny = (grid, grid) if isinstance(grid, int) else grid
    if nx < 100 or ny < 100:
        raise ValueError("grid must be at least 100 cells per axis")

    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(J[0], J[1], ny + 1)
    hx, hy = 1.0 / nx, (J[1] - J[0]) / ny
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    f = fam.value(X, Y)
    fy = fam.dy(X, Y)
    schw = fam.dyyy(X, Y) / fy - 1.5 * (fam.dyy(X, Y) / fy) ** 2

    fy_lo, _, pad_fy = padded_extrema(fy, hx, hy)
    # tau maps each branch onto [0,1), so the expansion inf factorizes into
    # the weakest branch expansion times the global inf of f'
    weakest = 1.0 / max(sys.a, 1.0 - sys.a)
    expansion_margin = weakest * fy_lo - 1.0

    f_lo, f_hi, pad_f = padded_extrema(f, hx, hy)
    invariance_margin = min(I[1] - f_hi, f_lo - I[0])

    _, schw_hi, pad_s = padded_extrema(schw, hx, hy)
    eps0 = min(I[0] - J[0], J[1] - I[1])

    return HypothesisCertificate(
        I=(float(I[0]), float(I[1])),
        J=(float(J[0]), float(J[1])),
        expansion_margin=float(expansion_margin),
        invariance_margin=float(invariance_margin),
        schwarzian_max=float(schw_hi),
        monotone_min=float(fy_lo),
        eps0=float(eps0),
        grid=(nx, ny),
        pads={"f": pad_f, "fy": pad_fy, "schwarzian": pad_s},
    )


def auto_interval(
    fam: FibreFamily, J: tuple[float, float], grid: tuple[int, int] = (256, 512)
) -> tuple[float, float] | None:
    """Auto choice of I: padded image hull of f(T x J) inflated by 10% of slack.

    Returns None when the padded hull is not strictly inside J (no valid I).
    """
    nx, ny = grid
    xs = np.linspace(0.0, 1.0, nx + 1)
    ys = np.linspace(J[0], J[1], ny + 1)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    f_lo, f_hi, _ = padded_extrema(fam.value(X, Y), 1.0 / nx, (J[1] - J[0]) / ny)
    slack_lo = f_lo - J[0]
    slack_hi = J[1] - f_hi
    if slack_lo <= 0.0 or slack_hi <= 0.0:
        return None
    return (f_lo - 0.1 * slack_lo, f_hi + 0.1 * slack_hi)


def check_hypotheses_adaptive(
    fam: FibreFamily,
    sys: BakerSystem,
    I: tuple[float, float],
    J: tuple[float, float],
    grid: tuple[int, int] = (128, 512),
    max_refine: int = 4,
) -> HypothesisCertificate:
    """Refine the grid x2 while any verdict is within its padding of flipping."""
    nx, ny = grid
    cert = check_hypotheses(fam, sys, I, J, (nx, ny))
    for _ in range(max_refine):
        worst = min(
            cert.expansion_margin,
            cert.invariance_margin,
            -cert.schwarzian_max,
            cert.monotone_min,
        )
        biggest_pad = max(cert.pads.values())
        if worst > 0.0 or worst < -2.0 * biggest_pad:
            return cert
        nx, ny = 2 * nx, 2 * ny
        cert = check_hypotheses(fam, sys, I, J, (nx, ny))
    if min(cert.expansion_margin, cert.invariance_margin) <= 0.0:
        object.__setattr__(cert, "decisive", False)
    return cert


@dataclass
class RegionScan:
    """Boolean pass map over a (M, r) parameter rectangle at fixed eps."""

    eps: float
    M_values: np.ndarray
    r_values: np.ndarray
    passed: np.ndarray
    expansion_margin: np.ndarray
    invariance_margin: np.ndarray

    def to_csv(self, path: str) -> str:
        rows = []
        for i, M in enumerate(self.M_values):
            for j, r in enumerate(self.r_values):
                rows.append(
                    (
                        M,
                        r,
                        int(self.passed[i, j]),
                        self.expansion_margin[i, j],
                        self.invariance_margin[i, j],
                    )
                )
        return write_csv(path, ["M", "r", "pass", "expansion_margin", "invariance_margin"], rows)


def scan_region(
    eps: float,
    M_range: tuple[float, float],
    r_range: tuple[float, float],
    grid: tuple[int, int] = (100, 100),
    a: float = 0.5,
    inner_grid: tuple[int, int] = (128, 512),
    max_refine: int = 4,
) -> RegionScan:
    """Scan the arctan family's (M, r) rectangle; I is chosen automatically.

    Each cell runs the adaptive certificate with J = [-M, M].  Cells where
    no valid I exists fail with the invariance margin as the (negative)
    slack.  Cell evaluations are independent and deterministic.
    """
    nM, nr = grid
    if nM < 50 or nr < 50:
        raise ValueError("scan grid must be at least 50x50")
    sys = BakerSystem(a)
    M_values = np.linspace(M_range[0], M_range[1], nM)
    r_values = np.linspace(r_range[0], r_range[1], nr)
    passed = np.zeros((nM, nr), dtype=bool)
    exp_m = np.zeros((nM, nr))
    inv_m = np.zeros((nM, nr))
    for i, M in enumerate(M_values):
        for j, r in enumerate(r_values):
            fam = ArctanFamily(float(r), float(eps))
            J = (-float(M), float(M))
            I = auto_interval(fam, J, grid=(inner_grid[0], inner_grid[1]))
            if I is None:
                nx, ny = inner_grid
                xs = np.linspace(0.0, 1.0, nx + 1)
                ysg = np.linspace(J[0], J[1], ny + 1)
                X, Y = np.meshgrid(xs, ysg, indexing="ij")
                f_lo, f_hi, _ = padded_extrema(fam.value(X, Y), 1.0 / nx, 2 * M / ny)
                inv_m[i, j] = min(J[1] - f_hi, f_lo - J[0])
                fy_lo, _, _ = padded_extrema(fam.dy(X, Y), 1.0 / nx, 2 * M / ny)
                exp_m[i, j] = fy_lo / max(a, 1.0 - a) - 1.0
                continue
            cert = check_hypotheses_adaptive(fam, sys, I, J, inner_grid, max_refine)
            passed[i, j] = cert.passed
            exp_m[i, j] = cert.expansion_margin
            inv_m[i, j] = cert.invariance_margin
    return RegionScan(eps, M_values, r_values, passed, exp_m, inv_m)


def require_certificate(cert: HypothesisCertificate) -> HypothesisCertificate:
    """Raise CertificateFailure on a failed certificate (CLI exit code 2)."""
    if not cert.passed:
        raise CertificateFailure(
            f"hypothesis certificate failed; binding constraint: {cert.binding}"
        )
    return cert
