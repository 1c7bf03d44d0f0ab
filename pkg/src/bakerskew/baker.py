"""Generalized baker map on the unit square.

T(xi, x) = (tau(xi), a*x) for xi in [0,a) and (tau(xi), a+(1-a)*x) for
xi in [a,1), with tau the piecewise-affine expanding factor and
sigma(xi) = 1/tau'(xi) the vertical contraction.  The second coordinate is
the one the fibre maps depend on; it contracts forward and expands backward,
so the x-coordinate of T^{-j}(xi, x) is tau^j(x).
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

# Enumerating 2^p branch words; beyond this the point list is useless anyway.
_MAX_PERIOD = 20


@dataclass(frozen=True)
class BakerSystem:
    """Base dynamics with split parameter a in (0,1). Immutable, pure methods."""

    a: float = 0.5

    def __post_init__(self):
        if not 0.0 < self.a < 1.0:
            raise ValueError(f"split parameter must lie in (0,1), got {self.a}")

    # -- expanding factor ------------------------------------------------

    def tau(self, x):
        """tau(x) = x/a on [0,a), (x-a)/(1-a) on [a,1). Branch boundary maps right."""
        x = np.asarray(x, dtype=float)
        a = self.a
        out = np.where(x < a, x / a, (x - a) / (1.0 - a))
        return out if out.ndim else float(out)

    def tau_prime(self, x):
        x = np.asarray(x, dtype=float)
        a = self.a
        out = np.where(x < a, 1.0 / a, 1.0 / (1.0 - a))
        return out if out.ndim else float(out)

    def sigma(self, xi):
        """Contraction factor of the branch of xi; sigma = 1/tau'."""
        xi = np.asarray(xi, dtype=float)
        a = self.a
        out = np.where(xi < a, a, 1.0 - a)
        return out if out.ndim else float(out)

    def contract(self, xi, x):
        """Second coordinate of T(xi, x): a*x or a+(1-a)*x by the branch of xi."""
        xi = np.asarray(xi, dtype=float)
        x = np.asarray(x, dtype=float)
        a = self.a
        out = np.where(xi < a, a * x, a + (1.0 - a) * x)
        return out if out.ndim else float(out)

    # -- full map ---------------------------------------------------------

    def forward(self, xi, x):
        """T(xi, x). Inputs in [0,1)^2."""
        return self.tau(xi), self.contract(xi, x)

    def inverse(self, xi, x):
        """Unique preimage of (xi, x); branch chosen by x in [0,a) vs [a,1)."""
        xi = np.asarray(xi, dtype=float)
        x = np.asarray(x, dtype=float)
        a = self.a
        xi_pre = np.where(x < a, a * xi, a + (1.0 - a) * xi)
        x_pre = np.where(x < a, x / a, (x - a) / (1.0 - a))
        if xi_pre.ndim:
            return xi_pre, x_pre
        return float(xi_pre), float(x_pre)

    def tau_orbit(self, x, n: int) -> np.ndarray:
        """Forward tau-orbit [x, tau x, ..., tau^n x]; x may be an array."""
        x = np.atleast_1d(np.asarray(x, dtype=float))
        orbit = np.empty((n + 1,) + x.shape)
        orbit[0] = x
        for j in range(n):
            orbit[j + 1] = self.tau(orbit[j])
        return orbit

    # -- periodic points of tau -------------------------------------------

    def periodic_points(self, p: int, primitive_only: bool = False) -> np.ndarray:
        """All fixed points of tau^p in [0,1), sorted.

        For a = 1/2 these are exactly k/(2^p - 1); for general a the fixed
        point inside each branch-word cylinder is solved from the affine
        piece of tau^p on that cylinder.  The all-right word has its fixed
        point at x = 1 and is excluded.  With primitive_only, points whose
        primitive period properly divides p are dropped.
        """
        if p < 1:
            raise ValueError("period must be >= 1")
        if p > _MAX_PERIOD:
            raise ValueError(f"period {p} exceeds the exact-representation cap {_MAX_PERIOD}")
        a = self.a
        if a == 0.5:
            denom = 2**p - 1
            points = np.array([k / denom for k in range(denom)])
        else:
            points = []
            for word in range(2**p):
                lo, length = 0.0, 1.0
                skip = False
                for i in range(p):
                    bit = (word >> (p - 1 - i)) & 1
                    if bit == 0:
                        length *= a
                    else:
                        lo, length = lo + length * a, length * (1.0 - a)
                    # numerical guard; cylinders of depth <= 20 stay well sized
                    if length <= 0.0:
                        skip = True
                        break
                if skip or word == 2**p - 1:
                    continue
                points.append(lo / (1.0 - length))
            points = np.array(sorted(points))
        if primitive_only and p > 1:
            keep = np.ones(len(points), dtype=bool)
            for d in range(1, p):
                if p % d:
                    continue
                sub = self.periodic_points(d)
                for j, x in enumerate(points):
                    if keep[j] and np.min(np.abs(sub - x)) < 1e-12:
                        keep[j] = False
            points = points[keep]
        return points

    def cylinder(self, word) -> tuple[float, float]:
        """Interval [lo, lo+len) of points whose first tau-digits equal word."""
        lo, length = 0.0, 1.0
        a = self.a
        for bit in word:
            if bit == 0:
                length *= a
            else:
                lo, length = lo + length * a, length * (1.0 - a)
        return lo, length

    # -- generic long orbits ------------------------------------------------

    def float_digits(self, x: float, n: int) -> np.ndarray:
        """First n branch digits of the tau-orbit of the float x (exact)."""
        digits = np.zeros(n, dtype=np.uint8)
        a = self.a
        x = float(x) % 1.0
        for j in range(n):
            digits[j] = 0 if x < a else 1
            x = x / a if x < a else (x - a) / (1.0 - a)
        return digits

    def generic_orbit(
        self,
        n: int,
        rng: np.random.Generator,
        start: np.ndarray | float | None = None,
        batch: int = 1,
    ) -> tuple[np.ndarray, np.ndarray]:
        """Tau-orbit values and branch digits of generic points, shape (n, batch).

        For a = 1/2 every float is dyadic, so its exact tau-orbit collapses
        to the fixed point 0 within the mantissa width; a genuine generic
        orbit is built here from an explicit digit stream (the start's own
        digits, continued with seeded random bits) with orbit values read
        off 52-digit windows.  For other split parameters plain float
        iteration behaves generically and is used directly.
        """
        if start is not None:
            starts = np.atleast_1d(np.asarray(start, dtype=float))
            batch = len(starts)
        else:
            starts = rng.random(batch)
        if self.a != 0.5:
            xs = np.empty((n, batch))
            digits = np.empty((n, batch), dtype=np.uint8)
            x = starts.copy()
            for j in range(n):
                xs[j] = x
                digits[j] = (x >= self.a).astype(np.uint8)
                x = np.asarray(self.tau(x))
            return xs, digits
        width = 52
        stream = np.empty((n + width, batch), dtype=np.uint8)
        for b in range(batch):
            stream[:width, b] = self.float_digits(starts[b], width)
        stream[width:] = rng.integers(0, 2, size=(n, batch), dtype=np.uint8)
        digits = stream[:n]
        # x_j from the 52-digit window starting at j, via exact integer shifts
        powers = 0.5 ** np.arange(1, width + 1)
        xs = np.empty((n, batch))
        window = stream[:width].astype(float)
        xs[0] = powers @ window
        for j in range(1, n):
            xs[j] = 2.0 * xs[j - 1] - stream[j - 1] + stream[j - 1 + width] * powers[-1]
        return xs, digits
