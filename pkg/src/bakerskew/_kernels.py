"""Numba kernels for the arctan family: X3 series, fibre IVP, trajectories.

These are the hot loops: every right-hand-side call of the fibre IVP runs
n_terms forward iterations of the skew product.  Generic families use the
slower pure-Python paths in stablefibre/cli; the kernels are specialized to
f_x(y) = arctan(r*y) + eps*cos(2*pi*x) with split parameter a.
"""

import math

import numpy as np
from numba import njit

TWO_PI = 2.0 * math.pi


@njit(cache=True)
def x3_arctan(xi, x, y, r, eps, a, n_terms):
    """Truncated strong-stable field: -sum Gamma^k * A o f^k at (xi, x, y)."""
    total = 0.0
    weight = 1.0
    cxi, cx, cy = xi, x, y
    for _ in range(n_terms):
        fy = r / (1.0 + (r * cy) * (r * cy))
        a_term = (-TWO_PI * eps * math.sin(TWO_PI * cx)) / fy
        total += weight * a_term
        sigma = a if cxi < a else 1.0 - a
        weight *= sigma / fy
        y_new = math.atan(r * cy) + eps * math.cos(TWO_PI * cx)
        cx = a * cx if cxi < a else a + (1.0 - a) * cx
        cxi = cxi / a if cxi < a else (cxi - a) / (1.0 - a)
        cy = y_new
    return -total


@njit(cache=True)
def _rk4_step(xi, u, w, h, r, eps, a, n_terms, j_lo, j_hi):
    k1 = x3_arctan(xi, u, _clamp(w, j_lo, j_hi), r, eps, a, n_terms)
    k2 = x3_arctan(xi, u + 0.5 * h, _clamp(w + 0.5 * h * k1, j_lo, j_hi), r, eps, a, n_terms)
    k3 = x3_arctan(xi, u + 0.5 * h, _clamp(w + 0.5 * h * k2, j_lo, j_hi), r, eps, a, n_terms)
    k4 = x3_arctan(xi, u + h, _clamp(w + h * k3, j_lo, j_hi), r, eps, a, n_terms)
    return w + (h / 6.0) * (k1 + 2.0 * k2 + 2.0 * k3 + k4)


@njit(cache=True)
def _clamp(v, lo, hi):
    if v < lo:
        return lo
    if v > hi:
        return hi
    return v


@njit(cache=True)
def integrate_arctan_fibre(xi, x0, y0, h, r, eps, a, n_terms, j_lo, j_hi):
    """Classical fourth-order integration left and right from u = x0.

    Stage values are clamped into J (they can poke out by O(h*L) near the
    boundary); a step whose accepted value leaves J stops the extension.
    Returns (u ascending, ell(u)) plus reached-left/right flags.
    """
    tiny = 1e-12
    n_right = int(math.ceil((1.0 - x0) / h)) + 2
    n_left = int(math.ceil((x0 - 0.0) / h)) + 2
    us = np.empty(n_left + n_right + 1)
    ws = np.empty(n_left + n_right + 1)
    us[n_left] = x0
    ws[n_left] = y0

    count_right = 0
    u, w = x0, y0
    reached_right = 1.0 - u <= tiny
    for i in range(n_right):
        step = min(h, 1.0 - u)
        if step <= tiny:
            break
        w_new = _rk4_step(xi, u, w, step, r, eps, a, n_terms, j_lo, j_hi)
        if w_new < j_lo or w_new > j_hi:
            break
        u = min(u + step, 1.0)
        w = w_new
        count_right += 1
        us[n_left + count_right] = u
        ws[n_left + count_right] = w
        if 1.0 - u <= tiny:
            us[n_left + count_right] = 1.0
            reached_right = True
            break

    count_left = 0
    u, w = x0, y0
    reached_left = u <= tiny
    for i in range(n_left):
        step = min(h, u)
        if step <= tiny:
            break
        w_new = _rk4_step(xi, u, w, -step, r, eps, a, n_terms, j_lo, j_hi)
        if w_new < j_lo or w_new > j_hi:
            break
        u = max(u - step, 0.0)
        w = w_new
        count_left += 1
        us[n_left - count_left] = u
        ws[n_left - count_left] = w
        if u <= tiny:
            us[n_left - count_left] = 0.0
            reached_left = True
            break

    lo = n_left - count_left
    hi = n_left + count_right + 1
    return us[lo:hi].copy(), ws[lo:hi].copy(), reached_left, reached_right


@njit(cache=True)
def run_trajectory(digits, xi0, x0, y0, n_steps, r, eps, a, stride, cross_cap):
    """Iterate the full skew product, recording a thinned trajectory and the
    steps at which y changes sign (full resolution).

    For a = 1/2 the base driving comes from the digit stream (length at
    least n_steps + 52): float tau-orbits are dyadic and collapse, so xi is
    reconstructed from a sliding 52-digit window (exact integer shifts) and
    the branch at step j is digits[j].  For other split parameters the
    float orbit of xi0 is generic and digits is ignored.
    """
    n_keep = n_steps // stride + 1
    steps = np.empty(n_keep, dtype=np.int64)
    xis = np.empty(n_keep)
    xs = np.empty(n_keep)
    ys = np.empty(n_keep)
    crossings = np.empty(cross_cap, dtype=np.int64)
    directions = np.empty(cross_cap, dtype=np.int8)
    n_cross = 0
    kept = 0
    use_digits = a == 0.5
    width = 52
    window = np.uint64(0)
    mask = np.uint64((1 << width) - 1)
    scale = 0.5**width
    if use_digits:
        for i in range(width):
            window = (window << np.uint64(1)) | np.uint64(digits[i])
        xi = float(window) * scale
    else:
        xi = xi0
    x, y = x0, y0
    for step in range(n_steps + 1):
        if step % stride == 0:
            steps[kept] = step
            xis[kept] = xi
            xs[kept] = x
            ys[kept] = y
            kept += 1
        if step == n_steps:
            break
        branch = digits[step] if use_digits else (0 if xi < a else 1)
        y_new = math.atan(r * y) + eps * math.cos(TWO_PI * x)
        x = a * x if branch == 0 else a + (1.0 - a) * x
        if use_digits:
            window = ((window << np.uint64(1)) & mask) | np.uint64(digits[step + width])
            xi = float(window) * scale
        else:
            xi = xi / a if xi < a else (xi - a) / (1.0 - a)
        if (y < 0.0 and y_new > 0.0) or (y > 0.0 and y_new < 0.0):
            if n_cross < cross_cap:
                crossings[n_cross] = step + 1
                directions[n_cross] = 1 if y_new > 0.0 else -1
            n_cross += 1
        y = y_new
    kept_cross = min(n_cross, cross_cap)
    return (
        steps[:kept],
        xis[:kept],
        xs[:kept],
        ys[:kept],
        crossings[:kept_cross],
        directions[:kept_cross],
        n_cross,
    )
