"""Small shared helpers: deterministic CSV writing and grid utilities."""

from __future__ import annotations

import os
from typing import Iterable, Sequence

import numpy as np


def fmt(value) -> str:
    """Shortest round-trip decimal form; deterministic across runs."""
    if isinstance(value, (bool, np.bool_)):
        return "1" if value else "0"
    if isinstance(value, (int, np.integer)):
        return str(int(value))
    if isinstance(value, (float, np.floating)):
        return repr(float(value))
    return str(value)


def write_csv(path: str, header: Sequence[str], rows: Iterable[Sequence]) -> str:
    """Write rows with a one-line header. Single writer, LF endings, repr floats."""
    directory = os.path.dirname(path)
    if directory:
        os.makedirs(directory, exist_ok=True)
    with open(path, "w", newline="\n") as fh:
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(fmt(v) for v in row) + "\n")
    return path


def unit_grid(n: int) -> np.ndarray:
    """Uniform grid of n points on [0,1) (left endpoints)."""
    return np.arange(n, dtype=float) / n


def closed_grid(lo: float, hi: float, n: int) -> np.ndarray:
    """n+1 points including both endpoints (cell corners for padded extrema)."""
    return np.linspace(lo, hi, n + 1)


def interp_periodic(xs: np.ndarray, values: np.ndarray, x: np.ndarray) -> np.ndarray:
    """Linear interpolation of grid data on [0,1), wrapping the last cell to x=1."""
    xs_ext = np.concatenate([xs, [1.0]])
    vals_ext = np.concatenate([values, [values[0]]])
    return np.interp(np.mod(x, 1.0), xs_ext, vals_ext)
