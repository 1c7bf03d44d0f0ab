"""Render one figure panel from bakerskew CSV outputs.

Invoked as a script with a figure-spec file:

    bakerskew-figures panel.spec

Spec schema (flat `key = value`, `#` comments):

    kind       = trajectory | levelset | timeseries | region-scan
    trajectory = trajectory_00.csv, trajectory_01.csv   (trajectory/timeseries)
    fibres     = fibre_00.csv, fibre_01.csv, ...        (trajectory overlays)
    levelset   = levelset.csv                           (levelset panels)
    region     = region.csv                             (region-scan panels)
    overlays   = hline:0.3:dashed, hline:-0.3:dotted
    xlim       = 0,1
    ylim       = -1,1
    title      = ...
    dpi        = 150
    out        = panel.png

Expected CSV headers (produced by the bakerskew CLI):
    trajectory: step,xi,x,y      fibre: xi,x_anchor,y_anchor,u,ell_u
    levelset:   x,y,below        region: M,r,pass,expansion_margin,invariance_margin

Rendering is a pure function of the CSV bytes; with a pinned matplotlib
version a re-render is pixel-identical.
"""

from __future__ import annotations

import csv
import sys
from dataclasses import dataclass, field

import matplotlib

matplotlib.use("Agg")

import matplotlib.pyplot as plt
import numpy as np

KINDS = ("trajectory", "levelset", "timeseries", "region-scan")
_STYLES = {"dashed": "--", "dotted": ":", "solid": "-", "dashdot": "-."}


class SpecError(ValueError):
    pass


@dataclass(frozen=True)
class FigureSpec:
    kind: str
    out: str
    trajectory: tuple[str, ...] = ()
    fibres: tuple[str, ...] = ()
    levelset: str | None = None
    region: str | None = None
    overlays: tuple[tuple[float, str], ...] = ()  # (y, linestyle)
    xlim: tuple[float, float] | None = None
    ylim: tuple[float, float] | None = None
    title: str = ""
    dpi: int = 150

    def __post_init__(self):
        if self.kind not in KINDS:
            raise SpecError(f"kind must be one of {KINDS}, got {self.kind!r}")
        if not self.out:
            raise SpecError("spec needs an output path (out = ...)")


def _parse_overlays(raw: str) -> tuple[tuple[float, str], ...]:
    out = []
    for item in raw.split(","):
        item = item.strip()
        if not item:
            continue
        parts = item.split(":")
        if parts[0] != "hline" or len(parts) not in (2, 3):
            raise SpecError(f"overlay must be hline:Y[:style], got {item!r}")
        style = _STYLES.get(parts[2] if len(parts) == 3 else "dashed")
        if style is None:
            raise SpecError(f"unknown overlay style in {item!r}")
        out.append((float(parts[1]), style))
    return tuple(out)


def _parse_pair(raw: str) -> tuple[float, float]:
    parts = [p.strip() for p in raw.split(",")]
    if len(parts) != 2:
        raise SpecError(f"expected 'lo,hi', got {raw!r}")
    return float(parts[0]), float(parts[1])


def load_spec(path: str) -> FigureSpec:
    data: dict = {}
    with open(path) as fh:
        for lineno, line in enumerate(fh, 1):
            stripped = line.split("#", 1)[0].strip()
            if not stripped:
                continue
            if "=" not in stripped:
                raise SpecError(f"{path}:{lineno}: expected 'key = value'")
            key, raw = (s.strip() for s in stripped.split("=", 1))
            data[key] = raw
    kwargs: dict = {"kind": data.pop("kind", ""), "out": data.pop("out", "")}
    for key in ("trajectory", "fibres"):
        if key in data:
            kwargs[key] = tuple(p.strip() for p in data.pop(key).split(",") if p.strip())
    for key in ("levelset", "region", "title"):
        if key in data:
            kwargs[key] = data.pop(key)
    if "overlays" in data:
        kwargs["overlays"] = _parse_overlays(data.pop("overlays"))
    for key in ("xlim", "ylim"):
        if key in data:
            kwargs[key] = _parse_pair(data.pop(key))
    if "dpi" in data:
        kwargs["dpi"] = int(data.pop("dpi"))
    if data:
        raise SpecError(f"unknown spec keys: {sorted(data)}")
    return FigureSpec(**kwargs)


def read_columns(path: str, wanted: tuple[str, ...]) -> dict[str, np.ndarray]:
    """Read the wanted columns; missing ones are reported by name."""
    with open(path, newline="") as fh:
        reader = csv.reader(fh)
        try:
            header = next(reader)
        except StopIteration:
            raise SpecError(f"{path}: empty file, expected header {','.join(wanted)}")
        missing = [c for c in wanted if c not in header]
        if missing:
            raise SpecError(
                f"{path}: missing column(s) {missing}; header has {header}"
            )
        idx = [header.index(c) for c in wanted]
        rows = [[row[i] for i in idx] for row in reader if row]
    if not rows:
        return {c: np.empty(0) for c in wanted}
    arr = np.asarray(rows, dtype=float)
    return {c: arr[:, j] for j, c in enumerate(wanted)}


@dataclass
class RenderStats:
    out: str
    n_points: int = 0
    n_fibre_curves: int = 0
    n_overlays: int = 0
    extra: dict = field(default_factory=dict)


def _apply_overlays(ax, spec: FigureSpec, stats: RenderStats):
    for y, style in spec.overlays:
        ax.axhline(y, color="0.2", linestyle=style, linewidth=1.0)
        stats.n_overlays += 1


def _render_trajectory(ax, spec: FigureSpec, stats: RenderStats):
    markers_used = 0
    for path in spec.trajectory:
        cols = read_columns(path, ("step", "xi", "x", "y"))
        ax.plot(
            cols["x"], cols["y"], linestyle="none", marker=".",
            markersize=0.6, alpha=0.5, color=f"C{markers_used}",
        )
        stats.n_points += len(cols["x"])
        markers_used += 1
    for path in spec.fibres:
        cols = read_columns(path, ("xi", "x_anchor", "y_anchor", "u", "ell_u"))
        if len(cols["u"]):
            ax.plot(cols["u"], cols["ell_u"], linewidth=1.2, color="k")
            stats.n_fibre_curves += 1
    ax.set_xlabel("x")
    ax.set_ylabel("y")


def _render_levelset(ax, spec: FigureSpec, stats: RenderStats):
    if spec.levelset is None:
        raise SpecError("levelset panel needs levelset = <csv>")
    cols = read_columns(spec.levelset, ("x", "y", "below"))
    xs = np.unique(cols["x"])
    ys = np.unique(cols["y"])
    grid = np.zeros((len(xs), len(ys)))
    ix = np.searchsorted(xs, cols["x"])
    iy = np.searchsorted(ys, cols["y"])
    grid[ix, iy] = cols["below"]
    ax.pcolormesh(xs, ys, grid.T, cmap="Greys", vmin=0.0, vmax=1.6, shading="nearest")
    stats.n_points = grid.size
    ax.set_xlabel("x")
    ax.set_ylabel("y")


def _render_timeseries(ax, spec: FigureSpec, stats: RenderStats):
    for i, path in enumerate(spec.trajectory):
        cols = read_columns(path, ("step", "xi", "x", "y"))
        ax.plot(cols["step"], cols["y"], linewidth=0.6, color=f"C{i}")
        stats.n_points += len(cols["step"])
    ax.set_xlabel("step")
    ax.set_ylabel("y")


def _render_region(ax, spec: FigureSpec, stats: RenderStats):
    if spec.region is None:
        raise SpecError("region-scan panel needs region = <csv>")
    cols = read_columns(
        spec.region, ("M", "r", "pass", "expansion_margin", "invariance_margin")
    )
    ms = np.unique(cols["M"])
    rs = np.unique(cols["r"])
    grid = np.zeros((len(ms), len(rs)))
    im = np.searchsorted(ms, cols["M"])
    ir = np.searchsorted(rs, cols["r"])
    grid[im, ir] = cols["pass"]
    ax.pcolormesh(ms, rs, grid.T, cmap="Greys", vmin=-0.6, vmax=1.0, shading="nearest")
    stats.n_points = grid.size
    ax.set_xlabel("M")
    ax.set_ylabel("r")


def render_figure(spec: FigureSpec) -> RenderStats:
    """Write the panel image; deterministic given the input CSV bytes."""
    stats = RenderStats(out=spec.out)
    fig, ax = plt.subplots(figsize=(6.4, 4.8))
    try:
        if spec.kind == "trajectory":
            _render_trajectory(ax, spec, stats)
        elif spec.kind == "levelset":
            _render_levelset(ax, spec, stats)
        elif spec.kind == "timeseries":
            _render_timeseries(ax, spec, stats)
        else:
            _render_region(ax, spec, stats)
        _apply_overlays(ax, spec, stats)
        if spec.xlim:
            ax.set_xlim(*spec.xlim)
        if spec.ylim:
            ax.set_ylim(*spec.ylim)
        if spec.title:
            ax.set_title(spec.title)
        fig.savefig(spec.out, dpi=spec.dpi)
    finally:
        plt.close(fig)
    return stats


def main(argv=None) -> int:
    args = sys.argv[1:] if argv is None else argv
    if len(args) != 1 or args[0] in ("-h", "--help"):
        print(__doc__)
        return 0 if args and args[0] in ("-h", "--help") else 1
    try:
        spec = load_spec(args[0])
        stats = render_figure(spec)
    except SpecError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    print(
        f"wrote {stats.out} ({stats.n_points} points, "
        f"{stats.n_fibre_curves} fibre curves, {stats.n_overlays} overlays)"
    )
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
