import os
import subprocess
import sys

import numpy as np
import pytest

from bakerfigs.render import FigureSpec, SpecError, load_spec, read_columns, render_figure

FAST_OVERRIDES = [
    "--set", "traj_steps=20000",
    "--set", "burn_in=500",
    "--set", "nx=512",
    "--set", "depth=100",
    "--set", "levelset_nx=96",
    "--set", "levelset_ny=96",
    "--set", "measure_samples=5000",
    "--set", "dim_order=6",
    "--set", "traj_rows_cap=5000",
    "--set", "cert_grid=200",
]


@pytest.fixture(scope="module")
def bundles(tmp_path_factory):
    """Miniature scenario CSV bundles produced through the bakerskew CLI."""
    root = tmp_path_factory.mktemp("bundles")
    out = {}
    for preset in ("fig1a", "fig1b", "fig1c", "fig2"):
        dest = root / preset
        cmd = [
            sys.executable, "-m", "bakerskew.cli", "scenario",
            "--preset", preset, "--out", str(dest), *FAST_OVERRIDES,
        ]
        proc = subprocess.run(cmd, capture_output=True, text=True)
        assert proc.returncode == 0, proc.stderr
        out[preset] = dest
    return out


def write_spec(path, lines):
    path.write_text("\n".join(lines) + "\n")
    return str(path)


def trajectory_spec(tmp_path, bundle, name, overlays=True):
    trajs = sorted(str(p) for p in bundle.glob("trajectory_*.csv"))
    fibres = sorted(str(p) for p in bundle.glob("fibre_*.csv"))
    lines = [
        "kind = trajectory",
        f"trajectory = {', '.join(trajs)}",
        f"fibres = {', '.join(fibres)}",
        "ylim = -1.1, 1.1",
        f"out = {tmp_path / name}",
    ]
    if overlays:
        lines.append("overlays = hline:0.3:dashed, hline:-0.3:dotted")
    return write_spec(tmp_path / f"{name}.spec", lines)


def test_four_scenario_bundles_render(bundles, tmp_path):
    # fig1a, fig1b: trajectory panels with fibre overlays
    for preset in ("fig1a", "fig1b"):
        spec = load_spec(trajectory_spec(tmp_path, bundles[preset], f"{preset}.png"))
        stats = render_figure(spec)
        assert os.path.exists(stats.out)
        assert stats.n_fibre_curves >= 3
        assert stats.n_points > 0
        assert stats.n_overlays == 2
    # fig1c: level-set panel with the guide lines
    spec = load_spec(
        write_spec(
            tmp_path / "fig1c.spec",
            [
                "kind = levelset",
                f"levelset = {bundles['fig1c'] / 'levelset.csv'}",
                "overlays = hline:0.3:dashed, hline:-0.3:dotted",
                f"out = {tmp_path / 'fig1c.png'}",
            ],
        )
    )
    stats = render_figure(spec)
    assert os.path.exists(stats.out) and stats.n_points > 0
    # fig2: time series of y
    spec = load_spec(
        write_spec(
            tmp_path / "fig2.spec",
            [
                "kind = timeseries",
                f"trajectory = {bundles['fig2'] / 'trajectory_00.csv'}",
                f"out = {tmp_path / 'fig2.png'}",
            ],
        )
    )
    stats = render_figure(spec)
    assert os.path.exists(stats.out) and stats.n_points > 0


def test_rerender_pixel_identical(bundles, tmp_path):
    spec_path = trajectory_spec(tmp_path, bundles["fig1a"], "panel.png")
    spec = load_spec(spec_path)
    render_figure(spec)
    first = open(spec.out, "rb").read()
    render_figure(spec)
    second = open(spec.out, "rb").read()
    assert first == second


def test_empty_trajectory_renders(tmp_path):
    empty = tmp_path / "empty.csv"
    empty.write_text("step,xi,x,y\n")
    spec = FigureSpec(
        kind="trajectory", out=str(tmp_path / "empty.png"), trajectory=(str(empty),)
    )
    stats = render_figure(spec)
    assert os.path.exists(stats.out)
    assert stats.n_points == 0


def test_missing_column_reported(tmp_path):
    bad = tmp_path / "bad.csv"
    bad.write_text("step,xi,x\n1,0.5,0.5\n")
    with pytest.raises(SpecError, match=r"missing column\(s\) \['y'\]"):
        read_columns(str(bad), ("step", "xi", "x", "y"))


def test_region_scan_panel(tmp_path):
    region = tmp_path / "region.csv"
    rows = ["M,r,pass,expansion_margin,invariance_margin"]
    for M in np.linspace(0.8, 0.9, 6):
        for r in np.linspace(1.0, 1.2, 6):
            rows.append(f"{float(M)!r},{float(r)!r},{int(r < M + 0.24)},0.1,0.01")
    region.write_text("\n".join(rows) + "\n")
    spec = FigureSpec(kind="region-scan", out=str(tmp_path / "region.png"), region=str(region))
    stats = render_figure(spec)
    assert os.path.exists(stats.out)
    assert stats.n_points == 36


def test_spec_validation(tmp_path):
    with pytest.raises(SpecError, match="kind"):
        FigureSpec(kind="pie", out="x.png")
    spec_file = tmp_path / "bad.spec"
    spec_file.write_text("kind = trajectory\nout = a.png\nmystery = 1\n")
    with pytest.raises(SpecError, match="unknown spec keys"):
        load_spec(str(spec_file))
    spec_file.write_text("kind = trajectory\nout = a.png\noverlays = vline:0.3\n")
    with pytest.raises(SpecError, match="hline"):
        load_spec(str(spec_file))


def test_cli_entry(tmp_path, bundles):
    spec_path = trajectory_spec(tmp_path, bundles["fig1a"], "cli.png")
    proc = subprocess.run(
        [sys.executable, "-m", "bakerfigs.render", spec_path],
        capture_output=True,
        text=True,
    )
    assert proc.returncode == 0, proc.stderr
    assert "fibre curves" in proc.stdout
    assert (tmp_path / "cli.png").exists()
