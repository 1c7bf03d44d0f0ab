"""Command line entry point: scenario runner and per-module subcommands.

Subcommands: check-hypotheses, scan-region, graphs, fibre, lyapunov,
classify, dimension, scenario.  Configuration comes from a flat key-value
file and/or a named preset, with --set overrides.  All outputs are CSV with
a one-line header (reports as key: value text); identical config and seed
give byte-identical outputs.  Exit codes: 0 success, 2 hypothesis
certificate failure, 3 numeric non-convergence.
"""

from __future__ import annotations

import argparse
import os
import sys as _sys

import numpy as np

from . import _kernels
from .baker import BakerSystem
from .classify import classify_scenario
from .config import (
    ScenarioConfig,
    config_from_dict,
    dump_config,
    load_config,
    parse_config_text,
    preset_config,
    preset_names,
)
from .dimension import dimension_estimate, write_dimension_csv
from .errors import CertificateFailure, NonConvergenceError
from .fibre import ArctanFamily
from .graphs import middle_graph, pullback_graph
from .hypotheses import check_hypotheses, scan_region
from .lyapunov import MeasureModel, measure_exponent, middle_exponent_with_provenance
from .stablefibre import build_field, integrate_fibre
from .util import write_csv

CROSS_CAP = 1_000_000


def _system(cfg: ScenarioConfig):
    return ArctanFamily(cfg.r, cfg.eps), BakerSystem(cfg.a)


def run_certificate(cfg: ScenarioConfig, out_dir: str | None = None):
    fam, sys = _system(cfg)
    cert = check_hypotheses(fam, sys, cfg.I, cfg.J, cfg.cert_grid)
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "certificate.txt"), "w", newline="\n") as fh:
            fh.write("\n".join(cert.lines()) + "\n")
    return cert


def run_graphs(cfg: ScenarioConfig, out_dir: str | None = None):
    fam, sys = _system(cfg)
    upper = pullback_graph(fam, sys, "upper", cfg.nx, cfg.depth, cfg.m_bound)
    lower = pullback_graph(fam, sys, "lower", cfg.nx, cfg.depth, cfg.m_bound)
    middle = middle_graph(
        fam, sys, cfg.nx, cfg.depth + 50, cfg.middle_anchor, J=cfg.J, seed=cfg.middle_seed
    )
    if out_dir:
        upper.to_csv(os.path.join(out_dir, "graph_upper.csv"))
        lower.to_csv(os.path.join(out_dir, "graph_lower.csv"))
        middle.to_csv(os.path.join(out_dir, "graph_middle.csv"))
    return upper, lower, middle


def run_fibres(cfg: ScenarioConfig, out_dir: str | None = None):
    fam, sys = _system(cfg)
    field = build_field(fam, sys, cfg.J, cfg.I)
    fibres = []
    for i, (xi, x, y) in enumerate(cfg.fibre_anchors):
        fb = integrate_fibre(field, xi, x, y, cfg.fibre_step)
        fibres.append(fb)
        if out_dir:
            fb.to_csv(os.path.join(out_dir, f"fibre_{i:02d}.csv"))
    return fibres


def run_lyapunov(cfg: ScenarioConfig, out_path: str | None = None):
    fam, sys = _system(cfg)
    upper, lower, middle = run_graphs(cfg)
    measures = [
        MeasureModel("lebesgue", seed=cfg.seed),
        MeasureModel("bernoulli", p=0.5, seed=cfg.seed + 1),
    ]
    rows = []
    for mu in measures:
        for kind, graph in (("upper", upper), ("lower", lower)):
            est = measure_exponent(fam, sys, graph, mu, cfg.measure_samples)
            rows.append((cfg.scenario, kind, mu.label(), est.value, est.stderr, est.n))
        est = middle_exponent_with_provenance(
            fam, sys, middle, upper, lower, mu, cfg.measure_samples
        )
        rows.append((cfg.scenario, "middle", mu.label(), est.value, est.stderr, est.n))
    if out_path:
        write_csv(
            out_path,
            ["scenario", "graph", "measure", "value", "stderr", "n"],
            rows,
        )
    return rows


def run_classify(cfg: ScenarioConfig, out_dir: str | None = None):
    fam, sys = _system(cfg)
    report = classify_scenario(
        fam,
        sys,
        J=cfg.J,
        I=cfg.I,
        N_x=cfg.nx,
        depth=cfg.depth,
        max_period=cfg.max_period,
        pinch_tol=cfg.pinch_tol,
        band=cfg.band,
        measures=(MeasureModel("lebesgue", seed=cfg.seed),),
        samples=cfg.measure_samples,
        fibre_step=cfg.fibre_step,
        middle_seed=cfg.middle_seed,
    )
    if out_dir:
        os.makedirs(out_dir, exist_ok=True)
        with open(os.path.join(out_dir, "classification.txt"), "w", newline="\n") as fh:
            fh.write("\n".join(report.lines()) + "\n")
        report.margins_csv(os.path.join(out_dir, "margins.csv"))
    return report


def run_dimension(cfg: ScenarioConfig, out_path: str | None = None):
    fam, sys = _system(cfg)
    upper, lower, middle = run_graphs(cfg)
    graphs = {"upper": upper, "lower": lower, "middle": middle}
    rows = []
    for kind in cfg.dim_phihat:
        graph = graphs[kind]
        try:
            est = dimension_estimate(fam, sys, graph, cfg.dim_order)
            rows.append(est.row(cfg.scenario))
        except ValueError as exc:
            rows.append((cfg.scenario, kind, cfg.dim_order, "", "", f"unavailable: {exc}", ""))
    if out_path:
        write_dimension_csv(out_path, rows)
    return rows


def run_trajectories(cfg: ScenarioConfig, out_dir: str | None = None):
    """Trajectory CSVs (thinned, burn-in discarded) and the full-resolution
    sign-crossing log."""
    fam, sys = _system(cfg)
    rng = np.random.default_rng(cfg.seed)
    stride = max(1, -(-(cfg.traj_steps + 1) // cfg.traj_rows_cap))
    crossing_rows = []
    counts = []
    for idx, y0 in enumerate(cfg.traj_y0):
        digits = rng.integers(0, 2, size=cfg.traj_steps + 64).astype(np.uint8)
        xi0 = float(rng.random())
        x0 = float(rng.random())
        steps, xis, xs, ys, crossings, directions, n_cross = _kernels.run_trajectory(
            digits, xi0, x0, float(y0), cfg.traj_steps, cfg.r, cfg.eps, cfg.a,
            stride, CROSS_CAP,
        )
        counts.append(int(n_cross))
        keep = steps >= cfg.burn_in
        if out_dir:
            write_csv(
                os.path.join(out_dir, f"trajectory_{idx:02d}.csv"),
                ["step", "xi", "x", "y"],
                zip(steps[keep], xis[keep], xs[keep], ys[keep]),
            )
        for s, d in zip(crossings, directions):
            crossing_rows.append((idx, int(s), int(d)))
    if out_dir:
        write_csv(
            os.path.join(out_dir, "crossings.csv"),
            ["traj", "step", "direction"],
            crossing_rows,
        )
    return counts, crossing_rows


def run_levelset(cfg: ScenarioConfig, out_dir: str | None = None):
    """Marks grid points (x, y) with f_x(f_{tau x}(y)) < y."""
    fam, sys = _system(cfg)
    xs = np.arange(cfg.levelset_nx) / cfg.levelset_nx
    ys = np.linspace(cfg.levelset_ylo, cfg.levelset_yhi, cfg.levelset_ny)
    X, Y = np.meshgrid(xs, ys, indexing="ij")
    TX = np.asarray(sys.tau(X))
    below = fam.value(X, fam.value(TX, Y)) < Y
    if out_dir:
        rows = (
            (xs[i], ys[j], int(below[i, j]))
            for i in range(cfg.levelset_nx)
            for j in range(cfg.levelset_ny)
        )
        write_csv(os.path.join(out_dir, "levelset.csv"), ["x", "y", "below"], rows)
    return below


def run_scenario(cfg: ScenarioConfig, out_dir: str):
    """Full pipeline: certificate gate, trajectories, level set, graphs,
    fibres, classification, dimension, crossing log, config echo."""
    os.makedirs(out_dir, exist_ok=True)
    cert = run_certificate(cfg, out_dir)
    if not cert.passed and not cfg.override_certificate:
        raise CertificateFailure(
            f"hypothesis certificate failed (binding: {cert.binding}); "
            "set override_certificate = true to force the run"
        )
    with open(os.path.join(out_dir, "config_resolved.cfg"), "w", newline="\n") as fh:
        fh.write(dump_config(cfg))
    run_trajectories(cfg, out_dir)
    run_levelset(cfg, out_dir)
    run_graphs(cfg, out_dir)
    run_fibres(cfg, out_dir)
    run_classify(cfg, out_dir)
    run_dimension(cfg, os.path.join(out_dir, "dimension.csv"))
    return out_dir


# -- argument handling --------------------------------------------------------


def _add_config_args(p: argparse.ArgumentParser):
    p.add_argument("--config", help="key = value configuration file")
    p.add_argument("--preset", choices=preset_names(), help="built-in scenario preset")
    p.add_argument(
        "--set",
        dest="overrides",
        action="append",
        default=[],
        metavar="KEY=VALUE",
        help="override a single config key (repeatable)",
    )


def _resolve_config(args) -> ScenarioConfig:
    overrides = {}
    for item in args.overrides:
        if "=" not in item:
            raise ValueError(f"--set needs KEY=VALUE, got {item!r}")
        text = item.replace("=", " = ", 1)
        overrides.update(parse_config_text(text))
    if args.config and args.preset:
        base = preset_config(args.preset)
        with open(args.config) as fh:
            data = parse_config_text(fh.read())
        merged = {**{k: v for k, v in base.__dict__.items()}, **data, **overrides}
        return config_from_dict(merged)
    if args.config:
        return load_config(args.config, overrides)
    if args.preset:
        return preset_config(args.preset, overrides)
    raise ValueError("need --config and/or --preset")


def main(argv=None) -> int:
    parser = argparse.ArgumentParser(
        prog="bakerskew",
        description="Skew products over generalized baker maps: invariant graphs, "
        "stable fibres, exponents, classification, dimension.",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("check-hypotheses", help="certify the standing hypotheses")
    _add_config_args(p)
    p.add_argument("--out", help="output directory for certificate.txt")

    p = sub.add_parser("scan-region", help="scan the (M, r) parameter rectangle")
    p.add_argument("--eps", type=float, required=True)
    p.add_argument("--m-range", required=True, metavar="LO,HI")
    p.add_argument("--r-range", required=True, metavar="LO,HI")
    p.add_argument("--grid", default="100,100", metavar="NM,NR")
    p.add_argument("--a", type=float, default=0.5)
    p.add_argument("--out", required=True, help="output CSV path")

    for name, help_text in (
        ("graphs", "pullback and middle invariant graphs"),
        ("fibre", "strong stable fibres for the configured anchors"),
        ("classify", "case A/B classification report"),
        ("scenario", "full scenario pipeline"),
    ):
        p = sub.add_parser(name, help=help_text)
        _add_config_args(p)
        p.add_argument("--out", required=True, help="output directory")

    p = sub.add_parser("lyapunov", help="exponents of measures on the graphs")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output CSV path")

    p = sub.add_parser("dimension", help="dimension estimates for the pinched set")
    _add_config_args(p)
    p.add_argument("--out", required=True, help="output CSV path")

    args = parser.parse_args(argv)
    try:
        if args.command == "scan-region":
            m_lo, m_hi = (float(v) for v in args.m_range.split(","))
            r_lo, r_hi = (float(v) for v in args.r_range.split(","))
            nm, nr = (int(v) for v in args.grid.split(","))
            scan = scan_region(args.eps, (m_lo, m_hi), (r_lo, r_hi), (nm, nr), args.a)
            scan.to_csv(args.out)
            print(f"wrote {args.out}: {int(scan.passed.sum())} passing cells")
            return 0
        cfg = _resolve_config(args)
        if args.command == "check-hypotheses":
            cert = run_certificate(cfg, args.out)
            print("\n".join(cert.lines()))
            return 0 if cert.passed else 2
        if args.command == "graphs":
            run_graphs(cfg, args.out)
        elif args.command == "fibre":
            run_fibres(cfg, args.out)
        elif args.command == "lyapunov":
            run_lyapunov(cfg, args.out)
        elif args.command == "classify":
            report = run_classify(cfg, args.out)
            print("\n".join(report.lines()))
        elif args.command == "dimension":
            run_dimension(cfg, args.out)
        elif args.command == "scenario":
            run_scenario(cfg, args.out)
        print(f"wrote outputs under {args.out}")
        return 0
    except CertificateFailure as exc:
        print(f"certificate failure: {exc}", file=_sys.stderr)
        return 2
    except NonConvergenceError as exc:
        print(f"non-convergence: {exc}", file=_sys.stderr)
        return 3


if __name__ == "__main__":
    raise SystemExit(main())
