"""Command-line front end.

Subcommands: gen-data, sweep, analyze, series, agreement, theory, plot.
Exit codes: 1 configuration error, 2 data generation, 3 training,
4 analysis, 5 I/O.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path

import numpy as np

from . import analysis, evaluator, harness, svg, theory
from .config import ExperimentConfig, load_config
from .errors import (AnalysisError, ConfigError, DegeneratePopulationError,
                     DimensionMismatchError, DivergenceError, EmptyGroupError,
                     InfeasibleMarginalsError, InvalidSpecError, MissingInputsError)

EXIT_CONFIG = 1
EXIT_GENERATION = 2
EXIT_TRAINING = 3
EXIT_ANALYSIS = 4
EXIT_IO = 5


def _add_common(p: argparse.ArgumentParser, config_required: bool = True) -> None:
    p.add_argument("--config", required=config_required, help="experiment config file")
    p.add_argument("--out", default=None, help="output directory override")
    p.add_argument("--seed", type=int, default=None, help="master seed override")
    p.add_argument("--jobs", type=int, default=1,
                   help="parallelism hint; never affects results")


def _load(args) -> ExperimentConfig:
    cfg = load_config(args.config)
    return cfg.with_overrides(out_dir=args.out, master_seed=args.seed)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="shiftlab",
                                     description="subpopulation-shift sweep laboratory")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("gen-data", help="write train/id_test/ood_test CSVs")
    _add_common(p)

    p = sub.add_parser("sweep", help="run the full sweep pipeline")
    _add_common(p)

    p = sub.add_parser("analyze", help="re-fit curves from an existing results.csv")
    _add_common(p)
    p.add_argument("--results", default=None, help="results.csv path (default: <out>/results.csv)")

    p = sub.add_parser("series", help="run a knob series of sweeps")
    _add_common(p)
    p.add_argument("--knob", choices=harness.SERIES_KNOBS, default=None)
    p.add_argument("--values", default=None, help="comma-separated knob values")

    p = sub.add_parser("agreement", help="paired-model agreement overlay")
    _add_common(p)
    p.add_argument("--pairs", type=int, default=None, help="number of model pairs")
    p.add_argument("--pair-seed", type=int, default=None)

    p = sub.add_parser("theory", help="closed-form gap, Monte Carlo check, ROC traversal")
    _add_common(p, config_required=False)
    p.add_argument("--p-y1", type=float, default=0.5)
    p.add_argument("--pi1", type=float, default=0.9)
    p.add_argument("--pi0", type=float, default=0.3)
    p.add_argument("--mu0", type=float, default=-1.0)
    p.add_argument("--mu1", type=float, default=1.0)
    p.add_argument("--s0", type=float, default=1.0)
    p.add_argument("--s1", type=float, default=1.0)
    p.add_argument("--threshold", type=float, default=0.0)
    p.add_argument("--n-thresholds", type=int, default=101)
    p.add_argument("--mc-samples", type=int, default=1_000_000)
    p.add_argument("--format", choices=("csv", "json"), default="csv",
                   help="traversal output format")

    p = sub.add_parser("plot", help="scatter an existing results.csv")
    _add_common(p)
    p.add_argument("--results", default=None)

    return parser


def _results_points(config: ExperimentConfig, results_path: Path) -> np.ndarray:
    rows = evaluator.read_results_csv(results_path)
    if not rows:
        raise AnalysisError(f"{results_path} has no rows")
    maj_g, min_g = harness.moon_axis_groups(config.shift)
    return np.array([[float(r[f"group_acc_{maj_g}"]), float(r[f"group_acc_{min_g}"])]
                     for r in rows])


def _cmd_gen_data(args) -> int:
    config = _load(args)
    for path in harness.run_gen_data(config):
        print(path)
    return 0


def _cmd_sweep(args) -> int:
    config = _load(args)
    out = harness.run_sweep_pipeline(config)
    q = out.report.quad_fit
    print(f"sweep: {len(out.evals)} snapshots -> {out.out_dir}")
    print(f"curvature beta2 = {q.beta2:.6g} (se {q.se_beta2:.3g}), "
          f"probit R^2 = {out.report.probit_fit.r2:.4f}")
    return 0


def _cmd_analyze(args) -> int:
    config = _load(args)
    results = Path(args.results) if args.results else config.out_dir / "results.csv"
    if not results.exists():
        raise MissingInputsError(f"{results} not found; run the sweep first")
    points = _results_points(config, results)
    report = analysis.fit_curves(points, probit_eps=config.analysis.probit_eps,
                                 spline_lambda=config.analysis.spline_lambda)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    analysis.write_report(report, config.out_dir / "report.json")
    print(config.out_dir / "report.json")
    return 0


def _cmd_series(args) -> int:
    config = _load(args)
    knob = args.knob or (config.series.knob if config.series else None)
    values = ([float(v) for v in args.values.split(",")] if args.values
              else list(config.series.values) if config.series else None)
    if not knob or not values:
        raise ConfigError("series needs --knob/--values or a [series] config section")
    summary = harness.run_spurious_series(config, knob, values)
    for row in summary["sweeps"]:
        print(f"{knob}={row['value']:g}: curvature={row['curvature']:.5g} "
              f"probit_r2={row['probit_r2']:.4f}")
    return 0


def _cmd_agreement(args) -> int:
    config = _load(args)
    out = harness.run_agreement_pipeline(config, n_pairs=args.pairs,
                                         pair_seed=args.pair_seed)
    print(f"agreement verdict: {out.verdict.get('verdict')}")
    return 0


def _cmd_theory(args) -> int:
    pop = theory.PopulationSpec(p_y1=args.p_y1, pi1=args.pi1, pi0=args.pi0)
    score = theory.ScoreModel(mu0=args.mu0, mu1=args.mu1, s0=args.s0, s1=args.s1)
    points = theory.roc_traverse(pop, score, n_thresholds=args.n_thresholds)
    summary = theory.gap_summary(pop, score, args.threshold,
                                 n_samples=args.mc_samples,
                                 seed=args.seed if args.seed is not None else 0)
    out_dir = Path(args.out) if args.out else Path(".")
    out_dir.mkdir(parents=True, exist_ok=True)
    if args.format == "csv":
        theory.write_traversal_csv(points, out_dir / "roc_traversal.csv")
        print(out_dir / "roc_traversal.csv")
    else:
        analysis.dump_json({"points": [vars(p) | {} for p in points]},
                           out_dir / "roc_traversal.json")
        print(out_dir / "roc_traversal.json")
    analysis.dump_json(summary, out_dir / "theory_summary.json")
    print(out_dir / "theory_summary.json")
    print(f"closed-form gap {summary['closed_form_gap']:.6f}, "
          f"MC {summary['mc_gap']:.6f} +/- {summary['mc_se']:.6f} "
          f"({summary['verdict']})")
    return 0


def _cmd_plot(args) -> int:
    config = _load(args)
    results = Path(args.results) if args.results else config.out_dir / "results.csv"
    if not results.exists():
        raise MissingInputsError(f"{results} not found; run the sweep first")
    points = _results_points(config, results)
    config.out_dir.mkdir(parents=True, exist_ok=True)
    out_path = config.out_dir / "moon.svg"
    svg.emit_plot([tuple(p) for p in points.tolist()], None, None, out_path)
    print(out_path)
    return 0


_COMMANDS = {
    "gen-data": _cmd_gen_data,
    "sweep": _cmd_sweep,
    "analyze": _cmd_analyze,
    "series": _cmd_series,
    "agreement": _cmd_agreement,
    "theory": _cmd_theory,
    "plot": _cmd_plot,
}


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return _COMMANDS[args.command](args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (InvalidSpecError, InfeasibleMarginalsError, DegeneratePopulationError) as exc:
        print(f"generation error: {exc}", file=sys.stderr)
        return EXIT_GENERATION
    except (DivergenceError, DimensionMismatchError) as exc:
        print(f"training error: {exc}", file=sys.stderr)
        return EXIT_TRAINING
    except (AnalysisError, EmptyGroupError, MissingInputsError) as exc:
        print(f"analysis error: {exc}", file=sys.stderr)
        return EXIT_ANALYSIS
    except OSError as exc:
        print(f"io error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
