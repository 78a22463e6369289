"""Experiment pipelines: generate, sweep, evaluate, analyze, render.

All heavy computation happens in memory first; files are then written through
a temp-name-plus-rename step from a single place, so an interrupted run never
leaves truncated artifacts behind and reruns with the same configuration
overwrite each file with identical bytes.
"""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from . import analysis, datagen, evaluator, svg, trainer
from .config import AnalysisOptions, ExperimentConfig
from .datagen import Dataset, ShiftSpec, format_sig, mixture_table
from .errors import ConfigError, MissingInputsError
from .rng import derive_stream

SWEEP_ARTIFACTS = ("train.csv", "ood_test.csv", "models.csv", "weights.csv",
                   "results.csv", "preds.csv", "report.json", "moon.svg")


def _atomic(path: Path, writer) -> None:
    """Run ``writer(tmp_path)`` and rename the result into place."""
    tmp = path.with_name(path.name + ".tmp")
    try:
        writer(tmp)
        os.replace(tmp, path)
    finally:
        if tmp.exists():
            tmp.unlink()


def _atomic_text(path: Path, text: str) -> None:
    _atomic(path, lambda p: p.write_text(text))


def moon_axis_groups(spec: ShiftSpec) -> tuple[int, int]:
    """(majority, minority) group indexes used for 2-D curve analysis."""
    if spec.k_groups == 2:
        return 1, 0
    w = spec.train_weights()
    return int(np.argmax(w)), int(np.argmin(w))


@dataclass
class SweepOutputs:
    config: ExperimentConfig
    records: list[trainer.ModelRecord]
    evals: list[evaluator.EvalRecord]
    report: analysis.CurveReport
    points: np.ndarray  # (n_models, 2) majority/minority accuracies
    out_dir: Path


def _moon_points(spec: ShiftSpec, evals: list[evaluator.EvalRecord]) -> np.ndarray:
    maj_g, min_g = moon_axis_groups(spec)
    return np.array([[ev.group_acc[maj_g], ev.group_acc[min_g]] for ev in evals])


def _quad_overlay(report: analysis.CurveReport, points: np.ndarray) -> svg.Overlay:
    q = report.quad_fit
    xs = np.linspace(float(points[:, 0].min()), float(points[:, 0].max()), 101)
    ys = q.beta0 + q.beta1 * xs + q.beta2 * xs * xs
    return svg.Overlay("quadratic fit", list(zip(xs.tolist(), ys.tolist())), "#d62728")


def _spline_overlay(report: analysis.CurveReport, points: np.ndarray) -> svg.Overlay | None:
    if report.spline is None:
        return None
    xs = np.linspace(float(points[:, 0].min()), float(points[:, 0].max()), 101)
    ys = report.spline.predict(xs)
    return svg.Overlay("smoothing spline", list(zip(xs.tolist(), ys.tolist())), "#2ca02c")


def run_sweep_pipeline(config: ExperimentConfig, write_files: bool = True) -> SweepOutputs:
    """Generate data, train the grid, evaluate, fit curves, emit artifacts."""
    spec = config.shift
    spec.validate()
    out_dir = config.out_dir

    train_set = datagen.generate(spec, "train")
    ood_pool = datagen.generate(spec, "ood_test")
    r_tr = spec.train_weights()
    r_ts = spec.ood_weights()

    grid = config.grid.build(spec.master_seed)
    result = trainer.sweep(train_set, grid)
    if not result.records:
        raise trainer.DivergenceError(0, "every grid cell diverged")

    evals = []
    pred_rows = []
    for record in result.records:
        preds = record.predict(ood_pool.features)
        evals.append(evaluator.evaluate_predictions(
            record.model_id, preds, ood_pool, r_tr, r_ts, epoch=record.epoch))
        pred_rows.append((record.model_id, evaluator.predictions_bits(preds)))

    points = _moon_points(spec, evals)
    report = analysis.fit_curves(points, probit_eps=config.analysis.probit_eps,
                                 spline_lambda=config.analysis.spline_lambda)

    if write_files:
        out_dir.mkdir(parents=True, exist_ok=True)
        _atomic(out_dir / "train.csv", lambda p: datagen.write_dataset_csv(train_set, p))
        _atomic(out_dir / "ood_test.csv", lambda p: datagen.write_dataset_csv(ood_pool, p))
        _write_model_store_atomic(result.records, out_dir)
        _atomic(out_dir / "results.csv",
                lambda p: evaluator.write_results_csv(list(zip(result.records, evals)), p))
        _atomic(out_dir / "preds.csv", lambda p: evaluator.write_preds_csv(pred_rows, p))
        _atomic(out_dir / "report.json", lambda p: analysis.write_report(report, p))
        overlays = [_quad_overlay(report, points)]
        sp = _spline_overlay(report, points)
        if sp is not None:
            overlays.append(sp)
        style = svg.PlotStyle(title=f"model sweep ({len(evals)} snapshots)")
        _atomic_text(out_dir / "moon.svg", svg.render_scatter(
            [tuple(p) for p in points.tolist()], overlays, style))
        if result.failures:
            lines = ["cell,lr,l2,batch_size,seed,error"]
            for cell, hp, msg in result.failures:
                lines.append(f"{cell},{format_sig(hp.learning_rate)},{format_sig(hp.l2)},"
                             f"{hp.batch_size},{hp.seed},{msg}")
            _atomic_text(out_dir / "failures.csv", "\n".join(lines) + "\n")

    return SweepOutputs(config=config, records=result.records, evals=evals,
                        report=report, points=points, out_dir=out_dir)


def _write_model_store_atomic(records, out_dir: Path) -> None:
    models_tmp = out_dir / "models.csv.tmp"
    weights_tmp = out_dir / "weights.csv.tmp"
    try:
        trainer.write_model_store(records, models_tmp, weights_tmp)
        os.replace(models_tmp, out_dir / "models.csv")
        os.replace(weights_tmp, out_dir / "weights.csv")
    finally:
        for tmp in (models_tmp, weights_tmp):
            if tmp.exists():
                tmp.unlink()


# ---------------------------------------------------------------------------
# Knob series
# ---------------------------------------------------------------------------

SERIES_KNOBS = ("sdr", "p_maj", "correlation_level")


def _spec_for_knob(spec: ShiftSpec, knob: str, value: float) -> ShiftSpec:
    if knob == "sdr":
        return replace(spec, d_spu=int(round(value * spec.d_core)))
    if knob == "p_maj":
        if spec.mode != "majority":
            raise ConfigError("p_maj series requires a majority-mode base spec")
        return replace(spec, p_maj=float(value))
    if knob == "correlation_level":
        if spec.mode != "attribute":
            raise ConfigError("correlation_level series requires pi1/pi0 in the base spec")
        table = mixture_table(spec.n_train, spec.p_y1, spec.p_z1, float(value))
        return replace(spec, pi1=table.pi1, pi0=table.pi0)
    raise ConfigError(f"unknown series knob {knob!r}; expected one of {SERIES_KNOBS}")


def _knob_tag(value: float) -> str:
    return format_sig(value, 6).replace(".", "p").replace("-", "m")


def run_spurious_series(config: ExperimentConfig, knob: str,
                        values: list[float]) -> dict:
    """One sweep per knob value with a shared master seed; summarizes curvature."""
    if len(values) < 1:
        raise ConfigError("series needs at least one value")
    if sorted(values) != list(values):
        raise ConfigError("series values must be sorted ascending")

    rows = []
    for value in values:
        sub_spec = _spec_for_knob(config.shift, knob, value)
        sub_dir = config.out_dir / f"{knob}_{_knob_tag(value)}"
        sub_cfg = replace(config, shift=sub_spec, out_dir=sub_dir)
        out = run_sweep_pipeline(sub_cfg)
        rows.append({
            "value": value,
            "out_dir": str(out.out_dir),
            "n_points": out.report.n_points,
            "curvature": out.report.curvature,
            "abs_curvature": abs(out.report.curvature),
            "curvature_se": out.report.quad_fit.se_beta2,
            "probit_r2": out.report.probit_fit.r2,
            "linear_r2": out.report.linear_fit.r2,
        })

    summary = {"knob": knob, "values": list(values), "sweeps": rows}
    config.out_dir.mkdir(parents=True, exist_ok=True)
    _atomic(config.out_dir / "series.json", lambda p: analysis.dump_json(summary, p))
    return summary


# ---------------------------------------------------------------------------
# Agreement pipeline
# ---------------------------------------------------------------------------

def _decode_pair(index: int, n: int) -> tuple[int, int]:
    """Map a flat index in [0, n(n-1)/2) to an unordered (i < j) pair."""
    i = 0
    remaining = index
    row = n - 1
    while remaining >= row:
        remaining -= row
        i += 1
        row -= 1
    return i, i + 1 + remaining


def sample_pairs(n_models: int, n_pairs: int, seed: int) -> list[tuple[int, int]]:
    total = n_models * (n_models - 1) // 2
    rng = np.random.default_rng(seed)
    if n_pairs >= total:
        picks = np.arange(total)
    else:
        picks = np.sort(rng.choice(total, size=n_pairs, replace=False))
    return [_decode_pair(int(k), n_models) for k in picks]


@dataclass
class AgreementOutputs:
    verdict: dict
    accuracy_points: np.ndarray
    agreement_points: np.ndarray
    out_dir: Path


def overlay_cells(spec: ShiftSpec, pool: Dataset) -> tuple[list[np.ndarray], tuple[float, ...], tuple[float, ...]]:
    """Row masks and (ID, OOD) mixture weights for the agreement overlay.

    The overlay compares per-cell reweighted quantities between the training
    mixture (x axis) and the shifted mixture (y axis).  The cells are the
    subpopulations whose proportions actually shift: the dataset groups, except
    in attribute mode, where the within-group class balance is what changes
    and the shifting unit is the alignment cell (attribute equal to label
    versus opposite).  Attribute-group reweighting alone moves ID and OOD
    values by at most |r_ts - r_tr| * |acc_1 - acc_0|, which stays in the
    noise for these configurations.
    """
    if spec.mode == "attribute":
        attr = 2 * pool.groups - 1
        aligned = (attr * pool.labels) > 0
        w_id = spec.pi1 * spec.p_y1 + (1.0 - spec.pi0) * (1.0 - spec.p_y1)
        return [~aligned, aligned], (1.0 - w_id, w_id), (0.5, 0.5)
    masks = [pool.groups == g for g in range(spec.k_groups)]
    return masks, spec.train_weights(), spec.ood_weights()


def run_agreement_pipeline(config: ExperimentConfig, n_pairs: int | None = None,
                           pair_seed: int | None = None) -> AgreementOutputs:
    """Compare paired-model agreement with accuracy in (ID, OOD) coordinates.

    Requires a completed sweep in the config's output directory.  Both clouds
    are reduced the same way: the x value reweights per-group means by the
    training mixture, the y value by the shifted mixture.  Cubic smoothing
    splines are fitted to each cloud and compared over the common x range.
    """
    opts: AnalysisOptions = config.analysis
    out_dir = config.out_dir
    if n_pairs is None:
        n_pairs = opts.n_pairs
    if pair_seed is None:
        pair_seed = (opts.pair_seed if opts.pair_seed is not None
                     else derive_stream(config.shift.master_seed, 0x5052))

    for name in ("results.csv", "preds.csv", "ood_test.csv"):
        if not (out_dir / name).exists():
            raise MissingInputsError(f"{name} not found in {out_dir}; run the sweep first")

    rows = evaluator.read_results_csv(out_dir / "results.csv")
    preds_map = evaluator.read_preds_csv(out_dir / "preds.csv")
    pool = datagen.read_dataset_csv(out_dir / "ood_test.csv", split="ood_test")

    model_ids = [r["model_id"] for r in rows]
    preds = {mid: evaluator.bits_to_predictions(preds_map[mid]) for mid in model_ids}
    masks, w_id, w_ood = overlay_cells(config.shift, pool)

    def reweight(values: np.ndarray) -> tuple[float, float]:
        cell_means = [float(np.mean(values[m])) for m in masks]
        return (sum(w * v for w, v in zip(w_id, cell_means)),
                sum(w * v for w, v in zip(w_ood, cell_means)))

    acc_points = np.array([reweight(preds[mid] == pool.labels) for mid in model_ids])

    pairs = sample_pairs(len(model_ids), n_pairs, pair_seed)
    agr_points = np.empty((len(pairs), 2))
    agreement_records = []
    for row_i, (i, j) in enumerate(pairs):
        match = preds[model_ids[i]] == preds[model_ids[j]]
        agr_points[row_i] = reweight(match)
        agreement_records.append(evaluator.AgreementRecord(
            model_a=model_ids[i], model_b=model_ids[j],
            agreement=float(np.mean(match))))

    out_dir.mkdir(parents=True, exist_ok=True)
    _atomic(out_dir / "agreement.csv",
            lambda p: evaluator.write_agreement_csv(agreement_records, p))

    verdict: dict = {
        "n_pairs": len(pairs),
        "pair_seed": pair_seed,
        "margin": opts.margin,
        "alignment_band": 0.03,
    }
    acc_spline = agr_spline = None
    try:
        acc_spline = analysis.SmoothingSpline(acc_points[:, 0], acc_points[:, 1],
                                              lam=opts.spline_lambda)
        agr_spline = analysis.SmoothingSpline(agr_points[:, 0], agr_points[:, 1],
                                              lam=opts.spline_lambda)
    except analysis.AnalysisError as exc:
        warnings.warn(f"agreement overlay spline skipped: {exc}")
        verdict["verdict"] = "insufficient-points"
        verdict["reason"] = str(exc)

    overlays = []
    if acc_spline is not None and agr_spline is not None:
        lo = max(float(acc_points[:, 0].min()), float(agr_points[:, 0].min()))
        hi = min(float(acc_points[:, 0].max()), float(agr_points[:, 0].max()))
        if hi <= lo:
            verdict["verdict"] = "disjoint-ranges"
        else:
            xs = np.linspace(lo, hi, 101)
            gap = agr_spline.predict(xs) - acc_spline.predict(xs)
            above = float(np.mean(gap >= opts.margin))
            max_abs = float(np.max(np.abs(gap)))
            verdict.update({
                "common_range": [lo, hi],
                "lambda_accuracy": acc_spline.lam,
                "lambda_agreement": agr_spline.lam,
                "fraction_above_margin": above,
                "mean_gap": float(np.mean(gap)),
                "max_abs_gap": max_abs,
                "overestimates": above >= 0.8,
                "aligned": max_abs <= 0.03,
            })
            if above >= 0.8:
                verdict["verdict"] = "agreement-overestimates"
            elif max_abs <= 0.03:
                verdict["verdict"] = "aligned"
            else:
                verdict["verdict"] = "mixed"
            overlays = [
                svg.Overlay("accuracy spline",
                            list(zip(xs.tolist(), acc_spline.predict(xs).tolist())),
                            "#1f77b4"),
                svg.Overlay("agreement spline",
                            list(zip(xs.tolist(), agr_spline.predict(xs).tolist())),
                            "#d62728"),
            ]

    style = svg.PlotStyle(title="accuracy vs agreement", x_label="ID value",
                          y_label="OOD value", point_color="#1f77b4")
    content = svg.render_scatter([tuple(p) for p in acc_points.tolist()], overlays, style,
                                 extra_groups=[([tuple(p) for p in agr_points.tolist()],
                                                "#d62728", "agreement pairs")])
    _atomic_text(out_dir / "agreement_overlay.svg", content)
    _atomic(out_dir / "agreement_report.json", lambda p: analysis.dump_json(verdict, p))

    return AgreementOutputs(verdict=verdict, accuracy_points=acc_points,
                            agreement_points=agr_points, out_dir=out_dir)


def run_gen_data(config: ExperimentConfig) -> list[Path]:
    """Write train / id_test / ood_test CSVs plus the resolved spec file."""
    spec = config.shift
    spec.validate()
    out_dir = config.out_dir
    out_dir.mkdir(parents=True, exist_ok=True)
    written = []
    for split in datagen.SPLITS:
        ds = datagen.generate(spec, split)
        path = out_dir / f"{split}.csv"
        _atomic(path, lambda p, d=ds: datagen.write_dataset_csv(d, p))
        written.append(path)
    spec_path = out_dir / "spec.txt"
    _atomic(spec_path, lambda p: datagen.write_spec_file(spec, p))
    written.append(spec_path)
    return written
