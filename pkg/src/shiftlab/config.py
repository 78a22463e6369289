"""Experiment configuration: one INI-style file determines every output byte.

Sections: ``[shift]`` (data-generating parameters, keys named after the
ShiftSpec fields), ``[grid]`` (hyperparameter grid), ``[analysis]`` (probit
clamp, spline lambda, agreement pair sampling), ``[output]`` (directory), and
optionally ``[series]`` (knob sweeps).  Hyperparameter seeds are derived from
the master seed, so overriding ``--seed`` reseeds the whole pipeline.
"""

from __future__ import annotations

import configparser
from dataclasses import dataclass, field, replace
from pathlib import Path

import numpy as np

from .datagen import ShiftSpec, format_sig, parse_spec_items
from .errors import ConfigError, InvalidSpecError
from .trainer import FULL_BATCH, HyperParams, default_grid


@dataclass(frozen=True)
class GridSpec:
    """Sweep grid: 150 training cells, snapshotted out to convergence.

    The snapshot list runs to 100 epochs so that every configuration in a
    knob series reaches its converged regime; curvature comparisons across
    sweeps are only meaningful when the sweeps are in the same phase.
    """

    learning_rates: tuple[float, ...] = tuple(np.logspace(-4, -1, 5))
    l2s: tuple[float, ...] = (0.0, 1e-4, 1e-2)
    batch_sizes: tuple[int | str, ...] = (FULL_BATCH, 32)
    snapshot_epochs: tuple[int, ...] = (1, 2, 5, 10, 25, 50, 100)
    n_seeds: int = 5

    def build(self, master_seed: int) -> list[HyperParams]:
        return default_grid(master_seed=master_seed, n_seeds=self.n_seeds,
                            learning_rates=self.learning_rates, l2s=self.l2s,
                            batch_sizes=self.batch_sizes,
                            snapshot_epochs=self.snapshot_epochs)

    @property
    def n_snapshots(self) -> int:
        return (len(self.learning_rates) * len(self.l2s) * len(self.batch_sizes)
                * self.n_seeds * len(self.snapshot_epochs))


@dataclass(frozen=True)
class AnalysisOptions:
    probit_eps: float = 1e-3
    spline_lambda: float | str = "gcv"
    n_pairs: int = 500
    pair_seed: int | None = None
    margin: float = 0.02


@dataclass(frozen=True)
class SeriesSpec:
    knob: str = "sdr"
    values: tuple[float, ...] = ()


@dataclass(frozen=True)
class ExperimentConfig:
    shift: ShiftSpec
    grid: GridSpec = field(default_factory=GridSpec)
    analysis: AnalysisOptions = field(default_factory=AnalysisOptions)
    out_dir: Path = Path("out")
    series: SeriesSpec | None = None

    def with_overrides(self, out_dir: str | Path | None = None,
                       master_seed: int | None = None) -> "ExperimentConfig":
        cfg = self
        if out_dir is not None:
            cfg = replace(cfg, out_dir=Path(out_dir))
        if master_seed is not None:
            cfg = replace(cfg, shift=replace(cfg.shift, master_seed=master_seed))
        return cfg


def _floats(raw: str) -> tuple[float, ...]:
    return tuple(float(v) for v in raw.split(",") if v.strip())


def _ints(raw: str) -> tuple[int, ...]:
    return tuple(int(v) for v in raw.split(",") if v.strip())


def _batches(raw: str) -> tuple[int | str, ...]:
    out: list[int | str] = []
    for v in raw.split(","):
        v = v.strip()
        if not v:
            continue
        out.append(FULL_BATCH if v == FULL_BATCH else int(v))
    return tuple(out)


def _parser() -> configparser.ConfigParser:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#",),
                                       comment_prefixes=("#",))
    parser.optionxform = str  # keep key case
    return parser


def load_config(path: str | Path) -> ExperimentConfig:
    path = Path(path)
    if not path.exists():
        raise ConfigError(f"config file not found: {path}")
    parser = _parser()
    try:
        parser.read(path)
    except configparser.Error as exc:
        raise ConfigError(f"cannot parse {path}: {exc}") from exc
    if "shift" not in parser:
        raise ConfigError(f"{path} is missing the [shift] section")

    try:
        spec = parse_spec_items(dict(parser["shift"]))
    except (InvalidSpecError, ValueError) as exc:
        raise ConfigError(f"bad [shift] section in {path}: {exc}") from exc

    grid_kwargs = {}
    if "grid" in parser:
        sec = parser["grid"]
        readers = {
            "learning_rates": ("learning_rates", _floats),
            "l2s": ("l2s", _floats),
            "batch_sizes": ("batch_sizes", _batches),
            "snapshot_epochs": ("snapshot_epochs", _ints),
            "n_seeds": ("n_seeds", int),
        }
        for key, raw in sec.items():
            if key not in readers:
                raise ConfigError(f"unknown [grid] key {key!r} in {path}")
            name, fn = readers[key]
            try:
                grid_kwargs[name] = fn(raw)
            except ValueError as exc:
                raise ConfigError(f"bad [grid] value for {key!r}: {exc}") from exc
    grid = GridSpec(**grid_kwargs)

    an_kwargs = {}
    if "analysis" in parser:
        sec = parser["analysis"]
        for key, raw in sec.items():
            if key == "probit_eps":
                an_kwargs["probit_eps"] = float(raw)
            elif key == "spline_lambda":
                an_kwargs["spline_lambda"] = raw if raw == "gcv" else float(raw)
            elif key == "n_pairs":
                an_kwargs["n_pairs"] = int(raw)
            elif key == "pair_seed":
                an_kwargs["pair_seed"] = int(raw)
            elif key == "margin":
                an_kwargs["margin"] = float(raw)
            else:
                raise ConfigError(f"unknown [analysis] key {key!r} in {path}")
    analysis = AnalysisOptions(**an_kwargs)

    out_dir = Path("out")
    if "output" in parser:
        for key, raw in parser["output"].items():
            if key != "dir":
                raise ConfigError(f"unknown [output] key {key!r} in {path}")
            out_dir = Path(raw)

    series = None
    if "series" in parser:
        sec = dict(parser["series"])
        knob = sec.pop("knob", "sdr")
        values = _floats(sec.pop("values", ""))
        if sec:
            raise ConfigError(f"unknown [series] keys {sorted(sec)} in {path}")
        series = SeriesSpec(knob=knob, values=values)

    try:
        grid_hp = grid.build(spec.master_seed)
        for hp in grid_hp[:1]:
            hp.validate()
    except InvalidSpecError as exc:
        raise ConfigError(f"bad [grid] section in {path}: {exc}") from exc

    return ExperimentConfig(shift=spec, grid=grid, analysis=analysis,
                            out_dir=out_dir, series=series)


def write_config(config: ExperimentConfig, path: str | Path) -> None:
    """Serialize a config; load_config(write_config(c)) reproduces c."""
    spec = config.shift
    lines = ["[shift]"]
    for name in ("d_core", "d_spu", "n_train", "n_id_test", "n_ood_test",
                 "k_groups", "master_seed"):
        lines.append(f"{name}={getattr(spec, name)}")
    for name in ("sigma_core", "sigma_spu", "p_maj", "pi1", "pi0", "p_y1"):
        value = getattr(spec, name)
        if value is not None:
            lines.append(f"{name}={format_sig(value)}")
    for name in ("r_tr", "r_ts"):
        value = getattr(spec, name)
        if value is not None:
            lines.append(f"{name}={','.join(format_sig(v) for v in value)}")

    g = config.grid
    lines += ["", "[grid]",
              f"learning_rates={','.join(format_sig(v) for v in g.learning_rates)}",
              f"l2s={','.join(format_sig(v) for v in g.l2s)}",
              f"batch_sizes={','.join(str(b) for b in g.batch_sizes)}",
              f"snapshot_epochs={','.join(str(e) for e in g.snapshot_epochs)}",
              f"n_seeds={g.n_seeds}"]

    a = config.analysis
    lines += ["", "[analysis]",
              f"probit_eps={format_sig(a.probit_eps)}",
              f"spline_lambda={a.spline_lambda if a.spline_lambda == 'gcv' else format_sig(a.spline_lambda)}",
              f"n_pairs={a.n_pairs}",
              f"margin={format_sig(a.margin)}"]
    if a.pair_seed is not None:
        lines.append(f"pair_seed={a.pair_seed}")

    lines += ["", "[output]", f"dir={config.out_dir}"]

    if config.series is not None:
        lines += ["", "[series]", f"knob={config.series.knob}",
                  f"values={','.join(format_sig(v) for v in config.series.values)}"]
    Path(path).write_text("\n".join(lines) + "\n")
