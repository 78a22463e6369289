"""Logistic-regression sweeps by plain gradient descent.

The objective for labels y in {-1, +1} is

    J(w, b) = mean_i log(1 + exp(-y_i (w . x_i + b))) + (l2 / 2) ||w||^2,

minimized from an all-zeros start by full-batch gradient descent or
mini-batch SGD without momentum and without learning-rate decay.  Snapshots
taken at intermediate epochs are first-class models: the sweep deliberately
keeps under-trained, oscillating, and converged classifiers alike, because
the accuracy-curve analysis needs the whole spectrum.

The prediction rule is fixed everywhere: predict +1 iff w . x + b >= 0
(the boundary tie resolves to +1).
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datagen import Dataset, ShiftSpec, format_sig
from .errors import DimensionMismatchError, DivergenceError, InvalidSpecError
from .rng import derive_stream

FULL_BATCH = "full"


@dataclass(frozen=True)
class HyperParams:
    learning_rate: float
    l2: float = 0.0
    batch_size: int | str = FULL_BATCH
    max_epochs: int = 25
    snapshot_epochs: tuple[int, ...] = (1, 5, 10, 25)
    seed: int = 0

    def cell_id(self) -> str:
        """Content-derived identifier: reordering a grid never renames models."""
        bs = self.batch_size if self.batch_size == FULL_BATCH else f"{int(self.batch_size)}"
        return f"lr{self.learning_rate:.6g}-l2{self.l2:.6g}-b{bs}-s{self.seed:016x}"

    def validate(self) -> None:
        if self.learning_rate <= 0:
            raise InvalidSpecError("learning_rate must be positive")
        if self.l2 < 0:
            raise InvalidSpecError("l2 must be non-negative")
        if self.batch_size != FULL_BATCH:
            if not isinstance(self.batch_size, int) or self.batch_size <= 0:
                raise InvalidSpecError(f"batch_size must be 'full' or a positive int")
        if self.max_epochs <= 0:
            raise InvalidSpecError("max_epochs must be positive")
        snaps = self.snapshot_epochs
        if not snaps or any(e <= 0 for e in snaps):
            raise InvalidSpecError("snapshot_epochs must be positive")
        if any(a >= b for a, b in zip(snaps, snaps[1:])):
            raise InvalidSpecError("snapshot_epochs must be strictly increasing")
        if snaps[-1] > self.max_epochs:
            raise InvalidSpecError("last snapshot epoch exceeds max_epochs")


@dataclass(frozen=True)
class ModelRecord:
    """A linear classifier snapshot: predict +1 iff w . x + b >= 0."""

    model_id: str
    weights: np.ndarray
    bias: float
    epoch: int
    train_loss: float
    hyperparams: HyperParams | None = None

    def __post_init__(self):
        self.weights.setflags(write=False)

    def decision_values(self, features: np.ndarray) -> np.ndarray:
        if features.shape[1] != self.weights.shape[0]:
            raise DimensionMismatchError(
                f"model {self.model_id} has {self.weights.shape[0]} weights, "
                f"data has {features.shape[1]} features")
        return features @ self.weights + self.bias

    def predict(self, features: np.ndarray) -> np.ndarray:
        """Labels in {-1, +1}; the tie at the boundary resolves to +1."""
        f = self.decision_values(features)
        return np.where(f >= 0.0, 1, -1).astype(np.int64)


def _softplus(v: np.ndarray) -> np.ndarray:
    # log(1 + exp(v)) without overflow.
    return np.maximum(v, 0.0) + np.log1p(np.exp(-np.abs(v)))


def mean_logistic_loss(weights: np.ndarray, bias: float, dataset: Dataset,
                       l2: float = 0.0) -> float:
    # Diverging weights legitimately overflow to inf here; the caller treats
    # a non-finite value as divergence, so the overflow warning is noise.
    with np.errstate(over="ignore"):
        margins = dataset.labels * (dataset.features @ weights + bias)
        loss = float(np.mean(_softplus(-margins)))
        return loss + 0.5 * l2 * float(weights @ weights)


def gradient_lipschitz_bound(dataset: Dataset, l2: float = 0.0) -> float:
    """Upper bound on the objective's gradient Lipschitz constant.

    The logistic Hessian is bounded by (1/4n) X~^T X~ with the bias column
    appended, so max_i ||x~_i||^2 / 4 + l2 dominates its largest eigenvalue.
    """
    row_sq = np.max(np.einsum("ij,ij->i", dataset.features, dataset.features)) + 1.0
    return float(row_sq) / 4.0 + l2


def train(dataset: Dataset, hp: HyperParams,
          model_prefix: str | None = None) -> list[ModelRecord]:
    """Gradient descent with per-snapshot records; deterministic per (dataset, hp).

    Gradients are accumulated in row order (full batch) or in the order of the
    per-epoch permutation derived from (hp.seed, epoch), so reruns and
    truncated reruns reproduce snapshots exactly.
    """
    hp.validate()
    if model_prefix is None:
        model_prefix = hp.cell_id()
    if dataset.split != "train":
        raise InvalidSpecError(f"training requires the train split, got {dataset.split!r}")

    X = dataset.features
    y = dataset.labels.astype(np.float64)
    n, d = X.shape
    w = np.zeros(d)
    b = 0.0
    lr = hp.learning_rate
    snapshots = set(hp.snapshot_epochs)
    records = []

    for epoch in range(1, hp.snapshot_epochs[-1] + 1):
        if hp.batch_size == FULL_BATCH:
            batches = [slice(0, n)]
            Xe, ye = X, y
        else:
            perm_rng = np.random.default_rng(derive_stream(hp.seed, epoch))
            order = perm_rng.permutation(n)
            Xe, ye = X[order], y[order]
            step = int(hp.batch_size)
            batches = [slice(i, min(i + step, n)) for i in range(0, n, step)]
        # Unstable settings legitimately blow the iterates up to inf; that
        # path is reported as DivergenceError, so overflow warnings are noise.
        with np.errstate(over="ignore"):
            for sl in batches:
                margins = ye[sl] * (Xe[sl] @ w + b)
                # d/df log(1+e^{-f}) = -sigmoid(-f), computed overflow-free
                sig = np.empty_like(margins)
                pos = margins >= 0
                sig[pos] = np.exp(-margins[pos]) / (1.0 + np.exp(-margins[pos]))
                sig[~pos] = 1.0 / (1.0 + np.exp(margins[~pos]))
                coef = ye[sl] * sig
                m = sl.stop - sl.start
                grad_w = -(Xe[sl].T @ coef) / m + hp.l2 * w
                grad_b = -float(np.sum(coef)) / m
                w -= lr * grad_w
                b -= lr * grad_b
        if not (np.all(np.isfinite(w)) and np.isfinite(b)):
            raise DivergenceError(epoch)
        if epoch in snapshots:
            loss = mean_logistic_loss(w, b, dataset, hp.l2)
            if not np.isfinite(loss):
                raise DivergenceError(epoch)
            records.append(ModelRecord(
                model_id=f"{model_prefix}e{epoch:04d}", weights=w.copy(), bias=b,
                epoch=epoch, train_loss=loss, hyperparams=hp))
    return records


@dataclass
class SweepResult:
    records: list[ModelRecord]
    failures: list[tuple[str, HyperParams, str]]


def sweep(dataset: Dataset, grid: list[HyperParams]) -> SweepResult:
    """Train every grid cell; cell failures are recorded, not fatal.

    Output order is by model_id, so any permutation of the same grid yields
    the same record list.
    """
    if not grid:
        raise InvalidSpecError("hyperparameter grid must be non-empty")
    ids = [hp.cell_id() for hp in grid]
    if len(set(ids)) != len(ids):
        raise InvalidSpecError("grid contains duplicate hyperparameter cells")
    records: list[ModelRecord] = []
    failures: list[tuple[str, HyperParams, str]] = []
    for cell, hp in zip(ids, grid):
        try:
            records.extend(train(dataset, hp))
        except DivergenceError as exc:
            failures.append((cell, hp, str(exc)))
    records.sort(key=lambda r: r.model_id)
    return SweepResult(records=records, failures=failures)


def default_grid(master_seed: int = 0, n_seeds: int = 5,
                 learning_rates: tuple[float, ...] | None = None,
                 l2s: tuple[float, ...] = (0.0, 1e-4, 1e-2),
                 batch_sizes: tuple[int | str, ...] = (FULL_BATCH, 32),
                 snapshot_epochs: tuple[int, ...] = (1, 2, 5, 10, 25, 50, 100)) -> list[HyperParams]:
    """The stock sweep grid: 5 log-spaced learning rates x ridge x batch x seeds."""
    if learning_rates is None:
        learning_rates = tuple(np.logspace(-4, -1, 5))
    seeds = [derive_stream(master_seed, 0x5345, k) for k in range(n_seeds)]
    grid = []
    for lr in learning_rates:
        for l2 in l2s:
            for bs in batch_sizes:
                for seed in seeds:
                    grid.append(HyperParams(
                        learning_rate=float(lr), l2=float(l2), batch_size=bs,
                        max_epochs=snapshot_epochs[-1],
                        snapshot_epochs=snapshot_epochs, seed=seed))
    return grid


def oracle_classifier(spec: ShiftSpec, mode: str = "core-only") -> ModelRecord:
    """Analytic reference classifiers.

    ``core-only`` puts unit weight on every core coordinate and none on the
    spurious block: the Bayes rule for the symmetric equal-prior Gaussian
    pair, independent of the group.  ``all-features`` puts unit weight
    everywhere.
    """
    if mode not in ("core-only", "all-features"):
        raise InvalidSpecError(f"unknown oracle mode {mode!r}")
    w = np.ones(spec.d_total)
    if mode == "core-only":
        w[spec.d_core:] = 0.0
    return ModelRecord(model_id=f"oracle-{mode}", weights=w, bias=0.0, epoch=0,
                       train_loss=float("nan"), hyperparams=None)


# ---------------------------------------------------------------------------
# Model store
# ---------------------------------------------------------------------------

def _batch_str(bs: int | str) -> str:
    return bs if bs == FULL_BATCH else str(int(bs))


def write_model_store(records: list[ModelRecord], models_path: str | Path,
                      weights_path: str | Path) -> None:
    with open(models_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model_id", "lr", "l2", "batch_size", "epoch", "seed", "train_loss"])
        for r in records:
            hp = r.hyperparams
            writer.writerow([
                r.model_id, format_sig(hp.learning_rate), format_sig(hp.l2),
                _batch_str(hp.batch_size), r.epoch, hp.seed, format_sig(r.train_loss)])
    with open(weights_path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        d = records[0].weights.shape[0] if records else 0
        writer.writerow(["model_id", "b"] + [f"w{j}" for j in range(d)])
        for r in records:
            writer.writerow([r.model_id, format_sig(r.bias)]
                            + [format_sig(v) for v in r.weights])


def read_model_store(models_path: str | Path, weights_path: str | Path) -> list[ModelRecord]:
    hps: dict[str, tuple[HyperParams, int, float]] = {}
    with open(models_path, newline="") as fh:
        for row in csv.DictReader(fh):
            bs = row["batch_size"]
            hp = HyperParams(
                learning_rate=float(row["lr"]), l2=float(row["l2"]),
                batch_size=bs if bs == FULL_BATCH else int(bs),
                max_epochs=int(row["epoch"]),
                snapshot_epochs=(int(row["epoch"]),), seed=int(row["seed"]))
            hps[row["model_id"]] = (hp, int(row["epoch"]), float(row["train_loss"]))
    records = []
    with open(weights_path, newline="") as fh:
        for row in csv.DictReader(fh):
            model_id = row["model_id"]
            hp, epoch, loss = hps[model_id]
            d = len(row) - 2
            w = np.array([float(row[f"w{j}"]) for j in range(d)])
            records.append(ModelRecord(model_id=model_id, weights=w, bias=float(row["b"]),
                                       epoch=epoch, train_loss=loss, hyperparams=hp))
    records.sort(key=lambda r: r.model_id)
    return records
