"""Per-subpopulation evaluation, pairwise agreement, and model mixtures.

Evaluation runs once against a single group-balanced test pool; the
in-distribution and shifted views are reweightings of the same per-group
accuracies:

    id_acc  = sum_g r_tr[g] * group_acc[g]
    ood_acc = sum_g r_ts[g] * group_acc[g]

so the two views differ only through the mixture weights, never through
sampling noise.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datagen import Dataset, format_sig
from .errors import DimensionMismatchError, EmptyGroupError, InvalidSpecError
from .trainer import FULL_BATCH, ModelRecord


@dataclass(frozen=True)
class EvalRecord:
    model_id: str
    group_acc: tuple[float, ...]
    tpr: tuple[float, ...]
    tnr: tuple[float, ...]
    id_acc: float
    ood_acc: float
    # Raw counts per group, kept so the accuracy decomposition can be checked
    # in exact integer arithmetic.  Absent for expectation-valued records
    # (exact-mode mixtures).
    n_pos: tuple[int, ...] | None = None
    n_neg: tuple[int, ...] | None = None
    correct_pos: tuple[int, ...] | None = None
    correct_neg: tuple[int, ...] | None = None
    epoch: int = 0

    @property
    def k_groups(self) -> int:
        return len(self.group_acc)


@dataclass(frozen=True)
class AgreementRecord:
    model_a: str
    model_b: str
    agreement: float


def _check_weights(weights: tuple[float, ...], k: int, name: str) -> None:
    if len(weights) != k:
        raise InvalidSpecError(f"{name} must have {k} entries")
    if abs(sum(weights) - 1.0) > 1e-9:
        raise InvalidSpecError(f"{name} must sum to 1")


def evaluate_predictions(model_id: str, preds: np.ndarray, test: Dataset,
                         r_tr: tuple[float, ...], r_ts: tuple[float, ...],
                         epoch: int = 0) -> EvalRecord:
    """Score fixed predictions (labels in {-1,+1}) against the test pool."""
    k = test.k_groups
    _check_weights(r_tr, k, "r_tr")
    _check_weights(r_ts, k, "r_ts")

    n_pos, n_neg, c_pos, c_neg = [], [], [], []
    group_acc, tpr, tnr = [], [], []
    correct = preds == test.labels
    for g in range(k):
        idx = test.groups == g
        n_g = int(np.sum(idx))
        if n_g == 0:
            raise EmptyGroupError(f"group {g} has no rows in the test pool")
        pos = idx & (test.labels == 1)
        neg = idx & (test.labels == -1)
        np_g, nn_g = int(np.sum(pos)), int(np.sum(neg))
        cp_g, cn_g = int(np.sum(correct[pos])), int(np.sum(correct[neg]))
        n_pos.append(np_g)
        n_neg.append(nn_g)
        c_pos.append(cp_g)
        c_neg.append(cn_g)
        group_acc.append((cp_g + cn_g) / n_g)
        tpr.append(cp_g / np_g if np_g else float("nan"))
        tnr.append(cn_g / nn_g if nn_g else float("nan"))

    id_acc = float(sum(w * a for w, a in zip(r_tr, group_acc)))
    ood_acc = float(sum(w * a for w, a in zip(r_ts, group_acc)))
    return EvalRecord(model_id=model_id, group_acc=tuple(group_acc), tpr=tuple(tpr),
                      tnr=tuple(tnr), id_acc=id_acc, ood_acc=ood_acc,
                      n_pos=tuple(n_pos), n_neg=tuple(n_neg),
                      correct_pos=tuple(c_pos), correct_neg=tuple(c_neg), epoch=epoch)


def evaluate(model: ModelRecord, test: Dataset, r_tr: tuple[float, ...],
             r_ts: tuple[float, ...]) -> EvalRecord:
    preds = model.predict(test.features)
    return evaluate_predictions(model.model_id, preds, test, r_tr, r_ts,
                                epoch=model.epoch)


def agreement(model_a: ModelRecord, model_b: ModelRecord, test: Dataset) -> AgreementRecord:
    """Fraction of test rows on which the two classifiers emit the same label."""
    if model_a.weights.shape != model_b.weights.shape:
        raise DimensionMismatchError("models have different feature dimensions")
    pa = model_a.predict(test.features)
    pb = model_b.predict(test.features)
    frac = float(np.mean(pa == pb))
    return AgreementRecord(model_a=model_a.model_id, model_b=model_b.model_id,
                           agreement=frac)


def agreement_by_group(preds_a: np.ndarray, preds_b: np.ndarray,
                       groups: np.ndarray, k_groups: int) -> tuple[float, ...]:
    """Per-group agreement fractions for two prediction vectors."""
    match = preds_a == preds_b
    out = []
    for g in range(k_groups):
        idx = groups == g
        n_g = int(np.sum(idx))
        if n_g == 0:
            raise EmptyGroupError(f"group {g} has no rows in the test pool")
        out.append(float(np.mean(match[idx])))
    return tuple(out)


def model_mixture(model_a: ModelRecord, model_b: ModelRecord, p: float,
                  test: Dataset, r_tr: tuple[float, ...], r_ts: tuple[float, ...],
                  mode: str = "exact", seed: int = 0) -> EvalRecord:
    """Interpolate two classifiers with a biased coin of probability ``p``.

    ``exact`` returns the expectation directly: every accuracy field is
    p * (model_a value) + (1-p) * (model_b value), which traces the straight
    chord between the two models.  ``sampled`` flips one seeded coin per test
    row and scores the composite predictions.
    """
    if not 0.0 <= p <= 1.0:
        raise InvalidSpecError(f"mixture probability must be in [0,1], got {p}")
    if mode == "sampled":
        rng = np.random.default_rng(seed)
        take_a = rng.random(test.n_rows) < p
        preds = np.where(take_a, model_a.predict(test.features),
                         model_b.predict(test.features))
        return evaluate_predictions(
            f"mix[{model_a.model_id}|{model_b.model_id}|p={format_sig(p)}|sampled]",
            preds, test, r_tr, r_ts)
    if mode != "exact":
        raise InvalidSpecError(f"unknown mixture mode {mode!r}")

    ra = evaluate(model_a, test, r_tr, r_ts)
    rb = evaluate(model_b, test, r_tr, r_ts)

    def mix(a, b):
        return tuple(p * x + (1.0 - p) * y for x, y in zip(a, b))

    return EvalRecord(
        model_id=f"mix[{model_a.model_id}|{model_b.model_id}|p={format_sig(p)}]",
        group_acc=mix(ra.group_acc, rb.group_acc), tpr=mix(ra.tpr, rb.tpr),
        tnr=mix(ra.tnr, rb.tnr),
        id_acc=p * ra.id_acc + (1.0 - p) * rb.id_acc,
        ood_acc=p * ra.ood_acc + (1.0 - p) * rb.ood_acc)


# ---------------------------------------------------------------------------
# Results / predictions files
# ---------------------------------------------------------------------------

def results_header(k_groups: int) -> list[str]:
    return (["model_id", "epoch", "lr", "l2", "batch_size", "seed"]
            + [f"group_acc_{g}" for g in range(k_groups)]
            + [f"tpr_{g}" for g in range(k_groups)]
            + [f"tnr_{g}" for g in range(k_groups)]
            + ["id_acc", "ood_acc"])


def write_results_csv(records: list[tuple[ModelRecord, EvalRecord]],
                      path: str | Path) -> None:
    if not records:
        raise InvalidSpecError("no evaluation records to write")
    k = records[0][1].k_groups
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(results_header(k))
        for model, ev in records:
            hp = model.hyperparams
            writer.writerow(
                [ev.model_id, model.epoch,
                 format_sig(hp.learning_rate) if hp else "",
                 format_sig(hp.l2) if hp else "",
                 (hp.batch_size if hp.batch_size == FULL_BATCH else str(hp.batch_size)) if hp else "",
                 hp.seed if hp else ""]
                + [format_sig(v) for v in ev.group_acc]
                + [format_sig(v) for v in ev.tpr]
                + [format_sig(v) for v in ev.tnr]
                + [format_sig(ev.id_acc), format_sig(ev.ood_acc)])


def read_results_csv(path: str | Path) -> list[dict[str, str]]:
    with open(path, newline="") as fh:
        return list(csv.DictReader(fh))


def predictions_bits(preds: np.ndarray) -> str:
    """'1' for +1 and '0' for -1, one character per test row."""
    return "".join("1" if v == 1 else "0" for v in preds)


def bits_to_predictions(bits: str) -> np.ndarray:
    return np.where(np.frombuffer(bits.encode(), dtype=np.uint8) == ord("1"), 1, -1)


def write_preds_csv(rows: list[tuple[str, str]], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model_id", "bits"])
        writer.writerows(rows)


def read_preds_csv(path: str | Path) -> dict[str, str]:
    with open(path, newline="") as fh:
        return {row["model_id"]: row["bits"] for row in csv.DictReader(fh)}


def write_agreement_csv(records: list[AgreementRecord], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["model_a", "model_b", "agreement"])
        for r in records:
            writer.writerow([r.model_a, r.model_b, format_sig(r.agreement)])
