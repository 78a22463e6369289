"""Closed-form accuracy gap between subpopulations, and its verification.

Population model: binary label Y with P(Y=1) = p_y1, binary subpopulation Z
with P(Z=1|Y=1) = pi1 and P(Z=1|Y=0) = pi0, and scores X drawn from F_y given
Y only (so X and Z are conditionally independent given Y).  For any classifier
with true positive rate TPR under F_1 and true negative rate TNR under F_0,
the accuracy difference between the two subpopulations is

    gap = [p_y1 (1 - p_y1) / (p_z1 (1 - p_z1))] * |pi1 - pi0| * |TPR - TNR|,

which follows from the per-group decomposition

    acc(Z=z) = TPR * P(Y=1|Z=z) + TNR * P(Y=0|Z=z)

with the conditionals obtained by Bayes inversion.  The gap vanishes exactly
when label and subpopulation are independent (pi1 == pi0) or the classifier
treats the classes symmetrically (TPR == TNR).

Sweeping a threshold over a fixed pair of score distributions visits points
(1-TNR, TPR) along one ROC curve; because TPR varies nonlinearly with TNR,
so does the gap, and the traced (majority, minority) accuracy pairs bend into
the same crescent the model sweeps produce empirically.
"""

from __future__ import annotations

import csv
from dataclasses import dataclass
from pathlib import Path

import numpy as np

from .datagen import format_sig
from .errors import DegeneratePopulationError, EmptyGroupError, InvalidSpecError
from .gauss import normal_cdf, normal_quantile

_GRID_CLIP = (0.001, 0.999)


@dataclass(frozen=True)
class PopulationSpec:
    p_y1: float
    pi1: float
    pi0: float

    def validate(self) -> None:
        if not 0.0 < self.p_y1 < 1.0:
            raise InvalidSpecError(f"p_y1 must be in (0,1), got {self.p_y1}")
        if not (0.0 <= self.pi1 <= 1.0 and 0.0 <= self.pi0 <= 1.0):
            raise InvalidSpecError("pi1 and pi0 must lie in [0,1]")
        if not 0.0 < self.p_z1 < 1.0:
            raise DegeneratePopulationError(
                f"P(Z=1) = {self.p_z1} is degenerate; conditionals undefined")

    @property
    def p_z1(self) -> float:
        return self.pi1 * self.p_y1 + self.pi0 * (1.0 - self.p_y1)

    def p_y1_given_z(self, z: int) -> float:
        """Bayes inversion of the (Y, Z) dependence."""
        if z == 1:
            return self.pi1 * self.p_y1 / self.p_z1
        return (1.0 - self.pi1) * self.p_y1 / (1.0 - self.p_z1)


@dataclass(frozen=True)
class ScoreModel:
    """1-D Gaussian score distributions: X|Y=0 ~ N(mu0, s0^2), X|Y=1 ~ N(mu1, s1^2)."""

    mu0: float = -1.0
    mu1: float = 1.0
    s0: float = 1.0
    s1: float = 1.0

    def validate(self) -> None:
        if self.s0 <= 0 or self.s1 <= 0:
            raise InvalidSpecError("score standard deviations must be positive")

    def tpr(self, threshold: float) -> float:
        """P(X > t | Y=1) for the rule: predict 1 iff x > t."""
        return 1.0 - normal_cdf((threshold - self.mu1) / self.s1)

    def tnr(self, threshold: float) -> float:
        """P(X <= t | Y=0)."""
        return normal_cdf((threshold - self.mu0) / self.s0)

    def threshold_for_rates(self, tpr: float, tnr: float) -> tuple[float, "ScoreModel"]:
        """A (threshold, score model) pair realizing the requested rates.

        Keeps this model's shapes but shifts the means so that the rule
        ``x > 0`` attains exactly (tpr, tnr); used to turn rate draws into
        samplable populations.
        """
        if not (0.0 < tpr < 1.0 and 0.0 < tnr < 1.0):
            raise InvalidSpecError("tpr and tnr must be strictly inside (0,1)")
        mu1 = -self.s1 * normal_quantile(1.0 - tpr)
        mu0 = -self.s0 * normal_quantile(tnr)
        return 0.0, ScoreModel(mu0=mu0, mu1=mu1, s0=self.s0, s1=self.s1)


def accuracy_gap(pop: PopulationSpec, tpr: float, tnr: float) -> float:
    """Closed-form |acc(Z=1) - acc(Z=0)| for a classifier with these rates."""
    pop.validate()
    scale = (pop.p_y1 * (1.0 - pop.p_y1)) / (pop.p_z1 * (1.0 - pop.p_z1))
    return scale * abs(pop.pi1 - pop.pi0) * abs(tpr - tnr)


def subpop_accuracy(pop: PopulationSpec, tpr: float, tnr: float, z: int) -> float:
    """Accuracy on subpopulation z via the conditional decomposition."""
    pop.validate()
    if z not in (0, 1):
        raise InvalidSpecError(f"z must be 0 or 1, got {z}")
    p1 = pop.p_y1_given_z(z)
    return tpr * p1 + tnr * (1.0 - p1)


def monte_carlo_gap(pop: PopulationSpec, score: ScoreModel, threshold: float,
                    n_samples: int, seed: int = 0) -> tuple[float, float]:
    """Estimate the subpopulation accuracy gap by direct simulation.

    Samples Z, then Y | Z by Bayes inversion, then X from the label's score
    distribution; classifies by ``x > threshold``.  Returns the absolute gap
    and a binomially propagated standard error.  This path shares no formulas
    with :func:`accuracy_gap` beyond the population definition, which is what
    makes it a usable cross-check.
    """
    pop.validate()
    score.validate()
    if n_samples < 10_000:
        raise InvalidSpecError("n_samples must be at least 10^4")
    rng = np.random.default_rng(seed)
    z = rng.random(n_samples) < pop.p_z1
    p_y1_z = np.where(z, pop.p_y1_given_z(1), pop.p_y1_given_z(0))
    y = rng.random(n_samples) < p_y1_z
    x = np.where(y, score.mu1 + score.s1 * rng.standard_normal(n_samples),
                 score.mu0 + score.s0 * rng.standard_normal(n_samples))
    pred = x > threshold
    correct = pred == y

    accs, ses = [], []
    for zv in (1, 0):
        idx = z if zv == 1 else ~z
        n_z = int(np.sum(idx))
        if n_z == 0:
            raise EmptyGroupError(f"no Monte Carlo samples landed in Z={zv}")
        acc = float(np.mean(correct[idx]))
        accs.append(acc)
        ses.append(acc * (1.0 - acc) / n_z)
    gap = abs(accs[0] - accs[1])
    return gap, float(np.sqrt(ses[0] + ses[1]))


@dataclass(frozen=True)
class RocPoint:
    threshold: float
    tnr: float
    tpr: float
    maj_acc: float
    min_acc: float
    gap: float


def _mixture_quantile(pop: PopulationSpec, score: ScoreModel, q: float) -> float:
    """Inverse CDF of the mixed score distribution, by bisection."""
    lo = min(score.mu0 - 10 * score.s0, score.mu1 - 10 * score.s1)
    hi = max(score.mu0 + 10 * score.s0, score.mu1 + 10 * score.s1)

    def cdf(t: float) -> float:
        return ((1.0 - pop.p_y1) * normal_cdf((t - score.mu0) / score.s0)
                + pop.p_y1 * normal_cdf((t - score.mu1) / score.s1))

    for _ in range(200):
        mid = 0.5 * (lo + hi)
        if mid == lo or mid == hi:
            break
        if cdf(mid) < q:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def roc_traverse(pop: PopulationSpec, score: ScoreModel,
                 n_thresholds: int = 101) -> list[RocPoint]:
    """Trace the analytic accuracy curve obtained by sweeping the threshold.

    Thresholds are placed at evenly spaced quantiles of the mixed score
    distribution (clipped to [0.001, 0.999]), so the informative region of the
    ROC curve is covered uniformly.  Each threshold is one "model"; the
    emitted (maj_acc, min_acc) sequence is the analytic counterpart of a
    trained sweep's point cloud.
    """
    pop.validate()
    score.validate()
    if n_thresholds < 3:
        raise InvalidSpecError("need at least 3 thresholds")
    qs = np.linspace(_GRID_CLIP[0], _GRID_CLIP[1], n_thresholds)
    points = []
    for q in qs:
        t = _mixture_quantile(pop, score, float(q))
        tpr = score.tpr(t)
        tnr = score.tnr(t)
        maj = subpop_accuracy(pop, tpr, tnr, 1)
        mnr = subpop_accuracy(pop, tpr, tnr, 0)
        points.append(RocPoint(threshold=t, tnr=tnr, tpr=tpr, maj_acc=maj,
                               min_acc=mnr, gap=abs(maj - mnr)))
    return points


def moon_arm(points: list[RocPoint]) -> list[RocPoint]:
    """The majority-rising branch of a traversal.

    The full (maj_acc, min_acc) trace folds back once the threshold passes
    the majority subpopulation's optimum, so the trace as a whole is not a
    function of majority accuracy.  The prefix up to that peak is the
    single-valued crescent arm, which is the piece comparable to a trained
    sweep (real sweeps never produce majority accuracy below chance).
    """
    peak = max(range(len(points)), key=lambda i: points[i].maj_acc)
    return points[:peak + 1]


def write_traversal_csv(points: list[RocPoint], path: str | Path) -> None:
    with open(path, "w", newline="") as fh:
        writer = csv.writer(fh, lineterminator="\n")
        writer.writerow(["threshold", "tnr", "tpr", "maj_acc", "min_acc", "gap"])
        for p in points:
            writer.writerow([format_sig(p.threshold), format_sig(p.tnr),
                             format_sig(p.tpr), format_sig(p.maj_acc),
                             format_sig(p.min_acc), format_sig(p.gap)])


def gap_summary(pop: PopulationSpec, score: ScoreModel, threshold: float,
                n_samples: int = 1_000_000, seed: int = 0) -> dict:
    """Closed form vs Monte Carlo at one operating point, with a verdict."""
    tpr = score.tpr(threshold)
    tnr = score.tnr(threshold)
    closed = accuracy_gap(pop, tpr, tnr)
    mc, se = monte_carlo_gap(pop, score, threshold, n_samples, seed=seed)
    consistent = abs(closed - mc) <= 3.0 * se
    return {
        "p_y1": pop.p_y1, "pi1": pop.pi1, "pi0": pop.pi0,
        "threshold": threshold, "tpr": tpr, "tnr": tnr,
        "closed_form_gap": closed,
        "mc_gap": mc, "mc_se": se, "n_samples": n_samples,
        "verdict": "consistent" if consistent else "inconsistent",
    }
