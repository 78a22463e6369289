"""Synthetic subpopulation-shift datasets.

Feature model: each row carries core features drawn around ``y * 1`` and
spurious features drawn around ``a * 1``,

    x_core | y ~ N(y * 1, sigma_core^2 I),
    x_spu  | a ~ N(a * 1, sigma_spu^2 I),

with label ``y`` in {-1, +1} and spurious attribute value ``a``.  Three
grouping modes are supported:

* majority mode (2 groups, ``pi1``/``pi0`` unset): group 1 is the majority
  subpopulation where the attribute agrees with the label (``a = y``); group 0
  is the minority where ``a = -y``.  ``p_maj`` fixes the majority fraction of
  the training split and labels are balanced within each group.
* attribute mode (2 groups, ``pi1``/``pi0`` set): the group IS the attribute,
  ``a = +1`` for group 1 and ``a = -1`` for group 0, with conditional rates
  P(Z=1|Y=1) = pi1 and P(Z=1|Y=0) = pi0.  ``|pi1 - pi0|`` is the level of
  spurious correlation; ``pi1 == pi0`` makes label and attribute independent.
* k-group mode (``k_groups > 2``): group g gets its own attribute value
  ``a_g`` evenly spaced in [-1, +1], labels balanced within groups, train
  mixture given by ``r_tr``.

All counts are exact (largest-remainder apportionment, floor/ceil label
splits); randomness only ever enters through the per-row feature noise, which
is derived from ``(master_seed, split, row index)`` so generation is
deterministic and order-independent.
"""

from __future__ import annotations

import re
from dataclasses import dataclass, replace
from pathlib import Path

import numpy as np

from .errors import DegenerateDimensionError, InfeasibleMarginalsError, InvalidSpecError
from .rng import MASK64, row_streams, stream_normals

SPLITS = ("train", "id_test", "ood_test")
_SPLIT_SCOPE = {"train": 0x5452, "id_test": 0x4944, "ood_test": 0x4F4F}

_WEIGHT_SUM_TOL = 1e-12


def _apportion(total: int, weights: tuple[float, ...]) -> list[int]:
    """Split ``total`` into integer counts proportional to ``weights``.

    Largest-remainder method; ties broken by lower index, so the result is
    deterministic.
    """
    raw = [total * w for w in weights]
    counts = [int(np.floor(r)) for r in raw]
    short = total - sum(counts)
    remainders = sorted(range(len(weights)), key=lambda i: (-(raw[i] - counts[i]), i))
    for i in remainders[:short]:
        counts[i] += 1
    return counts


def _split_pos(count: int, p_pos: float) -> int:
    """Positive-label count for a block: floor/ceil split, never Bernoulli."""
    return int(np.floor(p_pos * count + 0.5))


@dataclass(frozen=True)
class ShiftSpec:
    """Full parameterization of the data-generating process."""

    d_core: int
    d_spu: int
    sigma_core: float
    sigma_spu: float
    n_train: int
    p_maj: float | None = None
    pi1: float | None = None
    pi0: float | None = None
    p_y1: float = 0.5
    n_id_test: int = 10_000
    n_ood_test: int = 10_000
    r_tr: tuple[float, ...] | None = None
    r_ts: tuple[float, ...] | None = None
    k_groups: int = 2
    master_seed: int = 0

    @property
    def d_total(self) -> int:
        return self.d_core + self.d_spu

    @property
    def mode(self) -> str:
        if self.k_groups > 2:
            return "kgroup"
        if self.pi1 is None and self.pi0 is None:
            return "majority"
        return "attribute"

    @property
    def p_z1(self) -> float:
        """Attribute marginal P(Z=1) in attribute mode."""
        if self.mode != "attribute":
            raise InvalidSpecError("p_z1 is only defined in attribute mode")
        return self.pi1 * self.p_y1 + self.pi0 * (1.0 - self.p_y1)

    def validate(self) -> None:
        if self.d_core == 0:
            raise DegenerateDimensionError("d_core must be positive")
        if self.d_core < 0 or self.d_spu < 0:
            raise InvalidSpecError("feature dimensions must be non-negative")
        if self.sigma_core <= 0 or self.sigma_spu <= 0:
            raise InvalidSpecError("noise scales must be positive")
        if self.n_train <= 0 or self.n_id_test <= 0 or self.n_ood_test <= 0:
            raise InvalidSpecError("sample counts must be positive")
        if not 0.0 < self.p_y1 < 1.0:
            raise InvalidSpecError(f"p_y1 must be in (0,1), got {self.p_y1}")
        if self.k_groups < 2:
            raise InvalidSpecError("k_groups must be at least 2")
        if not 0 <= self.master_seed <= MASK64:
            raise InvalidSpecError("master_seed must fit in 64 bits")
        if (self.pi1 is None) != (self.pi0 is None):
            raise InvalidSpecError("pi1 and pi0 must be set together")

        mode = self.mode
        if mode == "majority":
            if self.p_maj is None or not 0.0 < self.p_maj < 1.0:
                raise InvalidSpecError("majority mode requires p_maj in (0,1)")
        elif mode == "attribute":
            if not (0.0 <= self.pi1 <= 1.0 and 0.0 <= self.pi0 <= 1.0):
                raise InvalidSpecError("pi1 and pi0 must lie in [0,1]")
            if not 0.0 < self.p_z1 < 1.0:
                raise InvalidSpecError("P(Z=1) = pi1*p_y1 + pi0*(1-p_y1) must lie in (0,1)")
        else:
            if self.pi1 is not None:
                raise InvalidSpecError("k-group mode does not take pi1/pi0")
            if self.r_tr is None:
                raise InvalidSpecError("k-group mode requires explicit r_tr")

        for name, weights in (("r_tr", self.r_tr), ("r_ts", self.r_ts)):
            if weights is None:
                continue
            if len(weights) != self.k_groups:
                raise InvalidSpecError(f"{name} must have {self.k_groups} entries")
            if any(w < 0.0 or w > 1.0 for w in weights):
                raise InvalidSpecError(f"{name} entries must lie in [0,1]")
            if abs(sum(weights) - 1.0) > _WEIGHT_SUM_TOL:
                raise InvalidSpecError(f"{name} must sum to 1 within {_WEIGHT_SUM_TOL}")
        if self.r_tr is not None and mode != "kgroup":
            implied = self.train_weights()
            if any(abs(a - b) > 1e-9 for a, b in zip(self.r_tr, implied)):
                raise InvalidSpecError("explicit r_tr conflicts with the 2-group parameters")

    def train_weights(self) -> tuple[float, ...]:
        """Group mixture of the training (in-distribution) population."""
        mode = self.mode
        if mode == "majority":
            return (1.0 - self.p_maj, self.p_maj)
        if mode == "attribute":
            return (1.0 - self.p_z1, self.p_z1)
        return tuple(self.r_tr)

    def ood_weights(self) -> tuple[float, ...]:
        """Group mixture of the shifted test population (equal by default)."""
        if self.r_ts is not None:
            return tuple(self.r_ts)
        return tuple(1.0 / self.k_groups for _ in range(self.k_groups))

    def group_label_counts(self, split: str) -> list[tuple[int, int]]:
        """Exact (positives, negatives) per group for one split."""
        if split not in SPLITS:
            raise InvalidSpecError(f"unknown split {split!r}")
        n = {"train": self.n_train, "id_test": self.n_id_test, "ood_test": self.n_ood_test}[split]
        mode = self.mode

        if mode == "attribute":
            if split == "train" or split == "id_test":
                # Class-first so class counts are exact; attribute within class.
                n_pos = _split_pos(n, self.p_y1)
                n_neg = n - n_pos
                n11 = _split_pos(n_pos, self.pi1)
                n01 = _split_pos(n_neg, self.pi0)
                return [(n_pos - n11, n_neg - n01), (n11, n01)]
            # Shifted pool: group-first, within-group label rates held fixed.
            p_z1 = self.p_z1
            cond_pos = (
                (1.0 - self.pi1) * self.p_y1 / (1.0 - p_z1),
                self.pi1 * self.p_y1 / p_z1,
            )
            groups = _apportion(n, self.ood_weights())
            return [(_split_pos(g, cond_pos[z]), g - _split_pos(g, cond_pos[z]))
                    for z, g in enumerate(groups)]

        # Majority and k-group modes: labels balanced within every group.
        if mode == "majority" and split == "train":
            n_maj = int(np.floor(self.p_maj * n + 0.5))
            groups = [n - n_maj, n_maj]
        else:
            weights = self.train_weights() if split in ("train", "id_test") else self.ood_weights()
            groups = _apportion(n, weights)
        return [(_split_pos(g, self.p_y1), g - _split_pos(g, self.p_y1)) for g in groups]

    def attribute_values(self) -> tuple[float, ...]:
        """Per-group attribute value ``a_g`` (k-group mode only)."""
        k = self.k_groups
        return tuple(-1.0 + 2.0 * g / (k - 1) for g in range(k))


@dataclass(frozen=True)
class Dataset:
    """Immutable feature matrix with labels, group tags, and a split tag."""

    features: np.ndarray
    labels: np.ndarray
    groups: np.ndarray
    split: str
    k_groups: int

    def __post_init__(self):
        n = self.features.shape[0]
        if self.labels.shape != (n,) or self.groups.shape != (n,):
            raise InvalidSpecError("features, labels, and groups must align")
        for arr in (self.features, self.labels, self.groups):
            arr.setflags(write=False)

    @property
    def n_rows(self) -> int:
        return self.features.shape[0]

    @property
    def n_features(self) -> int:
        return self.features.shape[1]

    def group_indices(self, g: int) -> np.ndarray:
        return np.flatnonzero(self.groups == g)


def generate(spec: ShiftSpec, split: str = "train") -> Dataset:
    """Draw one dataset for ``split``; deterministic in (spec, split, seed).

    Rows are laid out group-major (positives before negatives within each
    group); feature noise for row ``i`` comes from its own counter-based
    stream, so the layout and the noise are independent of each other.
    """
    spec.validate()
    if split not in SPLITS:
        raise InvalidSpecError(f"unknown split {split!r}")

    counts = spec.group_label_counts(split)
    n = sum(p + q for p, q in counts)
    labels = np.empty(n, dtype=np.int64)
    groups = np.empty(n, dtype=np.int64)
    attr = np.empty(n, dtype=np.float64)

    mode = spec.mode
    a_values = spec.attribute_values() if mode == "kgroup" else None
    pos = 0
    for g, (n_pos, n_neg) in enumerate(counts):
        for y, block in ((1, n_pos), (-1, n_neg)):
            sl = slice(pos, pos + block)
            labels[sl] = y
            groups[sl] = g
            if mode == "majority":
                attr[sl] = y if g == 1 else -y
            elif mode == "attribute":
                attr[sl] = 1.0 if g == 1 else -1.0
            else:
                attr[sl] = a_values[g]
            pos += block

    streams = row_streams(spec.master_seed, _SPLIT_SCOPE[split], n)
    noise = stream_normals(streams, spec.d_total)
    features = np.empty((n, spec.d_total))
    features[:, : spec.d_core] = labels[:, None] + spec.sigma_core * noise[:, : spec.d_core]
    features[:, spec.d_core:] = attr[:, None] + spec.sigma_spu * noise[:, spec.d_core:]
    return Dataset(features=features, labels=labels, groups=groups, split=split,
                   k_groups=spec.k_groups)


# ---------------------------------------------------------------------------
# Fixed-marginals mixture tables (2 x 2)
# ---------------------------------------------------------------------------

@dataclass(frozen=True)
class MixtureTable:
    """Training-sample counts for the (Y, Z) cells, indexed ``counts[y][z]``."""

    counts: np.ndarray  # shape (2, 2), int64; rows Y=0/1, columns Z=0/1

    def __post_init__(self):
        c = np.asarray(self.counts, dtype=np.int64)
        if c.shape != (2, 2):
            raise InvalidSpecError("mixture table must be 2x2")
        if (c < 0).any():
            raise InvalidSpecError("mixture table cells must be non-negative")
        object.__setattr__(self, "counts", c)
        c.setflags(write=False)

    @property
    def total(self) -> int:
        return int(self.counts.sum())

    @property
    def class_totals(self) -> tuple[int, int]:
        """(Y=0 total, Y=1 total)."""
        s = self.counts.sum(axis=1)
        return int(s[0]), int(s[1])

    @property
    def attr_totals(self) -> tuple[int, int]:
        """(Z=0 total, Z=1 total)."""
        s = self.counts.sum(axis=0)
        return int(s[0]), int(s[1])

    @property
    def p_y1(self) -> float:
        return self.class_totals[1] / self.total

    @property
    def pi1(self) -> float:
        """P(Z=1 | Y=1)."""
        return int(self.counts[1, 1]) / self.class_totals[1]

    @property
    def pi0(self) -> float:
        """P(Z=1 | Y=0)."""
        return int(self.counts[0, 1]) / self.class_totals[0]


def mixture_table(total: int, class_balance: float, attr_balance: float,
                  correlation_level: float) -> MixtureTable:
    """Build the 2x2 table with fixed marginals and one free correlation knob.

    With the grand total, the class marginal, and the attribute marginal all
    fixed, a single degree of freedom remains: the (Y=1, Z=1) cell.
    ``correlation_level`` interpolates it linearly from its independence value
    (product of marginals, level 0) to its Frechet upper bound (level 1),
    rounding to the nearest feasible integer.
    """
    if total <= 0:
        raise InfeasibleMarginalsError("total must be positive")
    if not (0.0 < class_balance < 1.0 and 0.0 < attr_balance < 1.0):
        raise InfeasibleMarginalsError("marginals must lie strictly in (0,1)")
    if not 0.0 <= correlation_level <= 1.0:
        raise ValueError(f"correlation_level must be in [0,1], got {correlation_level}")

    n_y1 = _split_pos(total, class_balance)
    n_z1 = _split_pos(total, attr_balance)
    n_y0 = total - n_y1
    n_z0 = total - n_z1
    if min(n_y1, n_y0, n_z1, n_z0) <= 0:
        raise InfeasibleMarginalsError("a marginal rounded to zero; no valid table exists")

    lo = max(0, n_y1 + n_z1 - total)
    hi = min(n_y1, n_z1)
    independent = n_y1 * n_z1 / total
    target = independent + correlation_level * (hi - independent)
    c11 = min(max(int(np.floor(target + 0.5)), lo), hi)
    counts = np.array([[n_z0 - (n_y1 - c11), n_z1 - c11],
                       [n_y1 - c11, c11]], dtype=np.int64)
    return MixtureTable(counts=counts)


def spec_from_table(table: MixtureTable, *, d_core: int, d_spu: int,
                    sigma_core: float, sigma_spu: float,
                    n_id_test: int = 10_000, n_ood_test: int = 10_000,
                    r_ts: tuple[float, ...] | None = None,
                    master_seed: int = 0) -> ShiftSpec:
    """Bridge a mixture table to an attribute-mode ShiftSpec."""
    spec = ShiftSpec(
        d_core=d_core, d_spu=d_spu, sigma_core=sigma_core, sigma_spu=sigma_spu,
        n_train=table.total, pi1=table.pi1, pi0=table.pi0, p_y1=table.p_y1,
        n_id_test=n_id_test, n_ood_test=n_ood_test, r_ts=r_ts,
        master_seed=master_seed,
    )
    spec.validate()
    return spec


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def format_sig(x: float, digits: int = 12) -> str:
    """Decimal rendering with a fixed number of significant digits."""
    return format(float(x), f".{digits}g")


def write_dataset_csv(dataset: Dataset, path: str | Path) -> None:
    """CSV with header ``y,z,x0,...``; features at 9 significant digits."""
    path = Path(path)
    header = "y,z," + ",".join(f"x{j}" for j in range(dataset.n_features))
    lines = [header]
    for i in range(dataset.n_rows):
        feats = ",".join(format_sig(v, 9) for v in dataset.features[i])
        lines.append(f"{int(dataset.labels[i])},{int(dataset.groups[i])},{feats}")
    path.write_text("\n".join(lines) + "\n")


def read_dataset_csv(path: str | Path, split: str = "train") -> Dataset:
    lines = Path(path).read_text().splitlines()
    header = lines[0].split(",")
    if header[:2] != ["y", "z"]:
        raise InvalidSpecError(f"unexpected dataset header in {path}")
    d = len(header) - 2
    n = len(lines) - 1
    features = np.empty((n, d))
    labels = np.empty(n, dtype=np.int64)
    groups = np.empty(n, dtype=np.int64)
    for i, line in enumerate(lines[1:]):
        parts = line.split(",")
        labels[i] = int(parts[0])
        groups[i] = int(parts[1])
        features[i] = [float(v) for v in parts[2:]]
    k = int(groups.max()) + 1 if n else 2
    return Dataset(features=features, labels=labels, groups=groups, split=split,
                   k_groups=max(k, 2))


_SPEC_INT_FIELDS = {"d_core", "d_spu", "n_train", "n_id_test", "n_ood_test",
                    "k_groups", "master_seed"}
_SPEC_FLOAT_FIELDS = {"sigma_core", "sigma_spu", "p_maj", "pi1", "pi0", "p_y1"}
_SPEC_WEIGHT_FIELDS = {"r_tr", "r_ts"}


def write_spec_file(spec: ShiftSpec, path: str | Path) -> None:
    """Plain ``key=value`` lines, one per set field; ``#`` starts a comment."""
    lines = []
    for name in (*_SPEC_INT_FIELDS, *_SPEC_FLOAT_FIELDS, *_SPEC_WEIGHT_FIELDS):
        value = getattr(spec, name)
        if value is None:
            continue
        if name in _SPEC_WEIGHT_FIELDS:
            rendered = ",".join(format_sig(v) for v in value)
        elif name in _SPEC_INT_FIELDS:
            rendered = str(int(value))
        else:
            rendered = format_sig(value)
        lines.append(f"{name}={rendered}")
    Path(path).write_text("\n".join(sorted(lines)) + "\n")


def parse_spec_items(items: dict[str, str]) -> ShiftSpec:
    """Build a ShiftSpec from raw key/value strings (file or config section)."""
    kwargs = {}
    for key, raw in items.items():
        raw = raw.strip()
        if key in _SPEC_INT_FIELDS:
            kwargs[key] = int(raw)
        elif key in _SPEC_FLOAT_FIELDS:
            kwargs[key] = float(raw)
        elif key in _SPEC_WEIGHT_FIELDS:
            kwargs[key] = tuple(float(v) for v in raw.split(","))
        else:
            raise InvalidSpecError(f"unknown spec key {key!r}")
    spec = ShiftSpec(**kwargs)
    spec.validate()
    return spec


def read_spec_file(path: str | Path) -> ShiftSpec:
    items: dict[str, str] = {}
    for lineno, line in enumerate(Path(path).read_text().splitlines(), start=1):
        line = line.split("#", 1)[0].strip()
        if not line:
            continue
        m = re.fullmatch(r"([A-Za-z_][A-Za-z0-9_]*)\s*=\s*(.+)", line)
        if m is None:
            raise InvalidSpecError(f"{path}:{lineno}: expected key=value, got {line!r}")
        items[m.group(1)] = m.group(2)
    return parse_spec_items(items)


def with_master_seed(spec: ShiftSpec, master_seed: int) -> ShiftSpec:
    return replace(spec, master_seed=master_seed)
