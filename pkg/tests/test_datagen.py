from dataclasses import replace
from fractions import Fraction

import numpy as np
import pytest

from shiftlab.datagen import (ShiftSpec, generate,
                              mixture_table, read_dataset_csv, read_spec_file,
                              spec_from_table, write_dataset_csv, write_spec_file)
from shiftlab.errors import (DegenerateDimensionError, InfeasibleMarginalsError,
                             InvalidSpecError)


def majority_spec(**kw) -> ShiftSpec:
    base = dict(d_core=100, d_spu=10, sigma_core=10.0, sigma_spu=1.0,
                n_train=3000, p_maj=0.9, master_seed=7)
    base.update(kw)
    return ShiftSpec(**base)


def attribute_spec(**kw) -> ShiftSpec:
    base = dict(d_core=100, d_spu=10, sigma_core=10.0, sigma_spu=1.0,
                n_train=3000, pi1=0.9, pi0=0.3, master_seed=7)
    base.update(kw)
    return ShiftSpec(**base)


# ---------------------------------------------------------------------------
# Spec validation
# ---------------------------------------------------------------------------

def test_valid_specs_pass():
    majority_spec().validate()
    attribute_spec().validate()


def test_zero_core_dimension_rejected():
    with pytest.raises(DegenerateDimensionError):
        majority_spec(d_core=0).validate()


@pytest.mark.parametrize("kw", [
    dict(sigma_core=0.0), dict(sigma_spu=-1.0), dict(n_train=0),
    dict(p_maj=0.0), dict(p_maj=1.0), dict(p_y1=1.0), dict(k_groups=1),
])
def test_bad_majority_specs_rejected(kw):
    with pytest.raises(InvalidSpecError):
        majority_spec(**kw).validate()


def test_pi_pair_must_be_complete():
    with pytest.raises(InvalidSpecError):
        majority_spec(pi1=0.5).validate()


def test_degenerate_attribute_marginal_rejected():
    with pytest.raises(InvalidSpecError):
        attribute_spec(pi1=0.0, pi0=0.0).validate()


def test_weight_vectors_must_sum_to_one():
    with pytest.raises(InvalidSpecError):
        majority_spec(r_ts=(0.6, 0.5)).validate()
    with pytest.raises(InvalidSpecError):
        majority_spec(r_ts=(0.2, 0.3, 0.5)).validate()


def test_kgroup_needs_r_tr():
    with pytest.raises(InvalidSpecError):
        majority_spec(k_groups=3, p_maj=None).validate()
    spec = majority_spec(k_groups=3, p_maj=None, r_tr=(0.6, 0.3, 0.1))
    spec.validate()
    assert spec.mode == "kgroup"


# ---------------------------------------------------------------------------
# Generation
# ---------------------------------------------------------------------------

def test_train_set_size_and_exact_counts():
    spec = majority_spec()
    ds = generate(spec, "train")
    assert ds.n_rows == 3000
    assert ds.n_features == 110
    counts = np.bincount(ds.groups)
    assert counts.tolist() == [300, 2700]
    # labels balanced within each group
    for g in (0, 1):
        labels = ds.labels[ds.groups == g]
        assert np.sum(labels == 1) == np.sum(labels == -1)


def test_attribute_mode_cell_counts():
    spec = attribute_spec()
    ds = generate(spec, "train")
    pos = ds.labels == 1
    assert int(np.sum(pos)) == 1500
    assert int(np.sum(pos & (ds.groups == 1))) == 1350   # pi1 = 0.9
    assert int(np.sum(~pos & (ds.groups == 1))) == 450   # pi0 = 0.3


def test_ood_pool_is_group_balanced():
    for spec in (majority_spec(), attribute_spec()):
        pool = generate(spec, "ood_test")
        counts = np.bincount(pool.groups)
        assert counts.tolist() == [5000, 5000]


def test_determinism_bit_identical():
    spec = majority_spec()
    a = generate(spec, "train")
    b = generate(spec, "train")
    assert np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.groups, b.groups)


def test_seed_isolation_changes_features_not_layout():
    a = generate(majority_spec(master_seed=1), "train")
    b = generate(majority_spec(master_seed=2), "train")
    assert not np.array_equal(a.features, b.features)
    assert np.array_equal(a.labels, b.labels)
    assert np.array_equal(a.groups, b.groups)


def test_splits_use_distinct_noise():
    spec = majority_spec(n_id_test=3000)
    tr = generate(spec, "train")
    idt = generate(spec, "id_test")
    assert not np.array_equal(tr.features, idt.features)


def test_zero_noise_limit():
    spec = majority_spec(sigma_core=1e-12, sigma_spu=1e-12)
    ds = generate(spec, "train")
    core = ds.features[:, :100]
    assert np.max(np.abs(core - ds.labels[:, None])) < 1e-9


def test_core_feature_means_match_label_across_seeds():
    # Per-coordinate sample mean of x_core on positive rows stays within
    # 4 * sigma/sqrt(n_pos) of 1.0, checked over 20 regenerations.
    for seed in range(20):
        spec = majority_spec(master_seed=seed, d_core=100)
        ds = generate(spec, "train")
        pos = ds.labels == 1
        n_pos = int(np.sum(pos))
        bound = 4.0 * spec.sigma_core / np.sqrt(n_pos)
        means = ds.features[pos, :100].mean(axis=0)
        assert np.max(np.abs(means - 1.0)) < bound


def test_conditional_independence_audit():
    # Core features given y do not depend on the group: group-conditional
    # means agree within 4 pooled standard errors per coordinate.
    spec = majority_spec(n_train=50_000, d_core=20, d_spu=5)
    ds = generate(spec, "train")
    for y in (1, -1):
        maj = (ds.labels == y) & (ds.groups == 1)
        mnr = (ds.labels == y) & (ds.groups == 0)
        se = spec.sigma_core * np.sqrt(1 / maj.sum() + 1 / mnr.sum())
        gap = ds.features[maj, :20].mean(axis=0) - ds.features[mnr, :20].mean(axis=0)
        assert np.max(np.abs(gap)) < 4 * se


def test_spurious_block_tracks_attribute():
    spec = majority_spec(sigma_spu=0.5, n_train=10_000)
    ds = generate(spec, "train")
    attr = np.where(ds.groups == 1, ds.labels, -ds.labels)
    spu_mean = (ds.features[:, 100:].mean(axis=1) * attr).mean()
    assert abs(spu_mean - 1.0) < 0.05


def test_kgroup_generation_layout():
    spec = majority_spec(k_groups=4, p_maj=None, r_tr=(0.55, 0.25, 0.15, 0.05),
                         d_spu=6, n_train=4000)
    ds = generate(spec, "train")
    assert np.bincount(ds.groups).tolist() == [2200, 1000, 600, 200]
    pool = generate(spec, "ood_test")
    assert np.bincount(pool.groups).tolist() == [2500, 2500, 2500, 2500]
    # group attribute values are evenly spaced in [-1, 1]
    spu = pool.features[:, 100:]
    for g, a in zip(range(4), (-1.0, -1/3, 1/3, 1.0)):
        m = spu[pool.groups == g].mean()
        assert abs(m - a) < 0.05


def test_unknown_split_rejected():
    with pytest.raises(InvalidSpecError):
        generate(majority_spec(), "validate")


def test_dataset_arrays_immutable():
    ds = generate(majority_spec(n_train=100), "train")
    with pytest.raises(ValueError):
        ds.features[0, 0] = 5.0


# ---------------------------------------------------------------------------
# Mixture tables
# ---------------------------------------------------------------------------

def test_independent_table_matches_product_of_marginals():
    t = mixture_table(10_000, 0.5, 0.6, 0.0)
    assert t.counts[1, 1] == 3000 and t.counts[1, 0] == 2000
    assert t.counts[0, 1] == 3000 and t.counts[0, 0] == 2000
    assert t.class_totals == (5000, 5000)
    assert t.attr_totals == (4000, 6000)
    assert t.pi1 == t.pi0 == 0.6


def test_maximal_table_matches_exhaustive_frechet_search():
    # Oracle: enumerate every feasible non-negative integer table with the
    # fixed marginals and take the one with the largest (Y=1, Z=1) cell.
    total, n_y1, n_z1 = 10_000, 5000, 6000
    best = None
    for c11 in range(0, min(n_y1, n_z1) + 1):
        c10 = n_y1 - c11
        c01 = n_z1 - c11
        c00 = total - c11 - c10 - c01
        if min(c10, c01, c00) >= 0:
            best = c11
    t = mixture_table(total, 0.5, 0.6, 1.0)
    assert int(t.counts[1, 1]) == best == 5000
    assert int(t.counts[0, 1]) == 1000
    assert t.pi1 == 1.0 and t.pi0 == 0.2


def test_correlation_level_midpoint_interpolates():
    t = mixture_table(10_000, 0.5, 0.6, 0.5)
    assert int(t.counts[1, 1]) == 4000  # halfway between 3000 and 5000


def test_one_degree_of_freedom():
    # With all three marginals fixed, tables are uniquely determined by the
    # free cell: enumerate and confirm a bijection.
    total = 200
    t0 = mixture_table(total, 0.5, 0.6, 0.0)
    n_y1 = t0.class_totals[1]
    n_z1 = t0.attr_totals[1]
    seen = set()
    for c11 in range(max(0, n_y1 + n_z1 - total), min(n_y1, n_z1) + 1):
        cells = (c11, n_y1 - c11, n_z1 - c11, total - n_y1 - n_z1 + c11)
        assert min(cells) >= 0
        seen.add(cells)
    assert len(seen) == min(n_y1, n_z1) - max(0, n_y1 + n_z1 - total) + 1


def test_marginal_fidelity_rational():
    for level in (0.0, 0.3, 0.7, 1.0):
        t = mixture_table(9973, 0.4, 0.55, level)
        pi1 = Fraction(int(t.counts[1, 1]), t.class_totals[1])
        pi0 = Fraction(int(t.counts[0, 1]), t.class_totals[0])
        p_y1 = Fraction(t.class_totals[1], t.total)
        p_z1 = pi1 * p_y1 + pi0 * (1 - p_y1)
        assert p_z1 == Fraction(t.attr_totals[1], t.total)


def test_infeasible_marginals_rejected():
    with pytest.raises(InfeasibleMarginalsError):
        mixture_table(0, 0.5, 0.5, 0.0)
    with pytest.raises(InfeasibleMarginalsError):
        mixture_table(10, 0.01, 0.5, 0.0)
    with pytest.raises(ValueError):
        mixture_table(100, 0.5, 0.5, 1.5)


def test_spec_from_table_round_trip():
    t = mixture_table(10_000, 0.5, 0.6, 1.0)
    spec = spec_from_table(t, d_core=50, d_spu=10, sigma_core=5.0, sigma_spu=1.0)
    assert spec.pi1 == 1.0 and spec.pi0 == 0.2 and spec.p_y1 == 0.5
    assert spec.n_train == 10_000
    # regenerating cell counts from the parameters reproduces the table exactly
    counts = spec.group_label_counts("train")
    assert counts[1][0] == int(t.counts[1, 1])   # positives in Z=1
    assert counts[1][1] == int(t.counts[0, 1])   # negatives in Z=1
    assert counts[0][0] == int(t.counts[1, 0])
    assert counts[0][1] == int(t.counts[0, 0])


def test_independent_table_spec_has_equal_conditionals():
    t = mixture_table(10_000, 0.5, 0.6, 0.0)
    spec = spec_from_table(t, d_core=10, d_spu=2, sigma_core=1.0, sigma_spu=1.0)
    assert spec.pi1 == spec.pi0 == 0.6


# ---------------------------------------------------------------------------
# File formats
# ---------------------------------------------------------------------------

def test_dataset_csv_round_trip_bytes(tmp_path):
    ds = generate(majority_spec(n_train=50, d_core=4, d_spu=2), "train")
    p1 = tmp_path / "a.csv"
    p2 = tmp_path / "b.csv"
    write_dataset_csv(ds, p1)
    back = read_dataset_csv(p1)
    write_dataset_csv(back, p2)
    assert p1.read_bytes() == p2.read_bytes()
    assert np.array_equal(back.labels, ds.labels)
    assert np.array_equal(back.groups, ds.groups)


def test_dataset_csv_header_and_precision(tmp_path):
    ds = generate(majority_spec(n_train=5, d_core=2, d_spu=1), "train")
    path = tmp_path / "d.csv"
    write_dataset_csv(ds, path)
    lines = path.read_text().splitlines()
    assert lines[0] == "y,z,x0,x1,x2"
    first = lines[1].split(",")
    assert first[0] in ("-1", "1")
    assert all(len(v.replace("-", "").replace(".", "").replace("e", "").replace("+", "")) <= 10
               for v in first[2:])


def test_spec_file_round_trip(tmp_path):
    for spec in (majority_spec(), attribute_spec(r_ts=(0.5, 0.5)),
                 majority_spec(k_groups=3, p_maj=None, r_tr=(0.5, 0.3, 0.2))):
        path = tmp_path / "spec.txt"
        write_spec_file(spec, path)
        back = read_spec_file(path)
        assert back == spec


def test_spec_file_comments_and_errors(tmp_path):
    path = tmp_path / "s.txt"
    path.write_text("# comment\nd_core=4\nd_spu=1 # trailing\nsigma_core=1\n"
                    "sigma_spu=1\nn_train=100\np_maj=0.8\n")
    spec = read_spec_file(path)
    assert spec.d_core == 4 and spec.d_spu == 1
    path.write_text("bogus_key=1\n")
    with pytest.raises(InvalidSpecError):
        read_spec_file(path)
