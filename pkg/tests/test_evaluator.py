from fractions import Fraction

import numpy as np
import pytest

from shiftlab.datagen import Dataset, ShiftSpec, generate
from shiftlab.errors import DimensionMismatchError, EmptyGroupError, InvalidSpecError
from shiftlab.evaluator import (agreement, agreement_by_group,
                                bits_to_predictions, evaluate,
                                evaluate_predictions, model_mixture,
                                predictions_bits, read_preds_csv,
                                read_results_csv, write_preds_csv,
                                write_results_csv)
from shiftlab.trainer import HyperParams, ModelRecord, default_grid, sweep


def make_model(weights, bias=0.0, model_id="m"):
    return ModelRecord(model_id=model_id, weights=np.asarray(weights, dtype=float),
                       bias=bias, epoch=1, train_loss=0.0,
                       hyperparams=HyperParams(learning_rate=0.1))


def make_pool(labels, groups):
    labels = np.asarray(labels, dtype=np.int64)
    groups = np.asarray(groups, dtype=np.int64)
    feats = np.zeros((labels.size, 1))
    return Dataset(features=feats, labels=labels, groups=groups,
                   split="ood_test", k_groups=int(groups.max()) + 1)


def test_mixture_arithmetic_from_group_accuracies():
    # maj group: 10 rows, 8 correct (acc 0.8); min group: 10 rows, 6 correct.
    labels = np.array([1] * 5 + [-1] * 5 + [1] * 5 + [-1] * 5)
    groups = np.array([1] * 10 + [0] * 10)
    preds = labels.copy()
    preds[3] = -1   # one positive wrong in maj
    preds[8] = 1    # one negative wrong in maj
    preds[10:13] = -1  # three positives wrong in min... adjust to 4 correct/6
    preds[12] = 1   # back to two wrong positives
    preds[16:18] = 1   # two negatives wrong in min
    pool = make_pool(labels, groups)
    rec = evaluate_predictions("m", preds, pool, r_tr=(0.1, 0.9), r_ts=(0.5, 0.5))
    assert rec.group_acc[1] == 0.8
    assert rec.group_acc[0] == 0.6
    assert rec.id_acc == pytest.approx(0.78, abs=1e-15)
    assert rec.ood_acc == pytest.approx(0.70, abs=1e-15)


def test_constant_classifier_rates():
    spec = ShiftSpec(d_core=4, d_spu=2, sigma_core=1.0, sigma_spu=1.0,
                     n_train=100, pi1=0.8, pi0=0.4, n_ood_test=1000, master_seed=1)
    pool = generate(spec, "ood_test")
    model = make_model(np.zeros(6))  # decision value 0 everywhere -> +1
    rec = evaluate(model, pool, spec.train_weights(), spec.ood_weights())
    for g in range(2):
        mask = pool.groups == g
        pos_frac = float(np.mean(pool.labels[mask] == 1))
        assert rec.group_acc[g] == pytest.approx(pos_frac, abs=1e-15)
        assert rec.tpr[g] == 1.0
        assert rec.tnr[g] == 0.0


def test_decomposition_identity_exact_integer_arithmetic():
    spec = ShiftSpec(d_core=10, d_spu=3, sigma_core=2.0, sigma_spu=1.0,
                     n_train=500, p_maj=0.9, n_ood_test=2000, master_seed=9)
    pool = generate(spec, "ood_test")
    train = generate(spec, "train")
    model = sweep(train, default_grid(master_seed=9, n_seeds=1,
                                      learning_rates=(0.01,), l2s=(0.0,),
                                      batch_sizes=(32,),
                                      snapshot_epochs=(3,))).records[0]
    rec = evaluate(model, pool, spec.train_weights(), spec.ood_weights())
    for g in range(2):
        acc = Fraction(rec.correct_pos[g] + rec.correct_neg[g],
                       rec.n_pos[g] + rec.n_neg[g])
        tpr = Fraction(rec.correct_pos[g], rec.n_pos[g])
        tnr = Fraction(rec.correct_neg[g], rec.n_neg[g])
        frac_pos = Fraction(rec.n_pos[g], rec.n_pos[g] + rec.n_neg[g])
        assert tpr * frac_pos + tnr * (1 - frac_pos) == acc


def test_empty_group_rejected():
    pool = make_pool([1, -1, 1], [0, 0, 0])
    pool = Dataset(features=pool.features, labels=pool.labels, groups=pool.groups,
                   split="ood_test", k_groups=2)
    with pytest.raises(EmptyGroupError):
        evaluate_predictions("m", np.array([1, 1, 1]), pool, (0.5, 0.5), (0.5, 0.5))


def test_weights_validated():
    pool = make_pool([1, -1, 1, -1], [0, 0, 1, 1])
    with pytest.raises(InvalidSpecError):
        evaluate_predictions("m", np.ones(4, dtype=np.int64), pool, (0.5, 0.4), (0.5, 0.5))


# ---------------------------------------------------------------------------
# Agreement
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def gaussian_pool():
    spec = ShiftSpec(d_core=2, d_spu=1, sigma_core=1.0, sigma_spu=1.0,
                     n_train=100, p_maj=0.9, n_ood_test=5000, master_seed=4)
    return generate(spec, "ood_test")


def test_agreement_identity(gaussian_pool):
    m = make_model([0.5, -0.2, 0.1], bias=0.05)
    rec = agreement(m, m, gaussian_pool)
    assert rec.agreement == 1.0


def test_agreement_sign_flip_is_zero(gaussian_pool):
    m = make_model([0.5, -0.2, 0.1], bias=0.05, model_id="a")
    flipped = make_model([-0.5, 0.2, -0.1], bias=-0.05, model_id="b")
    rec = agreement(m, flipped, gaussian_pool)
    assert rec.agreement == 0.0


def test_agreement_dimension_mismatch(gaussian_pool):
    a = make_model([1.0, 0.0, 0.0])
    b = make_model([1.0, 0.0])
    with pytest.raises(DimensionMismatchError):
        agreement(a, b, gaussian_pool)


def test_agreement_of_independent_errors():
    # Two classifiers reading disjoint, independently noisy views of the
    # label have conditionally independent errors, so expected agreement is
    # a1*a2 + (1-a1)(1-a2).
    n = 40_000
    spec = ShiftSpec(d_core=2, d_spu=1, sigma_core=1.5, sigma_spu=1.0,
                     n_train=100, p_maj=0.9, n_ood_test=n, master_seed=12)
    pool = generate(spec, "ood_test")
    a = make_model([1.0, 0.0, 0.0], model_id="a")
    b = make_model([0.0, 1.0, 0.0], model_id="b")
    acc_a = float(np.mean(a.predict(pool.features) == pool.labels))
    acc_b = float(np.mean(b.predict(pool.features) == pool.labels))
    expected = acc_a * acc_b + (1 - acc_a) * (1 - acc_b)
    rec = agreement(a, b, pool)
    se = np.sqrt(expected * (1 - expected) / n)
    assert abs(rec.agreement - expected) < 3 * se + 2 / np.sqrt(n)


def test_agreement_lower_bound_on_sweep():
    spec = ShiftSpec(d_core=10, d_spu=3, sigma_core=3.0, sigma_spu=1.0,
                     n_train=300, p_maj=0.9, n_ood_test=2000, master_seed=2)
    train = generate(spec, "train")
    pool = generate(spec, "ood_test")
    records = sweep(train, default_grid(master_seed=2, n_seeds=2,
                                        learning_rates=(1e-3, 1e-1),
                                        l2s=(0.0,), batch_sizes=(16,),
                                        snapshot_epochs=(1, 5))).records
    accs = {r.model_id: float(np.mean(r.predict(pool.features) == pool.labels))
            for r in records}
    for i in range(len(records)):
        for j in range(i + 1, len(records)):
            rec = agreement(records[i], records[j], pool)
            bound = accs[records[i].model_id] + accs[records[j].model_id] - 1.0
            assert rec.agreement >= bound - 1e-12


def test_agreement_by_group_matches_pool_mean(gaussian_pool):
    a = make_model([1.0, 0.2, 0.0], model_id="a")
    b = make_model([0.8, -0.1, 0.3], model_id="b")
    pa, pb = a.predict(gaussian_pool.features), b.predict(gaussian_pool.features)
    per_group = agreement_by_group(pa, pb, gaussian_pool.groups, 2)
    counts = np.bincount(gaussian_pool.groups)
    pooled = sum(c * g for c, g in zip(counts, per_group)) / counts.sum()
    assert pooled == pytest.approx(float(np.mean(pa == pb)), abs=1e-12)


# ---------------------------------------------------------------------------
# Model mixtures
# ---------------------------------------------------------------------------

@pytest.fixture(scope="module")
def mixture_setup():
    spec = ShiftSpec(d_core=6, d_spu=2, sigma_core=2.0, sigma_spu=1.0,
                     n_train=400, p_maj=0.9, n_ood_test=10_000, master_seed=6)
    pool = generate(spec, "ood_test")
    a = make_model([1.0] * 6 + [0.0] * 2, model_id="a")
    b = make_model([0.2] * 6 + [1.0] * 2, model_id="b")
    return spec, pool, a, b


def test_mixture_endpoints(mixture_setup):
    spec, pool, a, b = mixture_setup
    r_tr, r_ts = spec.train_weights(), spec.ood_weights()
    mix0 = model_mixture(a, b, 0.0, pool, r_tr, r_ts)
    rb = evaluate(b, pool, r_tr, r_ts)
    assert mix0.group_acc == rb.group_acc
    assert mix0.id_acc == rb.id_acc
    mix1 = model_mixture(a, b, 1.0, pool, r_tr, r_ts)
    ra = evaluate(a, pool, r_tr, r_ts)
    assert mix1.group_acc == ra.group_acc


def test_mixture_midpoint_average(mixture_setup):
    spec, pool, a, b = mixture_setup
    r_tr, r_ts = spec.train_weights(), spec.ood_weights()
    ra = evaluate(a, pool, r_tr, r_ts)
    rb = evaluate(b, pool, r_tr, r_ts)
    mid = model_mixture(a, b, 0.5, pool, r_tr, r_ts)
    for g in range(2):
        assert mid.group_acc[g] == pytest.approx(
            0.5 * ra.group_acc[g] + 0.5 * rb.group_acc[g], abs=1e-15)


def test_mixture_traces_straight_segment(mixture_setup):
    # Exact-mode interpolation is linear in p: deviation from the chord at
    # machine precision.
    spec, pool, a, b = mixture_setup
    r_tr, r_ts = spec.train_weights(), spec.ood_weights()
    ra = evaluate(a, pool, r_tr, r_ts)
    rb = evaluate(b, pool, r_tr, r_ts)
    for p in (0.0, 0.25, 0.5, 0.75, 1.0):
        mix = model_mixture(a, b, p, pool, r_tr, r_ts)
        for g in range(2):
            chord = p * ra.group_acc[g] + (1 - p) * rb.group_acc[g]
            assert abs(mix.group_acc[g] - chord) < 1e-12


def test_sampled_mixture_within_binomial_error(mixture_setup):
    spec, pool, a, b = mixture_setup
    r_tr, r_ts = spec.train_weights(), spec.ood_weights()
    p = 0.3
    exact = model_mixture(a, b, p, pool, r_tr, r_ts)
    n = pool.n_rows
    bound = 3.0 * np.sqrt(p * (1 - p) / n)
    for seed in range(50):
        sampled = model_mixture(a, b, p, pool, r_tr, r_ts, mode="sampled", seed=seed)
        for g in range(2):
            # group sizes are n/2, so scale the bound accordingly
            g_bound = 3.0 * np.sqrt(p * (1 - p) / (n / 2))
            assert abs(sampled.group_acc[g] - exact.group_acc[g]) <= g_bound
        assert abs(sampled.ood_acc - exact.ood_acc) <= bound


def test_mixture_validates_p(mixture_setup):
    spec, pool, a, b = mixture_setup
    with pytest.raises(InvalidSpecError):
        model_mixture(a, b, 1.5, pool, spec.train_weights(), spec.ood_weights())


# ---------------------------------------------------------------------------
# Files
# ---------------------------------------------------------------------------

def test_predictions_bits_round_trip():
    preds = np.array([1, -1, -1, 1, 1], dtype=np.int64)
    bits = predictions_bits(preds)
    assert bits == "10011"
    assert np.array_equal(bits_to_predictions(bits), preds)


def test_results_csv_round_trip(tmp_path):
    spec = ShiftSpec(d_core=5, d_spu=2, sigma_core=2.0, sigma_spu=1.0,
                     n_train=200, p_maj=0.8, n_ood_test=500, master_seed=3)
    train = generate(spec, "train")
    pool = generate(spec, "ood_test")
    records = sweep(train, default_grid(master_seed=3, n_seeds=1,
                                        learning_rates=(0.01,), l2s=(0.0,),
                                        batch_sizes=(32,),
                                        snapshot_epochs=(1, 2))).records
    evals = [evaluate(m, pool, spec.train_weights(), spec.ood_weights())
             for m in records]
    path = tmp_path / "results.csv"
    write_results_csv(list(zip(records, evals)), path)
    rows = read_results_csv(path)
    assert len(rows) == len(records)
    assert rows[0]["model_id"] == records[0].model_id
    assert float(rows[0]["id_acc"]) == pytest.approx(evals[0].id_acc, rel=1e-11)
    header = path.read_text().splitlines()[0].split(",")
    assert header[:6] == ["model_id", "epoch", "lr", "l2", "batch_size", "seed"]
    assert header[6:] == ["group_acc_0", "group_acc_1", "tpr_0", "tpr_1",
                          "tnr_0", "tnr_1", "id_acc", "ood_acc"]


def test_preds_csv_round_trip(tmp_path):
    rows = [("a", "0101"), ("b", "1111")]
    path = tmp_path / "preds.csv"
    write_preds_csv(rows, path)
    assert read_preds_csv(path) == dict(rows)
