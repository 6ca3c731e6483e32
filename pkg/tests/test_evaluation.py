import json

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from ctradiomics.errors import CaseSetMismatch, EmptyInput, OneClassOnly
from ctradiomics.evaluation import (
    ConfusionMatrix,
    SplitResult,
    auc_pairs,
    calibration_curve,
    confusion,
    decision_curve,
    delong_test,
    delong_variance,
    evaluate,
    isotonic_fit,
    metrics,
    net_benefit,
    roc_auc,
)

from . import oracles


# ---------------------------------------------------------------- confusion


def test_confusion_perfect():
    cm = confusion([1, 1, 0, 0], [1, 1, 0, 0])
    assert (cm.tp, cm.tn, cm.fp, cm.fn) == (2, 2, 0, 0)


def test_confusion_all_positive_scores():
    cm = confusion([1.0] * 5, [1, 0, 1, 0, 0])
    assert cm.tn == 0 and cm.fn == 0


def test_confusion_ge_rule_at_zero():
    cm = confusion([0.0, 0.3, 0.0], [0, 1, 1], threshold=0.0)
    assert cm.tp + cm.fp == 3
    assert confusion([0.5], [1], threshold=0.5).tp == 1


def test_confusion_positive_class_benign():
    cm = confusion([0.9, 0.2, 0.1], [1, 0, 0], positive_class="benign")
    assert (cm.tp, cm.fp, cm.tn, cm.fn) == (2, 0, 1, 0) and cm.positive_class == "benign"


def test_confusion_empty():
    with pytest.raises(EmptyInput):
        confusion([], [])


@settings(max_examples=100, deadline=None)
@given(st.lists(st.tuples(st.floats(0, 1), st.integers(0, 1)), min_size=1, max_size=30),
       st.floats(0, 1))
def test_confusion_sums_to_n(pairs, t):
    s, y = zip(*pairs)
    assert confusion(s, y, t).n == len(pairs)


def test_metrics_random_forest_testing_row():
    m = metrics(ConfusionMatrix(tp=11, fp=1, tn=12, fn=0))
    assert [round(m[k], 2) for k in ("sensitivity", "specificity", "accuracy", "precision")] == \
        [100.00, 92.31, 95.83, 91.67]


def test_metrics_symmetric_case():
    m = metrics(ConfusionMatrix(1, 1, 1, 1))
    assert all(v == 50.0 for v in m.values())


def test_metrics_precision_undefined():
    flags = []
    m = metrics(ConfusionMatrix(tp=0, fp=0, tn=5, fn=3), flags)
    assert m["precision"] is None and any(f.startswith("precision") for f in flags)
    assert m["f1"] is None


# ---------------------------------------------------------------------- ROC


def test_auc_examples():
    assert roc_auc([0.9, 0.8, 0.2, 0.1], [1, 1, 0, 0]).auc == 1.0
    assert roc_auc([0.8, 0.4, 0.4, 0.2], [1, 1, 0, 0]).auc == 0.875


def test_auc_null():
    rng = np.random.default_rng(0)
    s, y = rng.random(1000), rng.integers(0, 2, 1000)
    assert abs(roc_auc(s, y).auc - 0.5) <= 0.05


def test_auc_one_class():
    with pytest.raises(OneClassOnly):
        roc_auc([0.1, 0.2], [1, 1])


def test_roc_shape():
    rng = np.random.default_rng(1)
    c = roc_auc(rng.integers(0, 5, 40) / 4, rng.integers(0, 2, 40) | np.r_[1, 0, [0] * 38])
    assert (c.fpr[0], c.tpr[0]) == (0, 0) and (c.fpr[-1], c.tpr[-1]) == (1, 1)
    assert np.all(np.diff(c.fpr) >= 0) and np.all(np.diff(c.tpr) >= 0)


@pytest.mark.parametrize("seed", range(50))
def test_auc_pair_identity_and_monotone_invariance(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(2, 51))
    y = rng.integers(0, 2, n)
    y[:2] = [0, 1]
    s = rng.integers(0, 8, n) / 7.0  # heavy ties
    a = roc_auc(s, y).auc
    assert a == oracles.pair_count_auc(s, y) == auc_pairs(s, y)
    assert roc_auc(np.exp(s), y).auc == a
    assert roc_auc(3 * s - 2, y).auc == a


# ------------------------------------------------------------------- DeLong


def test_delong_self_comparison():
    rng = np.random.default_rng(2)
    s, y = rng.random(30), np.r_[np.zeros(15), np.ones(15)]
    r = delong_test(s, s, y)
    assert r.p == 1.0 and r.z == 0.0 and r.auc_a == r.auc_b


def test_delong_auc_equals_roc():
    rng = np.random.default_rng(3)
    for _ in range(20):
        y = np.r_[0, 1, rng.integers(0, 2, 30)]
        a, b = rng.integers(0, 6, 32) / 5, rng.random(32)
        r = delong_test(a, b, y)
        assert r.auc_a == roc_auc(a, y).auc and r.auc_b == roc_auc(b, y).auc


def test_delong_against_permutation_oracle():
    for seed in range(5):
        rng = np.random.default_rng(seed)
        y = np.repeat([0, 1], 30)
        latent = rng.normal(size=60)
        da, db = rng.uniform(0.3, 1.5, 2)
        a = y * da + 0.6 * latent + 0.8 * rng.normal(size=60)
        b = y * db + 0.6 * latent + 0.8 * rng.normal(size=60)
        assert abs(delong_test(a, b, y).p - oracles.paired_permutation_p(a, b, y, 20000, rng)) \
            <= 0.05


def test_delong_variance_positive():
    rng = np.random.default_rng(4)
    for _ in range(50):
        y = np.r_[0, 0, 1, 1, rng.integers(0, 2, 20)]
        s = rng.random(24)
        if 0 < roc_auc(s, y).auc < 1:
            assert delong_variance(s, y) > 0


def test_delong_case_mismatch():
    with pytest.raises(CaseSetMismatch):
        delong_test([0.1, 0.2], [0.1, 0.2, 0.3], [0, 1])


# ----------------------------------------------------------------- isotonic


def test_isotonic_examples():
    assert np.allclose(isotonic_fit([1, 2, 3], [1, 3, 2]).levels, [1, 2.5, 2.5])
    assert np.array_equal(isotonic_fit([0.1, 0.2, 0.3], [0, 0.5, 1]).levels, [0, 0.5, 1])
    assert np.all(isotonic_fit([3, 1, 2, 5], [0.4] * 4).levels == 0.4)


def test_isotonic_ties_prepooled_and_weights():
    f = isotonic_fit([1, 1, 2], [0, 1, 0.2], [1, 3, 1])
    # tie at score 1 pools to 0.75 with weight 4, then violates 0.2 -> (3 + 0.2) / 5
    assert np.allclose(f.levels, [0.64, 0.64])


def test_isotonic_step_evaluation():
    f = isotonic_fit([1, 2, 3], [0, 0.5, 1])
    assert np.array_equal(f([0, 1, 1.5, 2, 2.5, 3, 9]), [0, 0, 0.5, 0.5, 1, 1, 1])


def test_isotonic_empty():
    with pytest.raises(EmptyInput):
        isotonic_fit([], [])


@pytest.mark.parametrize("seed", range(30))
def test_isotonic_is_the_projection(seed):
    rng = np.random.default_rng(seed)
    n = int(rng.integers(1, 13))
    x = rng.integers(0, 8, n).astype(float)
    o = rng.normal(size=n)
    w = rng.uniform(0.5, 2.0, n)
    f = isotonic_fit(x, o, w)
    sse = oracles.weighted_sse(f(x), o, w)
    assert np.all(np.diff(f.levels) >= 0)
    assert sse <= oracles.isotonic_partition_oracle(x, o, w) + 1e-9
    assert sse <= oracles.isotonic_grid_oracle(x, o, w) + 1e-9
    assert sse <= oracles.random_monotone_sse(x, o, w, rng, 200) + 1e-9


# -------------------------------------------------------------- calibration


def test_calibration_well_calibrated():
    rng = np.random.default_rng(5)
    s = rng.random(5000)
    y = (rng.random(5000) < s).astype(int)
    c = calibration_curve(s, y)
    assert np.max(np.abs(c.observed - c.mean_predicted)) <= 0.05
    assert np.all(np.diff(c.isotonic.levels) >= 0)
    assert c.isotonic.levels.min() >= 0 and c.isotonic.levels.max() <= 1


def test_calibration_small_cases():
    c = calibration_curve([1.0, 1.0], [1, 1])
    assert c.mean_predicted.tolist() == [1.0] and c.observed.tolist() == [1.0]
    c = calibration_curve([0.2], [1])
    assert c.counts.tolist() == [1] and c.observed.tolist() == [1.0]


# ----------------------------------------------------------- decision curve


def test_net_benefit_hand_case():
    assert net_benefit(10, 5, 100, 0.5) == 0.05


def test_decision_curve_limits():
    rng = np.random.default_rng(6)
    y = rng.integers(0, 2, 80)
    prev = y.mean()
    d = decision_curve(rng.random(80), y)
    assert abs(d.nb_all[0] - prev) <= 0.01 * (1 - prev) / 0.99 + 1e-12
    assert np.all(d.nb_none == 0) and np.all(np.isfinite(d.nb_model))
    perfect = decision_curve(y.astype(float), y)
    assert np.allclose(perfect.nb_model, prev)


# -------------------------------------------------------------------- report


def test_evaluate_report(tmp_path):
    rng = np.random.default_rng(7)
    ids = [f"c{i}" for i in range(20)]
    y = np.repeat([0, 1], 10)
    res = {m: {"test": SplitResult(ids, y, np.clip(y * 0.4 + rng.random(20) * 0.6, 0, 1))}
           for m in ("rf", "logreg")}
    rep = evaluate(res)
    files = rep.write(tmp_path)
    doc = json.loads((tmp_path / "report.json").read_text())
    assert doc["schema"] == 1 and doc["positive_class"] == "malignant"
    e = doc["models"]["rf"]["test"]
    assert roc_auc(e["scores"], e["labels"]).auc == e["roc"]["auc"]
    assert len(doc["delong"]["test"]) == 1
    assert all(f.exists() for f in files)
    res["rf"]["test"] = SplitResult(ids[::-1], y, res["rf"]["test"].scores)
    with pytest.raises(CaseSetMismatch):
        evaluate(res)
