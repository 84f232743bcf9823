"""Metrics oracles: accuracies against brute-force recomputation and
published closures, the incomplete beta against scipy, t-tests against
frozen independently derived values."""

import json
import math

import numpy as np
import pytest
import scipy.special
import scipy.stats

from convaffect.corpus import DEFAULT_ACTIVE, LABEL_TO_CODE, NUM_CLASSES, parse_split
from convaffect.errors import ContractError, EvaluationError
from convaffect.metrics import (
    build_confusion,
    evaluate_split,
    paired_t_test,
    regularized_incomplete_beta,
    report_from_confusion,
    t_two_sided_p,
    unweighted_accuracy,
    uwa_from_parts,
    wa_from_parts,
    weighted_accuracy,
)


# --- confusion matrix --------------------------------------------------------

def test_confusion_matches_brute_force():
    rng = np.random.default_rng(3)
    for _ in range(20):
        n = int(rng.integers(1, 60))
        golds = rng.integers(0, NUM_CLASSES, size=n)
        preds = rng.integers(0, NUM_CLASSES, size=n)
        M = build_confusion(preds, golds)
        assert M.sum() == n
        for g in range(NUM_CLASSES):
            for p in range(NUM_CLASSES):
                assert M[g, p] == int(((golds == g) & (preds == p)).sum())


def test_confusion_orientation_rows_are_gold():
    M = build_confusion(preds=[1], golds=[4])
    assert M[4, 1] == 1
    assert M[1, 4] == 0


def test_confusion_errors():
    with pytest.raises(ContractError):
        build_confusion([0, 1], [0])
    with pytest.raises(ContractError):
        build_confusion([8], [0])
    with pytest.raises(ContractError):
        build_confusion([0], [-1])


# --- WA / UWA ------------------------------------------------------------------

def diag_confusion(per_class: dict[int, tuple[int, int]]) -> np.ndarray:
    """Confusion with the requested (correct, total) per gold class; the
    misses all land in some other column."""
    M = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    for c, (correct, total) in per_class.items():
        M[c, c] = correct
        M[c, (c + 1) % NUM_CLASSES] += total - correct
    return M


def test_wa_is_support_weighted_mean():
    M = diag_confusion({0: (9, 10), 1: (1, 2), 2: (3, 4), 4: (0, 4)})
    wa = weighted_accuracy(M)
    # brute force: overall accuracy restricted to active-gold utterances
    assert wa == pytest.approx((9 + 1 + 3 + 0) / 20, abs=1e-15)
    uwa = unweighted_accuracy(M)
    assert uwa == pytest.approx((0.9 + 0.5 + 0.75 + 0.0) / 4, abs=1e-15)


def test_wa_ignores_inactive_gold_rows():
    M = diag_confusion({0: (5, 10), 1: (5, 10)})
    M[7, 7] = 100  # inactive gold, would dominate if counted
    assert weighted_accuracy(M) == pytest.approx(0.5)
    assert unweighted_accuracy(M) == pytest.approx(0.5)


def test_absent_active_class_drops_from_uwa():
    # classes with zero support contribute nothing rather than zero
    M = diag_confusion({0: (8, 10), 1: (6, 10)})
    assert unweighted_accuracy(M) == pytest.approx(0.7)
    assert weighted_accuracy(M) == pytest.approx(0.7)


def test_metrics_need_active_support():
    M = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    M[7, 7] = 3
    with pytest.raises(EvaluationError):
        weighted_accuracy(M)


def test_uwa_invariant_to_support_sizes():
    a = diag_confusion({0: (1, 2), 1: (1, 2), 2: (1, 2), 4: (1, 2)})
    b = diag_confusion({0: (50, 100), 1: (5, 10), 2: (1, 2), 4: (500, 1000)})
    assert unweighted_accuracy(a) == pytest.approx(unweighted_accuracy(b))


def test_two_routes_agree():
    rng = np.random.default_rng(12)
    for _ in range(20):
        totals = rng.integers(1, 30, size=4)
        corrects = [int(rng.integers(0, t + 1)) for t in totals]
        M = diag_confusion({c: (k, t) for c, k, t in zip((0, 1, 2, 4), corrects, totals)})
        accs = [k / t for k, t in zip(corrects, totals)]
        assert weighted_accuracy(M) == pytest.approx(wa_from_parts(accs, totals), abs=1e-12)
        assert unweighted_accuracy(M) == pytest.approx(uwa_from_parts(accs), abs=1e-12)


def test_published_table_closures():
    # four-way accuracies and supports reconstruct the published aggregates
    friends_acc = [0.7514, 0.8388, 0.6588, 0.7267]
    friends_support = [1287, 304, 85, 161]
    assert 100 * wa_from_parts(friends_acc, friends_support) == pytest.approx(75.94, abs=0.05)
    assert 100 * uwa_from_parts(friends_acc) == pytest.approx(74.39, abs=0.01)
    push_acc = [0.8762, 0.8384, 0.7356, 0.7568]
    assert 100 * uwa_from_parts(push_acc) == pytest.approx(80.18, abs=0.01)


def test_from_parts_errors():
    with pytest.raises(ContractError):
        wa_from_parts([0.5], [1, 2])
    with pytest.raises(EvaluationError):
        wa_from_parts([0.5, 0.5], [0, 0])
    with pytest.raises(EvaluationError):
        uwa_from_parts([])


# --- reports ----------------------------------------------------------------------

def test_report_structure_and_rendering():
    M = diag_confusion({0: (9, 10), 1: (3, 4)})
    report = report_from_confusion(M)
    assert report.per_class["neutral"] == {"accuracy": 0.9, "support": 10}
    assert report.per_class["joy"] == {"accuracy": 0.75, "support": 4}
    assert set(report.per_class) == {"neutral", "joy"}
    text = report.render_text()
    assert "90.00%" in text
    assert text.splitlines()[-1].startswith("WA ")
    payload = json.loads(report.to_json())
    assert payload["wa"] == report.wa
    assert payload["confusion"][0][0] == 9
    assert payload["active_classes"] == ["neutral", "joy", "sadness", "anger"]
    # json is deterministic
    assert report.to_json() == report_from_confusion(M).to_json()


def test_evaluate_split_counts_and_dialogue_vector(tiny_setup):
    splits, store, params = tiny_setup
    report = evaluate_split(params, splits["validation"], store, max_tokens=8)
    assert report.confusion.sum() == splits["validation"].utterance_count
    assert 0.0 <= report.wa <= 1.0
    assert 0.0 <= report.uwa <= 1.0
    assert len(report.per_dialogue_acc) <= len(splits["validation"].dialogues)
    for acc in report.per_dialogue_acc:
        assert 0.0 <= acc <= 1.0


def test_evaluate_split_skips_dialogues_without_active_gold(tiny_setup):
    _, store, params = tiny_setup
    payload = [
        [{"speaker": "a", "utterance": "okay", "emotion": "surprise"}],
        [{"speaker": "a", "utterance": "woohoo", "emotion": "joy"}],
    ]
    split = parse_split("test", payload)
    report = evaluate_split(params, split, store, max_tokens=8)
    assert len(report.per_dialogue_acc) == 1  # surprise-only dialogue skipped


# --- incomplete beta ------------------------------------------------------------------

def test_betainc_matches_scipy_grid():
    for a in (0.5, 1.0, 2.5, 7.0, 40.0):
        for b in (0.5, 1.5, 4.0, 12.0):
            for x in (0.0, 1e-6, 0.01, 0.2, 0.5, 0.8, 0.99, 1.0):
                ours = regularized_incomplete_beta(a, b, x)
                ref = scipy.special.betainc(a, b, x)
                assert ours == pytest.approx(ref, abs=1e-8), (a, b, x)


def test_betainc_errors():
    with pytest.raises(ContractError):
        regularized_incomplete_beta(0.0, 1.0, 0.5)
    with pytest.raises(ContractError):
        regularized_incomplete_beta(1.0, 1.0, 1.5)


def test_t_pvalue_matches_scipy():
    for t in (0.0, 0.5, 1.0, 2.3, 4.7, 11.0):
        for df in (1, 2, 4, 10, 30):
            ours = t_two_sided_p(t, df)
            ref = float(2 * scipy.stats.t.sf(abs(t), df))
            assert ours == pytest.approx(ref, abs=1e-10), (t, df)
    assert t_two_sided_p(math.inf, 5) == 0.0
    with pytest.raises(ContractError):
        t_two_sided_p(1.0, 0)


# --- paired t-test -----------------------------------------------------------------------

def test_paired_t_frozen_oracle():
    # diffs {0.02, 0.05, 0.01, 0.03, 0.04}: t and p derived independently
    b = [0.70, 0.60, 0.55, 0.80, 0.66]
    a = [x + d for x, d in zip(b, [0.02, 0.05, 0.01, 0.03, 0.04])]
    t, p = paired_t_test(a, b)
    assert t == pytest.approx(4.242640687119285, abs=1e-9)
    assert p == pytest.approx(0.013235599563682695, abs=1e-9)


def test_paired_t_matches_scipy():
    rng = np.random.default_rng(4)
    for _ in range(20):
        n = int(rng.integers(3, 12))
        a = rng.uniform(0, 1, size=n)
        b = np.clip(a + rng.normal(scale=0.05, size=n), 0, 1)
        if not (a - b).any() or (a - b).std(ddof=1) == 0:
            continue
        t, p = paired_t_test(a, b)
        ref = scipy.stats.ttest_rel(a, b)
        assert t == pytest.approx(float(ref.statistic), abs=1e-10)
        assert p == pytest.approx(float(ref.pvalue), abs=1e-10)


def test_paired_t_alternating_signs_is_zero():
    a = [1.0, 0.0, 1.0, 0.0]
    b = [0.0, 1.0, 0.0, 1.0]
    t, p = paired_t_test(a, b)
    assert t == 0.0
    assert p == pytest.approx(1.0, abs=1e-12)


def test_paired_t_constant_nonzero_difference():
    # differences of exactly 0.25 (binary-representable) give sd == 0
    t, p = paired_t_test([1.0, 0.75, 0.5], [0.75, 0.5, 0.25])
    assert math.isinf(t) and t > 0
    assert p == 0.0
    t2, _ = paired_t_test([0.75, 0.5, 0.25], [1.0, 0.75, 0.5])
    assert math.isinf(t2) and t2 < 0


def test_paired_t_degenerate_cases():
    with pytest.raises(EvaluationError):
        paired_t_test([0.5, 0.5], [0.5, 0.5])
    with pytest.raises(ContractError):
        paired_t_test([0.5], [0.4])
    with pytest.raises(ContractError):
        paired_t_test([0.5, 0.6], [0.4])
