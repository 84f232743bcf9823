"""Evaluation: confusion matrices, weighted/unweighted accuracy, reports,
and paired significance testing.

Only the four active emotions enter the metrics; utterances whose gold
label is inactive are excluded from every denominator but stay in the full
confusion matrix for error analysis. WA weights per-class accuracies by
test-set class proportions; UWA is their plain mean.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .corpus import DEFAULT_ACTIVE, LABELS, NUM_CLASSES, DatasetSplit
from .embed import FeatureStore
from .errors import ContractError, EvaluationError
from .model import ModelParams, predict


def build_confusion(preds: Sequence[int], golds: Sequence[int]) -> np.ndarray:
    """Full 8x8 count matrix, rows = gold, columns = predicted."""
    preds = np.asarray(preds, dtype=np.int64)
    golds = np.asarray(golds, dtype=np.int64)
    if preds.shape != golds.shape or preds.ndim != 1:
        raise ContractError(
            f"prediction/gold length mismatch: {preds.shape} vs {golds.shape}"
        )
    if preds.size and not (
        0 <= preds.min() and preds.max() < NUM_CLASSES and 0 <= golds.min() and golds.max() < NUM_CLASSES
    ):
        raise ContractError(f"label code outside 0..{NUM_CLASSES - 1}")
    counts = np.zeros((NUM_CLASSES, NUM_CLASSES), dtype=np.int64)
    np.add.at(counts, (golds, preds), 1)
    return counts


def _active_parts(confusion: np.ndarray, active: Sequence[int]) -> tuple[list[int], np.ndarray, np.ndarray]:
    """Active classes that actually occur, their supports, and accuracies."""
    active = sorted(set(int(c) for c in active))
    present = [c for c in active if confusion[c].sum() > 0]
    if not present:
        raise EvaluationError("no utterances with an active gold label to evaluate")
    supports = np.array([confusion[c].sum() for c in present], dtype=np.float64)
    accs = np.array([confusion[c, c] / confusion[c].sum() for c in present])
    return present, supports, accs


def weighted_accuracy(confusion: np.ndarray, active: Sequence[int] = DEFAULT_ACTIVE) -> float:
    """WA = sum over active classes of p_c * a_c, where p_c is the class's
    share of the active test utterances."""
    _, supports, accs = _active_parts(confusion, active)
    p = supports / supports.sum()
    return float((p * accs).sum())


def unweighted_accuracy(confusion: np.ndarray, active: Sequence[int] = DEFAULT_ACTIVE) -> float:
    """UWA = arithmetic mean of per-class accuracies over active classes."""
    _, _, accs = _active_parts(confusion, active)
    return float(accs.mean())


def wa_from_parts(accuracies: Sequence[float], supports: Sequence[int]) -> float:
    """WA from already-known per-class accuracies and supports; the
    reconstruction route for published tables."""
    accuracies = np.asarray(accuracies, dtype=np.float64)
    supports = np.asarray(supports, dtype=np.float64)
    if accuracies.shape != supports.shape:
        raise ContractError(
            f"accuracies/supports length mismatch: {accuracies.shape} vs {supports.shape}"
        )
    if supports.sum() <= 0:
        raise EvaluationError("no support in any class")
    return float((supports / supports.sum() * accuracies).sum())


def uwa_from_parts(accuracies: Sequence[float]) -> float:
    accuracies = np.asarray(accuracies, dtype=np.float64)
    if accuracies.size == 0:
        raise EvaluationError("no classes to average")
    return float(accuracies.mean())


@dataclass
class EvalReport:
    """Metrics over one split: fractions in [0, 1] internally, rendered as
    two-decimal percentages for humans."""

    wa: float
    uwa: float
    per_class: dict[str, dict[str, float]]
    confusion: np.ndarray
    per_dialogue_acc: list[float]
    active: tuple[int, ...]

    def to_json_dict(self) -> dict:
        return {
            "wa": self.wa,
            "uwa": self.uwa,
            "per_class": self.per_class,
            "confusion": self.confusion.tolist(),
            "active_classes": [LABELS[c] for c in self.active],
        }

    def to_json(self) -> str:
        return json.dumps(self.to_json_dict(), sort_keys=True, indent=2)

    def render_text(self) -> str:
        lines = [f"{'class':<12} {'accuracy':>9} {'support':>8}"]
        for label, row in self.per_class.items():
            lines.append(f"{label:<12} {100 * row['accuracy']:>8.2f}% {int(row['support']):>8d}")
        lines.append(f"WA {100 * self.wa:.2f}  UWA {100 * self.uwa:.2f}")
        return "\n".join(lines)


def report_from_confusion(
    confusion: np.ndarray,
    active: Sequence[int] = DEFAULT_ACTIVE,
    per_dialogue_acc: list[float] | None = None,
) -> EvalReport:
    present, supports, accs = _active_parts(confusion, active)
    per_class = {
        LABELS[c]: {"accuracy": float(acc), "support": int(sup)}
        for c, sup, acc in zip(present, supports, accs)
    }
    return EvalReport(
        wa=weighted_accuracy(confusion, active),
        uwa=unweighted_accuracy(confusion, active),
        per_class=per_class,
        confusion=confusion,
        per_dialogue_acc=per_dialogue_acc or [],
        active=tuple(sorted(set(int(c) for c in active))),
    )


def evaluate_split(
    params: ModelParams,
    split: DatasetSplit,
    store: FeatureStore,
    active: Sequence[int] = DEFAULT_ACTIVE,
    max_tokens: int = 50,
) -> EvalReport:
    """Predict every utterance of a split and report metrics.

    The per-dialogue accuracy vector (for paired t-tests) covers dialogues
    containing at least one active-gold utterance.
    """
    active_set = set(int(c) for c in active)
    preds: list[int] = []
    golds: list[int] = []
    per_dialogue: list[float] = []
    for d in split.dialogues:
        labels = [code for code, _ in predict(params, d, store, max_tokens)]
        correct = 0
        total = 0
        for utt, pred in zip(d.utterances, labels):
            preds.append(pred)
            golds.append(utt.gold)
            if utt.gold in active_set:
                total += 1
                correct += int(pred == utt.gold)
        if total:
            per_dialogue.append(correct / total)
    confusion = build_confusion(preds, golds)
    return report_from_confusion(confusion, active, per_dialogue)


def regularized_incomplete_beta(a: float, b: float, x: float, tol: float = 1e-12) -> float:
    """I_x(a, b) by the standard continued fraction (modified Lentz),
    switching to the symmetric tail where it converges fast."""
    if a <= 0 or b <= 0:
        raise ContractError(f"beta parameters must be positive, got a={a}, b={b}")
    if not 0.0 <= x <= 1.0:
        raise ContractError(f"x must lie in [0, 1], got {x}")
    if x == 0.0:
        return 0.0
    if x == 1.0:
        return 1.0
    if x > (a + 1.0) / (a + b + 2.0):
        return 1.0 - regularized_incomplete_beta(b, a, 1.0 - x, tol)
    front = math.exp(
        math.lgamma(a + b) - math.lgamma(a) - math.lgamma(b)
        + a * math.log(x) + b * math.log(1.0 - x)
    )
    tiny = 1e-300
    c = 1.0
    d = 1.0 - (a + b) * x / (a + 1.0)
    if abs(d) < tiny:
        d = tiny
    d = 1.0 / d
    h = d
    for m in range(1, 500):
        m2 = 2 * m
        # even step
        num = m * (b - m) * x / ((a + m2 - 1.0) * (a + m2))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        h *= d * c
        # odd step
        num = -(a + m) * (a + b + m) * x / ((a + m2) * (a + m2 + 1.0))
        d = 1.0 + num * d
        if abs(d) < tiny:
            d = tiny
        c = 1.0 + num / c
        if abs(c) < tiny:
            c = tiny
        d = 1.0 / d
        delta = d * c
        h *= delta
        if abs(delta - 1.0) < tol:
            break
    return front * h / a


def t_two_sided_p(t: float, df: int) -> float:
    """Two-sided p-value for a t statistic with df degrees of freedom:
    p = I_{df/(df+t^2)}(df/2, 1/2)."""
    if df < 1:
        raise ContractError(f"degrees of freedom must be >= 1, got {df}")
    if math.isinf(t):
        return 0.0
    return regularized_incomplete_beta(df / 2.0, 0.5, df / (df + t * t))


def paired_t_test(scores_a: Sequence[float], scores_b: Sequence[float]) -> tuple[float, float]:
    """Paired t-test over matched per-dialogue accuracy vectors.

    Returns (t, two-sided p). All-zero differences are degenerate
    (identical systems) and raise; zero-variance nonzero differences give
    an infinite t and p = 0.
    """
    a = np.asarray(scores_a, dtype=np.float64)
    b = np.asarray(scores_b, dtype=np.float64)
    if a.shape != b.shape or a.ndim != 1:
        raise ContractError(f"paired scores must match: {a.shape} vs {b.shape}")
    n = a.size
    if n < 2:
        raise ContractError(f"need at least 2 paired scores, got {n}")
    d = a - b
    if not d.any():
        raise EvaluationError("all paired differences are zero (identical systems)")
    sd = float(d.std(ddof=1))
    mean = float(d.mean())
    if sd == 0.0:
        return math.copysign(math.inf, mean), 0.0
    t = mean / (sd / math.sqrt(n))
    return t, t_two_sided_p(t, n - 1)
