"""Multi-label evaluation metrics.

Ranking loss and macro AUC skip degenerate instances / labels (no positives
or no negatives) instead of scoring them; the skip counts are reported by
:func:`evaluate`.
"""

from __future__ import annotations

from dataclasses import asdict, dataclass

import numpy as np


@dataclass(frozen=True)
class EvaluationResult:
    hamming_loss: float
    ranking_loss: float
    macro_auc: float
    macro_f1: float
    skipped_instances: int = 0
    skipped_labels: int = 0

    def as_dict(self) -> dict:
        return asdict(self)


def _pair(a, b, name_a="pred", name_b="truth"):
    a = np.asarray(a)
    b = np.asarray(b)
    if a.shape != b.shape or a.ndim != 2:
        raise ValueError(f"{name_a} {a.shape} and {name_b} {b.shape} must be equal 2-D shapes")
    return a, b.astype(bool)


def hamming_loss(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    return float(np.mean(pred.astype(bool) != truth))


def _ranking_loss(scores, truth) -> tuple[float, int]:
    scores, truth = _pair(scores, truth, "scores")
    losses = []
    skipped = 0
    for f, y in zip(scores.astype(float), truth):
        rel, irr = f[y], f[~y]
        if rel.size == 0 or irr.size == 0:
            skipped += 1
            continue
        irr = np.sort(irr)
        # pairs with f(relevant) <= f(irrelevant)
        bad = irr.size - np.searchsorted(irr, rel, side="left")
        losses.append(bad.sum() / (rel.size * irr.size))
    if not losses:
        raise ValueError("every instance has an empty or full label set")
    return float(np.mean(losses)), skipped


def ranking_loss(scores, truth) -> float:
    return _ranking_loss(scores, truth)[0]


def _macro_auc(scores, truth) -> tuple[float, int]:
    scores, truth = _pair(scores, truth, "scores")
    aucs = []
    skipped = 0
    for f, y in zip(scores.astype(float).T, truth.T):
        pos, neg = f[y], np.sort(f[~y])
        if pos.size == 0 or neg.size == 0:
            skipped += 1
            continue
        good = np.searchsorted(neg, pos, side="right")  # negatives scored <= each positive
        aucs.append(good.sum() / (pos.size * neg.size))
    if not aucs:
        raise ValueError("every label is all-positive or all-negative")
    return float(np.mean(aucs)), skipped


def macro_auc(scores, truth) -> float:
    return _macro_auc(scores, truth)[0]


def macro_f1(pred, truth) -> float:
    pred, truth = _pair(pred, truth)
    pred = pred.astype(bool)
    tp = np.sum(pred & truth, axis=0)
    fp = np.sum(pred & ~truth, axis=0)
    fn = np.sum(~pred & truth, axis=0)
    denom = 2 * tp + fp + fn
    f1 = np.divide(2 * tp, denom, out=np.zeros(denom.shape, dtype=float), where=denom > 0)
    return float(f1.mean())


def evaluate(pred, scores, truth) -> EvaluationResult:
    """All four metrics at once; a metric with nothing left to score is NaN."""
    truth = np.asarray(truth)
    try:
        rl, skipped_i = _ranking_loss(scores, truth)
    except ValueError:
        if np.shape(scores) != truth.shape:
            raise
        rl, skipped_i = float("nan"), truth.shape[0]
    try:
        auc, skipped_l = _macro_auc(scores, truth)
    except ValueError:
        if np.shape(scores) != truth.shape:
            raise
        auc, skipped_l = float("nan"), truth.shape[1]
    return EvaluationResult(hamming_loss(pred, truth), rl, auc, macro_f1(pred, truth),
                            skipped_i, skipped_l)
