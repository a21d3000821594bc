"""ML-kNN: Bayesian multi-label k-nearest-neighbour classifier."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from scipy.spatial.distance import cdist

from .dataset import MultiLabelDataset
from .graph import knn_indices


@dataclass(frozen=True)
class MlknnModel:
    k: int
    s: float
    priors: np.ndarray      # (q,) P(H_j = 1)
    cond: np.ndarray        # (q, k+1) P(E_c | H_j = 1)
    cond_neg: np.ndarray    # (q, k+1) P(E_c | H_j = 0)
    train_X: np.ndarray
    train_Y: np.ndarray


def _neighbour_counts(Y, nbrs) -> np.ndarray:
    """Per instance and label, how many of the listed neighbours carry the label."""
    return Y[nbrs].sum(axis=1).astype(int)


def _smoothed(counts: np.ndarray, s: float) -> np.ndarray:
    total = counts.sum(axis=1, keepdims=True)
    denom = s * counts.shape[1] + total
    bins = counts.shape[1]
    with np.errstate(invalid="ignore", divide="ignore"):
        probs = (s + counts) / denom
    # s = 0 with no observations in a class: fall back to uniform
    return np.where(denom > 0, probs, 1.0 / bins)


def mlknn_fit(train: MultiLabelDataset, k: int = 10, s: float = 1.0) -> MlknnModel:
    X, Y = train.X, np.asarray(train.Y, dtype=int)
    n, q = Y.shape
    if k < 1 or k >= n:
        raise ValueError(f"need 1 <= k < n_train, got k={k}, n={n}")
    if s < 0:
        raise ValueError("smoothing must be nonnegative")

    priors = (s + Y.sum(axis=0)) / (2 * s + n)
    nbrs = knn_indices(cdist(X, X, "sqeuclidean"), k)
    delta = _neighbour_counts(Y, nbrs)

    pos = np.zeros((q, k + 1))
    neg = np.zeros((q, k + 1))
    for j in range(q):
        pos[j] = np.bincount(delta[Y[:, j] == 1, j], minlength=k + 1)
        neg[j] = np.bincount(delta[Y[:, j] == 0, j], minlength=k + 1)
    return MlknnModel(k, s, priors, _smoothed(pos, s), _smoothed(neg, s), X, Y)


def mlknn_predict(model: MlknnModel, X_test) -> tuple[np.ndarray, np.ndarray]:
    """Posterior label scores and MAP predictions (a score of exactly 0.5 predicts 0)."""
    X_test = np.asarray(X_test, dtype=float)
    if X_test.ndim != 2 or X_test.shape[1] != model.train_X.shape[1]:
        raise ValueError(f"expected {model.train_X.shape[1]} features, got {X_test.shape}")
    D = cdist(X_test, model.train_X, "sqeuclidean")
    nbrs = np.argsort(D, axis=1, kind="stable")[:, :model.k]
    delta = _neighbour_counts(model.train_Y, nbrs)

    labels = np.arange(model.priors.size)
    p1 = model.priors * model.cond[labels, delta]
    p0 = (1.0 - model.priors) * model.cond_neg[labels, delta]
    total = p1 + p0
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = np.where(total > 0, p1 / total, np.broadcast_to(model.priors, p1.shape))
    return scores, (scores > 0.5).astype(np.int8)
