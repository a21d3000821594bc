"""Feature selection by Hadamard-product implicit regularization with a latent label embedding.

The model minimises

    ||X (G * H) - V||_F^2 + alpha ||Y - V B||_F^2 + beta tr(V^T L V)

by alternating projected gradient steps; ``*`` is the entrywise product and
``V, B`` are kept nonnegative. Features are ranked by the row norms of
``G * H``.
"""

from __future__ import annotations

import logging
from dataclasses import dataclass, field, replace

import numpy as np
from scipy import sparse

from . import graph

log = logging.getLogger(__name__)

INIT_MODES = ("sparse_nonneg", "signed")
_EPS_DEN = 1e-12


class DivergenceError(FloatingPointError):
    """A non-finite value appeared during optimisation (step size too large)."""

    def __init__(self, iteration: int, what: str = "objective"):
        super().__init__(f"non-finite {what} at iteration {iteration}")
        self.iteration = iteration


@dataclass(frozen=True)
class MfsirConfig:
    alpha: float = 1.0
    beta: float = 1.0
    eta: float = 1e-4
    varpi: float = 1e-5
    latent_dim: int | None = None
    t_max: int = 200
    tol: float = 1e-5
    seed: int = 0
    init_mode: str = "sparse_nonneg"
    graph_p: int = 5
    graph_lambda: float | None = None

    def __post_init__(self):
        if not self.alpha > 0:
            raise ValueError("alpha must be positive")
        if not self.beta >= 0:
            raise ValueError("beta must be nonnegative")
        if not self.eta >= 0:
            raise ValueError("eta must be nonnegative")
        if not self.varpi > 0:
            raise ValueError("varpi must be positive")
        if self.latent_dim is not None and self.latent_dim < 1:
            raise ValueError("latent_dim must be >= 1")
        if self.t_max < 0:
            raise ValueError("t_max must be >= 0")
        if not self.tol > 0:
            raise ValueError("tol must be positive")
        if self.seed < 0:
            raise ValueError("seed must be unsigned")
        if self.init_mode not in INIT_MODES:
            raise ValueError(f"init_mode must be one of {INIT_MODES}")
        if self.graph_p < 1:
            raise ValueError("graph_p must be >= 1")
        if self.graph_lambda is not None and not self.graph_lambda > 0:
            raise ValueError("graph_lambda must be positive")

    def resolve_latent_dim(self, q: int) -> int:
        if q == 1:
            return 1
        if self.latent_dim is None:
            return min(max(1, round(0.4 * q)), q - 1)
        if self.latent_dim >= q:
            raise ValueError(f"latent_dim={self.latent_dim} must be < q={q}")
        return self.latent_dim


@dataclass
class MfsirModel:
    G: np.ndarray
    H: np.ndarray
    V: np.ndarray
    B: np.ndarray
    objective_history: list[float] = field(default_factory=list)
    iterations_run: int = 0
    converged: bool = False

    @property
    def W(self) -> np.ndarray:
        return self.G * self.H


@dataclass(frozen=True)
class FeatureRanking:
    order: np.ndarray
    scores: np.ndarray

    def top(self, count: int) -> np.ndarray:
        return self.order[:count]


def frobenius_norm_sq(A) -> float:
    A = np.asarray(A, dtype=float)
    return float(np.sum(A * A))


def _check_shapes(X, Y, L, G, H, V, B):
    n, m = X.shape
    l = V.shape[1]
    if G.shape != H.shape or G.shape != (m, l):
        raise ValueError(f"G, H must be {(m, l)}, got {G.shape} and {H.shape}")
    if V.shape[0] != n or Y.shape[0] != n:
        raise ValueError("X, Y and V must share the instance dimension")
    if B.shape != (l, Y.shape[1]):
        raise ValueError(f"B must be {(l, Y.shape[1])}, got {B.shape}")
    if L is not None and L.shape != (n, n):
        raise ValueError(f"L must be {(n, n)}, got {L.shape}")


def _as_operator(L):
    if isinstance(L, graph.GraphLaplacian):
        return L.L
    return L


def _trace_term(V, L) -> float:
    if L is None:
        return 0.0
    return float(np.sum(V * (L @ V)))


def objective(X, Y, L, G, H, V, B, alpha, beta) -> float:
    L = _as_operator(L)
    _check_shapes(X, Y, L, G, H, V, B)
    fit_term = frobenius_norm_sq(X @ (G * H) - V)
    label_term = frobenius_norm_sq(Y - V @ B)
    manifold = _trace_term(V, L) if beta else 0.0
    return fit_term + alpha * label_term + beta * manifold


def _grad_gh(X, G, H, V):
    common = 2.0 * (X.T @ (X @ (G * H) - V))
    return H * common, G * common


def _grad_v(X, Y, L, W, V, B, alpha, beta):
    g = (V - X @ W) + alpha * ((V @ B - Y) @ B.T)
    if beta and L is not None:
        g = g + beta * (L @ V)
    return 2.0 * g


def _grad_b(Y, V, B, alpha):
    return 2.0 * alpha * (V.T @ (V @ B - Y))


def gradients(X, Y, L, G, H, V, B, alpha, beta):
    """Partial derivatives of :func:`objective` at one point, returned as (dG, dH, dV, dB)."""
    L = _as_operator(L)
    _check_shapes(X, Y, L, G, H, V, B)
    dG, dH = _grad_gh(X, G, H, V)
    dV = _grad_v(X, Y, L, G * H, V, B, alpha, beta)
    dB = _grad_b(Y, V, B, alpha)
    return dG, dH, dV, dB


def project_nonneg(D) -> np.ndarray:
    return np.maximum(np.asarray(D, dtype=float), 0.0)


def init_model(cfg: MfsirConfig, m: int, q: int, n: int, l: int) -> MfsirModel:
    rng = np.random.default_rng(cfg.seed)
    w = cfg.varpi
    if cfg.init_mode == "signed":
        G = rng.uniform(-w, w, size=(m, l))
    else:
        G = rng.uniform(0.0, w, size=(m, l))
    H = rng.uniform(-w, w, size=(m, l))
    V = project_nonneg(rng.uniform(-w, w, size=(n, l)))
    B = project_nonneg(rng.uniform(-w, w, size=(l, q)))
    return MfsirModel(G, H, V, B)


def step(model: MfsirModel, X, Y, L, cfg: MfsirConfig) -> MfsirModel:
    """One sweep of the alternating updates G -> H -> V -> B.

    Each block sees the values already updated earlier in the sweep. The
    objective at the new point is appended to the history.
    """
    L = _as_operator(L)
    eta, alpha, beta = cfg.eta, cfg.alpha, cfg.beta
    G, H, V, B = model.G, model.H, model.V, model.B
    t = model.iterations_run + 1

    common = 2.0 * (X.T @ (X @ (G * H) - V))
    G = G - eta * (H * common)
    common = 2.0 * (X.T @ (X @ (G * H) - V))
    H = H - eta * (G * common)
    XW = X @ (G * H)
    gV = (V - XW) + alpha * ((V @ B - Y) @ B.T)
    if beta and L is not None:
        gV = gV + beta * (L @ V)
    V = project_nonneg(V - eta * 2.0 * gV)
    B = project_nonneg(B - eta * _grad_b(Y, V, B, alpha))

    value = frobenius_norm_sq(XW - V) + alpha * frobenius_norm_sq(Y - V @ B)
    if beta and L is not None:
        value += beta * _trace_term(V, L)
    if not np.isfinite(value):
        raise DivergenceError(t)
    return replace(model, G=G, H=H, V=V, B=B,
                   objective_history=model.objective_history + [value],
                   iterations_run=t)


def relative_change(prev: float, cur: float) -> float:
    return abs(cur - prev) / max(prev, _EPS_DEN)


def laplacian_for(X, cfg: MfsirConfig):
    """Sparse graph Laplacian of the rows of ``X`` (``None`` when the manifold term is off)."""
    n = X.shape[0]
    if cfg.beta == 0 or n < 2:
        return None
    p = min(cfg.graph_p, n - 1)
    g = graph.build_similarity(X, p, cfg.graph_lambda)
    return sparse.csr_matrix(graph.build_laplacian(g).L)


def fit(X, Y, cfg: MfsirConfig | None = None, L=None, callback=None):
    """Run the alternating projected descent and rank the features.

    ``L`` may be supplied to reuse a precomputed Laplacian; otherwise it is
    built from ``X``. Stops after ``cfg.t_max`` sweeps or when the relative
    objective change drops to ``cfg.tol``.
    """
    cfg = cfg or MfsirConfig()
    X = np.asarray(X, dtype=float)
    Y = np.asarray(Y, dtype=float)
    if X.ndim != 2 or Y.ndim != 2 or X.shape[0] != Y.shape[0]:
        raise ValueError("X and Y must be 2-D with the same number of rows")
    n, m = X.shape
    q = Y.shape[1]
    l = cfg.resolve_latent_dim(q)
    if L is None:
        L = laplacian_for(X, cfg)
    else:
        L = _as_operator(L)

    model = init_model(cfg, m, q, n, l)
    value = objective(X, Y, L, model.G, model.H, model.V, model.B, cfg.alpha, cfg.beta)
    if not np.isfinite(value):
        raise DivergenceError(0)
    model.objective_history = [value]

    while model.iterations_run < cfg.t_max:
        model = step(model, X, Y, L, cfg)
        if callback is not None:
            callback(model)
        hist = model.objective_history
        if relative_change(hist[-2], hist[-1]) <= cfg.tol:
            model.converged = True
            break
    log.debug("fit finished after %d iterations (converged=%s)",
              model.iterations_run, model.converged)
    return model, rank_features(model.G, model.H)


def rank_features(G, H) -> FeatureRanking:
    G = np.asarray(G, dtype=float)
    H = np.asarray(H, dtype=float)
    if G.shape != H.shape:
        raise ValueError(f"G {G.shape} and H {H.shape} differ in shape")
    scores = np.linalg.norm(G * H, axis=1)
    order = np.lexsort((np.arange(scores.size), -scores))
    return FeatureRanking(order, scores)


def ranking_from_scores(scores) -> FeatureRanking:
    scores = np.asarray(scores, dtype=float)
    return FeatureRanking(np.lexsort((np.arange(scores.size), -scores)), scores)


def sparsity_fraction(W, threshold: float) -> float:
    """Fraction of rows of ``W`` whose Euclidean norm is at most ``threshold``."""
    W = np.asarray(W, dtype=float)
    if W.shape[0] == 0:
        return 0.0
    return float(np.mean(np.linalg.norm(W, axis=1) <= threshold))
