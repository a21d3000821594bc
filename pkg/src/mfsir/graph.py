"""p-nearest-neighbour heat-kernel graph and its Laplacian."""

from __future__ import annotations

import os
import warnings
from dataclasses import dataclass

import numpy as np
from scipy import sparse
from scipy.spatial.distance import cdist

DENSE_SIZE_WARNING = 30_000


@dataclass(frozen=True)
class SimilarityGraph:
    S: np.ndarray
    p: int
    lam: float


@dataclass(frozen=True)
class GraphLaplacian:
    L: np.ndarray
    degrees: np.ndarray

    @property
    def Z(self) -> np.ndarray:
        return np.diag(self.degrees)

    def to_sparse(self) -> sparse.csr_matrix:
        return sparse.csr_matrix(self.L)


def knn_indices(D: np.ndarray, p: int) -> np.ndarray:
    """Indices of the ``p`` smallest entries per row of a distance matrix, self excluded.

    Ties are broken by the lower column index.
    """
    D = np.array(D, dtype=float, copy=True)
    np.fill_diagonal(D, np.inf)
    return np.argsort(D, axis=1, kind="stable")[:, :p]


def build_similarity(X, p: int = 5, lam: float | None = None) -> SimilarityGraph:
    """Symmetric kNN graph with weights ``exp(-||xi - xj||^2 / lam^2)``.

    ``lam=None`` picks the mean Euclidean length of the nonzero kNN edges.
    """
    X = np.asarray(X, dtype=float)
    n = X.shape[0]
    if not 1 <= p < n:
        raise ValueError(f"need 1 <= p < n, got p={p}, n={n}")
    if lam is not None and not lam > 0:
        raise ValueError("kernel width must be positive")
    if n > DENSE_SIZE_WARNING:
        warnings.warn(f"dense {n}x{n} similarity matrix", ResourceWarning, stacklevel=2)

    D2 = cdist(X, X, "sqeuclidean")
    nbrs = knn_indices(D2, p)
    adj = np.zeros((n, n), dtype=bool)
    adj[np.repeat(np.arange(n), p), nbrs.ravel()] = True
    adj |= adj.T
    np.fill_diagonal(adj, False)

    if lam is None:
        edge = np.sqrt(D2[adj])
        edge = edge[edge > 0]
        lam = float(edge.mean()) if edge.size else 1.0
    S = np.where(adj, np.exp(-D2 / lam**2), 0.0)
    return SimilarityGraph(S, p, float(lam))


def build_laplacian(g: SimilarityGraph | np.ndarray) -> GraphLaplacian:
    S = g.S if isinstance(g, SimilarityGraph) else np.asarray(g, dtype=float)
    deg = S.sum(axis=1)
    return GraphLaplacian(np.diag(deg) - S, deg)


def manifold_term(V, L) -> float:
    """``trace(V^T L V)`` without forming the l x l product."""
    if isinstance(L, GraphLaplacian):
        L = L.L
    V = np.asarray(V, dtype=float)
    if V.ndim != 2 or L.shape != (V.shape[0], V.shape[0]):
        raise ValueError(f"shape mismatch: V {V.shape}, L {L.shape}")
    return float(np.sum(V * (L @ V)))


def dump_graph(g: SimilarityGraph, lap: GraphLaplacian, out_dir) -> None:
    os.makedirs(out_dir, exist_ok=True)
    np.savetxt(os.path.join(out_dir, "S.csv"), g.S, delimiter=",", fmt="%.10g")
    np.savetxt(os.path.join(out_dir, "L.csv"), lap.L, delimiter=",", fmt="%.10g")
