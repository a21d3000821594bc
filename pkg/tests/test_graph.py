import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from mfsir.graph import build_laplacian, build_similarity, dump_graph, manifold_term


def test_identical_points():
    S = build_similarity(np.zeros((2, 3)), p=1, lam=1.0).S
    np.testing.assert_array_equal(S, [[0, 1], [1, 0]])


def test_three_points_on_a_line():
    S = build_similarity(np.array([[0.0], [1.0], [3.0]]), p=1, lam=1.0).S
    assert S[0, 1] == pytest.approx(math.exp(-1)) and S[1, 0] == S[0, 1]
    assert S[1, 2] == pytest.approx(math.exp(-4)) and S[2, 1] == S[1, 2]
    assert S[0, 2] == 0 and S[2, 0] == 0


def test_tie_broken_by_lower_index():
    # point 1 is equidistant from 0 and 2; with p=1 it links to 0
    S = build_similarity(np.array([[0.0], [1.0], [2.0]]), p=1, lam=1.0).S
    assert S[1, 0] > 0
    # 2 still links to 1 through its own neighbourhood
    assert S[1, 2] > 0 and S[0, 2] == 0


def test_adaptive_width_is_mean_edge_length():
    g = build_similarity(np.array([[0.0], [1.0], [3.0]]), p=1)
    assert g.lam == pytest.approx(1.5)


@pytest.mark.parametrize("p,lam", [(3, 1.0), (0, 1.0), (1, 0.0), (1, -2.0)])
def test_similarity_errors(p, lam):
    with pytest.raises(ValueError):
        build_similarity(np.zeros((3, 1)), p=p, lam=lam)


def test_laplacian_examples():
    np.testing.assert_array_equal(build_laplacian(np.zeros((3, 3))).L, np.zeros((3, 3)))
    lap = build_laplacian(np.array([[0.0, 1.0], [1.0, 0.0]]))
    np.testing.assert_array_equal(lap.L, [[1, -1], [-1, 1]])
    np.testing.assert_array_equal(lap.Z, np.eye(2))
    assert manifold_term(np.array([[1.0], [0.0]]), lap) == 1.0
    assert manifold_term(np.ones((2, 3)), lap) == 0.0
    with pytest.raises(ValueError):
        manifold_term(np.ones((3, 1)), lap)


def _random_symmetric(rng, n):
    S = rng.uniform(0, 1, (n, n)) * (rng.uniform(size=(n, n)) < 0.5)
    S = np.triu(S, 1)
    return S + S.T


def _double_sum(S, V):
    n = S.shape[0]
    return 0.5 * sum(S[i, j] * float(np.sum((V[i] - V[j]) ** 2))
                     for i in range(n) for j in range(n))


@settings(max_examples=30, deadline=None)
@given(n=st.integers(2, 30), l=st.integers(1, 4), seed=st.integers(0, 10**6))
def test_trace_identity(n, l, seed):
    rng = np.random.default_rng(seed)
    S = _random_symmetric(rng, n)
    V = rng.standard_normal((n, l))
    lhs, rhs = manifold_term(V, build_laplacian(S)), _double_sum(S, V)
    assert lhs == pytest.approx(rhs, rel=1e-10, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(n=st.integers(3, 50), p=st.integers(1, 5), seed=st.integers(0, 10**6))
def test_graph_structure_and_psd(n, p, seed):
    rng = np.random.default_rng(seed)
    X = rng.standard_normal((n, 3))
    g = build_similarity(X, p=min(p, n - 1))
    S = g.S
    np.testing.assert_array_equal(S, S.T)
    assert np.all(np.diag(S) == 0) and S.min() >= 0 and S.max() <= 1
    L = build_laplacian(g).L
    np.testing.assert_allclose(L.sum(axis=1), 0, atol=1e-12)
    x = rng.standard_normal(n)
    assert x @ L @ x >= -1e-8
    assert np.linalg.eigvalsh(L).min() >= -1e-8


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6), c=st.floats(0.1, 10))
def test_scaling_invariance(seed, c):
    X = np.random.default_rng(seed).standard_normal((12, 2))
    a = build_similarity(X, p=3, lam=0.7).S
    b = build_similarity(c * X, p=3, lam=0.7 * c).S
    np.testing.assert_allclose(a, b, rtol=1e-9, atol=1e-12)


def test_dump_graph(tmp_path):
    g = build_similarity(np.array([[0.0], [1.0], [3.0]]), p=1, lam=1.0)
    dump_graph(g, build_laplacian(g), tmp_path / "g")
    np.testing.assert_allclose(np.loadtxt(tmp_path / "g" / "S.csv", delimiter=","), g.S, rtol=1e-9)
    assert (tmp_path / "g" / "L.csv").is_file()
