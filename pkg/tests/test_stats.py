import math

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st
from scipy.stats import studentized_range

from mfsir.stats import (Q_ALPHA_005, MetricTable, PerfectSeparation, average_ranks, friedman,
                         nemenyi_cd, pairwise_significance)


def table(values, higher=False):
    return MetricTable.from_values(values, higher_is_better=higher)


def test_average_rank_examples():
    assert average_ranks(table([[0.1, 0.5, 0.6], [0.2, 0.3, 0.9]]))[0] == 1
    np.testing.assert_array_equal(average_ranks(table(np.ones((4, 3)))), [2, 2, 2])
    np.testing.assert_array_equal(average_ranks(table([[1, 2, 3], [3, 2, 1]])), [2, 2, 2])
    np.testing.assert_array_equal(average_ranks(table([[1, 2], [1, 3]], higher=True)), [2, 1])


def test_friedman_examples():
    r = friedman(table(np.ones((4, 3))))
    assert r.chi2_f == 0 and r.f_f == 0 and (r.df1, r.df2) == (2, 6)
    with pytest.raises(PerfectSeparation) as info:
        friedman(table(np.tile([1.0, 2.0, 3.0], (4, 1))))
    assert info.value.chi2_f == pytest.approx(8)


@settings(max_examples=50, deadline=None)
@given(seed=st.integers(0, 10**6), theta=st.integers(2, 12), gamma=st.integers(2, 8))
def test_friedman_identity_and_permutation(seed, theta, gamma):
    rng = np.random.default_rng(seed)
    v = np.round(rng.uniform(size=(theta, gamma)), 1)  # rounding forces some ties
    t = table(v)
    R = average_ranks(t)
    assert R.sum() == pytest.approx(gamma * (gamma + 1) / 2)
    definitional = 12 * theta / (gamma * (gamma + 1)) * np.sum((R - (gamma + 1) / 2) ** 2)
    perm = rng.permutation(gamma)
    try:
        res = friedman(t)
    except PerfectSeparation as exc:
        assert exc.chi2_f == pytest.approx(definitional, rel=1e-10, abs=1e-12)
        return
    assert res.chi2_f == pytest.approx(definitional, rel=1e-10, abs=1e-12)
    res_p = friedman(table(v[:, perm]))
    np.testing.assert_allclose(res_p.avg_ranks, res.avg_ranks[perm])
    assert res_p.chi2_f == pytest.approx(res.chi2_f, rel=1e-12, abs=1e-12)
    assert res_p.f_f == pytest.approx(res.f_f, rel=1e-12, abs=1e-12)


@settings(max_examples=30, deadline=None)
@given(seed=st.integers(0, 10**6))
def test_ranks_invariant_under_monotone_rows(seed):
    rng = np.random.default_rng(seed)
    v = rng.uniform(size=(5, 4))
    w = np.exp(2 * v) * rng.uniform(1, 3, size=(5, 1))
    np.testing.assert_array_equal(average_ranks(table(v)), average_ranks(table(w)))


def test_nemenyi():
    cd = nemenyi_cd(5, 10, 2.728)
    assert 1.90 <= cd <= 1.94
    assert nemenyi_cd(5, 10) == cd
    assert nemenyi_cd(4, 40) == pytest.approx(nemenyi_cd(4, 10) / 2)
    with pytest.raises(ValueError):
        nemenyi_cd(5, 10, 0)
    with pytest.raises(ValueError):
        nemenyi_cd(11, 10)


@pytest.mark.parametrize("gamma", sorted(Q_ALPHA_005))
def test_q_table_matches_studentized_range(gamma):
    expected = studentized_range.ppf(0.95, gamma, math.inf) / math.sqrt(2)
    assert Q_ALPHA_005[gamma] == pytest.approx(expected, abs=2e-3)


def test_pairwise_significance():
    sig = pairwise_significance([1, 2, 4], 1.5)
    assert sig.tolist() == [[False, False, True], [False, False, True], [True, True, False]]
    cd = nemenyi_cd(5, 10)
    assert pairwise_significance([1, 1 + cd], cd)[0, 1]
    assert not pairwise_significance([2, 2, 2], 0.1).any()


def test_table_validation():
    with pytest.raises(ValueError):
        table([[1, 2]])
    with pytest.raises(ValueError):
        table([[1, np.nan], [1, 2]])
