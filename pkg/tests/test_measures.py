import itertools

import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctab.measures import (
    UndefinedMeasureError,
    concordance,
    gamma,
    ld_pair,
    max_association_table,
    pearson_phi,
    pearson_rho_scored,
    somers_d,
)
from ctab.table import marginal

from conftest import random_table


def pair_enumeration(p):
    """Oracle: visit every ordered pair of cells."""
    s = d = 0.0
    cells = list(itertools.product(range(p.shape[0]), range(p.shape[1])))
    for (i, j), (k, l) in itertools.product(cells, cells):
        w = p[i, j] * p[k, l]
        if (i - k) * (j - l) > 0:
            s += w
        elif (i - k) * (j - l) < 0:
            d += w
    return s, d


# a cell is empty or carries a non-negligible share
cell = st.one_of(st.just(0.0), st.floats(1e-6, 1))
two_way = st.tuples(st.integers(2, 5), st.integers(2, 5)).flatmap(
    lambda sh: st.lists(cell, min_size=sh[0] * sh[1], max_size=sh[0] * sh[1]).map(
        lambda v: np.reshape(v, sh)
    )
).filter(lambda a: a.sum() > 1e-3)


@given(two_way)
@settings(max_examples=150, deadline=None)
def test_concordance_matches_pair_enumeration(t):
    p = t / t.sum()
    s, d = concordance(p)
    s0, d0 = pair_enumeration(p)
    assert s == pytest.approx(s0, abs=1e-12)
    assert d == pytest.approx(d0, abs=1e-12)


def test_gamma_known_value():
    # 2x2: gamma reduces to Yule's Q = (ad - bc) / (ad + bc)
    t = np.array([[10, 20], [30, 40]], dtype=float)
    assert gamma(t) == pytest.approx((400 - 600) / (400 + 600), abs=1e-14)


@given(two_way)
@settings(max_examples=150, deadline=None)
def test_gamma_symmetric_under_transpose(t):
    try:
        g = gamma(t)
    except UndefinedMeasureError:
        return
    assert gamma(t.T) == pytest.approx(g, abs=1e-12)


@given(two_way)
@settings(max_examples=150, deadline=None)
def test_reversal_negates_measures(t):
    rev = t[::-1]
    try:
        assert gamma(rev) == pytest.approx(-gamma(t), abs=1e-12)
    except UndefinedMeasureError:
        pass
    try:
        assert somers_d(rev) == pytest.approx(-somers_d(t), abs=1e-12)
    except UndefinedMeasureError:
        pass
    try:
        r = pearson_rho_scored(t, 1, 2)
    except UndefinedMeasureError:
        return
    assert pearson_rho_scored(rev, 1, 2) == pytest.approx(-r, abs=1e-10)


@given(two_way)
@settings(max_examples=150, deadline=None)
def test_somers_bounded_by_gamma(t):
    if np.count_nonzero(t) == 1:
        with pytest.raises(UndefinedMeasureError):
            somers_d(t)
        return
    d = somers_d(t)
    assert -1 - 1e-12 <= d <= 1 + 1e-12
    try:
        g = gamma(t)
    except UndefinedMeasureError:
        assert d == pytest.approx(0.0, abs=1e-15)
        return
    assert abs(d) <= abs(g) + 1e-12


marg = st.integers(2, 6).flatmap(lambda n: st.lists(st.floats(0.01, 1), min_size=n, max_size=n))


@given(marg, marg)
@settings(max_examples=150, deadline=None)
def test_max_association_reaches_gamma_extremes(a, b):
    p = np.array(a) / sum(a)
    q = np.array(b) / sum(b)
    for sign in (1, -1):
        t = max_association_table(p, q, sign)
        assert np.allclose(t.sum(axis=1), p, atol=1e-12)
        assert np.allclose(t.sum(axis=0), q, atol=1e-12)
        assert t.min() >= 0
        assert gamma(t) == pytest.approx(sign, abs=1e-12)


def test_ld_sums_to_zero_over_categories():
    rng = np.random.default_rng(1)
    for _ in range(50):
        p = random_table(rng, (3, 4, 2))
        for j in range(1, 5):
            assert abs(sum(ld_pair(p, 1, i, 2, j) for i in range(1, 4))) < 1e-15
        for i in range(1, 4):
            assert abs(sum(ld_pair(p, 1, i, 2, j) for j in range(1, 5))) < 1e-15


def test_ld_complement_sign():
    rng = np.random.default_rng(2)
    for _ in range(50):
        p = random_table(rng, (2, 2))
        assert ld_pair(p, 1, 1, 2, 1) == pytest.approx(-ld_pair(p, 1, 1, 2, 2), abs=1e-15)


def test_phi_equals_scored_correlation_on_2x2():
    rng = np.random.default_rng(3)
    for _ in range(50):
        p = random_table(rng, (2, 2))
        # scores 1 < 2 put category 1 low, so the sign flips relative to phi of (1,1)
        assert pearson_phi(p, 1, 1, 2, 1) == pytest.approx(pearson_rho_scored(p, 1, 2), abs=1e-12)


def test_pearson_uses_marginal_of_larger_table():
    rng = np.random.default_rng(4)
    p = random_table(rng, (3, 2, 4))
    two = marginal(p, (1, 3))
    assert pearson_rho_scored(p, 1, 3) == pytest.approx(pearson_rho_scored(two, 1, 2), abs=1e-14)
    assert pearson_rho_scored(p, 3, 1) == pytest.approx(pearson_rho_scored(p, 1, 3), abs=1e-14)


def test_undefined_measures_raise():
    with pytest.raises(UndefinedMeasureError):
        pearson_rho_scored(np.array([[0.5, 0.5], [0, 0]]), 1, 2)
    with pytest.raises(UndefinedMeasureError):
        gamma(np.array([[0.5, 0], [0, 0.0]]) * 2)
    with pytest.raises(ValueError):
        pearson_rho_scored(np.ones((2, 2)), 1, 2, scores=[[2, 1], [1, 2]])
