import numpy as np
import pytest
from scipy.optimize import brentq

from ctab.threeway import (
    DegenerateTableError,
    admissible_interval,
    bartlett_D,
    bartlett_gap,
    bennett_L,
    margins_and_lds,
    taylor_D,
    threeway_measures,
)

from conftest import random_table

# sign of each cell (flat order) along the line of tables with fixed two-way margins
PATTERN = np.array([1, -1, -1, 1, -1, 1, 1, -1])


def table_from(p1, p2, p3, d12, d13, d23, t):
    p12, p13, p23 = p1 * p2 + d12, p1 * p3 + d13, p2 * p3 + d23
    base = np.array([0, p12, p13, p1 - p12 - p13, p23, p2 - p12 - p23, p3 - p13 - p23,
                     1 - p1 - p2 - p3 + p12 + p13 + p23])
    return (base + t * PATTERN).reshape(2, 2, 2)


def t_range(p1, p2, p3, d12, d13, d23):
    base = table_from(p1, p2, p3, d12, d13, d23, 0).ravel()
    lo = max(-base[i] for i in range(8) if PATTERN[i] > 0)
    hi = min(base[i] for i in range(8) if PATTERN[i] < 0)
    return lo, hi


def no_interaction_table(p1, p2, p3, d12, d13, d23):
    lo, hi = t_range(p1, p2, p3, d12, d13, d23)
    t = brentq(lambda t: bartlett_gap(table_from(p1, p2, p3, d12, d13, d23, t), 0.0), lo + 1e-15, hi - 1e-15, xtol=1e-16)
    return table_from(p1, p2, p3, d12, d13, d23, t)


def cubic_root_oracle(p):
    """Admissible real root of the product equation via numpy.roots."""
    minus = [p[0, 0, 0], p[0, 1, 1], p[1, 0, 1], p[1, 1, 0]]
    plus = [p[0, 0, 1], p[0, 1, 0], p[1, 0, 0], p[1, 1, 1]]
    left = np.poly1d([1.0])
    right = np.poly1d([1.0])
    for a in minus:
        left *= np.poly1d([-1.0, a])
    for a in plus:
        right *= np.poly1d([1.0, a])
    lo, hi = admissible_interval(p)
    roots = [r.real for r in (left - right).roots if abs(r.imag) < 1e-9 and lo - 1e-12 <= r.real <= hi + 1e-12]
    return roots


@pytest.mark.parametrize("seed", range(50))
def test_bartlett_matches_cubic_roots(seed):
    p = random_table(np.random.default_rng(seed), (2, 2, 2))
    roots = cubic_root_oracle(p)
    assert len(roots) == 1
    D = bartlett_D(p)
    assert D == pytest.approx(roots[0], abs=1e-10)
    lo, hi = admissible_interval(p)
    assert lo <= D <= hi
    # all eight adjusted cells stay in [0, 1]
    minus = [(0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0)]
    for idx in np.ndindex(2, 2, 2):
        v = p[idx] - D if idx in minus else p[idx] + D
        assert -1e-14 <= v <= 1 + 1e-14


@pytest.mark.parametrize("seed", range(30))
def test_bennett_is_taylor_without_corrections(seed):
    p = random_table(np.random.default_rng(seed), (2, 2, 2))
    p1, p2, p3, d12, d13, d23 = margins_and_lds(p)
    corrections = (64 * (1 - 2 * p1) * (1 - 2 * p2) * (1 - 2 * p3) * d12 * d13 * d23
                   + 4 * (1 - 2 * p1) * d12 * d13 + 4 * (1 - 2 * p2) * d12 * d23 + 4 * (1 - 2 * p3) * d13 * d23)
    assert bennett_L(p) == pytest.approx(taylor_D(p) + corrections, abs=1e-15)


def test_mood_values(mood):
    m = threeway_measures(mood)
    assert m.bartlett_D == pytest.approx(0.010581, abs=1e-6)
    assert m.bennett_L == pytest.approx(0.011736, abs=1e-6)


@pytest.mark.parametrize("seed", range(40))
def test_equivalence_at_half_margins(seed):
    rng = np.random.default_rng(seed)
    d = rng.uniform(-0.08, 0.08, size=3)
    lo, hi = t_range(0.5, 0.5, 0.5, *d)
    if hi - lo < 1e-6:
        pytest.skip("empty line")
    p = table_from(0.5, 0.5, 0.5, *d, rng.uniform(lo, hi))
    assert abs(bartlett_D(p) - bennett_L(p)) < 1e-10


@pytest.mark.parametrize("seed", range(40))
def test_equivalence_with_two_zero_lds(seed):
    rng = np.random.default_rng(seed)
    p1, p2, p3 = rng.uniform(0.2, 0.8, size=3)
    lds = [0.0, 0.0, 0.0]
    lds[seed % 3] = rng.uniform(-0.05, 0.05)
    lo, hi = t_range(p1, p2, p3, *lds)
    if hi - lo < 1e-6:
        pytest.skip("empty line")
    p = table_from(p1, p2, p3, *lds, rng.uniform(lo, hi))
    assert abs(bartlett_D(p) - bennett_L(p)) < 1e-10


@pytest.mark.parametrize("seed", range(20))
def test_roy_kastenbaum(seed):
    rng = np.random.default_rng(seed)
    ab = rng.dirichlet(np.ones(4)).reshape(2, 2)
    c = rng.dirichlet(np.ones(2))
    product = ab[:, :, None] * c[None, None, :]
    _, _, _, _, d13, d23 = margins_and_lds(product)
    assert abs(d13) < 1e-15 and abs(d23) < 1e-15
    assert abs(bartlett_D(product)) < 1e-12
    # elsewhere on the same line the interaction is nonzero
    p1, p2, p3, d12, d13, d23 = margins_and_lds(product)
    lo, hi = t_range(p1, p2, p3, d12, d13, d23)
    t0 = product[0, 0, 0]
    for t in (lo + 0.5 * (t0 - lo), t0 + 0.5 * (hi - t0)):
        assert abs(bartlett_D(table_from(p1, p2, p3, d12, d13, d23, t))) > 1e-9


def taylor_error_ratios(margins, shape=(1.0, 0.8, -1.1), start=2e-3, halvings=8):
    errs = []
    for k in range(halvings):
        eps = start * 2.0 ** -k
        p = no_interaction_table(*margins, *(eps * s for s in shape))
        errs.append(abs(bartlett_D(p) - taylor_D(p)))
    return [errs[i] / errs[i + 1] for i in range(len(errs) - 1)]


@pytest.mark.parametrize("margins", [(0.4, 0.45, 0.6), (0.45, 0.55, 0.42), (0.3, 0.6, 0.7)])
def test_taylor_error_is_second_order(margins):
    ratios = taylor_error_ratios(margins)
    assert all(3.5 <= r <= 4.5 for r in ratios[3:]), ratios


def test_degenerate_table():
    p = np.zeros((2, 2, 2))
    p[0, 0, 0] = 1
    with pytest.raises(DegenerateTableError):
        bartlett_D(p)
    with pytest.raises(ValueError):
        bartlett_D(np.ones((2, 2, 3)) / 12)
