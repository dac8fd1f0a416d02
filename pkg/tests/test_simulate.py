import numpy as np
import pytest
from hypothesis import given, settings, strategies as st

from ctab.measures import gamma, somers_d
from ctab.simulate import (
    NoTableError,
    TargetUnreachableError,
    assoc_witness,
    as_target_map,
    gamma_construct,
    independence_table,
    inversion_sample,
    measure_pairs,
    nonlinear_assoc_bounds,
    pearson_bounds,
    pearson_construct,
    rho_bridge_for_d,
    solve_lambda,
    somers_construct,
)
from ctab.table import marginal

from conftest import ONE_WAY_222, ONE_WAY_333


def one_way_margins_match(p, one_way, tol=1e-10):
    return all(np.allclose(marginal(p, [a + 1]), v, atol=tol) for a, v in enumerate(one_way))


@pytest.mark.parametrize("policy", ["mean", "ind", "min", "max"])
@pytest.mark.parametrize("target", [-0.3, 0.0, 0.25, 0.5])
def test_pearson_construct_meets_targets(policy, target):
    targets = {(1, 2): target, (1, 3): target, (2, 3): target}
    p = pearson_construct(ONE_WAY_333, targets, policy)
    assert p.min() >= -1e-12
    assert one_way_margins_match(p, ONE_WAY_333)
    for pair, v in measure_pairs(p, "pearson").items():
        assert v == pytest.approx(targets[pair], abs=1e-8)


def test_ind_policy_with_zero_targets_gives_independence():
    p = pearson_construct(ONE_WAY_333, {(1, 2): 0, (1, 3): 0, (2, 3): 0}, "ind")
    assert np.allclose(p, independence_table(ONE_WAY_333), atol=1e-12)


def test_unreachable_pearson_target_reports_stage():
    with pytest.raises(NoTableError) as exc:
        pearson_construct(ONE_WAY_333, {(1, 2): 0.8}, "mean")
    assert exc.value.stage


def test_target_map_forms_agree():
    a = as_target_map({(1, 2): 0.3, (1, 3): 0.1}, 3)
    b = as_target_map(np.array([[1, 0.3, 0.1], [0.3, 1, 0], [0.1, 0, 1]]), 3)
    assert a[(1, 2)] == b[(1, 2)] and a[(1, 3)] == b[(1, 3)]
    assert as_target_map({(2, 1): 0.3}, 3) == {(1, 2): 0.3}
    with pytest.raises(ValueError):
        as_target_map({(1, 1): 0.3}, 3)
    with pytest.raises(ValueError):
        as_target_map({(1, 2): 1.5}, 3)


marg = st.integers(2, 5).flatmap(lambda n: st.lists(st.floats(0.05, 1), min_size=n, max_size=n)).map(
    lambda v: np.array(v) / sum(v))


@given(marg, marg, st.floats(-0.95, 0.95), st.sampled_from(["gamma", "somers_d"]))
@settings(max_examples=120, deadline=None)
def test_segment_solution_hits_target(p, q, target, measure):
    fn = gamma if measure == "gamma" else somers_d
    try:
        lam, table = solve_lambda(p, q, target, measure)
    except TargetUnreachableError:
        extreme = fn(np.outer(p, q) if target == 0 else table_for_sign(p, q, target))
        assert abs(target) > abs(extreme) - 1e-10
        return
    assert 0 <= lam <= 1
    assert np.allclose(table.sum(axis=1), p, atol=1e-12)
    assert np.allclose(table.sum(axis=0), q, atol=1e-12)
    assert fn(table) == pytest.approx(target, abs=1e-8)


def table_for_sign(p, q, target):
    from ctab.measures import max_association_table
    return max_association_table(p, q, 1 if target > 0 else -1)


def test_measure_continuous_along_segment():
    p, q = np.array([0.1, 0.3, 0.6]), np.array([0.2, 0.4, 0.4])
    from ctab.measures import max_association_table
    ind, opt = np.outer(p, q), max_association_table(p, q, 1)
    lams = np.linspace(1e-6, 1, 400)
    vals = np.array([gamma(ind + lam * (opt - ind)) for lam in lams])
    assert np.all(np.diff(vals) >= -1e-12)
    assert np.max(np.abs(np.diff(vals))) < 0.05


def test_gamma_construct_pair_tables_exact():
    res = gamma_construct(ONE_WAY_222, {(1, 2): 1, (1, 3): 1, (2, 3): 1})
    assert res.feasible
    for (i, j), tab in res.pair_tables.items():
        assert np.allclose(marginal(res.table, [i, j]), tab, atol=1e-12)
    for v in res.measured().values():
        assert v == pytest.approx(1.0, abs=1e-8)


def test_gamma_construct_mixed_signs_infeasible():
    res = gamma_construct(ONE_WAY_222, {(1, 2): -1, (1, 3): 1, (2, 3): 1})
    assert not res.feasible and res.table is None and res.message


def test_chain_of_reversal_pattern():
    res = gamma_construct(ONE_WAY_222, {(1, 2): 1, (1, 3): 1, (2, 3): 1})
    for axis in range(3):
        flipped = np.flip(res.table, axis=axis)
        signs = sorted(round(v) for v in measure_pairs(flipped, "gamma").values())
        assert signs == [-1, -1, 1]


def test_somers_construct_meets_targets():
    targets = {(1, 2): 0.05, (1, 3): 0.05, (2, 3): 0.05}
    res = somers_construct(ONE_WAY_333, targets)
    assert res.feasible
    assert one_way_margins_match(res.table, ONE_WAY_333)
    for v in res.measured().values():
        assert v == pytest.approx(0.05, abs=1e-8)


def test_nonlinear_bounds_respect_single_pair_limits():
    r = nonlinear_assoc_bounds(ONE_WAY_333, "somers_d", weights={(1, 2): 1}, sense="max", starts=5)
    assert r.value == pytest.approx(0.5946, abs=1e-3)
    assert r.max_constraint_residual < 1e-9
    assert one_way_margins_match(r.table, ONE_WAY_333, tol=1e-9)


def test_witness_for_gamma_targets():
    targets = {(1, 2): -0.6023, (1, 3): 0.6023, (2, 3): 0.6023}
    w = assoc_witness(ONE_WAY_333, targets, "gamma", starts=5)
    for pair, v in w.measured.items():
        assert v == pytest.approx(targets[pair], abs=1e-6)
    assert w.table.min() >= -1e-12


def test_pearson_bounds_are_lp_optima():
    r = pearson_bounds(ONE_WAY_333, {(1, 2): 1})
    assert r.lower < 0 < r.upper
    for bound, measured in ((r.lower, r.measured_at_min), (r.upper, r.measured_at_max)):
        assert measured[(1, 2)] == pytest.approx(bound, abs=1e-9)


def test_rho_bridge_independent_start():
    r = rho_bridge_for_d((0, 0, 0), "ind", ONE_WAY_333)
    assert np.allclose(r.rho, 0, atol=1e-4)
    assert np.allclose(list(measure_pairs(r.table, "somers_d").values()), 0, atol=1e-8)


def test_sampling_reproducible():
    p = independence_table(ONE_WAY_333)
    a = inversion_sample(p, 1000, seed=7)
    b = inversion_sample(p, 1000, seed=7)
    c = inversion_sample(p, 1000, seed=8)
    assert np.array_equal(a.cells, b.cells)
    assert not np.array_equal(a.cells, c.cells)
    assert a.total == 1000


def test_sampling_matches_binomial_spread():
    p = pearson_construct(ONE_WAY_333, {(1, 2): 0.5, (1, 3): 0.5, (2, 3): 0.5}, "mean")
    n = 200_000
    counts = inversion_sample(p, n, seed=2024).cells
    sd = np.sqrt(n * p * (1 - p))
    ok = sd > 0
    assert np.all(np.abs(counts - n * p)[ok] <= 4 * sd[ok])
    assert np.all(counts[~ok] == 0)


def test_sampling_rejects_bad_input():
    with pytest.raises(ValueError):
        inversion_sample(np.array([0.5, 0.6]), 10, seed=1)
