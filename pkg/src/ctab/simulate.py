"""Tables with prescribed one-way marginals and pairwise associations.

Three association measures are supported:

* ``pearson``: each correlation is a linear restraint on the cells, so
  tables are built by pinning free variables one at a time between their
  LP bounds (policies ``mean``, ``ind``, ``min``, ``max``).
* ``gamma`` / ``somers_d``: each pair gets a two-way table on the segment
  between independence and the extremal table; the stacked two-way
  restraints are then checked for a nonnegative solution.

Bounds for the nonlinear measures come from a multistart local search and
are best effort: the witness table is always feasible, global optimality
is not certified.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy.optimize import minimize

from . import _kernels, lp
from .maxent import max_entropy
from .measures import (UndefinedMeasureError, check_scores, gamma, max_association_table,
                       moments, pearson_rho_scored, somers_d)
from .polytope import (ConstraintSystem, build_constraints, linear_functional_bounds, pin_free,
                       solve_affine, _standard_form)
from .table import ContingencyTable, InconsistentMarginalsError, MarginalSet, marginal

POLICIES = ("mean", "ind", "min", "max")
MEASURES = ("pearson", "gamma", "somers_d")
LAMBDA_TOL = 1e-10
MAX_BISECTIONS = 200
BRIDGE_PENALTY = 10.0


class NoTableError(lp.InfeasibleError):
    """No nonnegative table meets the restraints.

    ``stage`` is 0 when the linear system itself is contradictory or empty,
    otherwise the 1-based step of the free-variable sweep that failed.
    """

    def __init__(self, message, stage=0):
        super().__init__(message)
        self.stage = stage


class TargetUnreachableError(ValueError):
    """A pairwise target lies beyond the extremal table's association."""


@dataclass(frozen=True)
class AssociationTarget:
    pair: tuple[int, int]
    measure: str
    value: float

    def __post_init__(self):
        i, j = (int(v) for v in self.pair)
        if not i < j:
            raise ValueError(f"pair must satisfy i < j, got {self.pair}")
        if self.measure not in MEASURES:
            raise ValueError(f"unknown measure {self.measure!r}")
        if not -1.0 <= float(self.value) <= 1.0:
            raise ValueError(f"target {self.value} outside [-1, 1]")
        object.__setattr__(self, "pair", (i, j))
        object.__setattr__(self, "value", float(self.value))


def check_one_way(one_way) -> list[np.ndarray]:
    out = [np.asarray(v, dtype=float) for v in one_way]
    for a, v in enumerate(out, start=1):
        if v.ndim != 1 or len(v) < 2:
            raise ValueError(f"one-way marginal {a} needs at least two categories")
        if np.any(v < 0) or abs(v.sum() - 1.0) > 1e-10:
            raise ValueError(f"one-way marginal {a} must be nonnegative and sum to 1")
    return out


def all_pairs(c: int) -> list[tuple[int, int]]:
    return list(itertools.combinations(range(1, c + 1), 2))


def as_target_map(targets, c: int) -> dict[tuple[int, int], float]:
    """Accept a mapping ``{(i, j): value}``, a ``c x c`` matrix or a list of
    :class:`AssociationTarget`; returns ``{(i, j): value}`` with ``i < j``."""
    if isinstance(targets, Mapping):
        out = {}
        for (i, j), v in targets.items():
            i, j = min(i, j), max(i, j)
            out[(int(i), int(j))] = float(v)
    elif len(targets) and isinstance(next(iter(targets)), AssociationTarget):
        out = {t.pair: t.value for t in targets}
    else:
        mat = np.asarray(targets, dtype=float)
        if mat.shape != (c, c):
            raise ValueError(f"target matrix must be {c}x{c}")
        if not np.allclose(mat, mat.T):
            raise ValueError("target matrix must be symmetric")
        out = {(i, j): float(mat[i - 1, j - 1]) for i, j in all_pairs(c)}
    for pair, v in out.items():
        if not 1 <= pair[0] < pair[1] <= c:
            raise ValueError(f"pair {pair} out of range for {c} variables")
        if not -1.0 <= v <= 1.0:
            raise ValueError(f"target {v} for pair {pair} outside [-1, 1]")
    return out


def independence_table(one_way) -> np.ndarray:
    out = np.ones(())
    for v in one_way:
        out = np.multiply.outer(out, v)
    return out


def _pair_weights(dims, i, j, vi, vj) -> np.ndarray:
    shape = [1] * len(dims)
    shape[i - 1] = dims[i - 1]
    a = vi.reshape(shape)
    shape = [1] * len(dims)
    shape[j - 1] = dims[j - 1]
    b = vj.reshape(shape)
    return np.broadcast_to(a * b, dims).ravel()


def _scores_and_moments(one_way, scores):
    dims = tuple(len(v) for v in one_way)
    sc = check_scores(scores, dims)
    mom = [moments(v, s) for v, s in zip(one_way, sc)]
    for a, (_, sd) in enumerate(mom, start=1):
        if sd <= 1e-15:
            raise UndefinedMeasureError(f"variable {a} has zero variance under its marginal")
    return dims, sc, mom


def pearson_system(one_way, targets, scores=None) -> ConstraintSystem:
    """One-way restraints plus one linear row per correlation target."""
    one_way = check_one_way(one_way)
    dims, sc, mom = _scores_and_moments(one_way, scores)
    tmap = as_target_map(targets, len(dims))
    cs = build_constraints(dims, MarginalSet(1.0, tuple(one_way), {}), exact=False)
    rows, vals, labels = [], [], []
    for (i, j), rho in sorted(tmap.items()):
        (mi, si), (mj, sj) = mom[i - 1], mom[j - 1]
        rows.append(_pair_weights(dims, i, j, sc[i - 1], sc[j - 1]))
        vals.append(rho * si * sj + mi * mj)
        labels.append(("rho", i, j))
    return cs.with_rows(rows, vals, labels) if rows else cs


def _cell_range(par, position):
    """LP range of one free variable over the current region."""
    var, A, b = _standard_form(par, exact=False)
    n = len(var)
    if A.shape[0] == 0:
        A, b = np.zeros((1, n)), np.zeros(1)
    k = var.index(par.free[position])
    C = np.zeros((2, n))
    C[0, k] = 1.0
    C[1, k] = -1.0
    lo, neg_hi = lp.solve_many(C, A, b)
    if lo.status == "infeasible":
        return None
    if not (lo.ok and neg_hi.ok):
        raise RuntimeError(f"bound LP ended with status {lo.status}/{neg_hi.status}")
    return max(lo.value, 0.0), -neg_hi.value


def sequential_pin(par, policy: str, reference=None) -> np.ndarray:
    """Pin free variables in canonical order until the table is determined.

    ``reference`` (flat cells) supplies the value the ``ind`` policy moves
    towards.
    """
    if policy not in POLICIES:
        raise ValueError(f"policy must be one of {POLICIES}")
    stage = 0
    while par.f:
        stage += 1
        rng = _cell_range(par, 0)
        if rng is None:
            raise NoTableError("no table satisfies the restraints", stage)
        lo, hi = rng
        if hi < lo:
            hi = lo = 0.5 * (lo + hi)
        if policy == "mean":
            v = 0.5 * (lo + hi)
        elif policy == "min":
            v = lo
        elif policy == "max":
            v = hi
        else:
            v = float(np.clip(reference[par.free[0]], lo, hi))
        par = pin_free(par, 0, v)
    cells = par.base.copy()
    if np.any(cells < -1e-9):
        raise NoTableError("no table satisfies the restraints", stage)
    return np.maximum(cells, 0.0)


def pearson_construct(one_way, targets, policy: str = "mean", scores=None) -> np.ndarray:
    """Probability table with the given one-way marginals and correlations."""
    one_way = check_one_way(one_way)
    cs = pearson_system(one_way, targets, scores)
    try:
        par = solve_affine(cs)
    except InconsistentMarginalsError as exc:
        raise NoTableError(f"correlation restraints are contradictory: {exc}", 0) from None
    ref = independence_table(one_way).ravel()
    return sequential_pin(par, policy, ref).reshape(cs.dims)


def rho_weights(one_way, objective, scores=None):
    """Cell weights and constant turning ``sum w_ij rho_ij`` into ``c @ p + k``."""
    dims, sc, mom = _scores_and_moments(one_way, scores)
    c = np.zeros(int(np.prod(dims)))
    k = 0.0
    for (i, j), w in _weights(objective, len(dims)):
        (mi, si), (mj, sj) = mom[i - 1], mom[j - 1]
        c += w * _pair_weights(dims, i, j, sc[i - 1], sc[j - 1]) / (si * sj)
        k -= w * mi * mj / (si * sj)
    return c, k


def _weights(objective, c):
    for (i, j), w in objective.items():
        i, j = min(i, j), max(i, j)
        if not 1 <= i < j <= c:
            raise ValueError(f"pair {(i, j)} out of range for {c} variables")
        yield (i, j), float(w)


@dataclass(frozen=True, eq=False)
class BoundReport:
    lower: float
    upper: float
    argmin: np.ndarray
    argmax: np.ndarray
    measured_at_min: dict = field(default_factory=dict)
    measured_at_max: dict = field(default_factory=dict)

    def to_json(self) -> dict:
        fmt = lambda m: {f"{i},{j}": v for (i, j), v in m.items()}  # noqa: E731
        return {
            "lower": self.lower,
            "upper": self.upper,
            "measured_at_min": fmt(self.measured_at_min),
            "measured_at_max": fmt(self.measured_at_max),
            "argmin": {"dims": list(self.argmin.shape), "cells": self.argmin.ravel().tolist()},
            "argmax": {"dims": list(self.argmax.shape), "cells": self.argmax.ravel().tolist()},
        }


def measure_pairs(p, measure: str, pairs=None, scores=None) -> dict:
    """Measured association for every pair (all pairs by default)."""
    p = np.asarray(p, dtype=float)
    pairs = all_pairs(p.ndim) if pairs is None else pairs
    out = {}
    for i, j in pairs:
        if measure == "pearson":
            out[(i, j)] = pearson_rho_scored(p, i, j, scores)
        else:
            two = marginal(p, [i, j])
            out[(i, j)] = gamma(two) if measure == "gamma" else somers_d(two)
    return out


def pearson_bounds(one_way, objective, scores=None) -> BoundReport:
    """Exact LP range of ``sum w_ij rho_ij`` over tables with these marginals."""
    one_way = check_one_way(one_way)
    dims = tuple(len(v) for v in one_way)
    c, k = rho_weights(one_way, dict(objective), scores)
    par = solve_affine(build_constraints(dims, MarginalSet(1.0, tuple(one_way), {}), exact=False))
    lo, hi, x_lo, x_hi = linear_functional_bounds(par, c)
    t_lo, t_hi = np.asarray(x_lo).reshape(dims), np.asarray(x_hi).reshape(dims)
    pairs = sorted({tuple(sorted(p)) for p in objective})
    return BoundReport(float(lo + k), float(hi + k), t_lo, t_hi,
                       measure_pairs(t_lo, "pearson", pairs, scores), measure_pairs(t_hi, "pearson", pairs, scores))


def common_rho_interval(one_way, scores=None, signs=None) -> BoundReport:
    """Range of ``r`` such that ``signs_ij * rho_ij = r`` for every pair is feasible."""
    one_way = check_one_way(one_way)
    dims, sc, mom = _scores_and_moments(one_way, scores)
    c = len(dims)
    signs = {pr: 1.0 for pr in all_pairs(c)} if signs is None else {tuple(sorted(k)): float(v) for k, v in signs.items()}
    cs = build_constraints(dims, MarginalSet(1.0, tuple(one_way), {}), exact=False)
    d = cs.d
    rows = [np.concatenate([row, [0.0, 0.0]]) for row in cs.A]
    rhs = list(cs.rhs_float)
    for (i, j), s in sorted(signs.items()):
        (mi, si), (mj, sj) = mom[i - 1], mom[j - 1]
        # sum v_i v_j p - s * si * sj * (r_plus - r_minus) = mi * mj
        w = _pair_weights(dims, i, j, sc[i - 1], sc[j - 1])
        rows.append(np.concatenate([w, [-s * si * sj, s * si * sj]]))
        rhs.append(mi * mj)
    A, b = np.array(rows), np.array(rhs)
    cost = np.zeros(d + 2)
    cost[d], cost[d + 1] = 1.0, -1.0
    r_lo = lp.solve(cost, A, b)
    r_hi = lp.solve(cost, A, b, maximize=True)
    if not (r_lo.ok and r_hi.ok):
        raise lp.InfeasibleError("no common correlation is attainable")
    t_lo, t_hi = r_lo.x[:d].reshape(dims), r_hi.x[:d].reshape(dims)
    pairs = sorted(signs)
    return BoundReport(float(r_lo.value), float(r_hi.value), t_lo, t_hi,
                       measure_pairs(t_lo, "pearson", pairs, scores), measure_pairs(t_hi, "pearson", pairs, scores))


# ---------------------------------------------------------------------------
# gamma and Somers' d: segment between independence and the extremal table
# ---------------------------------------------------------------------------

_MEASURE_FN = {"gamma": gamma, "somers_d": somers_d}


def solve_lambda(p_row, p_col, target: float, measure: str = "gamma"):
    """``(lambda, table)`` with ``measure(table) = target`` on the segment
    from the independence table to the extremal table of the target's sign."""
    fn = _MEASURE_FN[measure]
    ind = np.outer(p_row, p_col)
    if target == 0:
        return 0.0, ind
    opt = max_association_table(p_row, p_col, 1 if target > 0 else -1)
    reach = fn(opt)
    if abs(target) > abs(reach) + LAMBDA_TOL:
        raise TargetUnreachableError(
            f"target {target} exceeds the extremal {measure} {reach:.6g} for these marginals")
    g = lambda lam: fn(ind + lam * (opt - ind)) - target  # noqa: E731
    lo, hi = 0.0, 1.0
    g_lo, g_hi = g(lo), g(hi)
    if abs(g_lo) <= LAMBDA_TOL:
        return 0.0, ind
    if abs(g_hi) <= LAMBDA_TOL:
        return 1.0, opt
    if g_lo * g_hi > 0:
        raise TargetUnreachableError(f"target {target} is not bracketed on the segment")
    for _ in range(MAX_BISECTIONS):
        mid = 0.5 * (lo + hi)
        g_mid = g(mid)
        if abs(g_mid) <= LAMBDA_TOL:
            lo = hi = mid
            break
        if (g_mid > 0) == (g_hi > 0):
            hi, g_hi = mid, g_mid
        else:
            lo, g_lo = mid, g_mid
    lam = 0.5 * (lo + hi)
    return lam, ind + lam * (opt - ind)


@dataclass(frozen=True, eq=False)
class ConstructionResult:
    feasible: bool
    table: np.ndarray | None
    lambdas: dict
    pair_tables: dict
    measure: str
    message: str = ""

    def measured(self) -> dict:
        return measure_pairs(self.table, self.measure, sorted(self.pair_tables)) if self.feasible else {}

    def to_json(self) -> dict:
        key = lambda pr: f"{pr[0]},{pr[1]}"  # noqa: E731
        out = {
            "feasible": self.feasible,
            "measure": self.measure,
            "message": self.message,
            "lambdas": {key(k): v for k, v in self.lambdas.items()},
            "pair_tables": {key(k): v.tolist() for k, v in self.pair_tables.items()},
        }
        if self.feasible:
            out["table"] = {"dims": list(self.table.shape), "cells": self.table.ravel().tolist(), "kind": "probabilities"}
            out["measured"] = {key(k): v for k, v in self.measured().items()}
        return out


def _segment_construct(one_way, targets, measure) -> ConstructionResult:
    one_way = check_one_way(one_way)
    c = len(one_way)
    tmap = as_target_map(targets, c)
    lambdas, tables = {}, {}
    for (i, j), v in sorted(tmap.items()):
        lambdas[(i, j)], tables[(i, j)] = solve_lambda(one_way[i - 1], one_way[j - 1], v, measure)
    dims = tuple(len(v) for v in one_way)
    margins = MarginalSet(1.0, tuple(one_way), dict(tables))
    try:
        par = solve_affine(build_constraints(dims, margins, exact=False))
        fit = max_entropy(par)
    except (InconsistentMarginalsError, lp.InfeasibleError) as exc:
        return ConstructionResult(False, None, lambdas, tables, measure,
                                  f"the pairwise two-way tables admit no common nonnegative table ({exc})")
    return ConstructionResult(True, fit.fitted, lambdas, tables, measure, "")


def gamma_construct(one_way, targets) -> ConstructionResult:
    """Segment method for Goodman-Kruskal gamma targets.

    A feasible result carries the maximum-entropy table among all tables with
    the constructed two-way marginals.
    """
    return _segment_construct(one_way, targets, "gamma")


def somers_construct(one_way, targets) -> ConstructionResult:
    """Segment method for symmetric Somers' d targets."""
    return _segment_construct(one_way, targets, "somers_d")


# ---------------------------------------------------------------------------
# nonlinear bounds by multistart local search
# ---------------------------------------------------------------------------

def _expand(grad2, dims, i, j):
    shape = [1] * len(dims)
    shape[i - 1], shape[j - 1] = dims[i - 1], dims[j - 1]
    return np.broadcast_to(grad2.reshape(shape), dims).ravel()


def _measure_and_grad(x, dims, i, j, measure):
    p = x.reshape(dims)
    two = np.ascontiguousarray(marginal(p, [i, j]))
    conc, disc = _kernels.concordance(two)
    g_c, g_q = _kernels.concordance_grad(two)
    if measure == "gamma":
        tot = conc + disc
        val = (conc - disc) / tot
        grad = 2.0 * (disc * g_c - conc * g_q) / tot ** 2
    else:
        ties = 1.0 - float((two ** 2).sum())
        val = 2.0 * (conc - disc) / ties
        grad = (2.0 * (g_c - g_q) * ties + 2.0 * (conc - disc) * 2.0 * two) / ties ** 2
    return val, _expand(grad, dims, i, j)


@dataclass(frozen=True, eq=False)
class SearchResult:
    value: float
    table: np.ndarray
    measured: dict
    max_constraint_residual: float
    starts: int
    sense: str

    def to_json(self) -> dict:
        return {
            "value": self.value,
            "sense": self.sense,
            "measured": {f"{i},{j}": v for (i, j), v in self.measured.items()},
            "max_constraint_residual": self.max_constraint_residual,
            "starts": self.starts,
            "table": {"dims": list(self.table.shape), "cells": self.table.ravel().tolist(), "kind": "probabilities"},
        }


def nonlinear_assoc_bounds(one_way, measure: str = "gamma", weights=None, signs=None,
                           sense: str = "max", starts: int = 20, seed: int = 0) -> SearchResult:
    """Best-effort extreme of a nonlinear association objective.

    With ``weights`` the objective is ``sum w_ij m_ij``.  With ``signs``
    (and no weights) it is the common value ``r`` subject to
    ``signs_ij * m_ij = r`` for every listed pair.  Only the one-way
    marginals restrict the table.
    """
    if measure not in _MEASURE_FN:
        raise ValueError("measure must be 'gamma' or 'somers_d'")
    if sense not in ("max", "min"):
        raise ValueError("sense must be 'max' or 'min'")
    if (weights is None) == (signs is None):
        raise ValueError("give exactly one of weights or signs")
    one_way = check_one_way(one_way)
    dims = tuple(len(v) for v in one_way)
    c = len(dims)
    cs = build_constraints(dims, MarginalSet(1.0, tuple(one_way), {}), exact=False)
    A, b = cs.A, cs.rhs_float
    d = cs.d
    flip = 1.0 if sense == "max" else -1.0
    ind = independence_table(one_way).ravel()
    rng = np.random.default_rng(seed)
    common = weights is None
    terms = dict(_weights(signs if common else weights, c))
    pairs = sorted(terms)

    def objective_free(x):
        val, grad = 0.0, np.zeros(d)
        for (i, j), w in terms.items():
            v, g = _measure_and_grad(x, dims, i, j, measure)
            val += w * v
            grad += w * g
        return -flip * val, -flip * grad

    lin = {"type": "eq", "fun": lambda z: A @ z[:d] - b, "jac": lambda z: np.hstack([A, np.zeros((A.shape[0], z.size - d))])}

    def pair_eqs(z):
        x, r = z[:d], z[d]
        return np.array([s * _measure_and_grad(x, dims, i, j, measure)[0] - r for (i, j), s in terms.items()])

    def pair_jac(z):
        x = z[:d]
        rows = []
        for (i, j), s in terms.items():
            g = s * _measure_and_grad(x, dims, i, j, measure)[1]
            rows.append(np.concatenate([g, [-1.0]]))
        return np.array(rows)

    best = None
    for s in range(starts):
        if s == 0:
            x0 = ind.copy()
        else:
            res = lp.solve(rng.normal(size=d), A, b)
            lam = rng.uniform(0.3, 0.95)
            x0 = lam * res.x + (1 - lam) * ind
        if common:
            vals = [terms[pr] * _measure_and_grad(x0, dims, *pr, measure)[0] for pr in pairs]
            z0 = np.concatenate([x0, [float(np.mean(vals))]])
            cons = [lin, {"type": "eq", "fun": pair_eqs, "jac": pair_jac}]
            res = minimize(lambda z: (-flip * z[d], np.concatenate([np.zeros(d), [-flip]])), z0, jac=True,
                           method="SLSQP", bounds=[(0.0, 1.0)] * d + [(-1.0, 1.0)], constraints=cons,
                           options={"maxiter": 500, "ftol": 1e-12})
            x = res.x[:d]
        else:
            res = minimize(objective_free, x0, jac=True, method="SLSQP", bounds=[(0.0, 1.0)] * d,
                           constraints=[{"type": "eq", "fun": lin["fun"], "jac": lambda z: A}],
                           options={"maxiter": 500, "ftol": 1e-12})
            x = res.x
        x = np.clip(x, 0.0, None)
        resid = float(np.max(np.abs(A @ x - b)))
        if resid > 1e-7:
            continue
        try:
            measured = measure_pairs(x.reshape(dims), measure, pairs)
        except UndefinedMeasureError:
            continue
        if common:
            vals = [terms[pr] * measured[pr] for pr in pairs]
            if max(vals) - min(vals) > 1e-6:
                continue
            value = float(np.mean(vals))
        else:
            value = float(sum(terms[pr] * measured[pr] for pr in pairs))
        if best is None or flip * value > flip * best[0] + 1e-12:
            best = (value, x.reshape(dims).copy(), measured, resid)
    if best is None:
        raise RuntimeError("no start converged to a feasible table")
    value, table, measured, resid = best
    return SearchResult(value, table, measured, resid, starts, sense)


def assoc_witness(one_way, targets, measure: str = "gamma", starts: int = 20, seed: int = 0) -> SearchResult:
    """Feasible table whose pairwise associations are closest to ``targets``.

    Minimises the squared deviation over all tables with the given one-way
    marginals; ``value`` is the largest absolute deviation reached.
    """
    if measure not in _MEASURE_FN:
        raise ValueError("measure must be 'gamma' or 'somers_d'")
    one_way = check_one_way(one_way)
    dims = tuple(len(v) for v in one_way)
    tmap = as_target_map(targets, len(dims))
    pairs = sorted(tmap)
    cs = build_constraints(dims, MarginalSet(1.0, tuple(one_way), {}), exact=False)
    A, b = cs.A, cs.rhs_float
    d = cs.d
    ind = independence_table(one_way).ravel()
    rng = np.random.default_rng(seed)

    def fun(x):
        val, grad = 0.0, np.zeros(d)
        for pr in pairs:
            v, g = _measure_and_grad(x, dims, *pr, measure)
            val += (v - tmap[pr]) ** 2
            grad += 2.0 * (v - tmap[pr]) * g
        return val, grad

    best = None
    for s in range(starts):
        if s == 0:
            x0 = ind.copy()
        else:
            res = lp.solve(rng.normal(size=d), A, b)
            lam = rng.uniform(0.3, 0.95)
            x0 = lam * res.x + (1 - lam) * ind
        res = minimize(fun, x0, jac=True, method="SLSQP", bounds=[(0.0, 1.0)] * d,
                       constraints=[{"type": "eq", "fun": lambda z: A @ z - b, "jac": lambda z: A}],
                       options={"maxiter": 1000, "ftol": 1e-16})
        x = np.clip(res.x, 0.0, None)
        resid = float(np.max(np.abs(A @ x - b)))
        if resid > 1e-7:
            continue
        measured = measure_pairs(x.reshape(dims), measure, pairs)
        dev = max(abs(measured[pr] - tmap[pr]) for pr in pairs)
        if best is None or dev < best[0]:
            best = (dev, x.reshape(dims).copy(), measured, resid)
        if dev < 1e-9:
            break
    if best is None:
        raise RuntimeError("no start converged to a feasible table")
    dev, table, measured, resid = best
    return SearchResult(dev, table, measured, resid, starts, "min")


# ---------------------------------------------------------------------------
# correlation targets that realise Somers' d targets
# ---------------------------------------------------------------------------

@dataclass(frozen=True, eq=False)
class BridgeResult:
    rho: np.ndarray
    table: np.ndarray | None
    residual: float
    exact: bool
    evaluations: int

    def to_json(self) -> dict:
        out = {"rho": self.rho.tolist(), "residual": self.residual, "exact": self.exact,
               "evaluations": self.evaluations}
        if self.table is not None:
            out["table"] = {"dims": list(self.table.shape), "cells": self.table.ravel().tolist(), "kind": "probabilities"}
        return out


def rho_bridge_for_d(d_targets, policy: str, one_way, scores=None, pairs=None,
                     starts: int = 5, jitter: float = 0.1, seed: int = 0,
                     step: float = 0.1, min_step: float = 1e-7) -> BridgeResult:
    """Correlations whose Pearson-built table has the requested Somers' d.

    Minimises ``||d* - d(p(rho))||`` by coordinate search with halving steps,
    starting at ``rho = d*`` and then at jittered copies.  Correlations
    with no table score :data:`BRIDGE_PENALTY`.
    """
    one_way = check_one_way(one_way)
    dims = tuple(len(v) for v in one_way)
    pairs = all_pairs(len(dims)) if pairs is None else [tuple(sorted(p)) for p in pairs]
    target = np.asarray(d_targets, dtype=float)
    if target.shape != (len(pairs),):
        raise ValueError(f"need one target per pair ({len(pairs)})")
    cs0 = build_constraints(dims, MarginalSet(1.0, tuple(one_way), {}), exact=False)
    _, sc, mom = _scores_and_moments(one_way, scores)
    weights = [_pair_weights(dims, i, j, sc[i - 1], sc[j - 1]) for i, j in pairs]
    ref = independence_table(one_way).ravel()
    cache: dict = {}

    def build(rho):
        vals = [r * mom[i - 1][1] * mom[j - 1][1] + mom[i - 1][0] * mom[j - 1][0]
                for r, (i, j) in zip(rho, pairs)]
        cs = cs0.with_rows(weights, vals, [("rho", i, j) for i, j in pairs])
        par = solve_affine(cs)
        return sequential_pin(par, policy, ref).reshape(dims)

    def score(rho):
        key = tuple(np.round(rho, 12))
        if key in cache:
            return cache[key]
        out = (BRIDGE_PENALTY, None)
        if np.all(np.abs(rho) <= 1.0):
            try:
                p = build(rho)
                got = np.array([somers_d(marginal(p, [i, j])) for i, j in pairs])
                out = (float(np.linalg.norm(target - got)), p)
            except (lp.InfeasibleError, InconsistentMarginalsError, UndefinedMeasureError):
                pass
        cache[key] = out
        return out

    rng = np.random.default_rng(seed)
    best = None
    for s in range(starts):
        x = target.copy() if s == 0 else np.clip(target + rng.uniform(-jitter, jitter, target.size), -1, 1)
        fx, px = score(x)
        h = step
        while h >= min_step and fx > 1e-12:
            moved = False
            for k in range(x.size):
                for sgn in (1.0, -1.0):
                    y = x.copy()
                    y[k] += sgn * h
                    fy, py = score(y)
                    if fy < fx:
                        x, fx, px, moved = y, fy, py, True
                        break
            if not moved:
                h *= 0.5
        if best is None or fx < best[1]:
            best = (x, fx, px)
        if best[1] <= 1e-6:
            break
    x, fx, px = best
    return BridgeResult(x, px, fx, fx <= 1e-6, len(cache))


# ---------------------------------------------------------------------------
# sampling
# ---------------------------------------------------------------------------

def inversion_sample(p, n: int, seed: int) -> ContingencyTable:
    """``n`` independent draws from the cell distribution ``p``."""
    probs = np.asarray(p, dtype=float)
    if np.any(probs < 0) or abs(probs.sum() - 1.0) > 1e-10:
        raise ValueError("p must be a probability table")
    if n < 0:
        raise ValueError("n must be nonnegative")
    rng = np.random.default_rng(seed)
    cdf = np.cumsum(probs.ravel())
    cdf[-1] = 1.0
    u = rng.random(int(n))
    counts = _kernels.inversion_counts(cdf, u)
    return ContingencyTable(counts.reshape(probs.shape).astype(float), "counts")
