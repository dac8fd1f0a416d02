"""Pairwise association measures.

Linkage disequilibrium (LD) is ``p_ij - p_i. p_.j`` for one category of
each variable.  Goodman-Kruskal gamma and Somers' d use the symmetric
concordance sums, so both are invariant under transposing the table.
"""

from __future__ import annotations

import numpy as np

from . import _kernels
from .table import as_probabilities, collapse_pair, condition, marginal


class UndefinedMeasureError(ValueError):
    """The measure has a zero denominator for this table."""


def ld_pair(table, axis_a: int, cat_a: int, axis_b: int, cat_b: int) -> float:
    """LD between category ``cat_a`` of ``axis_a`` and ``cat_b`` of ``axis_b``."""
    q = collapse_pair(table, axis_a, cat_a, axis_b, cat_b)
    return float(q[0, 0] * q[1, 1] - q[0, 1] * q[1, 0])


def ld_conditional(table, axis_a, cat_a, axis_b, cat_b, strat_axis: int, strat_cat: int) -> float:
    """LD within the stratum ``strat_axis == strat_cat``."""
    if strat_axis in (axis_a, axis_b):
        raise ValueError("stratifying axis must differ from the measured axes")
    sub = condition(table, strat_axis, strat_cat)
    shift = lambda a: a - 1 if a > strat_axis else a  # noqa: E731
    return ld_pair(sub, shift(axis_a), cat_a, shift(axis_b), cat_b)


def pearson_phi(table, axis_a: int, cat_a: int, axis_b: int, cat_b: int) -> float:
    """Phi coefficient of the collapsed (category vs. rest) 2x2 table."""
    q = collapse_pair(table, axis_a, cat_a, axis_b, cat_b)
    pi = q[0].sum()
    pj = q[:, 0].sum()
    denom = pi * (1 - pi) * pj * (1 - pj)
    if denom <= 0:
        raise UndefinedMeasureError("phi is undefined for a degenerate margin")
    return float((q[0, 0] * q[1, 1] - q[0, 1] * q[1, 0]) / np.sqrt(denom))


def default_scores(dims) -> list[np.ndarray]:
    return [np.arange(1, k + 1, dtype=float) for k in dims]


def check_scores(scores, dims) -> list[np.ndarray]:
    if scores is None:
        return default_scores(dims)
    out = [np.asarray(s, dtype=float) for s in scores]
    if len(out) != len(dims) or any(len(s) != k for s, k in zip(out, dims)):
        raise ValueError("one score vector per axis, one score per category")
    if any(np.any(np.diff(s) <= 0) for s in out):
        raise ValueError("scores must increase strictly within each axis")
    return out


def moments(one_way, scores) -> tuple[float, float]:
    """Mean and standard deviation of the scores under a one-way marginal."""
    p = np.asarray(one_way, dtype=float)
    mu = float(scores @ p)
    # centred form: a one-point margin gives exactly zero variance
    var = float(((scores - mu) ** 2) @ p)
    return mu, np.sqrt(var)


def pearson_rho_scored(table, axis_a: int, axis_b: int, scores=None) -> float:
    """Pearson correlation of the category scores on the ``(a, b)`` marginal.

    ``scores`` is one vector per axis of the full table (default ``1..I``).
    """
    p = as_probabilities(table)
    sc = check_scores(scores, p.shape)
    two = marginal(p, [axis_a, axis_b])
    if axis_a > axis_b:
        two = two.T
    va, vb = sc[axis_a - 1], sc[axis_b - 1]
    mu_a, sd_a = moments(two.sum(axis=1), va)
    mu_b, sd_b = moments(two.sum(axis=0), vb)
    if sd_a <= 1e-15 or sd_b <= 1e-15:
        raise UndefinedMeasureError("correlation is undefined for a zero-variance margin")
    return float(((va - mu_a) @ two @ (vb - mu_b)) / (sd_a * sd_b))


def concordance(table2d) -> tuple[float, float]:
    """Symmetric concordant and discordant pair probabilities ``(S, D)``."""
    p = np.ascontiguousarray(as_probabilities(table2d))
    if p.ndim != 2:
        raise ValueError("concordance needs a 2-way table")
    conc, disc = _kernels.concordance(p)
    return 2.0 * conc, 2.0 * disc


def gamma(table2d) -> float:
    """Goodman-Kruskal gamma, ``(S - D) / (S + D)``."""
    s, d = concordance(table2d)
    if s + d <= 0:
        raise UndefinedMeasureError("gamma is undefined when no pair is concordant or discordant")
    return (s - d) / (s + d)


def somers_d(table2d) -> float:
    """Symmetric Somers' d, ``(S - D) / (1 - sum p^2)``."""
    p = as_probabilities(table2d)
    s, d = concordance(p)
    # 1 - sum p^2 as the sum over distinct cell pairs; avoids cancellation
    # when nearly all mass sits in one cell
    f = p.ravel()
    tail = np.cumsum(f[::-1])[::-1]
    ties = 2.0 * float(f[:-1] @ tail[1:])
    if ties <= 1e-15:
        raise UndefinedMeasureError("Somers' d is undefined for a single-cell table")
    return (s - d) / ties


def max_association_table(p, q, sign: int = 1) -> np.ndarray:
    """Extremal 2-way table with row marginal ``p`` and column marginal ``q``.

    ``sign=+1`` fills greedily from the top-left corner (gamma = 1).
    ``sign=-1`` fills with the row marginal reversed and flips the rows
    back afterwards (gamma = -1).
    """
    p = np.asarray(p, dtype=float)
    q = np.asarray(q, dtype=float)
    if np.any(p < 0) or np.any(q < 0):
        raise ValueError("marginals must be nonnegative")
    if abs(p.sum() - 1) > 1e-10 or abs(q.sum() - 1) > 1e-10:
        raise ValueError("marginals must each sum to 1")
    if sign not in (1, -1):
        raise ValueError("sign must be +1 or -1")
    rows = p[::-1].copy() if sign < 0 else p.copy()
    cols = q.copy()
    out = np.zeros((len(p), len(q)))
    for i in range(len(rows)):
        for j in range(len(cols)):
            v = min(rows[i], cols[j])
            out[i, j] = v
            rows[i] -= v
            cols[j] -= v
    return out[::-1].copy() if sign < 0 else out
