"""Maximum-entropy tables under linear restraints.

The restraints are the marginal totals behind an
:class:`~ctab.polytope.AffineParametrization`, optionally tightened by extra
linear equations on the cell probabilities.  Entropy is concave in the free
variables, so Newton ascent from a strictly interior start converges to the
global maximum.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
from scipy import linalg
from scipy.stats import chi2 as _chi2

from . import lp
from .polytope import AffineParametrization
from .table import as_array, flatten_index

NEGLIGIBLE_P = 1e-8
GRAD_TOL = 1e-10
ZERO_TOL = 1e-12
MAX_NEWTON = 200


@dataclass(frozen=True, eq=False)
class MaxEntResult:
    fitted: np.ndarray
    entropy: float
    iterations: int
    max_constraint_residual: float
    gradient_norm: float
    free_parameters: int

    def to_json(self) -> dict:
        return {
            "dims": list(self.fitted.shape),
            "cells": self.fitted.ravel().tolist(),
            "kind": "probabilities",
            "entropy": self.entropy,
            "iterations": self.iterations,
            "max_constraint_residual": self.max_constraint_residual,
            "gradient_norm": self.gradient_norm,
        }


def entropy(p) -> float:
    """``-sum p ln p`` over cells with ``p >= 1e-8``."""
    p = np.ravel(np.asarray(p, dtype=float))
    q = p[p >= NEGLIGIBLE_P]
    return float(-(q * np.log(q)).sum())


def cell_constraint(dims, multi_index, value):
    """Extra restraint fixing one cell probability (1-based index)."""
    w = np.zeros(int(np.prod(dims)))
    w[flatten_index(dims, multi_index) - 1] = 1.0
    return w, float(value)


def _reduce(par: AffineParametrization, extra):
    """Cell probabilities as ``c0 + M z`` after imposing ``extra``."""
    total = par.system.rhs_float[0]
    base = par.base / total
    H = par.H / total
    f = H.shape[1]
    y0 = np.zeros(f)
    Z = np.eye(f)
    if extra:
        W = np.array([np.ravel(w) for w, _ in extra], dtype=float)
        v = np.array([val for _, val in extra], dtype=float)
        G = W @ H
        h = v - W @ base
        if f:
            y0, *_ = np.linalg.lstsq(G, h, rcond=None)
            Z = linalg.null_space(G) if G.size else np.eye(f)
        if np.max(np.abs(G @ y0 - h), initial=0.0) > 1e-9:
            raise lp.InfeasibleError("extra restraints contradict the marginal totals")
    return base + H @ y0, H @ Z


def _interior_start(c0, M):
    """Point maximising the smallest non-constant cell, and that margin.

    Solves ``max s`` s.t. ``c0 + M z >= s`` on the varying cells, with ``z``
    split into positive and negative parts.
    """
    m, k = M.shape
    rows = np.hstack([M, -M, -np.ones((m, 1)), -np.eye(m)])
    cost = np.zeros(2 * k + 1 + m)
    cost[2 * k] = 1.0
    res = lp.solve(cost, rows, -c0, maximize=True)
    if res.status == "infeasible":
        raise lp.InfeasibleError("no nonnegative table satisfies the restraints")
    if not res.ok:
        raise RuntimeError(f"start-point LP ended with status {res.status}")
    x = res.x
    return x[:k] - x[k:2 * k], float(x[2 * k])


def _zero_forced(c0, M):
    """Varying cells whose maximum over the region is zero."""
    m, k = M.shape
    rows = np.hstack([M, -M, -np.eye(m)])
    C = np.hstack([np.eye(m) @ M, -(np.eye(m) @ M), np.zeros((m, m))])
    out = []
    for i, res in enumerate(lp.solve_many(C, rows, -c0, maximize=True)):
        if res.ok and c0[i] + res.value <= ZERO_TOL:
            out.append(i)
    return out


def max_entropy(par: AffineParametrization, extra: Sequence | None = None) -> MaxEntResult:
    """Entropy-maximising probability table over ``par`` and ``extra``.

    ``extra`` is a sequence of ``(weights, value)`` pairs, one weight per
    cell, stating ``weights @ p = value`` for the probability table ``p``.
    """
    extra = list(extra or [])
    c0, M = _reduce(par, extra)
    d = len(c0)
    # cells constant over the region leave the optimisation
    pinned = np.zeros(d, dtype=bool)
    while True:
        varying = np.where(~pinned & (np.abs(M).max(axis=1, initial=0.0) > 1e-14))[0]
        const = np.setdiff1d(np.arange(d), varying)
        if np.any(c0[const] < -1e-9):
            raise lp.InfeasibleError("restraints force a negative cell")
        if varying.size == 0 or M.shape[1] == 0:
            z = np.zeros(M.shape[1])
            break
        z, margin = _interior_start(c0[varying], M[varying])
        if margin > ZERO_TOL:
            break
        dead = varying[_zero_forced(c0[varying], M[varying])]
        if dead.size == 0:
            raise RuntimeError("could not find a strictly interior start")
        # pin forced zeros by restricting z to keep them at 0
        N = linalg.null_space(M[dead])
        c0 = c0 + M @ _least_norm(M[dead], -c0[dead])
        M = M @ N
        pinned[dead] = True
        c0[dead] = 0.0

    A = M[varying]
    it = 0
    grad_norm = 0.0
    if A.size:
        for it in range(1, MAX_NEWTON + 1):
            p = c0[varying] + A @ z
            grad = -A.T @ (np.log(p) + 1.0)
            grad_norm = float(np.linalg.norm(grad))
            if grad_norm < GRAD_TOL:
                break
            hess = -(A.T * (1.0 / p)) @ A
            step = np.linalg.solve(hess, -grad)
            f0 = -(p * np.log(p)).sum()
            slope = grad @ step
            alpha = 1.0
            while True:
                q = p + alpha * (A @ step)
                if np.all(q > ZERO_TOL):
                    f1 = -(q * np.log(q)).sum()
                    if f1 >= f0 + 1e-4 * alpha * slope or alpha < 1e-12:
                        break
                alpha *= 0.5
            z = z + alpha * step
            if alpha * np.linalg.norm(step) < 1e-16:
                p = c0[varying] + A @ z
                grad_norm = float(np.linalg.norm(A.T @ (np.log(p) + 1.0)))
                break
    fitted = c0 + M @ z
    fitted[np.abs(fitted) < 1e-15] = 0.0
    fitted = np.maximum(fitted, 0.0)
    resid = constraint_residual(par, fitted, extra)
    return MaxEntResult(fitted.reshape(par.dims), entropy(fitted), it, resid, grad_norm, M.shape[1])


def _least_norm(G, h):
    y, *_ = np.linalg.lstsq(G, h, rcond=None)
    return y


def constraint_residual(par: AffineParametrization, p, extra=()) -> float:
    """Largest violation of the marginal and extra restraints by ``p``."""
    p = np.ravel(np.asarray(p, dtype=float))
    total = par.system.rhs_float[0]
    r = np.abs(par.system.A @ p - par.system.rhs_float / total)
    worst = float(r.max(initial=0.0))
    for w, v in extra:
        worst = max(worst, abs(float(np.ravel(w) @ p) - v))
    return worst


def entropy_gradient(par: AffineParametrization, y) -> np.ndarray:
    """Gradient of the entropy with respect to the free variables of ``par``.

    ``y`` is in the probability scale (free cells divided by the total).
    """
    total = par.system.rhs_float[0]
    H = par.H / total
    p = par.base / total + H @ np.asarray(y, dtype=float)
    keep = np.abs(H).max(axis=1, initial=0.0) > 0
    return -H[keep].T @ (np.log(p[keep]) + 1.0)


class GofResult(NamedTuple):
    chi2: float
    p_value: float


def chi_square_gof(observed, fitted, df: int) -> GofResult:
    """Pearson chi-square of counts ``observed`` against probabilities ``fitted``.

    An observed count on a cell the fit sets to zero makes the discrepancy
    infinite (``chi2 = inf``, ``p_value = 0``).
    """
    obs = np.ravel(as_array(observed)).astype(float)
    fit = np.ravel(np.asarray(fitted, dtype=float))
    if obs.shape != fit.shape:
        raise ValueError("observed and fitted tables differ in size")
    n = obs.sum()
    exp = n * fit / fit.sum()
    use = exp >= NEGLIGIBLE_P * n
    if np.any(obs[~use] > 0):
        return GofResult(float("inf"), 0.0)
    stat = float((((obs - exp) ** 2)[use] / exp[use]).sum())
    return GofResult(stat, chi_square_sf(stat, df))


def chi_square_sf(stat: float, df: int) -> float:
    if df <= 0:
        return float("nan")
    return float(_chi2.sf(stat, df))


def threeway_interaction_params(observed, fitted) -> np.ndarray:
    """``n_11k / n - p_11k`` for each stratum of a 2x2xK table."""
    obs = as_array(observed)
    fit = np.asarray(fitted, dtype=float)
    if obs.shape != fit.shape or obs.ndim != 3 or obs.shape[:2] != (2, 2):
        raise ValueError("need matching 2x2xK tables")
    return obs[0, 0] / obs.sum() - fit[0, 0] / fit.sum()
