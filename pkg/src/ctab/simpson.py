"""Exact decomposition of the gap between a two-way association and the
stratum-weighted partial associations (Simpson's paradox).

For categories ``i`` of X, ``j`` of Y and a stratifying variable Z::

    D(X_i, Y_j) - sum_k p(Z_k) D(X_i, Y_j | Z_k) = sum_k D(X_i, Z_k) D(Y_j, Z_k) / p(Z_k)

The identity needs no assumption about three-way interaction.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .measures import ld_conditional, ld_pair, pearson_phi
from .table import DegenerateStratumError, as_probabilities, marginal

VANISHING_LD = 1e-12


class UndefinedRatioError(ValueError):
    """Relative difference requested for a vanishing two-way LD."""


@dataclass(frozen=True)
class DecompositionReport:
    two_way_ld: float
    weighted_partial_ld: float
    partial_lds: np.ndarray
    stratum_masses: np.ndarray
    per_stratum_summands: np.ndarray
    difference: float
    two_strata_difference: float | None = None
    relative_ratio: float | None = None

    def to_json(self) -> dict:
        return {
            "two_way_ld": self.two_way_ld,
            "weighted_partial_ld": self.weighted_partial_ld,
            "partial_lds": self.partial_lds.tolist(),
            "stratum_masses": self.stratum_masses.tolist(),
            "per_stratum_summands": self.per_stratum_summands.tolist(),
            "difference": self.difference,
            "summand_total": float(self.per_stratum_summands.sum()),
            "two_strata_difference": self.two_strata_difference,
            "relative_ratio": self.relative_ratio,
        }


def _strata(p: np.ndarray, strat_axis: int) -> np.ndarray:
    masses = marginal(p, [strat_axis])
    if np.any(masses <= 0):
        k = int(np.argmin(masses)) + 1
        raise DegenerateStratumError(f"stratum {k} of axis {strat_axis} has zero mass")
    return masses


def decompose(table, axis_a: int, cat_a: int, axis_b: int, cat_b: int, strat_axis: int) -> DecompositionReport:
    """Two-way LD, weighted partial LD and the per-stratum gap terms."""
    if len({axis_a, axis_b, strat_axis}) != 3:
        raise ValueError("the three axes must be distinct")
    p = as_probabilities(table)
    masses = _strata(p, strat_axis)
    K = len(masses)
    d_ab = ld_pair(p, axis_a, cat_a, axis_b, cat_b)
    partial = np.array([ld_conditional(p, axis_a, cat_a, axis_b, cat_b, strat_axis, k) for k in range(1, K + 1)])
    d_az = np.array([ld_pair(p, axis_a, cat_a, strat_axis, k) for k in range(1, K + 1)])
    d_bz = np.array([ld_pair(p, axis_b, cat_b, strat_axis, k) for k in range(1, K + 1)])
    summands = d_az * d_bz / masses
    weighted = float(masses @ partial)
    two = None
    if K == 2:
        two = float(d_az[0] * d_bz[0] / (masses[0] * (1 - masses[0])))
    rel = None
    if abs(d_ab) > VANISHING_LD:
        rel = (d_ab - weighted) / d_ab
    return DecompositionReport(
        two_way_ld=d_ab,
        weighted_partial_ld=weighted,
        partial_lds=partial,
        stratum_masses=masses,
        per_stratum_summands=summands,
        difference=d_ab - weighted,
        two_strata_difference=two,
        relative_ratio=rel,
    )


def relative_difference(table, axis_a: int, cat_a: int, axis_b: int, cat_b: int, strat_axis: int) -> float:
    """``1 - Dbar / D`` written through phi coefficients.

    Evaluates ``sum_k (1 - p_k) phi(A_i, Z_k) phi(B_j, Z_k) / phi(A_i, B_j)``.
    """
    p = as_probabilities(table)
    masses = _strata(p, strat_axis)
    d_ab = ld_pair(p, axis_a, cat_a, axis_b, cat_b)
    if abs(d_ab) <= VANISHING_LD:
        raise UndefinedRatioError("two-way LD vanishes; the relative difference is undefined")
    rho_ab = pearson_phi(p, axis_a, cat_a, axis_b, cat_b)
    total = 0.0
    for k, pk in enumerate(masses, start=1):
        if pk >= 1.0:
            continue
        r_a = pearson_phi(p, axis_a, cat_a, strat_axis, k)
        r_b = pearson_phi(p, axis_b, cat_b, strat_axis, k)
        total += (1 - pk) * r_a * r_b
    return total / rho_ab


@dataclass(frozen=True)
class StratumRow:
    stratum: int
    ld_first_stratum: float    # D(axis1 cat 1, stratum k)
    ld_second_stratum: float   # D(axis2 cat 1, stratum k)
    mass: float
    partial_ld: float
    partial_phi: float


def berkeley_report(table) -> list[StratumRow]:
    """Per-stratum LD summary for a 2x2xK table (variables 1, 2 vs. strata of 3)."""
    p = as_probabilities(table)
    if p.ndim != 3 or p.shape[:2] != (2, 2):
        raise ValueError("berkeley_report needs a 2x2xK table")
    rows = []
    for k in range(1, p.shape[2] + 1):
        mass = float(p[:, :, k - 1].sum())
        rows.append(StratumRow(
            stratum=k,
            ld_first_stratum=ld_pair(p, 1, 1, 3, k),
            ld_second_stratum=ld_pair(p, 2, 1, 3, k),
            mass=mass,
            partial_ld=ld_conditional(p, 1, 1, 2, 1, 3, k),
            partial_phi=pearson_phi(p[:, :, k - 1], 1, 1, 2, 1),
        ))
    return rows
