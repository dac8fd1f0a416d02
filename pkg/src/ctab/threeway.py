"""Three-way interaction in 2x2x2 tables.

Bartlett's criterion is the value ``D`` that, subtracted from the cells
111, 122, 212, 221 and added to the other four, makes the two stratum odds
ratios equal.  Bennett's ``L`` is an additive surrogate built from the
one-way margins and the pairwise LDs; ``taylor_D`` is the first-order
expansion of Bartlett's ``D`` around zero pairwise LD.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .table import as_probabilities

BISECTION_TOL = 1e-14
MAX_BISECTIONS = 400

# cells that lose / gain D, as 0-based index tuples
_MINUS = ((0, 0, 0), (0, 1, 1), (1, 0, 1), (1, 1, 0))
_PLUS = ((0, 0, 1), (0, 1, 0), (1, 0, 0), (1, 1, 1))


class DegenerateTableError(ValueError):
    """The admissible interval for Bartlett's D has zero length."""


def _check(table) -> np.ndarray:
    p = as_probabilities(table)
    if p.shape != (2, 2, 2):
        raise ValueError(f"need a 2x2x2 table, got shape {p.shape}")
    return p


def margins_and_lds(table):
    """``(p1, p2, p3, D12, D13, D23)`` for the first category of each axis."""
    p = _check(table)
    p1, p2, p3 = p[0].sum(), p[:, 0].sum(), p[:, :, 0].sum()
    d12 = p[0, 0].sum() - p1 * p2
    d13 = p[0, :, 0].sum() - p1 * p3
    d23 = p[:, 0, 0].sum() - p2 * p3
    return p1, p2, p3, d12, d13, d23


def admissible_interval(table) -> tuple[float, float]:
    """Range of D that keeps every adjusted cell nonnegative."""
    p = _check(table)
    lo = -min(p[c] for c in _PLUS)
    hi = min(p[c] for c in _MINUS)
    return float(lo), float(hi)


def bartlett_gap(table, D: float) -> float:
    """Left minus right side of Bartlett's product equation at ``D``."""
    p = _check(table)
    left = np.prod([p[c] - D for c in _MINUS])
    right = np.prod([p[c] + D for c in _PLUS])
    return float(left - right)


def bartlett_D(table) -> float:
    """Bartlett's three-way interaction, by bisection on the admissible interval.

    The gap function is strictly decreasing there, so the bracket always
    holds exactly one root.
    """
    p = _check(table)
    lo, hi = admissible_interval(p)
    if hi - lo <= 0:
        raise DegenerateTableError("admissible interval for D is a single point")
    minus = np.array([p[c] for c in _MINUS])
    plus = np.array([p[c] for c in _PLUS])
    g = lambda D: np.prod(minus - D) - np.prod(plus + D)  # noqa: E731
    for _ in range(MAX_BISECTIONS):
        if hi - lo <= BISECTION_TOL:
            break
        mid = 0.5 * (lo + hi)
        if g(mid) > 0:
            lo = mid
        else:
            hi = mid
    return 0.5 * (lo + hi)


def bennett_L(table) -> float:
    """Additive three-way interaction ``p111 - (p1p2p3 + p1D23 + p2D13 + p3D12)``."""
    p = _check(table)
    p1, p2, p3, d12, d13, d23 = margins_and_lds(p)
    return float(p[0, 0, 0] - (p1 * p2 * p3 + p1 * d23 + p2 * d13 + p3 * d12))


def taylor_p111(p1, p2, p3, d12, d13, d23) -> float:
    """First-order expansion of the no-interaction value of cell 111."""
    return (64 * (1 - 2 * p1) * (1 - 2 * p2) * (1 - 2 * p3) * d12 * d13 * d23
            + 4 * (1 - 2 * p1) * d12 * d13
            + 4 * (1 - 2 * p2) * d12 * d23
            + 4 * (1 - 2 * p3) * d13 * d23
            + p3 * d12 + p2 * d13 + p1 * d23
            + p1 * p2 * p3)


def taylor_D(table) -> float:
    p = _check(table)
    return float(p[0, 0, 0] - taylor_p111(*margins_and_lds(p)))


@dataclass(frozen=True)
class ThreewayMeasures:
    bartlett_D: float
    bennett_L: float
    taylor_D: float
    admissible_interval: tuple[float, float]

    def to_json(self) -> dict:
        return {
            "bartlett_D": self.bartlett_D,
            "bennett_L": self.bennett_L,
            "taylor_D": self.taylor_D,
            "admissible_interval": list(self.admissible_interval),
        }


def threeway_measures(table) -> ThreewayMeasures:
    p = _check(table)
    return ThreewayMeasures(bartlett_D(p), bennett_L(p), taylor_D(p), admissible_interval(p))
