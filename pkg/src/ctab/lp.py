"""Linear programming over ``A x = b, x >= 0``.

Two engines share the same two-phase, Bland's-rule simplex:

* :class:`ExactSimplex` works on :class:`fractions.Fraction` and is used
  whenever fixed-cell decisions must be exact.
* :func:`solve` / :func:`solve_many` run the compiled float kernel from
  :mod:`ctab._kernels` with a feasibility tolerance of ``1e-9``.
"""

from __future__ import annotations

from dataclasses import dataclass
from fractions import Fraction
from typing import Sequence

import numpy as np

from . import _kernels

FLOAT_TOL = 1e-9
MAX_ITER = 50_000

_STATUS = {
    _kernels.OPTIMAL: "optimal",
    _kernels.INFEASIBLE: "infeasible",
    _kernels.UNBOUNDED: "unbounded",
    _kernels.ITERATION_LIMIT: "iteration_limit",
}


class InfeasibleError(ValueError):
    """The constraint region is empty."""


@dataclass(frozen=True)
class LPResult:
    status: str
    x: np.ndarray
    value: float

    @property
    def ok(self) -> bool:
        return self.status == "optimal"


def solve(c, A_eq, b_eq, maximize: bool = False, tol: float = FLOAT_TOL) -> LPResult:
    """Minimise (or maximise) ``c @ x`` subject to ``A_eq x = b_eq, x >= 0``."""
    return solve_many(np.atleast_2d(c), A_eq, b_eq, maximize=maximize, tol=tol)[0]


def solve_many(C, A_eq, b_eq, maximize: bool = False, tol: float = FLOAT_TOL) -> list[LPResult]:
    """Solve one LP per row of ``C`` over a shared region (single phase 1)."""
    A = np.ascontiguousarray(A_eq, dtype=float)
    b = np.ascontiguousarray(b_eq, dtype=float)
    C = np.ascontiguousarray(np.atleast_2d(C), dtype=float)
    sign = -1.0 if maximize else 1.0
    statuses, X, objs = _kernels.simplex_batch(A, b, sign * C, tol, MAX_ITER)
    return [LPResult(_STATUS[int(s)], X[k], sign * objs[k]) for k, s in enumerate(statuses)]


def is_feasible(A_eq, b_eq, tol: float = FLOAT_TOL) -> bool:
    n = np.shape(A_eq)[1]
    return solve(np.zeros(n), A_eq, b_eq, tol=tol).ok


def _frac(v) -> Fraction:
    if isinstance(v, Fraction):
        return v
    if isinstance(v, (int, np.integer)):
        return Fraction(int(v))
    if isinstance(v, float) and v.is_integer():
        return Fraction(int(v))
    return Fraction(v)


class ExactSimplex:
    """Rational two-phase simplex over ``A x = b, x >= 0``.

    Phase 1 runs once in the constructor; :meth:`optimize` then reuses the
    current feasible basis, so a sequence of objectives over one region
    warm-starts each solve from the previous optimum.
    """

    def __init__(self, A: Sequence[Sequence], b: Sequence, max_iter: int = MAX_ITER):
        rows = [[_frac(v) for v in row] for row in A]
        rhs = [_frac(v) for v in b]
        self.n = len(rows[0]) if rows else 0
        self.max_iter = max_iter
        m, n = len(rows), self.n
        for i in range(m):
            if rhs[i] < 0:
                rows[i] = [-v for v in rows[i]]
                rhs[i] = -rhs[i]
        zero, one = Fraction(0), Fraction(1)
        # tableau rows: n originals, m artificials, rhs
        T = []
        for i in range(m):
            art = [zero] * m
            art[i] = one
            T.append(rows[i] + art + [rhs[i]])
        cost = [-sum((T[i][j] for i in range(m)), zero) for j in range(n)] + [zero] * m
        cost.append(-sum(rhs, zero))
        basis = list(range(n, n + m))
        self._T, self._basis = T, basis
        status = self._iterate(cost, n)
        if status != "optimal" or cost[-1] != 0:
            self.feasible = False
            return
        self.feasible = True
        # pivot artificials out; drop rows that are linearly redundant
        keep = []
        for i in range(m):
            if basis[i] >= n:
                col = next((j for j in range(n) if T[i][j] != 0), None)
                if col is None:
                    continue
                self._pivot(i, col, cost)
            keep.append(i)
        self._T = [T[i][:n] + [T[i][-1]] for i in keep]
        self._basis = [basis[i] for i in keep]

    @property
    def rank(self) -> int:
        return len(self._basis)

    def _pivot(self, row: int, col: int, cost: list) -> None:
        T = self._T
        prow = T[row]
        piv = prow[col]
        if piv != 1:
            prow[:] = [v / piv for v in prow]
        nz = [j for j, v in enumerate(prow) if v != 0]
        for i, r in enumerate(T):
            if i != row:
                f = r[col]
                if f != 0:
                    for j in nz:
                        r[j] -= f * prow[j]
        f = cost[col]
        if f != 0:
            for j in nz:
                cost[j] -= f * prow[j]
        self._basis[row] = col

    def _iterate(self, cost: list, n_allowed: int) -> str:
        T, basis = self._T, self._basis
        for _ in range(self.max_iter):
            col = next((j for j in range(n_allowed) if cost[j] < 0), None)
            if col is None:
                return "optimal"
            row, best = None, None
            for i, r in enumerate(T):
                a = r[col]
                if a > 0:
                    ratio = r[-1] / a
                    if row is None or ratio < best or (ratio == best and basis[i] < basis[row]):
                        row, best = i, ratio
            if row is None:
                return "unbounded"
            self._pivot(row, col, cost)
        return "iteration_limit"

    def optimize(self, c: Sequence, maximize: bool = False) -> tuple[str, list[Fraction], Fraction | None]:
        """Optimise ``c @ x``; returns ``(status, x, value)`` with exact entries."""
        if not self.feasible:
            raise InfeasibleError("constraint region is empty")
        n = self.n
        sign = -1 if maximize else 1
        c = [sign * _frac(v) for v in c]
        cost = list(c) + [Fraction(0)]
        for i, bj in enumerate(self._basis):
            cb = c[bj]
            if cb != 0:
                r = self._T[i]
                for j, v in enumerate(r):
                    if v != 0:
                        cost[j] -= cb * v
        status = self._iterate(cost, n)
        x = self.point()
        value = sum((ci * xi for ci, xi in zip(c, x) if ci != 0), Fraction(0)) * sign
        return status, x, (value if status == "optimal" else None)

    def point(self) -> list[Fraction]:
        """Current basic feasible solution."""
        x = [Fraction(0)] * self.n
        for i, bj in enumerate(self._basis):
            x[bj] = self._T[i][-1]
        return x
