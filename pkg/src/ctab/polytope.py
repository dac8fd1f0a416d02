"""The polytope of nonnegative tables sharing zero-, one- and two-way
marginal totals.

The constraint matrix keeps, per axis, only categories ``1..I-1`` (the last
category is implied by the grand total), so it has full row rank by
construction.  Solving it leaves ``f = d - r`` free cells; every other cell
becomes an affine expression in those.  Per-cell LP bounds then expose the
cells the marginals pin down completely.

Integer marginals are handled in exact rational arithmetic, so a cell is
reported fixed only when its lower and upper LP bounds are identical.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from fractions import Fraction
from typing import Mapping, Sequence

import numpy as np

from . import lp
from .table import InconsistentMarginalsError, MarginalSet, TableShape, as_array, unflatten_index

FLOAT_PIVOT_TOL = 1e-10
FLOAT_FIXED_TOL = 1e-9


def constraint_rank(dims: Sequence[int]) -> int:
    """Number of independent zero/one/two-way restrictions."""
    k = [i - 1 for i in dims]
    one = sum(k)
    two = sum(k[i] * sum(k[i + 1:]) for i in range(len(k) - 1))
    return 1 + one + two


def free_count(dims: Sequence[int]) -> int:
    return int(np.prod(dims)) - constraint_rank(dims)


def free_count_uniform(c: int, I: int) -> int:
    """Free-cell count for ``c >= 3`` variables with ``I`` categories each."""
    if c < 3:
        raise ValueError("closed form holds for c >= 3")
    return I ** c - c * (I - 1) * (c * (I - 1) - I + 3) // 2 - 1


def _is_integral(values) -> bool:
    arr = np.asarray(values, dtype=float)
    return bool(np.all(np.isfinite(arr)) and np.all(arr == np.round(arr)))


@dataclass(frozen=True, eq=False)
class ConstraintSystem:
    """Rows of ``A x = m`` over the flat cells of a table.

    ``labels`` name each row: ``("total",)``, ``("one", axis, cat)`` or
    ``("two", axis_i, cat_i, axis_j, cat_j)`` (all 1-based), or a free-form
    tuple for rows added by callers.
    """

    dims: tuple[int, ...]
    A: np.ndarray
    rhs: tuple
    labels: tuple
    exact: bool

    @property
    def d(self) -> int:
        return int(np.prod(self.dims))

    @property
    def rhs_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.rhs])

    def with_rows(self, rows, values, labels) -> "ConstraintSystem":
        rows = np.atleast_2d(np.asarray(rows, dtype=float))
        exact = self.exact and _is_integral(rows) and all(isinstance(v, (int, Fraction)) for v in values)
        rhs = tuple(self.rhs) + tuple(values)
        if not exact:
            rhs = tuple(float(v) for v in rhs)
        return ConstraintSystem(self.dims, np.vstack([self.A, rows]), rhs, tuple(self.labels) + tuple(labels), exact)


def cell_indicator(dims: Sequence[int], fixed: Mapping[int, int]) -> np.ndarray:
    """0/1 row selecting cells whose 0-based axis ``a`` equals ``fixed[a]``."""
    mask = np.ones(dims, dtype=bool)
    for axis, cat in fixed.items():
        sl = [slice(None)] * len(dims)
        sl[axis] = np.arange(dims[axis]) != cat
        mask[tuple(sl)] = False
    return mask.ravel().astype(float)


def build_constraints(shape: TableShape | Sequence[int], margins: MarginalSet, exact: bool | None = None) -> ConstraintSystem:
    """Constraint rows: grand total, one-way totals, then two-way totals.

    Only the two-way pairs present in ``margins.two_way`` are included.
    ``exact`` defaults to True when every supplied total is an integer.
    """
    dims = shape.dims if isinstance(shape, TableShape) else TableShape(shape).dims
    if margins.dims != dims:
        raise InconsistentMarginalsError(f"marginals are for dims {margins.dims}, table has {dims}")
    margins.check_consistent()
    values = [margins.grand_total, *itertools.chain.from_iterable(margins.one_way)]
    values += [v for mat in margins.two_way.values() for v in np.ravel(mat)]
    if exact is None:
        exact = _is_integral(values)
    conv = (lambda v: Fraction(int(round(float(v))))) if exact else float

    rows, rhs, labels = [np.ones(int(np.prod(dims)))], [conv(margins.grand_total)], [("total",)]
    for a, size in enumerate(dims):
        for k in range(size - 1):
            rows.append(cell_indicator(dims, {a: k}))
            rhs.append(conv(margins.one_way[a][k]))
            labels.append(("one", a + 1, k + 1))
    for (i, j) in sorted(margins.two_way):
        mat = np.asarray(margins.two_way[(i, j)])
        for ki in range(dims[i - 1] - 1):
            for kj in range(dims[j - 1] - 1):
                rows.append(cell_indicator(dims, {i - 1: ki, j - 1: kj}))
                rhs.append(conv(mat[ki, kj]))
                labels.append(("two", i, ki + 1, j, kj + 1))
    return ConstraintSystem(dims, np.array(rows), tuple(rhs), tuple(labels), bool(exact))


def constraints_from_table(table, exact: bool | None = None) -> ConstraintSystem:
    arr = as_array(table)
    return build_constraints(arr.shape, MarginalSet.from_table(arr), exact=exact)


@dataclass(frozen=True, eq=False)
class AffineParametrization:
    """All cells as ``base + H @ y`` with ``y`` the values of the free cells.

    ``free`` and ``fixed`` use 0-based flat cell indices.  In exact mode
    ``base_exact`` / ``H_exact`` hold the rational coefficients and
    ``base`` / ``H`` their float images.
    """

    system: ConstraintSystem
    free: tuple[int, ...]
    base: np.ndarray
    H: np.ndarray
    fixed: Mapping[int, object] = field(default_factory=dict)
    base_exact: tuple | None = None
    H_exact: tuple | None = None

    @property
    def dims(self) -> tuple[int, ...]:
        return self.system.dims

    @property
    def exact(self) -> bool:
        return self.system.exact

    @property
    def f(self) -> int:
        return len(self.free)

    @property
    def d(self) -> int:
        return self.system.d

    @property
    def rank(self) -> int:
        return self.d - self.f - len(self.fixed)

    def free_cells(self) -> list[tuple[int, ...]]:
        """Free cells as 1-based multi-indices."""
        return [unflatten_index(self.dims, j + 1) for j in self.free]

    def evaluate(self, y) -> np.ndarray:
        return self.base + self.H @ np.asarray(y, dtype=float)

    def evaluate_exact(self, y) -> list[Fraction]:
        y = [Fraction(v) for v in y]
        return [b + sum((h * v for h, v in zip(row, y) if h != 0), Fraction(0))
                for b, row in zip(self.base_exact, self.H_exact)]

    def free_values(self, cells) -> np.ndarray:
        """Free-variable coordinates of a full table."""
        return np.asarray(cells, dtype=float).ravel()[list(self.free)]

    def cell_expression(self, multi_index: Sequence[int], symbol: str = "n") -> str:
        """Human-readable affine expression of one cell (1-based index)."""
        j = int(np.ravel_multi_index([i - 1 for i in multi_index], self.dims))
        if self.exact:
            const, coefs = self.base_exact[j], self.H_exact[j]
        else:
            const, coefs = self.base[j], self.H[j]
        parts = []
        if const != 0 or not any(c != 0 for c in coefs):
            parts.append(_fmt(const))
        for c, fj in zip(coefs, self.free):
            if c == 0:
                continue
            name = f"{symbol}[{','.join(map(str, unflatten_index(self.dims, fj + 1)))}]"
            mag = abs(c)
            term = name if mag == 1 else f"{_fmt(mag)}*{name}"
            if not parts:
                parts.append(term if c > 0 else f"-{term}")
            else:
                parts.append(("+ " if c > 0 else "- ") + term)
        return " ".join(parts)


def _fmt(v) -> str:
    if isinstance(v, Fraction):
        return str(v.numerator) if v.denominator == 1 else str(v)
    return f"{float(v):.12g}"


def _rref_reverse(A, rhs, cols: list[int], exact: bool):
    """Row-reduce, choosing pivots from the right-most variable first.

    Returns ``(pivot_rows, R, b)`` where ``pivot_rows`` maps a pivot column to
    its row.  Processing right to left leaves the earliest cells free.
    """
    m = len(rhs)
    if exact:
        R = [[Fraction(int(A[i][c])) if float(A[i][c]).is_integer() else Fraction(A[i][c]) for c in cols] for i in range(m)]
        b = list(rhs)
    else:
        R = np.array(A, dtype=float)[:, cols].copy()
        b = np.array(rhs, dtype=float).copy()
    pivots: dict[int, int] = {}
    row = 0
    n = len(cols)
    for jc in range(n - 1, -1, -1):
        if row >= m:
            break
        if exact:
            piv = next((i for i in range(row, m) if R[i][jc] != 0), None)
        else:
            cand = np.abs(R[row:, jc])
            piv = row + int(np.argmax(cand)) if cand.size and cand.max() > FLOAT_PIVOT_TOL else None
        if piv is None:
            continue
        if exact:
            R[row], R[piv] = R[piv], R[row]
            b[row], b[piv] = b[piv], b[row]
            pv = R[row][jc]
            if pv != 1:
                R[row] = [v / pv for v in R[row]]
                b[row] = b[row] / pv
            nz = [k for k, v in enumerate(R[row]) if v != 0]
            for i in range(m):
                if i != row and R[i][jc] != 0:
                    f = R[i][jc]
                    for k in nz:
                        R[i][k] -= f * R[row][k]
                    b[i] -= f * b[row]
        else:
            R[[row, piv]] = R[[piv, row]]
            b[[row, piv]] = b[[piv, row]]
            pv = R[row, jc]
            R[row] /= pv
            b[row] /= pv
            f = R[:, jc].copy()
            f[row] = 0.0
            R -= np.outer(f, R[row])
            b -= f * b[row]
            R[np.abs(R) < 1e-14] = 0.0
        pivots[jc] = row
        row += 1
    # consistency of the leftover rows
    scale = max(1.0, max((abs(float(v)) for v in rhs), default=1.0))
    for i in range(row, m):
        resid = b[i]
        if (resid != 0) if exact else (abs(resid) > 1e-8 * scale):
            raise InconsistentMarginalsError("constraint system has no solution")
    return pivots, R, b


def solve_affine(cs: ConstraintSystem, fixed: Mapping[int, object] | None = None) -> AffineParametrization:
    """Solve ``A x = m`` for as many cells as possible.

    ``fixed`` maps 0-based flat cells to known values; those are substituted
    before solving and stay constant in the result.
    """
    fixed = dict(fixed or {})
    d = cs.d
    exact = cs.exact
    conv = (lambda v: Fraction(v)) if exact else float
    fixed = {int(k): conv(v) for k, v in fixed.items()}
    var = [j for j in range(d) if j not in fixed]
    rhs = list(cs.rhs)
    if fixed:
        for i in range(len(rhs)):
            for j, v in fixed.items():
                a = cs.A[i, j]
                if a != 0:
                    rhs[i] = rhs[i] - (int(a) if exact else float(a)) * v
    pivots, R, b = _rref_reverse(cs.A, rhs, var, exact)
    free_local = [k for k in range(len(var)) if k not in pivots]
    free = tuple(var[k] for k in free_local)
    f = len(free)
    zero = Fraction(0) if exact else 0.0
    base = [zero] * d
    H = [[zero] * f for _ in range(d)]
    for j, v in fixed.items():
        base[j] = v
    for pos, k in enumerate(free_local):
        H[var[k]][pos] = Fraction(1) if exact else 1.0
    for k, r in pivots.items():
        j = var[k]
        base[j] = b[r]
        for pos, kf in enumerate(free_local):
            coef = R[r][kf]
            if coef != 0:
                H[j][pos] = -coef
    if exact:
        base_f = np.array([float(v) for v in base])
        H_f = np.array([[float(v) for v in row] for row in H]).reshape(d, f)
        return AffineParametrization(cs, free, base_f, H_f, fixed,
                                     tuple(base), tuple(tuple(row) for row in H))
    return AffineParametrization(cs, free, np.array(base, dtype=float), np.array(H, dtype=float).reshape(d, f), fixed)


def parametrize_table(table, exact: bool | None = None) -> AffineParametrization:
    """Affine parametrization of all tables sharing ``table``'s margins."""
    return solve_affine(constraints_from_table(table, exact=exact))


# ---------------------------------------------------------------------------
# LP over the parametrized region
# ---------------------------------------------------------------------------

def _standard_form(par: AffineParametrization, exact: bool):
    """Equality rows over the non-fixed cells: ``x_i - H_i y = base_i``.

    Free cells appear only through ``y``; pinned cells get one row each.
    """
    var = [j for j in range(par.d) if j not in par.fixed]
    col = {j: k for k, j in enumerate(var)}
    free_cols = [col[j] for j in par.free]
    free_set = set(par.free)
    rows, rhs, pinned = [], [], []
    for j in var:
        if j in free_set:
            continue
        if exact:
            row = [Fraction(0)] * len(var)
            row[col[j]] = Fraction(1)
            for pos, c in enumerate(par.H_exact[j]):
                if c != 0:
                    row[free_cols[pos]] = -c
            rows.append(row)
            rhs.append(par.base_exact[j])
        else:
            pinned.append(j)
    if not exact:
        A = np.zeros((len(pinned), len(var)))
        if pinned:
            A[np.arange(len(pinned)), [col[j] for j in pinned]] = 1.0
            A[:, free_cols] = -par.H[pinned]
        return var, A, par.base[pinned]
    return var, rows, rhs


@dataclass(frozen=True, eq=False)
class CellBounds:
    """Per-cell LP bounds; ``omega`` lists fixed cells (0-based flat)."""

    lower: tuple
    upper: tuple
    omega: frozenset
    exact: bool
    dims: tuple[int, ...]

    @property
    def lower_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.lower])

    @property
    def upper_float(self) -> np.ndarray:
        return np.array([float(v) for v in self.upper])

    def fixed_cells(self) -> list[tuple[tuple[int, ...], object]]:
        """``[(1-based index, value), ...]`` in canonical order."""
        return [(unflatten_index(self.dims, j + 1), self.lower[j]) for j in sorted(self.omega)]

    def fixed_zero_count(self) -> int:
        return sum(1 for j in self.omega if self.lower[j] == 0)


def cell_bounds(par: AffineParametrization, exact: bool | None = None) -> CellBounds:
    """Minimum and maximum of every cell over the parametrized region."""
    exact = par.exact if exact is None else exact
    if exact and not par.exact:
        raise ValueError("exact bounds need an exact parametrization")
    d = par.d
    lower: list = [None] * d
    upper: list = [None] * d
    for j, v in par.fixed.items():
        lower[j] = upper[j] = v
    var, rows, rhs = _standard_form(par, exact)
    n = len(var)
    if n == 0:
        pass
    elif exact:
        if not rows:
            rows, rhs = [[Fraction(0)] * n], [Fraction(0)]
        solver = lp.ExactSimplex(rows, rhs)
        if not solver.feasible:
            raise lp.InfeasibleError("no nonnegative table has these marginals")
        seen_zero = [False] * n
        def note(x):
            for k, v in enumerate(x):
                if v == 0:
                    seen_zero[k] = True
        note(solver.point())
        for k in range(n):
            c = [0] * n
            c[k] = 1
            status, x, val = solver.optimize(c, maximize=True)
            if status != "optimal":
                raise RuntimeError(f"LP for cell {var[k]} ended with status {status}")
            upper[var[k]] = val
            note(x)
        for k in range(n):
            if seen_zero[k]:
                lower[var[k]] = Fraction(0)
                continue
            c = [0] * n
            c[k] = 1
            status, x, val = solver.optimize(c)
            if status != "optimal":
                raise RuntimeError(f"LP for cell {var[k]} ended with status {status}")
            lower[var[k]] = val
            note(x)
    else:
        A, b = (rows, rhs) if len(rows) else (np.zeros((1, n)), np.zeros(1))
        eye = np.eye(n)
        res_max = lp.solve_many(eye, A, b, maximize=True)
        res_min = lp.solve_many(eye, A, b)
        for k in range(n):
            for res in (res_max[k], res_min[k]):
                if res.status == "infeasible":
                    raise lp.InfeasibleError("no nonnegative table has these marginals")
                if not res.ok:
                    raise RuntimeError(f"LP for cell {var[k]} ended with status {res.status}")
            upper[var[k]] = float(res_max[k].value)
            lower[var[k]] = max(0.0, float(res_min[k].value))
    if exact:
        omega = frozenset(j for j in range(d) if lower[j] == upper[j])
    else:
        scale = max(1.0, float(np.max(np.abs(par.base))) if d else 1.0)
        omega = frozenset(j for j in range(d) if abs(float(upper[j]) - float(lower[j])) <= FLOAT_FIXED_TOL * scale)
    return CellBounds(tuple(lower), tuple(upper), omega, exact, par.dims)


def refine(par: AffineParametrization, bounds: CellBounds | None = None, max_rounds: int = 100) -> AffineParametrization:
    """Substitute fixed cells and re-solve until no new cell becomes fixed."""
    bounds = cell_bounds(par) if bounds is None else bounds
    for _ in range(max_rounds):
        new = {j: bounds.lower[j] for j in bounds.omega if j not in par.fixed}
        if not new:
            return par
        merged = dict(par.fixed)
        merged.update(new)
        par = solve_affine(par.system, merged)
        bounds = cell_bounds(par)
    return par


@dataclass(frozen=True)
class FixedCellReport:
    parametrization: AffineParametrization
    bounds: CellBounds
    refined: AffineParametrization


def fixed_cells(table, exact: bool | None = None) -> FixedCellReport:
    """Bounds, fixed set and refined parametrization for an observed table."""
    par = parametrize_table(table, exact=exact)
    bounds = cell_bounds(par)
    return FixedCellReport(par, bounds, refine(par, bounds))


def linear_functional_bounds(par: AffineParametrization, weights, exact: bool | None = None):
    """``(lo, hi, argmin_cells, argmax_cells)`` of ``weights @ cells``."""
    exact = par.exact if exact is None else exact
    w = list(np.ravel(weights)) if not exact else [Fraction(v) for v in np.ravel(weights)]
    if len(w) != par.d:
        raise ValueError("one weight per cell")
    var, rows, rhs = _standard_form(par, exact)
    const = sum((w[j] * par.fixed[j] for j in par.fixed), Fraction(0) if exact else 0.0)
    n = len(var)
    if n == 0:
        cells = par.base_exact if exact else par.base
        return const, const, cells, cells
    c = [w[j] for j in var]
    if exact:
        if not rows:
            rows, rhs = [[Fraction(0)] * n], [Fraction(0)]
        solver = lp.ExactSimplex(rows, rhs)
        if not solver.feasible:
            raise lp.InfeasibleError("region is empty")
        s1, x_lo, lo = solver.optimize(c)
        s2, x_hi, hi = solver.optimize(c, maximize=True)
        full = lambda x: _assemble(par, var, x, Fraction(0))  # noqa: E731
        return lo + const, hi + const, full(x_lo), full(x_hi)
    A, b = (rows, rhs) if len(rows) else (np.zeros((1, n)), np.zeros(1))
    r_lo = lp.solve(np.array(c, dtype=float), A, b)
    r_hi = lp.solve(np.array(c, dtype=float), A, b, maximize=True)
    if r_lo.status == "infeasible":
        raise lp.InfeasibleError("region is empty")
    return (r_lo.value + const, r_hi.value + const,
            np.array(_assemble(par, var, r_lo.x, 0.0)), np.array(_assemble(par, var, r_hi.x, 0.0)))


def _assemble(par, var, x, zero):
    out = [zero] * par.d
    for j, v in par.fixed.items():
        out[j] = v
    for k, j in enumerate(var):
        out[j] = x[k]
    return out


def pin_free(par: AffineParametrization, position: int, value) -> AffineParametrization:
    """Fix the ``position``-th free variable at ``value`` without re-solving."""
    j = par.free[position]
    keep = [k for k in range(par.f) if k != position]
    fixed = dict(par.fixed)
    if par.exact:
        value = Fraction(value)
        base_e = tuple(b + row[position] * value for b, row in zip(par.base_exact, par.H_exact))
        H_e = tuple(tuple(row[k] for k in keep) for row in par.H_exact)
        fixed[j] = value
        return AffineParametrization(par.system, tuple(par.free[k] for k in keep),
                                     np.array([float(v) for v in base_e]),
                                     np.array([[float(v) for v in row] for row in H_e]).reshape(par.d, len(keep)),
                                     fixed, base_e, H_e)
    value = float(value)
    fixed[j] = value
    base = par.base + par.H[:, position] * value
    return AffineParametrization(par.system, tuple(par.free[k] for k in keep), base, par.H[:, keep], fixed)
