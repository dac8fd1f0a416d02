"""Multi-way contingency tables.

Cells are stored as a C-ordered numpy array, so the flat order has the last
axis varying fastest.  Axis and category labels in the public API are
1-based, matching the usual ``n_{i,j,k}`` notation; arrays are 0-based
internally.
"""

from __future__ import annotations

import itertools
import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

TOTAL_RTOL = 1e-12
PROB_TOL = 1e-10


class DegenerateStratumError(ValueError):
    """A stratum (slice) that has to be conditioned on carries no mass."""


class InconsistentMarginalsError(ValueError):
    """Marginal totals that cannot come from a single table."""


@dataclass(frozen=True)
class TableShape:
    dims: tuple[int, ...]

    def __post_init__(self):
        dims = tuple(int(i) for i in self.dims)
        if len(dims) < 1:
            raise ValueError("a table needs at least one variable")
        if any(i < 2 for i in dims):
            raise ValueError(f"every variable needs at least 2 categories, got {dims}")
        object.__setattr__(self, "dims", dims)

    @property
    def c(self) -> int:
        return len(self.dims)

    @property
    def d(self) -> int:
        return int(np.prod(self.dims))


def flatten_index(shape: TableShape | Sequence[int], multi_index: Sequence[int]) -> int:
    """1-based flat position of a 1-based multi-index (last axis fastest)."""
    dims = shape.dims if isinstance(shape, TableShape) else tuple(shape)
    if len(multi_index) != len(dims):
        raise IndexError(f"expected {len(dims)} indices, got {len(multi_index)}")
    j = 0
    for i_m, size in zip(multi_index, dims):
        if not 1 <= i_m <= size:
            raise IndexError(f"category {i_m} out of range 1..{size}")
        j = j * size + (i_m - 1)
    return j + 1


def unflatten_index(shape: TableShape | Sequence[int], j: int) -> tuple[int, ...]:
    """Inverse of :func:`flatten_index`."""
    dims = shape.dims if isinstance(shape, TableShape) else tuple(shape)
    d = int(np.prod(dims))
    if not 1 <= j <= d:
        raise IndexError(f"flat index {j} out of range 1..{d}")
    rest = j - 1
    out = []
    for size in reversed(dims):
        rest, r = divmod(rest, size)
        out.append(r + 1)
    return tuple(reversed(out))


@dataclass(frozen=True, eq=False)
class ContingencyTable:
    """Dense c-way table of nonnegative counts or probabilities.

    ``kind`` is ``"counts"`` or ``"probabilities"``.  The cell array is made
    read-only on construction.
    """

    cells: np.ndarray
    kind: str = "counts"

    def __post_init__(self):
        arr = np.array(self.cells, dtype=float)
        if arr.ndim < 1:
            raise ValueError("cells must have at least one axis")
        TableShape(arr.shape)
        if not np.all(np.isfinite(arr)):
            raise ValueError("cells must be finite")
        if np.any(arr < 0):
            raise ValueError("cells must be nonnegative")
        if self.kind not in ("counts", "probabilities"):
            raise ValueError(f"kind must be 'counts' or 'probabilities', got {self.kind!r}")
        if self.kind == "probabilities" and abs(arr.sum() - 1.0) > PROB_TOL:
            raise ValueError(f"probabilities sum to {arr.sum()!r}, not 1")
        arr.setflags(write=False)
        object.__setattr__(self, "cells", arr)

    @classmethod
    def from_flat(cls, dims: Sequence[int], cells: Sequence[float], kind: str = "counts") -> "ContingencyTable":
        dims = TableShape(dims).dims
        flat = np.asarray(cells, dtype=float)
        if flat.size != int(np.prod(dims)):
            raise ValueError(f"{flat.size} cells given for dims {list(dims)}")
        return cls(flat.reshape(dims), kind)

    @property
    def shape(self) -> TableShape:
        return TableShape(self.cells.shape)

    @property
    def dims(self) -> tuple[int, ...]:
        return self.cells.shape

    @property
    def flat(self) -> np.ndarray:
        return self.cells.ravel()

    @property
    def total(self) -> float:
        return float(self.cells.sum())

    def probabilities(self) -> "ContingencyTable":
        if self.kind == "probabilities":
            return self
        n = self.total
        if n <= 0:
            raise ValueError("cannot normalise an empty table")
        return ContingencyTable(self.cells / n, "probabilities")

    def to_json(self) -> dict:
        return {"dims": list(self.dims), "cells": self.flat.tolist(), "kind": self.kind}

    @classmethod
    def from_json(cls, obj: dict) -> "ContingencyTable":
        for key in ("dims", "cells"):
            if key not in obj:
                raise ValueError(f"table JSON lacks field {key!r}")
        return cls.from_flat(obj["dims"], obj["cells"], obj.get("kind", "counts"))

    def __repr__(self):
        return f"ContingencyTable(dims={list(self.dims)}, kind={self.kind!r}, total={self.total:g})"


def as_array(table) -> np.ndarray:
    if isinstance(table, ContingencyTable):
        return table.cells
    return np.asarray(table, dtype=float)


def as_probabilities(table) -> np.ndarray:
    """Cells of ``table`` normalised to sum to one."""
    arr = as_array(table)
    total = arr.sum()
    if total <= 0:
        raise ValueError("table has no mass")
    return arr / total


def load_table(path) -> ContingencyTable:
    with open(path) as fh:
        return ContingencyTable.from_json(json.load(fh))


def _axes0(axes: Iterable[int], c: int) -> tuple[int, ...]:
    out = []
    for a in axes:
        if not 1 <= a <= c:
            raise IndexError(f"axis {a} out of range 1..{c}")
        out.append(a - 1)
    return tuple(out)


def marginal(table, kept_axes: Iterable[int]) -> np.ndarray:
    """Sum over every axis not in ``kept_axes`` (1-based).

    The result keeps the surviving axes in ascending order.
    """
    arr = as_array(table)
    kept = sorted(set(_axes0(kept_axes, arr.ndim)))
    if not kept:
        raise ValueError("kept_axes must be nonempty")
    dropped = tuple(a for a in range(arr.ndim) if a not in kept)
    return arr.sum(axis=dropped) if dropped else arr.copy()


def condition(table, axis: int, category: int) -> np.ndarray:
    """Conditional table given ``axis == category``; sums to one."""
    arr = as_array(table)
    (ax,) = _axes0([axis], arr.ndim)
    if not 1 <= category <= arr.shape[ax]:
        raise IndexError(f"category {category} out of range for axis {axis}")
    sl = np.take(arr, category - 1, axis=ax)
    mass = sl.sum()
    if mass <= 0:
        raise DegenerateStratumError(f"stratum {category} of axis {axis} has zero mass")
    return sl / mass


def collapse_pair(table, axis_a: int, cat_a: int, axis_b: int, cat_b: int) -> np.ndarray:
    """2x2 table of (category vs. rest) on the ``(axis_a, axis_b)`` marginal."""
    if axis_a == axis_b:
        raise ValueError("axis_a and axis_b must differ")
    p = as_probabilities(table)
    two = marginal(p, [axis_a, axis_b])
    if axis_a > axis_b:
        two = two.T
    i, j = cat_a - 1, cat_b - 1
    if not (0 <= i < two.shape[0] and 0 <= j < two.shape[1]):
        raise IndexError("category out of range")
    pij = two[i, j]
    pi = two[i].sum()
    pj = two[:, j].sum()
    return np.array([[pij, pi - pij], [pj - pij, 1.0 - pi - pj + pij]])


@dataclass(frozen=True, eq=False)
class MarginalSet:
    """Zero-, one- and two-way marginal totals.

    ``two_way`` maps 1-based axis pairs ``(i, j)`` with ``i < j`` to the
    ``I_i x I_j`` matrices.  Pairs may be omitted (e.g. for constraint sets
    that only fix one-way totals).
    """

    grand_total: float
    one_way: tuple[np.ndarray, ...]
    two_way: dict = field(default_factory=dict)

    @classmethod
    def from_table(cls, table, pairs: Iterable[tuple[int, int]] | None = None) -> "MarginalSet":
        arr = as_array(table)
        c = arr.ndim
        one = tuple(marginal(arr, [a]) for a in range(1, c + 1))
        if pairs is None:
            pairs = itertools.combinations(range(1, c + 1), 2)
        two = {tuple(sorted(pr)): marginal(arr, pr) for pr in pairs}
        return cls(float(arr.sum()), one, two)

    @property
    def dims(self) -> tuple[int, ...]:
        return tuple(len(v) for v in self.one_way)

    def scaled(self, factor: float) -> "MarginalSet":
        return MarginalSet(
            self.grand_total * factor,
            tuple(v * factor for v in self.one_way),
            {k: v * factor for k, v in self.two_way.items()},
        )

    def check_consistent(self, tol: float = 1e-9) -> None:
        """Raise :class:`InconsistentMarginalsError` if the totals disagree."""
        scale = max(abs(self.grand_total), 1.0)
        for a, v in enumerate(self.one_way, start=1):
            if np.any(np.asarray(v) < -tol * scale):
                raise InconsistentMarginalsError(f"negative one-way total on axis {a}")
            if abs(np.sum(v) - self.grand_total) > tol * scale:
                raise InconsistentMarginalsError(f"one-way totals of axis {a} sum to {np.sum(v)!r}, not {self.grand_total!r}")
        for (i, j), mat in self.two_way.items():
            mat = np.asarray(mat)
            if mat.shape != (self.dims[i - 1], self.dims[j - 1]):
                raise InconsistentMarginalsError(f"two-way totals for pair ({i},{j}) have shape {mat.shape}")
            if np.any(mat < -tol * scale):
                raise InconsistentMarginalsError(f"negative two-way total for pair ({i},{j})")
            if np.max(np.abs(mat.sum(axis=1) - self.one_way[i - 1])) > tol * scale:
                raise InconsistentMarginalsError(f"rows of pair ({i},{j}) disagree with axis {i}")
            if np.max(np.abs(mat.sum(axis=0) - self.one_way[j - 1])) > tol * scale:
                raise InconsistentMarginalsError(f"columns of pair ({i},{j}) disagree with axis {j}")
