"""Hot numeric kernels.

Every kernel is written once as plain numpy/Python and compiled with
``numba.njit`` when numba is importable.  Setting ``CTAB_DISABLE_NUMBA=1``
in the environment forces the pure-Python path (useful for debugging and
for the benchmark in ``benchmarks/bench_kernels.py``).

Names are rebound to their compiled dispatchers at import time; numba
resolves the helper globals on first call, so compiled kernels only ever
call compiled helpers.
"""

import os

import numpy as np

_DISABLED = os.environ.get("CTAB_DISABLE_NUMBA", "").strip().lower() not in ("", "0", "false", "no")

try:
    import numba
except ImportError:  # pragma: no cover - numba is a hard dependency in practice
    numba = None

NUMBA_ENABLED = numba is not None and not _DISABLED


def _jit(fn):
    if NUMBA_ENABLED:
        return numba.njit(cache=True)(fn)
    return fn


# LP status codes shared with ctab.lp
OPTIMAL = 0
INFEASIBLE = 1
UNBOUNDED = 2
ITERATION_LIMIT = 3


# ---------------------------------------------------------------------------
# concordance
# ---------------------------------------------------------------------------

def concordance(p):
    """Return ``(C, Q)`` for a 2-way table.

    ``C`` sums ``p[i, j] * p[a, b]`` over ``i < a, j < b`` and ``Q`` over
    ``i < a, j > b``.  Both use suffix sums, O(I*J).
    """
    n_rows, n_cols = p.shape
    # below_right[i, j] = sum of p[a, b] for a >= i, b >= j
    below_right = np.zeros((n_rows + 1, n_cols + 1))
    for i in range(n_rows - 1, -1, -1):
        for j in range(n_cols - 1, -1, -1):
            below_right[i, j] = p[i, j] + below_right[i + 1, j] + below_right[i, j + 1] - below_right[i + 1, j + 1]
    # below_left[i, j] = sum of p[a, b] for a >= i, b <= j - 1
    below_left = np.zeros((n_rows + 1, n_cols + 1))
    for i in range(n_rows - 1, -1, -1):
        for j in range(1, n_cols + 1):
            below_left[i, j] = p[i, j - 1] + below_left[i + 1, j] + below_left[i, j - 1] - below_left[i + 1, j - 1]
    conc = 0.0
    disc = 0.0
    for i in range(n_rows):
        for j in range(n_cols):
            conc += p[i, j] * below_right[i + 1, j + 1]
            disc += p[i, j] * below_left[i + 1, j]
    return conc, disc


def concordance_grad(p):
    """Gradients of ``(C, Q)`` from :func:`concordance` with respect to ``p``."""
    n_rows, n_cols = p.shape
    # prefix[i, j] = sum of p[a, b] for a < i, b < j
    prefix = np.zeros((n_rows + 1, n_cols + 1))
    for i in range(n_rows):
        for j in range(n_cols):
            prefix[i + 1, j + 1] = p[i, j] + prefix[i, j + 1] + prefix[i + 1, j] - prefix[i, j]
    total = prefix[n_rows, n_cols]
    grad_c = np.zeros((n_rows, n_cols))
    grad_q = np.zeros((n_rows, n_cols))
    for a in range(n_rows):
        for b in range(n_cols):
            upper_left = prefix[a, b]                            # i < a, j < b
            upper_right = prefix[a, n_cols] - prefix[a, b + 1]   # i < a, j > b
            lower_left = prefix[n_rows, b] - prefix[a + 1, b]    # i > a, j < b
            lower_right = total - prefix[a + 1, n_cols] - prefix[n_rows, b + 1] + prefix[a + 1, b + 1]
            grad_c[a, b] = upper_left + lower_right
            grad_q[a, b] = upper_right + lower_left
    return grad_c, grad_q


# ---------------------------------------------------------------------------
# inversion sampling
# ---------------------------------------------------------------------------

def inversion_counts(cdf, uniforms):
    """Histogram of ``searchsorted(cdf, u, side='right')`` over the uniforms."""
    d = cdf.shape[0]
    counts = np.zeros(d, dtype=np.int64)
    for u in uniforms:
        lo = 0
        hi = d - 1
        while lo < hi:
            mid = (lo + hi) // 2
            if u < cdf[mid]:
                hi = mid
            else:
                lo = mid + 1
        counts[lo] += 1
    return counts


# ---------------------------------------------------------------------------
# dense two-phase simplex (Bland's rule)
# ---------------------------------------------------------------------------

def _pivot(T, basis, row, col):
    piv = T[row, col]
    n_total = T.shape[1]
    for j in range(n_total):
        T[row, j] /= piv
    for i in range(T.shape[0]):
        if i != row:
            factor = T[i, col]
            if factor != 0.0:
                for j in range(n_total):
                    T[i, j] -= factor * T[row, j]
    basis[row] = col


def _run_bland(T, basis, n_allowed, tol, max_iter):
    """Iterate on tableau ``T`` whose last row holds reduced costs.

    Columns ``>= n_allowed`` may not enter.  Returns a status code.
    """
    m = T.shape[0] - 1
    rhs = T.shape[1] - 1
    for _ in range(max_iter):
        col = -1
        for j in range(n_allowed):
            if T[m, j] < -tol:
                col = j
                break
        if col < 0:
            return OPTIMAL
        row = -1
        best = 0.0
        for i in range(m):
            a = T[i, col]
            if a > tol:
                ratio = T[i, rhs] / a
                if row < 0 or ratio < best - 1e-15 or (abs(ratio - best) <= 1e-15 and basis[i] < basis[row]):
                    row = i
                    best = ratio
        if row < 0:
            return UNBOUNDED
        _pivot(T, basis, row, col)
    return ITERATION_LIMIT


def simplex_phase1(A, b, tol, max_iter):
    """Find a basic feasible solution of ``A x = b, x >= 0``.

    Returns ``(status, T, basis)``.  ``T`` has ``n + m + 1`` columns
    (originals, artificials, rhs) plus a cost row at the bottom; artificial
    columns never re-enter in phase 2.
    """
    m, n = A.shape
    T = np.zeros((m + 1, n + m + 1))
    basis = np.empty(m, dtype=np.int64)
    for i in range(m):
        sign = -1.0 if b[i] < 0 else 1.0
        for j in range(n):
            T[i, j] = sign * A[i, j]
        T[i, n + i] = 1.0
        T[i, n + m] = sign * b[i]
        basis[i] = n + i
    for j in range(n):
        s = 0.0
        for i in range(m):
            s += T[i, j]
        T[m, j] = -s
    s = 0.0
    for i in range(m):
        s += T[i, n + m]
    T[m, n + m] = -s
    status = _run_bland(T, basis, n, tol, max_iter)
    if status == ITERATION_LIMIT:
        return status, T, basis
    scale = 1.0
    for i in range(m):
        scale = max(scale, abs(b[i]))
    if -T[m, n + m] > tol * scale * 10.0:
        return INFEASIBLE, T, basis
    # drive zero-level artificials out of the basis where possible
    for i in range(m):
        if basis[i] >= n:
            best_col = -1
            best_val = tol
            for j in range(n):
                if abs(T[i, j]) > best_val:
                    best_val = abs(T[i, j])
                    best_col = j
            if best_col >= 0:
                _pivot(T, basis, i, best_col)
    return OPTIMAL, T, basis


def simplex_phase2(T0, basis0, c, tol, max_iter):
    """Minimise ``c @ x`` from the phase-1 tableau.  Returns ``(status, x, obj)``."""
    T = T0.copy()
    basis = basis0.copy()
    m = T.shape[0] - 1
    n = c.shape[0]
    rhs = T.shape[1] - 1
    for j in range(T.shape[1]):
        T[m, j] = 0.0
    for j in range(n):
        T[m, j] = c[j]
    for i in range(m):
        bj = basis[i]
        if bj < n:
            cb = c[bj]
            if cb != 0.0:
                for j in range(T.shape[1]):
                    T[m, j] -= cb * T[i, j]
    status = _run_bland(T, basis, n, tol, max_iter)
    x = np.zeros(n)
    for i in range(m):
        if basis[i] < n:
            x[basis[i]] = T[i, rhs]
    obj = 0.0
    for j in range(n):
        obj += c[j] * x[j]
    return status, x, obj


def simplex_batch(A, b, C, tol, max_iter):
    """Minimise each row of ``C`` over ``A x = b, x >= 0``.

    Shares a single phase 1.  Returns ``(status, X, objs)`` where ``status``
    has one entry per objective (all INFEASIBLE if phase 1 fails).
    """
    k, n = C.shape
    statuses = np.zeros(k, dtype=np.int64)
    X = np.zeros((k, n))
    objs = np.zeros(k)
    st, T, basis = simplex_phase1(A, b, tol, max_iter)
    if st != OPTIMAL:
        for r in range(k):
            statuses[r] = st
        return statuses, X, objs
    for r in range(k):
        s, x, o = simplex_phase2(T, basis, C[r], tol, max_iter)
        statuses[r] = s
        X[r] = x
        objs[r] = o
    return statuses, X, objs


if NUMBA_ENABLED:
    _pivot = _jit(_pivot)
    _run_bland = _jit(_run_bland)
    simplex_phase1 = _jit(simplex_phase1)
    simplex_phase2 = _jit(simplex_phase2)
    simplex_batch = _jit(simplex_batch)
    concordance = _jit(concordance)
    concordance_grad = _jit(concordance_grad)
    inversion_counts = _jit(inversion_counts)
