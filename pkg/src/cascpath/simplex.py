"""Dense two-phase revised simplex used as the exact dispatch solver.

The dispatch problem is an inequality-form LP, min c'x s.t. A x <= b,
a_eq'x = 0, with free variables x.  It is solved through its dual in
standard computational form so that the final basis directly yields

  * the optimal vertex x* (the simplex multipliers),
  * the dual multipliers of every inequality row, and
  * a square, provably invertible active constraint set,

which is exactly what the critical-region cache needs; slack-tolerance
active-set extraction from a generic solver cannot provide that under
degeneracy.  Pivoting is deterministic (Dantzig rule, first-index ties,
Bland's rule after a stall), so identical inputs give identical bases.

The kernels are plain numpy code compiled with numba unless
CASCPATH_NO_NUMBA=1 is set.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from ._accel import maybe_jit

# status codes shared with the kernel
OPTIMAL = 0
PRIMAL_INFEASIBLE = 1   # dual unbounded
PRIMAL_UNBOUNDED = 2    # dual infeasible (cannot happen for bounded dispatch sets)
STALLED = 3

_PIVOT_TOL = 1e-9
_RCOST_TOL = 1e-9
_REFACTOR_EVERY = 100
_BLAND_AFTER = 400
_MAX_ITER = 20000


@maybe_jit
def _run_phase(M, q, cost, allowed, basis, in_basis, binv, zb, max_iter):
    """One simplex phase, updating basis/binv/zb in place.

    Returns (status, iterations).  `allowed` marks columns permitted to
    enter.  Deterministic: Dantzig pricing with first-index ties, switching
    to Bland's rule after _BLAND_AFTER iterations without objective progress.
    """
    n, nc = M.shape
    bland = False
    stall = 0
    last_obj = np.inf
    iters = 0
    since_refactor = 0
    while iters < max_iter:
        iters += 1
        # simplex multipliers and reduced costs
        cb = np.empty(n)
        for i in range(n):
            cb[i] = cost[basis[i]]
        pi = cb @ binv
        red = cost - pi @ M
        # entering column
        enter = -1
        if bland:
            for j in range(nc):
                if allowed[j] and not in_basis[j] and red[j] < -_RCOST_TOL:
                    enter = j
                    break
        else:
            best = -_RCOST_TOL
            for j in range(nc):
                if allowed[j] and not in_basis[j] and red[j] < best:
                    best = red[j]
                    enter = j
        if enter < 0:
            return OPTIMAL, iters
        # direction and ratio test
        d = binv @ np.ascontiguousarray(M[:, enter])
        leave = -1
        best_ratio = np.inf
        best_col = np.int64(1 << 60)
        for i in range(n):
            if d[i] > _PIVOT_TOL:
                num = zb[i]
                if num < 0.0:
                    num = 0.0
                ratio = num / d[i]
                if ratio < best_ratio - 1e-12 or (
                    ratio < best_ratio + 1e-12 and basis[i] < best_col
                ):
                    best_ratio = ratio
                    best_col = basis[i]
                    leave = i
        if leave < 0:
            return PRIMAL_INFEASIBLE, iters
        # pivot
        step = best_ratio
        for i in range(n):
            zb[i] -= step * d[i]
        zb[leave] = step
        in_basis[basis[leave]] = False
        in_basis[enter] = True
        basis[leave] = enter
        new_row = binv[leave] / d[leave]
        for i in range(n):
            if i != leave:
                di = d[i]
                if di != 0.0:
                    binv[i] -= di * new_row
        binv[leave] = new_row
        since_refactor += 1
        if since_refactor >= _REFACTOR_EVERY:
            binv[:, :] = np.linalg.inv(np.ascontiguousarray(M[:, basis]))
            zbn = binv @ q
            for i in range(n):
                zb[i] = zbn[i]
            since_refactor = 0
        # stall detection for anti-cycling
        obj = 0.0
        for i in range(n):
            obj += cost[basis[i]] * zb[i]
        if obj < last_obj - 1e-12 * (1.0 + abs(last_obj)):
            stall = 0
            last_obj = obj
        else:
            stall += 1
            if stall > _BLAND_AFTER:
                bland = True
    return STALLED, iters


@maybe_jit
def _lp_kernel(M, q, h, seeds, n_rows_art, max_iter):
    """Two-phase simplex on min h'z s.t. Mz = q, z >= 0.

    The last `n_rows_art` columns of M are the artificial identity block.
    `seeds[i]` may name a real single-nonzero column that can start basic on
    row i with a nonnegative value (-1 falls back to the artificial), which
    shortens phase 1.  Returns (status, z, basis, x, iters) where x is the
    multiplier vector of the final basis under the real cost, i.e. the
    primal optimum of the inequality-form problem this standard form is
    dual to.
    """
    n, nc = M.shape
    n_real = nc - n_rows_art
    basis = np.empty(n, dtype=np.int64)
    in_basis = np.zeros(nc, dtype=np.bool_)
    binv = np.zeros((n, n))
    for i in range(n):
        col = seeds[i] if seeds[i] >= 0 else n_real + i
        basis[i] = col
        in_basis[col] = True
        binv[i, i] = 1.0 / M[i, col]
    zb = binv @ q

    # phase 1: drive artificials to zero
    cost1 = np.zeros(nc)
    for j in range(n_real, nc):
        cost1[j] = 1.0
    allowed1 = np.ones(nc, dtype=np.bool_)
    status, it1 = _run_phase(M, q, cost1, allowed1, basis, in_basis, binv, zb, max_iter)
    if status != OPTIMAL:
        return STALLED, zb, basis, np.zeros(n), it1
    feas = 0.0
    for i in range(n):
        if basis[i] >= n_real:
            feas += abs(zb[i])
    scale = 1.0
    for i in range(n):
        if abs(q[i]) > scale:
            scale = abs(q[i])
    if feas > 1e-7 * scale:
        return PRIMAL_UNBOUNDED, zb, basis, np.zeros(n), it1

    # drive remaining zero-valued artificials out where possible
    for i in range(n):
        if basis[i] >= n_real:
            for j in range(n_real):
                if in_basis[j]:
                    continue
                dj = 0.0
                for t in range(n):
                    dj += binv[i, t] * M[t, j]
                if abs(dj) > 1e-7:
                    d = binv @ np.ascontiguousarray(M[:, j])
                    in_basis[basis[i]] = False
                    in_basis[j] = True
                    basis[i] = j
                    new_row = binv[i] / d[i]
                    for r in range(n):
                        if r != i:
                            dr = d[r]
                            if dr != 0.0:
                                binv[r] -= dr * new_row
                    binv[i] = new_row
                    zb[i] = 0.0
                    break

    # phase 2: real objective, artificials locked out
    allowed2 = np.zeros(nc, dtype=np.bool_)
    for j in range(n_real):
        allowed2[j] = True
    status, it2 = _run_phase(M, q, h, allowed2, basis, in_basis, binv, zb, max_iter)
    iters = it1 + it2
    if status != OPTIMAL:
        return status, zb, basis, np.zeros(n), iters

    # final refresh for accuracy, then multipliers = primal optimum
    binv = np.linalg.inv(np.ascontiguousarray(M[:, basis]))
    zb = binv @ q
    cb = np.empty(n)
    for i in range(n):
        cb[i] = h[basis[i]]
    x = cb @ binv
    return OPTIMAL, zb, basis, x, iters


@dataclass
class LpSolution:
    """Optimal basic solution of min c'x s.t. A x <= b, a_eq'x = 0."""

    status: int
    x: np.ndarray
    objective: float
    duals: np.ndarray           # multiplier per inequality row, >= 0
    eq_multiplier: float        # multiplier of the equality row
    active_rows: np.ndarray     # inequality rows in the optimal basis, sorted
    eq_in_basis: bool           # equality row represented in the basis
    artificial_in_basis: bool   # a redundant row kept an artificial at zero
    iterations: int


def build_dual_form(c, a_ub, a_eq) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Constant part of the dual standard form; reusable across b vectors.

    Also detects single-nonzero real columns usable as phase-1 seeds (in the
    dispatch LP these are the shedding-bound rows), which roughly halves the
    phase-1 pivot count.
    """
    c = np.ascontiguousarray(c, dtype=float)
    a_ub = np.ascontiguousarray(a_ub, dtype=float)
    a_eq = np.ascontiguousarray(a_eq, dtype=float)
    n = c.size
    m = a_ub.shape[0]
    q = -c
    m_cols = np.empty((n, m + 2 + n))
    m_cols[:, :m] = a_ub.T
    m_cols[:, m] = a_eq
    m_cols[:, m + 1] = -a_eq
    m_cols[:, m + 2:] = 0.0
    for i in range(n):
        m_cols[i, m + 2 + i] = 1.0 if q[i] >= 0 else -1.0
    seeds = np.full(n, -1, dtype=np.int64)
    nnz_count = (m_cols[:, :m] != 0.0).sum(axis=0)
    for j in np.flatnonzero(nnz_count == 1):
        r = int(np.flatnonzero(m_cols[:, j])[0])
        if seeds[r] < 0 and m_cols[r, j] * q[r] > 0.0:
            seeds[r] = j
    return m_cols, q, seeds


def solve_inequality_lp(c, a_ub, b_ub, a_eq, dual_form=None) -> LpSolution:
    """Solve min c'x s.t. A x <= b, a_eq'x = 0 via the dual standard form.

    The dual is min b'y + 0*(mu+ - mu-) s.t. A' y + a_eq (mu+ - mu-) = -c,
    y >= 0; its optimal basis columns name the tight primal rows and its
    simplex multipliers are the primal optimum.  `dual_form` may carry the
    precomputed result of build_dual_form for repeated solves.
    """
    c = np.ascontiguousarray(c, dtype=float)
    b_ub = np.ascontiguousarray(b_ub, dtype=float)
    n = c.size
    m = b_ub.size

    if dual_form is None:
        dual_form = build_dual_form(c, a_ub, a_eq)
    m_cols, q, seeds = dual_form
    h = np.zeros(m + 2 + n)
    h[:m] = b_ub

    status, z, basis, x, iters = _lp_kernel(m_cols, q, h, seeds, n, _MAX_ITER)

    duals = np.zeros(m)
    active = []
    eq_in_basis = False
    artificial = False
    eq_mult = 0.0
    if status == OPTIMAL:
        for pos, col in enumerate(basis):
            if col < m:
                duals[col] = max(z[pos], 0.0)
                active.append(col)
            elif col == m:
                eq_in_basis = True
                eq_mult += z[pos]
            elif col == m + 1:
                eq_in_basis = True
                eq_mult -= z[pos]
            else:
                artificial = True
        objective = float(c @ x)
    else:
        objective = np.nan
    return LpSolution(
        status=int(status),
        x=np.asarray(x, dtype=float),
        objective=objective,
        duals=duals,
        eq_multiplier=float(eq_mult),
        active_rows=np.array(sorted(active), dtype=np.int64),
        eq_in_basis=eq_in_basis,
        artificial_in_basis=artificial,
        iterations=int(iters),
    )
