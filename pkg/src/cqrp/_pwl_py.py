"""Pure-Python kernel for the weighted piecewise-linear L1 minimizer.

Minimizes  F(b) = sum_r w_r |y_r - A[r]·b| + c·b  over b in R^p by a
revised simplex on the split-variable LP formulation.  A vertex is a set
of p rows interpolated exactly; pivots walk along edges of the hyperplane
arrangement, passing breakpoints while the one-sided derivative stays
negative (long steps).  Entering choices use Bland's rule on the global
row index, ratio-test ties are broken by (t, row index), so the path is
deterministic.

This is the reference twin of the compiled kernel in ``_pwl_cy``; both
follow the identical pivot rules and must agree on objective values.
"""

from __future__ import annotations

import numpy as np

OPTIMAL = 0
UNBOUNDED = 1
SINGULAR = 2
MAXITER = 3

# Relative tolerances shared with the compiled twin.
RC_TOL = 1e-11
PIVOT_TOL = 1e-11


def initial_basis(A, scan_order=None):
    """First p rows of A (in scan order) that are linearly independent.

    Returns an int64 index array of length p, or None if the rows do not
    span R^p.  Greedy Gaussian elimination, deterministic.  Penalty rows
    are scanned first by the caller so that a penalized solve starts at
    the all-zero vertex and ties between zero and nonzero optima resolve
    toward zero.
    """
    m, p = A.shape
    if scan_order is None:
        scan_order = range(m)
    rows = []
    piv_cols = []
    work = []
    for r in scan_order:
        v = A[r].astype(np.float64).copy()
        scale = 1.0 + np.abs(A[r]).max(initial=0.0)
        for pc, wrow in zip(piv_cols, work):
            v -= v[pc] * wrow
        k = int(np.argmax(np.abs(v)))
        if abs(v[k]) > PIVOT_TOL * scale:
            v /= v[k]
            rows.append(r)
            piv_cols.append(k)
            work.append(v)
            if len(rows) == p:
                return np.asarray(rows, dtype=np.int64)
    return None


def _usable(B):
    return np.all(np.isfinite(B)) and np.linalg.cond(B) < 1e10


def solve_kernel(A, y, w, c, warm_basis=None, max_iter=0, scan_order=None):
    """Run the pivoting loop.

    Parameters
    ----------
    A : (m, p) float array, rows of the arrangement
    y : (m,) responses
    w : (m,) strictly positive kink weights
    c : (p,) linear term
    warm_basis : optional int64 (p,) starting basis (row indices)
    max_iter : pivot budget; 0 means automatic
    scan_order : optional row order for the cold-start basis search

    Returns
    -------
    status, b, basis, n_iter
    """
    A = np.ascontiguousarray(A, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    w = np.asarray(w, dtype=np.float64)
    c = np.asarray(c, dtype=np.float64)
    m, p = A.shape
    empty = np.zeros(0, dtype=np.int64)
    if p == 0:
        return OPTIMAL, np.zeros(0), empty, 0

    tol = RC_TOL * (1.0 + w.max(initial=0.0) + np.abs(c).max(initial=0.0))

    basis = None
    if warm_basis is not None and len(warm_basis) == p:
        wb = np.asarray(warm_basis, dtype=np.int64)
        if wb.min(initial=0) >= 0 and wb.max(initial=-1) < m and len(set(wb.tolist())) == p:
            if _usable(A[wb]):
                basis = wb.copy()
    if basis is None:
        basis = initial_basis(A, scan_order)
        if basis is None:
            return SINGULAR, np.zeros(p), empty, 0

    in_basis = np.zeros(m, dtype=bool)
    in_basis[basis] = True
    B = A[basis]
    b = np.linalg.solve(B, y[basis])
    res = y - A @ b
    res[basis] = 0.0
    sigma = np.where(res >= 0.0, 1.0, -1.0)
    sigma[basis] = 0.0

    if max_iter <= 0:
        max_iter = 1000 + 20 * (m + p)

    for it in range(1, max_iter + 1):
        g = c - A.T @ (w * sigma)
        u = np.linalg.solve(B.T, g)
        if not np.all(np.isfinite(u)):
            return MAXITER, b, basis, it

        # Bland: smallest global row index among eligible entering moves.
        jstar = -1
        sgn = 0.0
        best_rid = m + 1
        for j in range(p):
            rid = int(basis[j])
            wj = w[rid]
            if wj - u[j] < -tol:
                s = 1.0
            elif wj + u[j] < -tol:
                s = -1.0
            else:
                continue
            if rid < best_rid:
                best_rid, jstar, sgn = rid, j, s
        if jstar < 0:
            return OPTIMAL, b, basis, it - 1

        ej = np.zeros(p)
        ej[jstar] = 1.0
        xi = -sgn * np.linalg.solve(B, ej)
        q = A @ xi
        slope = w[int(basis[jstar])] - sgn * u[jstar]

        cand = (~in_basis) & (sigma * q > 0.0)
        ridx = np.nonzero(cand)[0]
        enter = -1
        tstar = 0.0
        if ridx.size:
            t = res[ridx] / q[ridx]
            np.maximum(t, 0.0, out=t)
            order = np.lexsort((ridx, t))
            for oi in order:
                r = int(ridx[oi])
                gain = 2.0 * w[r] * abs(q[r])
                if slope + gain >= -tol:
                    enter = r
                    tstar = float(t[oi])
                    break
                slope += gain
                sigma[r] = -sigma[r]
        if enter < 0:
            return UNBOUNDED, b, basis, it

        leave = int(basis[jstar])
        sigma[leave] = sgn
        in_basis[leave] = False
        sigma[enter] = 0.0
        in_basis[enter] = True
        basis[jstar] = enter
        B = A[basis]
        b = np.linalg.solve(B, y[basis])
        res = y - A @ b
        res[basis] = 0.0

    return MAXITER, b, basis, max_iter
