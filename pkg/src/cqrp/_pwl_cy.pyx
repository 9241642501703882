# cython: language_level=3
"""Compiled kernel for the weighted piecewise-linear L1 minimizer.

Mirrors ``_pwl_py.solve_kernel`` step for step: same basis initialization
order, same Bland entering rule on global row ids, same (t, row) ratio-test
ordering, same tolerances.  Objective values agree with the reference
kernel to rounding.
"""

import numpy as np

cimport numpy as cnp
from libc.math cimport fabs
from libc.stdlib cimport free, malloc, qsort

cnp.import_array()

OPTIMAL = 0
UNBOUNDED = 1
SINGULAR = 2
MAXITER = 3

cdef double RC_TOL = 1e-11
cdef double PIVOT_TOL = 1e-11


cdef struct BP:
    double t
    long rid


cdef int _bp_cmp(const void* a, const void* b) noexcept nogil:
    cdef const BP* x = <const BP*> a
    cdef const BP* y = <const BP*> b
    if x.t < y.t:
        return -1
    if x.t > y.t:
        return 1
    if x.rid < y.rid:
        return -1
    if x.rid > y.rid:
        return 1
    return 0


cdef int _lu_factor(double* M, long* piv, int p) noexcept nogil:
    """In-place LU with partial pivoting (LAPACK-style row swaps)."""
    cdef int i, j, k, maxr
    cdef double mx, v, scale
    scale = 0.0
    for i in range(p * p):
        v = fabs(M[i])
        if v > scale:
            scale = v
    for k in range(p):
        mx = -1.0
        maxr = k
        for i in range(k, p):
            v = fabs(M[i * p + k])
            if v > mx:
                mx = v
                maxr = i
        piv[k] = maxr
        if mx <= PIVOT_TOL * (1.0 + scale):
            return -1
        if maxr != k:
            for j in range(p):
                v = M[k * p + j]
                M[k * p + j] = M[maxr * p + j]
                M[maxr * p + j] = v
        for i in range(k + 1, p):
            M[i * p + k] /= M[k * p + k]
            v = M[i * p + k]
            if v != 0.0:
                for j in range(k + 1, p):
                    M[i * p + j] -= v * M[k * p + j]
    return 0


cdef void _lu_solve(double* LU, long* piv, int p, double* x) noexcept nogil:
    """Solve B x = rhs in place (rhs enters in x)."""
    cdef int i, k
    cdef double v
    for k in range(p):
        if piv[k] != k:
            v = x[k]
            x[k] = x[piv[k]]
            x[piv[k]] = v
    for i in range(p):
        v = x[i]
        for k in range(i):
            v -= LU[i * p + k] * x[k]
        x[i] = v
    for i in range(p - 1, -1, -1):
        v = x[i]
        for k in range(i + 1, p):
            v -= LU[i * p + k] * x[k]
        x[i] = v / LU[i * p + i]


cdef void _lu_solve_t(double* LU, long* piv, int p, double* x) noexcept nogil:
    """Solve B^T x = rhs in place.  B = P^T L U, so B^T = U^T L^T P."""
    cdef int i, k
    cdef double v
    for i in range(p):
        v = x[i]
        for k in range(i):
            v -= LU[k * p + i] * x[k]
        x[i] = v / LU[i * p + i]
    for i in range(p - 1, -1, -1):
        v = x[i]
        for k in range(i + 1, p):
            v -= LU[k * p + i] * x[k]
        x[i] = v
    for k in range(p - 1, -1, -1):
        if piv[k] != k:
            v = x[k]
            x[k] = x[piv[k]]
            x[piv[k]] = v


cdef int _greedy_basis(double[:, ::1] A, long[::1] order, long* rows, int p) noexcept nogil:
    """First p independent rows in scan order; returns 0 on success."""
    cdef int m = A.shape[0]
    cdef int cnt = 0
    cdef int oi, j, k, best
    cdef long r
    cdef double scale, v, mx
    cdef double* work = <double*> malloc(p * p * sizeof(double))
    cdef double* vec = <double*> malloc(p * sizeof(double))
    cdef long* piv_cols = <long*> malloc(p * sizeof(long))
    if work == NULL or vec == NULL or piv_cols == NULL:
        if work != NULL: free(work)
        if vec != NULL: free(vec)
        if piv_cols != NULL: free(piv_cols)
        return -2
    try:
        for oi in range(order.shape[0]):
            r = order[oi]
            scale = 0.0
            for j in range(p):
                vec[j] = A[r, j]
                v = fabs(vec[j])
                if v > scale:
                    scale = v
            for k in range(cnt):
                v = vec[piv_cols[k]]
                if v != 0.0:
                    for j in range(p):
                        vec[j] -= v * work[k * p + j]
            best = 0
            mx = -1.0
            for j in range(p):
                v = fabs(vec[j])
                if v > mx:
                    mx = v
                    best = j
            if mx > PIVOT_TOL * (1.0 + scale):
                v = vec[best]
                for j in range(p):
                    work[cnt * p + j] = vec[j] / v
                piv_cols[cnt] = best
                rows[cnt] = r
                cnt += 1
                if cnt == p:
                    return 0
        return -1
    finally:
        free(work)
        free(vec)
        free(piv_cols)


def solve_kernel(A, y, w, c, warm_basis=None, max_iter=0, scan_order=None):
    """Compiled twin of ``_pwl_py.solve_kernel``; same contract."""
    cdef cnp.ndarray[double, ndim=2, mode="c"] A_ = np.ascontiguousarray(A, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] y_ = np.ascontiguousarray(y, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] w_ = np.ascontiguousarray(w, dtype=np.float64)
    cdef cnp.ndarray[double, ndim=1] c_ = np.ascontiguousarray(c, dtype=np.float64)
    cdef int m = A_.shape[0]
    cdef int p = A_.shape[1]

    if p == 0:
        return OPTIMAL, np.zeros(0), np.zeros(0, dtype=np.int64), 0

    cdef double[:, ::1] Av = A_
    cdef double[::1] yv = y_
    cdef double[::1] wv = w_
    cdef double[::1] cv = c_

    cdef cnp.ndarray[long, ndim=1] basis_arr = np.zeros(p, dtype=np.int64)
    cdef long[::1] basis = basis_arr
    cdef cnp.ndarray[double, ndim=1] b_arr = np.zeros(p, dtype=np.float64)
    cdef double[::1] b = b_arr

    cdef double tol = 0.0
    cdef int i, j, k, it, jstar, nbp, enter, status
    cdef long r, leave, best_rid
    cdef double sgn, v, slope, gain, tstar, wj, s

    for i in range(m):
        v = wv[i]
        if v > tol:
            tol = v
    for j in range(p):
        v = fabs(cv[j])
        if v > tol:
            tol = v
    tol = RC_TOL * (1.0 + tol)

    cdef long[::1] order
    if scan_order is None:
        order = np.arange(m, dtype=np.int64)
    else:
        order = np.ascontiguousarray(scan_order, dtype=np.int64)

    # work buffers
    cdef double* LU = <double*> malloc(p * p * sizeof(double))
    cdef long* piv = <long*> malloc(p * sizeof(long))
    cdef double* vec = <double*> malloc(p * sizeof(double))
    cdef double* g = <double*> malloc(p * sizeof(double))
    cdef double* u = <double*> malloc(p * sizeof(double))
    cdef double* xi = <double*> malloc(p * sizeof(double))
    cdef double* q = <double*> malloc(m * sizeof(double))
    cdef double* res = <double*> malloc(m * sizeof(double))
    cdef double* sigma = <double*> malloc(m * sizeof(double))
    cdef char* in_basis = <char*> malloc(m * sizeof(char))
    cdef BP* bps = <BP*> malloc(m * sizeof(BP))
    if (LU == NULL or piv == NULL or vec == NULL or g == NULL or u == NULL
            or xi == NULL or q == NULL or res == NULL or sigma == NULL
            or in_basis == NULL or bps == NULL):
        raise MemoryError

    cdef bint have_basis = False
    cdef int rc
    cdef long[::1] wbv
    try:
        if warm_basis is not None and len(warm_basis) == p:
            wbv = np.ascontiguousarray(warm_basis, dtype=np.int64)
            for i in range(m):
                in_basis[i] = 0
            have_basis = True
            for j in range(p):
                r = wbv[j]
                if r < 0 or r >= m or in_basis[r]:
                    have_basis = False
                    break
                in_basis[r] = 1
            if have_basis:
                for i in range(p):
                    for j in range(p):
                        LU[i * p + j] = Av[wbv[i], j]
                if _lu_factor(LU, piv, p) != 0:
                    have_basis = False
                else:
                    for j in range(p):
                        basis[j] = wbv[j]
        if not have_basis:
            rc = _greedy_basis(Av, order, &basis[0], p)
            if rc == -2:
                raise MemoryError
            if rc != 0:
                return SINGULAR, np.zeros(p), np.zeros(0, dtype=np.int64), 0
            for i in range(p):
                for j in range(p):
                    LU[i * p + j] = Av[basis[i], j]
            if _lu_factor(LU, piv, p) != 0:
                return SINGULAR, np.zeros(p), np.zeros(0, dtype=np.int64), 0

        # b = B^{-1} y_h ; res = y - A b ; sigma = sign(res), 0 on basis
        for j in range(p):
            vec[j] = yv[basis[j]]
        _lu_solve(LU, piv, p, vec)
        for j in range(p):
            b[j] = vec[j]
        for i in range(m):
            in_basis[i] = 0
        for j in range(p):
            in_basis[basis[j]] = 1
        for i in range(m):
            v = yv[i]
            for j in range(p):
                v -= Av[i, j] * b[j]
            res[i] = v
            sigma[i] = 1.0 if v >= 0.0 else -1.0
        for j in range(p):
            res[basis[j]] = 0.0
            sigma[basis[j]] = 0.0

        if max_iter <= 0:
            max_iter = 1000 + 20 * (m + p)

        status = MAXITER
        it = 0
        while it < max_iter:
            it += 1
            # g = c - A^T (w sigma)
            for j in range(p):
                g[j] = cv[j]
            for i in range(m):
                s = wv[i] * sigma[i]
                if s != 0.0:
                    for j in range(p):
                        g[j] -= s * Av[i, j]
            for j in range(p):
                u[j] = g[j]
            _lu_solve_t(LU, piv, p, u)

            # Bland: smallest global row id among eligible entering moves
            jstar = -1
            sgn = 0.0
            best_rid = m + 1
            for j in range(p):
                r = basis[j]
                wj = wv[r]
                if wj - u[j] < -tol:
                    s = 1.0
                elif wj + u[j] < -tol:
                    s = -1.0
                else:
                    continue
                if r < best_rid:
                    best_rid = r
                    jstar = j
                    sgn = s
            if jstar < 0:
                status = OPTIMAL
                it -= 1
                break

            for j in range(p):
                vec[j] = 0.0
            vec[jstar] = 1.0
            _lu_solve(LU, piv, p, vec)
            for j in range(p):
                xi[j] = -sgn * vec[j]
            for i in range(m):
                v = 0.0
                for j in range(p):
                    v += Av[i, j] * xi[j]
                q[i] = v

            slope = wv[basis[jstar]] - sgn * u[jstar]
            nbp = 0
            for i in range(m):
                if in_basis[i] == 0 and sigma[i] * q[i] > 0.0:
                    v = res[i] / q[i]
                    if v < 0.0:
                        v = 0.0
                    bps[nbp].t = v
                    bps[nbp].rid = i
                    nbp += 1
            enter = -1
            tstar = 0.0
            if nbp > 0:
                qsort(bps, nbp, sizeof(BP), _bp_cmp)
                for i in range(nbp):
                    r = bps[i].rid
                    gain = 2.0 * wv[r] * fabs(q[r])
                    if slope + gain >= -tol:
                        enter = <int> r
                        tstar = bps[i].t
                        break
                    slope += gain
                    sigma[r] = -sigma[r]
            if enter < 0:
                status = UNBOUNDED
                break

            leave = basis[jstar]
            sigma[leave] = sgn
            in_basis[leave] = 0
            sigma[enter] = 0.0
            in_basis[enter] = 1
            basis[jstar] = enter

            for i in range(p):
                for j in range(p):
                    LU[i * p + j] = Av[basis[i], j]
            if _lu_factor(LU, piv, p) != 0:
                status = MAXITER
                break
            for j in range(p):
                vec[j] = yv[basis[j]]
            _lu_solve(LU, piv, p, vec)
            for j in range(p):
                b[j] = vec[j]
            for i in range(m):
                v = yv[i]
                for j in range(p):
                    v -= Av[i, j] * b[j]
                res[i] = v
            for j in range(p):
                res[basis[j]] = 0.0

        return status, b_arr, basis_arr.copy(), it
    finally:
        free(LU)
        free(piv)
        free(vec)
        free(g)
        free(u)
        free(xi)
        free(q)
        free(res)
        free(sigma)
        free(in_basis)
        free(bps)
