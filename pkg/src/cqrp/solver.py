"""Exact minimization of weighted-L1 piecewise-linear objectives.

The central object is :class:`PWLProblem`,

    F(b) = sum_i a_i |x_i - z_i·b| + c·b + sum_k gamma_k |b_k|,

with ``gamma_k = inf`` meaning coordinate k is constrained to zero and
``gamma_k = 0`` meaning it is unpenalized.  ``solve_pwl_l1`` returns an
exact vertex minimizer; ``brute_force_solve`` is the independent
enumeration oracle for small instances; ``check_optimality`` verifies the
subgradient condition along coordinate and random directions.

Two kernels implement the identical pivoting algorithm: a compiled Cython
extension and a pure-Python fallback.  Selection happens at import and can
be forced with the ``CQRP_BACKEND`` environment variable (``compiled`` or
``python``).
"""

from __future__ import annotations

import itertools
import os
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from . import _pwl_py
from .errors import (
    DegenerateDesign,
    InstanceTooLarge,
    SolverNumericalError,
    UnboundedObjective,
)

try:  # pragma: no cover - depends on the build
    from . import _pwl_cy
    HAVE_COMPILED = True
except ImportError:  # pragma: no cover
    _pwl_cy = None
    HAVE_COMPILED = False

_env = os.environ.get("CQRP_BACKEND", "auto").lower()
if _env == "python":
    DEFAULT_BACKEND = "python"
elif _env == "compiled":
    if not HAVE_COMPILED:
        raise ImportError("CQRP_BACKEND=compiled but the extension is not built")
    DEFAULT_BACKEND = "compiled"
else:
    DEFAULT_BACKEND = "compiled" if HAVE_COMPILED else "python"


def active_backend() -> str:
    return DEFAULT_BACKEND


def _kernel(backend):
    if backend is None:
        backend = DEFAULT_BACKEND
    if backend == "compiled":
        if not HAVE_COMPILED:
            raise ValueError("compiled backend requested but not available")
        return _pwl_cy.solve_kernel
    if backend == "python":
        return _pwl_py.solve_kernel
    raise ValueError(f"unknown backend {backend!r}")


@dataclass
class PWLProblem:
    """One grid-step convex objective."""

    responses: np.ndarray
    design: np.ndarray
    abs_weights: np.ndarray
    linear_term: np.ndarray
    l1_weights: np.ndarray | None = None
    box_bound: float = 1e6

    def __post_init__(self):
        self.responses = np.atleast_1d(np.asarray(self.responses, dtype=np.float64))
        self.design = np.atleast_2d(np.asarray(self.design, dtype=np.float64))
        self.abs_weights = np.atleast_1d(np.asarray(self.abs_weights, dtype=np.float64))
        self.linear_term = np.atleast_1d(np.asarray(self.linear_term, dtype=np.float64))
        if self.l1_weights is None:
            self.l1_weights = np.zeros(self.design.shape[1])
        self.l1_weights = np.atleast_1d(np.asarray(self.l1_weights, dtype=np.float64))
        n, d = self.design.shape
        if n < 1 or d < 1:
            raise ValueError("design must be n x d with n, d >= 1")
        if self.responses.shape != (n,) or self.abs_weights.shape != (n,):
            raise ValueError("responses/abs_weights must have length n")
        if self.linear_term.shape != (d,) or self.l1_weights.shape != (d,):
            raise ValueError("linear_term/l1_weights must have length d")
        if not np.all(np.isfinite(self.design)):
            raise ValueError("design must be finite")
        if np.any(self.abs_weights < 0) or np.any(np.isnan(self.abs_weights)):
            raise ValueError("abs_weights must be nonnegative")
        if np.any(self.l1_weights < 0) or np.any(np.isnan(self.l1_weights)):
            raise ValueError("l1_weights must be nonnegative (inf allowed)")
        if not self.box_bound > 0:
            raise ValueError("box_bound must be positive")

    @property
    def n(self) -> int:
        return self.design.shape[0]

    @property
    def dim(self) -> int:
        return self.design.shape[1]


@dataclass(frozen=True)
class CoefVector:
    """Coefficient vector with its set of nonzero coordinates."""

    values: np.ndarray
    active_set: frozenset[int] = field(default=None)  # type: ignore[assignment]

    def __post_init__(self):
        object.__setattr__(self, "values", np.asarray(self.values, dtype=np.float64))
        if self.active_set is None:
            nz = frozenset(int(k) for k in np.nonzero(self.values)[0])
            object.__setattr__(self, "active_set", nz)

    def __array__(self, dtype=None, copy=None):
        return np.asarray(self.values, dtype=dtype)

    def __len__(self):
        return len(self.values)


class _Assembled(NamedTuple):
    A: np.ndarray            # (m, p) rows of the arrangement, reduced columns
    y: np.ndarray            # (m,)
    w: np.ndarray            # (m,)
    c: np.ndarray            # (p,)
    cols: np.ndarray         # active (finite-penalty) coordinate indices
    data_rows: np.ndarray    # original row index of each data row of A
    pen_coord: np.ndarray    # for penalty rows: position (in cols) of the coord, else -1


def _assemble(problem: PWLProblem) -> _Assembled:
    gamma = problem.l1_weights
    cols = np.nonzero(np.isfinite(gamma))[0]
    keep = problem.abs_weights > 0.0
    data_rows = np.nonzero(keep)[0]
    Z = problem.design[np.ix_(data_rows, cols)]
    c = problem.linear_term[cols].copy()

    # Coordinates with no support anywhere: affine in b_k, slope c_k.
    col_mass = np.abs(Z).sum(axis=0) + np.where(gamma[cols] > 0, 1.0, 0.0)
    dead = col_mass == 0.0
    if np.any(dead):
        if np.any(np.abs(c[dead]) > 0):
            raise DegenerateDesign(
                "coordinates without design support carry a nonzero linear term"
            )
        cols = cols[~dead]
        Z = problem.design[np.ix_(data_rows, cols)]
        c = problem.linear_term[cols].copy()

    pen = np.nonzero(gamma[cols] > 0.0)[0]  # positions within cols
    p = len(cols)
    E = np.zeros((len(pen), p))
    E[np.arange(len(pen)), pen] = 1.0
    A = np.concatenate([Z, E], axis=0)
    y = np.concatenate([problem.responses[data_rows], np.zeros(len(pen))])
    w = np.concatenate([problem.abs_weights[data_rows], gamma[cols][pen]])
    pen_coord = np.concatenate(
        [np.full(len(data_rows), -1, dtype=np.int64), pen.astype(np.int64)]
    )
    return _Assembled(np.ascontiguousarray(A), y, w, c, cols, data_rows, pen_coord)


def _snap_zeros(asm: _Assembled, basis: np.ndarray) -> np.ndarray:
    """Solve the basis system with penalty-row coordinates pinned to 0.0."""
    p = asm.A.shape[1]
    fixed_pos = asm.pen_coord[basis]
    fixed = fixed_pos[fixed_pos >= 0]
    b = np.zeros(p)
    free = np.setdiff1d(np.arange(p), fixed)
    if free.size:
        rows = basis[fixed_pos < 0]
        M = asm.A[np.ix_(rows, free)]
        rhs = asm.y[rows]
        try:
            b[free] = np.linalg.solve(M, rhs)
        except np.linalg.LinAlgError:
            b[free] = np.linalg.lstsq(M, rhs, rcond=None)[0]
    return b


def _solve_reduced(problem: PWLProblem, warm_basis=None, backend=None):
    """Solve and return (full-dimension values, assembled data, basis)."""
    asm = _assemble(problem)
    d = problem.dim
    if asm.A.shape[1] == 0:
        return np.zeros(d), asm, np.zeros(0, dtype=np.int64)
    kern = _kernel(backend)
    m = asm.A.shape[0]
    n_data = len(asm.data_rows)
    scan = np.r_[np.arange(n_data, m), np.arange(n_data)].astype(np.int64)
    status, b, basis, _ = kern(asm.A, asm.y, asm.w, asm.c, warm_basis, 0, scan)
    if status == _pwl_py.UNBOUNDED:
        raise UnboundedObjective("objective decreases without bound")
    if status == _pwl_py.SINGULAR:
        raise DegenerateDesign("active rows do not span the reduced coordinate space")
    if status == _pwl_py.MAXITER:
        raise SolverNumericalError("pivot budget exhausted")
    b = _snap_zeros(asm, basis)
    if np.abs(b).max(initial=0.0) > problem.box_bound:
        raise UnboundedObjective("solution escaped the safeguard box")
    full = np.zeros(d)
    full[asm.cols] = b
    return full, asm, basis


def solve_pwl_l1(problem: PWLProblem, backend: str | None = None) -> CoefVector:
    """Exact minimizer of the piecewise-linear objective.

    Deterministic: identical inputs produce bit-identical outputs.
    Coordinates with infinite L1 weight are exactly zero in the result.
    """
    full, _, _ = _solve_reduced(problem, None, backend)
    return CoefVector(full)


def objective_value(problem: PWLProblem, b) -> float:
    """F(b); +inf when b violates an infinite-penalty constraint."""
    b = np.asarray(b, dtype=np.float64)
    r = problem.responses - problem.design @ b
    val = float(np.dot(problem.abs_weights, np.abs(r)) + np.dot(problem.linear_term, b))
    gamma = problem.l1_weights
    inf_mask = np.isinf(gamma)
    if np.any(inf_mask & (b != 0.0)):
        return np.inf
    fin = ~inf_mask
    val += float(np.dot(gamma[fin], np.abs(b[fin])))
    return val


def directional_derivative(problem: PWLProblem, b, xi) -> float:
    """One-sided derivative of F at b in direction xi.

    Kinks (interpolated rows, zero coordinates) contribute their absolute
    terms; ties are detected with a relative tolerance so that solver
    output (interpolation exact to rounding) is classified correctly.
    """
    b = np.asarray(b, dtype=np.float64)
    xi = np.asarray(xi, dtype=np.float64)
    r = problem.responses - problem.design @ b
    zxi = problem.design @ xi
    scale = 1.0 + np.abs(problem.responses) + np.abs(problem.design) @ np.abs(b)
    at_kink = np.abs(r) <= 1e-9 * scale
    sgn = np.sign(r)
    sgn[at_kink] = 0.0
    a = problem.abs_weights
    val = float(-np.dot(a * sgn, zxi) + np.dot(a[at_kink], np.abs(zxi[at_kink])))
    val += float(np.dot(problem.linear_term, xi))

    gamma = problem.l1_weights
    bscale = 1e-12 * (1.0 + np.abs(b).max(initial=0.0))
    for k in range(problem.dim):
        gk = gamma[k]
        if gk == 0.0 or xi[k] == 0.0:
            continue
        if np.isinf(gk):
            return np.inf
        if abs(b[k]) <= bscale:
            val += gk * abs(xi[k])
        else:
            val += gk * np.sign(b[k]) * xi[k]
    return val


class OptimalityReport(NamedTuple):
    ok: bool
    worst_value: float
    worst_direction: np.ndarray


def check_optimality(
    problem: PWLProblem,
    b,
    tol: float = 1e-8,
    n_random_dirs: int = 50,
    seed: int = 0,
) -> OptimalityReport:
    """Subgradient optimality along +-e_k and seeded random directions.

    Passes iff the one-sided derivative is >= -tol * (1 + ||xi||_1) in
    every probed direction.  Coordinates with infinite penalty are
    skipped (they are constrained, not free).
    """
    if not tol > 0:
        raise ValueError("tol must be positive")
    b = np.asarray(b, dtype=np.float64)
    d = problem.dim
    free = np.isfinite(problem.l1_weights)
    dirs = []
    for k in range(d):
        if not free[k]:
            continue
        e = np.zeros(d)
        e[k] = 1.0
        dirs.append(e)
        dirs.append(-e)
    rng = np.random.Generator(np.random.Philox(np.random.SeedSequence(seed)))
    for _ in range(n_random_dirs):
        v = rng.standard_normal(d)
        v[~free] = 0.0
        norm = np.linalg.norm(v)
        if norm == 0.0:
            continue
        dirs.append(v / norm)

    ok = True
    worst_val = np.inf
    worst_dir = np.zeros(d)
    for xi in dirs:
        val = directional_derivative(problem, b, xi)
        margin = val + tol * (1.0 + np.abs(xi).sum())
        if val < worst_val:
            worst_val = val
            worst_dir = xi
        if margin < 0:
            ok = False
    return OptimalityReport(ok, float(worst_val), worst_dir)


def brute_force_solve(problem: PWLProblem) -> CoefVector:
    """Enumeration oracle: evaluate F at every candidate vertex.

    Candidates are solutions of p-subsets of the data hyperplanes
    {x_i = z_i·b} (rows with positive weight) and the coordinate planes
    {b_k = 0}.  Ties in the objective are broken toward the
    lexicographically smallest coefficient vector.
    """
    if problem.dim > 3 or problem.n > 12:
        raise InstanceTooLarge("brute force limited to d <= 3, n <= 12")
    gamma = problem.l1_weights
    cols = np.nonzero(np.isfinite(gamma))[0]
    d = problem.dim
    p = len(cols)
    if p == 0:
        return CoefVector(np.zeros(d))

    keep = problem.abs_weights > 0.0
    planes = [
        (problem.design[i, cols], problem.responses[i]) for i in np.nonzero(keep)[0]
    ]
    for j in range(p):
        e = np.zeros(p)
        e[j] = 1.0
        planes.append((e, 0.0))

    best_obj = np.inf
    best_b = None
    scale = 1.0 + max((np.abs(v).max() for v, _ in planes), default=0.0)
    for subset in itertools.combinations(range(len(planes)), p):
        M = np.array([planes[i][0] for i in subset])
        rhs = np.array([planes[i][1] for i in subset])
        if abs(np.linalg.det(M)) <= 1e-10 * scale**p:
            continue
        sol = np.linalg.solve(M, rhs)
        full = np.zeros(d)
        full[cols] = sol
        # Pin exact zeros introduced by coordinate planes.
        for i in subset:
            if i >= len(planes) - p:
                full[cols[i - (len(planes) - p)]] = 0.0
        obj = objective_value(problem, full)
        if best_b is None:
            best_obj, best_b = obj, full
        elif obj < best_obj - 1e-12 * (1.0 + abs(best_obj)):
            best_obj, best_b = obj, full
        elif obj <= best_obj + 1e-12 * (1.0 + abs(best_obj)):
            if tuple(full) < tuple(best_b):
                best_b = full
    if best_b is None:
        raise DegenerateDesign("no nondegenerate vertex found")
    return CoefVector(best_b)


def solve_weighted_qr(responses, design, weights, tau: float, backend=None) -> CoefVector:
    """Weighted check-loss regression, solved through the PWL form.

    rho_tau(r) = |r|/2 + (tau - 1/2) r, so the weighted check loss equals
    an absolute-deviation term plus a linear term (up to a constant).
    """
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    responses = np.asarray(responses, dtype=np.float64)
    design = np.atleast_2d(np.asarray(design, dtype=np.float64))
    weights = np.asarray(weights, dtype=np.float64)
    if np.any(weights < 0):
        raise ValueError("weights must be nonnegative")
    c = -(tau - 0.5) * design.T @ weights
    prob = PWLProblem(
        responses=responses,
        design=design,
        abs_weights=0.5 * weights,
        linear_term=c,
    )
    return solve_pwl_l1(prob, backend=backend)
