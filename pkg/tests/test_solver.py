import numpy as np
import pytest

from cqrp.errors import DegenerateDesign, InstanceTooLarge, UnboundedObjective
from cqrp.solver import (
    PWLProblem,
    brute_force_solve,
    check_optimality,
    directional_derivative,
    objective_value,
    solve_pwl_l1,
    solve_weighted_qr,
)

INF = np.inf


def median_problem(c=0.0, gamma=0.0):
    return PWLProblem(
        responses=[1.0, 2.0, 4.0],
        design=[[1.0], [1.0], [1.0]],
        abs_weights=[1.0, 1.0, 1.0],
        linear_term=[c],
        l1_weights=[gamma],
    )


def random_problem(rng, bounded=True):
    """Small random instance; the linear term is a sub-convex combination
    of weighted design rows, which keeps the objective provably bounded."""
    n = int(rng.integers(1, 13))
    d = int(rng.integers(1, 4))
    z = rng.normal(size=(n, d))
    x = rng.normal(size=n) * 2.0
    a = rng.uniform(0.1, 1.0, size=n)
    a[rng.random(n) < 0.2] = 0.0
    if bounded:
        theta = rng.uniform(-0.8, 0.8, size=n)
        c = (theta * a) @ z
    else:
        c = rng.normal(size=d) * 5.0
    gamma = np.zeros(d)
    mode = rng.random(d)
    gamma[mode < 0.4] = rng.uniform(0.05, 2.0)
    gamma[mode > 0.9] = INF
    # With inf-penalized or zero-weight-heavy draws the reduced rows can
    # lose rank; retry at call site if that happens.
    return PWLProblem(x, z, a, c, gamma)


class TestSolveBasics:
    def test_single_point_interpolation(self):
        prob = PWLProblem([0.0], [[1.0]], [1.0], [0.0], [0.0])
        assert solve_pwl_l1(prob).values[0] == pytest.approx(0.0, abs=1e-12)

    def test_unweighted_median(self):
        assert solve_pwl_l1(median_problem()).values[0] == pytest.approx(2.0)

    def test_penalty_pins_to_zero(self):
        # right derivative at 0+ is (#below - #above) + gamma = -1 - 2 + 3 = 0
        b = solve_pwl_l1(median_problem(gamma=3.0)).values[0]
        assert b == 0.0

    def test_linear_term_moves_optimum_to_breakpoint(self):
        b = solve_pwl_l1(median_problem(c=-1.5)).values[0]
        assert b == pytest.approx(4.0)

    def test_inf_weight_exact_zero(self):
        rng = np.random.default_rng(5)
        z = rng.normal(size=(8, 3))
        prob = PWLProblem(
            rng.normal(size=8), z, np.ones(8), np.zeros(3), [0.0, INF, 0.0]
        )
        out = solve_pwl_l1(prob)
        assert out.values[1] == 0.0
        assert 1 not in out.active_set

    def test_determinism_bit_identical(self):
        rng = np.random.default_rng(17)
        prob = random_problem(rng)
        a = solve_pwl_l1(prob).values
        b = solve_pwl_l1(prob).values
        assert a.tobytes() == b.tobytes()

    def test_unbounded_raises(self):
        prob = PWLProblem([0.0], [[1.0]], [1.0], [3.0], [0.0])
        with pytest.raises(UnboundedObjective):
            solve_pwl_l1(prob)

    def test_dead_column_with_linear_term_raises(self):
        prob = PWLProblem(
            [1.0, 2.0],
            [[1.0, 0.0], [1.0, 0.0]],
            [1.0, 1.0],
            [0.0, 0.5],
            [0.0, 0.0],
        )
        with pytest.raises(DegenerateDesign):
            solve_pwl_l1(prob)

    def test_dead_column_without_linear_term_is_zero(self):
        prob = PWLProblem(
            [1.0, 2.0],
            [[1.0, 0.0], [1.0, 0.0]],
            [1.0, 1.0],
            [0.0, 0.0],
            [0.0, 0.0],
        )
        out = solve_pwl_l1(prob)
        assert out.values[1] == 0.0
        assert out.values[0] == pytest.approx(1.0)  # lower median breakpoint


class TestDirectionalDerivative:
    def test_zero_direction(self):
        prob = median_problem()
        assert directional_derivative(prob, [2.0], [0.0]) == 0.0

    def test_kink_contribution_at_median(self):
        # at b=2, xi=+1: a2*|1| + (#{X<2} - #{X>2}) = 1 + 0 = 1
        prob = median_problem()
        assert directional_derivative(prob, [2.0], [1.0]) == pytest.approx(1.0)

    def test_minimizer_has_nonnegative_coordinate_derivatives(self):
        rng = np.random.default_rng(33)
        for _ in range(20):
            prob = random_problem(rng)
            try:
                b = solve_pwl_l1(prob).values
            except DegenerateDesign:
                continue
            d = prob.dim
            vals = []
            for k in range(d):
                if np.isinf(prob.l1_weights[k]):
                    continue
                e = np.zeros(d)
                e[k] = 1.0
                vals.append(directional_derivative(prob, b, e))
                vals.append(directional_derivative(prob, b, -e))
            assert min(vals) >= -1e-8

    def test_inf_coordinate_direction_is_inf(self):
        prob = PWLProblem([1.0], [[1.0, 0.5]], [1.0], [0.0, 0.0], [0.0, INF])
        xi = np.array([0.0, 1.0])
        assert directional_derivative(prob, [1.0, 0.0], xi) == np.inf


class TestCheckOptimality:
    def test_solver_output_passes(self):
        rng = np.random.default_rng(7)
        for _ in range(30):
            prob = random_problem(rng)
            try:
                b = solve_pwl_l1(prob).values
            except DegenerateDesign:
                continue
            rep = check_optimality(prob, b, tol=1e-8, n_random_dirs=50, seed=3)
            assert rep.ok, rep

    def test_perturbed_point_fails(self):
        prob = median_problem()
        rep = check_optimality(prob, [2.1], tol=1e-8, n_random_dirs=10, seed=0)
        assert not rep.ok
        assert rep.worst_value < 0

    def test_constrained_coordinate_skipped(self):
        rng = np.random.default_rng(11)
        z = rng.normal(size=(6, 2))
        prob = PWLProblem(
            rng.normal(size=6), z, np.ones(6), np.zeros(2), [0.0, INF]
        )
        b = solve_pwl_l1(prob).values
        rep = check_optimality(prob, b, tol=1e-8, n_random_dirs=20, seed=1)
        assert rep.ok


class TestBruteForceOracle:
    def test_median_matches(self):
        assert brute_force_solve(median_problem()).values[0] == pytest.approx(2.0)

    def test_exactly_determined_system(self):
        z = np.array([[1.0, 0.0], [0.0, 1.0]])
        prob = PWLProblem([3.0, -1.0], z, [1.0, 1.0], [0.0, 0.0], [0.0, 0.0])
        out = brute_force_solve(prob)
        assert np.allclose(out.values, [3.0, -1.0])
        assert objective_value(prob, out.values) == pytest.approx(0.0)

    def test_too_large_raises(self):
        rng = np.random.default_rng(0)
        prob = PWLProblem(
            rng.normal(size=13),
            rng.normal(size=(13, 2)),
            np.ones(13),
            np.zeros(2),
        )
        with pytest.raises(InstanceTooLarge):
            brute_force_solve(prob)

    def test_oracle_equivalence_200_instances(self):
        rng = np.random.default_rng(2024)
        done = 0
        while done < 200:
            prob = random_problem(rng)
            try:
                b = solve_pwl_l1(prob).values
            except DegenerateDesign:
                continue
            ref = brute_force_solve(prob).values
            fa = objective_value(prob, b)
            fb = objective_value(prob, ref)
            assert abs(fa - fb) <= 1e-8 * (1.0 + abs(fb)), (fa, fb, prob)
            done += 1


class TestWeightedQR:
    def test_median_of_five(self):
        out = solve_weighted_qr([1, 2, 3, 4, 5], np.ones((5, 1)), np.ones(5), 0.5)
        assert out.values[0] == pytest.approx(3.0)

    def test_tau_03_order_statistic(self):
        out = solve_weighted_qr([1, 2, 3, 4, 5], np.ones((5, 1)), np.ones(5), 0.3)
        assert out.values[0] == pytest.approx(2.0)

    def test_exact_interpolation_square_design(self):
        rng = np.random.default_rng(4)
        z = rng.normal(size=(3, 3)) + np.eye(3)
        x = rng.normal(size=3)
        out = solve_weighted_qr(x, z, np.ones(3), 0.4)
        assert np.allclose(z @ out.values, x, atol=1e-9)

    def test_weighted_quantile(self):
        # weights concentrate mass on one point; that point is the optimum
        out = solve_weighted_qr(
            [1.0, 5.0, 9.0], np.ones((3, 1)), [0.1, 5.0, 0.1], 0.5
        )
        assert out.values[0] == pytest.approx(5.0)
