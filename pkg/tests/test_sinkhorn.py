import numpy as np
import pytest

from invot import (
    DualPotentials,
    ProbabilityVector,
    SolverConfig,
    dual_objective,
    entropy,
    plan_from_duals,
    sinkhorn_solve,
    validate_plan,
)
from invot.errors import NotConverged, NumericalOverflow
from conftest import random_plan

half = ProbabilityVector(np.array([0.5, 0.5]))


def tight(max_iter=10000, **kw):
    return SolverConfig(max_iter=max_iter, tol=1e-12, **kw)


def newton_2x2_plan(c, mu, nu, eps):
    """Dense Newton oracle on the 2x2 dual with the last potential pinned."""
    phi = np.zeros(3)  # (alpha_0, alpha_1, beta_0); beta_1 = 0

    def plan(p):
        alpha = np.array([p[0], p[1]])
        beta = np.array([p[2], 0.0])
        return np.exp((alpha[:, None] + beta[None, :] - c) / eps)

    for _ in range(200):
        pi = plan(phi)
        grad = np.array([pi[0].sum() - mu[0], pi[1].sum() - mu[1],
                         pi[:, 0].sum() - nu[0]])
        hess = np.array([
            [pi[0].sum(), 0.0, pi[0, 0]],
            [0.0, pi[1].sum(), pi[1, 0]],
            [pi[0, 0], pi[1, 0], pi[:, 0].sum()],
        ]) / eps
        step = np.linalg.solve(hess, grad)
        phi = phi - step
        if np.abs(grad).max() < 1e-14:
            break
    return plan(phi)


class TestSinkhornSolve:
    def test_zero_cost_gives_independent_coupling(self):
        result = sinkhorn_solve(np.zeros((2, 2)), half, half, tight())
        assert np.allclose(result.plan.matrix, 0.25, atol=1e-12)

    def test_single_row_forced_by_feasibility(self, rng):
        mu = ProbabilityVector(np.array([1.0]))
        nu = ProbabilityVector(np.array([0.2, 0.3, 0.5]))
        result = sinkhorn_solve(rng.normal(size=(1, 3)), mu, nu, tight())
        assert np.allclose(result.plan.matrix[0], nu.values, atol=1e-10)

    def test_matches_dense_newton_oracle(self):
        c = np.array([[0.0, 1.0], [1.0, 0.0]])
        eps = 0.5
        result = sinkhorn_solve(c, half, half, tight(epsilon=eps))
        oracle = newton_2x2_plan(c, half.values, half.values, eps)
        assert np.allclose(result.plan.matrix, oracle, atol=1e-8)

    def test_plan_consistent_with_duals(self, rng):
        c = rng.uniform(0, 1, size=(4, 5))
        mu = ProbabilityVector(rng.dirichlet(np.ones(4) * 5))
        nu = ProbabilityVector(rng.dirichlet(np.ones(5) * 5))
        result = sinkhorn_solve(c, mu, nu, tight(epsilon=0.7))
        rebuilt = plan_from_duals(result.duals, c)
        rel = np.abs(rebuilt - result.plan.matrix) / result.plan.matrix
        assert rel.max() <= 1e-12

    def test_not_converged_carries_best_iterate(self):
        c = np.array([[0.0, 1.0], [0.5, 0.2]])
        mu = ProbabilityVector(np.array([0.9, 0.1]))
        with pytest.raises(NotConverged) as err:
            sinkhorn_solve(c, mu, half,
                           SolverConfig(epsilon=0.05, max_iter=2, tol=1e-15))
        best = err.value.result
        assert best is not None
        assert best.report.iterations == 2

    def test_direct_mode_overflow_is_loud(self):
        c = np.array([[0.0, 2000.0], [2000.0, 0.0]])
        mu = ProbabilityVector(np.array([0.9, 0.1]))
        with pytest.raises(NumericalOverflow):
            sinkhorn_solve(c, mu, half, tight(epsilon=1.0), mode="direct")

    def test_auto_switches_to_log_domain(self):
        c = np.array([[0.0, 2000.0], [2000.0, 0.0]])
        mu = ProbabilityVector(np.array([0.9, 0.1]))
        result = sinkhorn_solve(c, mu, half, tight(epsilon=1.0), mode="auto")
        assert result.report.extras["log_domain"]
        assert result.report.feasibility_residual <= 1e-12

    def test_log_and_direct_modes_agree(self, rng):
        c = rng.uniform(0, 1, size=(3, 3))
        mu = ProbabilityVector(rng.dirichlet(np.ones(3) * 5))
        nu = ProbabilityVector(rng.dirichlet(np.ones(3) * 5))
        a = sinkhorn_solve(c, mu, nu, tight(epsilon=0.3), mode="direct")
        b = sinkhorn_solve(c, mu, nu, tight(epsilon=0.3), mode="log")
        assert np.allclose(a.plan.matrix, b.plan.matrix, atol=1e-10)


class TestPlanFromDuals:
    def test_zero_everything_gives_all_ones(self):
        duals = DualPotentials(np.zeros(2), np.zeros(3), epsilon=1.0)
        assert np.array_equal(plan_from_duals(duals, np.zeros((2, 3))),
                              np.ones((2, 3)))

    def test_log_marginal_duals_give_product_coupling(self, rng):
        mu = rng.dirichlet(np.ones(3) * 5)
        nu = rng.dirichlet(np.ones(4) * 5)
        eps = 0.8
        duals = DualPotentials(eps * np.log(mu), eps * np.log(nu), epsilon=eps)
        assert np.allclose(plan_from_duals(duals, np.zeros((3, 4))),
                           np.outer(mu, nu), atol=1e-15)

    def test_solver_duals_pass_validation(self, rng):
        c = rng.uniform(0, 1, size=(3, 3))
        mu = ProbabilityVector(rng.dirichlet(np.ones(3) * 5))
        nu = ProbabilityVector(rng.dirichlet(np.ones(3) * 5))
        result = sinkhorn_solve(c, mu, nu, SolverConfig(max_iter=5000, tol=1e-9))
        validate_plan(plan_from_duals(result.duals, c), mu, nu, feas_tol=1e-8)

    def test_overflow_guard(self):
        duals = DualPotentials(np.array([800.0]), np.zeros(1), epsilon=1.0)
        with pytest.raises(NumericalOverflow):
            plan_from_duals(duals, np.zeros((1, 1)))

    def test_shift_invariance_exact(self, rng):
        c = rng.normal(size=(3, 4))
        alpha = rng.normal(size=3)
        beta = rng.normal(size=4)
        t = 0.625  # power of two so the shift is exact in floats
        base = plan_from_duals(DualPotentials(alpha, beta, 1.0), c)
        shifted = plan_from_duals(DualPotentials(alpha + t, beta - t, 1.0), c)
        assert np.array_equal(base, shifted)


class TestDualObjective:
    def test_zero_everything(self, rng):
        mu = ProbabilityVector(rng.dirichlet(np.ones(3) * 5))
        nu = ProbabilityVector(rng.dirichlet(np.ones(4) * 5))
        duals = DualPotentials(np.zeros(3), np.zeros(4), epsilon=1.0)
        got = dual_objective(duals, np.zeros((3, 4)), mu, nu)
        assert got == pytest.approx(-12.0, abs=1e-12)

    def test_optimal_zero_cost_value(self, rng):
        mu = rng.dirichlet(np.ones(3) * 5)
        nu = rng.dirichlet(np.ones(4) * 5)
        duals = DualPotentials(np.log(mu), np.log(nu), epsilon=1.0)
        expect = float(mu @ np.log(mu) + nu @ np.log(nu) - 1.0)
        got = dual_objective(duals, np.zeros((3, 4)),
                             ProbabilityVector(mu), ProbabilityVector(nu))
        assert got == pytest.approx(expect, abs=1e-12)

    def test_strong_duality_at_convergence(self, rng):
        c = rng.uniform(0, 1, size=(3, 3))
        mu = ProbabilityVector(rng.dirichlet(np.ones(3) * 5))
        nu = ProbabilityVector(rng.dirichlet(np.ones(3) * 5))
        eps = 0.4
        result = sinkhorn_solve(c, mu, nu, tight(epsilon=eps))
        primal = float((c * result.plan.matrix).sum()) - eps * entropy(result.plan)
        assert result.dual_objective == pytest.approx(primal, abs=1e-6)


class TestProperties:
    def test_plan_invariant_under_joint_scaling(self, rng):
        c = rng.uniform(0, 1, size=(4, 4))
        mu = ProbabilityVector(rng.dirichlet(np.ones(4) * 5))
        nu = ProbabilityVector(rng.dirichlet(np.ones(4) * 5))
        base = sinkhorn_solve(c, mu, nu, tight(epsilon=0.5)).plan.matrix
        for k in (0.1, 2.0, 10.0):
            scaled = sinkhorn_solve(k * c, mu, nu,
                                    tight(epsilon=0.5 * k)).plan.matrix
            assert np.abs(scaled - base).max() <= 1e-8

    def test_residual_trace_eventually_monotone(self, rng):
        for trial in range(5):
            c = rng.uniform(0, 1, size=(6, 6))
            mu = ProbabilityVector(rng.dirichlet(np.ones(6) * 5))
            nu = ProbabilityVector(rng.dirichlet(np.ones(6) * 5))
            result = sinkhorn_solve(c, mu, nu, tight(epsilon=0.2))
            trace = result.report.extras["residual_trace"]
            tail = trace[len(trace) // 10:]
            assert np.all(np.diff(tail) <= 1e-15)

    def test_large_epsilon_approaches_product_coupling(self, rng):
        for trial in range(5):
            # sup-norm of the cost kept below 1; the residual coupling gap
            # scales like the centered cost spread divided by epsilon
            c = rng.uniform(0, 0.3, size=(5, 5))
            mu = ProbabilityVector(rng.dirichlet(np.ones(5) * 5))
            nu = ProbabilityVector(rng.dirichlet(np.ones(5) * 5))
            plan = sinkhorn_solve(c, mu, nu, tight(epsilon=100.0)).plan.matrix
            gap = np.abs(plan - np.outer(mu.values, nu.values)).sum()
            assert gap <= 1e-3

    def test_feasibility_contract(self, rng):
        result = sinkhorn_solve(rng.uniform(0, 1, size=(7, 7)),
                                *_marginals(rng, 7),
                                SolverConfig(max_iter=20000, tol=1e-9))
        assert result.plan.row_residual <= 1e-8
        assert result.plan.col_residual <= 1e-8


def _marginals(rng, n):
    return (ProbabilityVector(rng.dirichlet(np.ones(n) * 5)),
            ProbabilityVector(rng.dirichlet(np.ones(n) * 5)))
