import numpy as np
import pytest

from invot import (
    CostParameterization,
    FeedForwardNet,
    SampleSet,
    TrainConfig,
    eval_cost_on_grid,
    loss_eval,
    mc_integral_importance,
    mc_integral_uniform,
    net_forward,
    train,
    xavier_init,
)
from invot.errors import Diverged, UnreliableEstimate


class FnNet:
    """Duck-typed scalar function standing in for a network."""

    def __init__(self, fn, input_dim):
        self.fn = fn
        self.input_dim = input_dim

    def forward_batch(self, X):
        X = np.atleast_2d(np.asarray(X, dtype=float))
        return self.fn(X), None


class FnCost:
    def __init__(self, fn):
        self.fn = fn

    def evaluate(self, X, Y):
        return self.fn(np.atleast_2d(X), np.atleast_2d(Y))


ZERO_1D = FnNet(lambda X: np.zeros(X.shape[0]), 1)
ZERO_COST = FnCost(lambda X, Y: np.zeros(X.shape[0]))
UNIT_BOX = ((0.0, 1.0), (0.0, 1.0))


def zero_net(dims, activation="identity"):
    net = xavier_init(dims, activation, seed=0)
    net.set_parameters([np.zeros_like(p) for p in net.parameters()])
    return net


class TestUniformEstimator:
    def test_constant_integrand_unit_box(self):
        got = mc_integral_uniform(ZERO_1D, ZERO_1D, ZERO_COST, UNIT_BOX,
                                  n_s=100, seed=0)
        assert got == 1.0

    def test_volume_factor(self):
        box = ((0.0, 2.0), (0.0, 1.0))
        got = mc_integral_uniform(ZERO_1D, ZERO_1D, ZERO_COST, box,
                                  n_s=100, seed=0)
        assert got == 2.0

    def test_exponential_integral(self):
        # integral of e^x over the unit square is e - 1; the estimator must
        # land within three standard errors of it
        alpha = FnNet(lambda X: X[:, 0], 1)
        n_s = 1_000_000
        got = mc_integral_uniform(alpha, ZERO_1D, ZERO_COST, UNIT_BOX,
                                  n_s=n_s, seed=42)
        var = (np.e ** 2 - 1) / 2 - (np.e - 1) ** 2
        assert abs(got - (np.e - 1)) <= 3.0 * np.sqrt(var / n_s)

    def test_standard_deviation_scales_inverse_sqrt(self):
        alpha = FnNet(lambda X: np.sin(3 * X[:, 0]), 1)
        cost = FnCost(lambda X, Y: 0.5 * (X[:, 0] - Y[:, 0]) ** 2)
        stds = []
        for k, n_s in enumerate((1000, 10000, 100000)):
            draws = [mc_integral_uniform(alpha, ZERO_1D, cost, UNIT_BOX,
                                         n_s=n_s, seed=1000 * k + s)
                     for s in range(300)]
            stds.append(np.std(draws))
        for k in range(2):
            ratio = stds[k] / stds[k + 1]
            assert abs(ratio - np.sqrt(10.0)) / np.sqrt(10.0) <= 0.2


class TestImportanceEstimator:
    def test_matched_proposal_zero_variance(self):
        log_norm = 0.5 * np.log(2 * np.pi)
        alpha = FnNet(lambda X: -0.5 * X[:, 0] ** 2 - log_norm, 1)
        beta = FnNet(lambda Y: -0.5 * Y[:, 0] ** 2 - log_norm, 1)
        got = [mc_integral_importance(alpha, beta, ZERO_COST,
                                      mean=np.zeros(2), cov=np.eye(2),
                                      n_s=200, seed=s) for s in range(5)]
        assert np.allclose(got, 1.0, atol=1e-12)

    def test_flat_integrand_rejected_by_variance_guard(self):
        with pytest.raises(UnreliableEstimate):
            mc_integral_importance(ZERO_1D, ZERO_1D, ZERO_COST,
                                   mean=np.zeros(2), cov=np.eye(2),
                                   n_s=5000, seed=0)

    def test_matched_gaussian_beats_uniform_budget(self):
        alpha = FnNet(lambda X: -0.5 * X[:, 0] ** 2, 1)
        beta = FnNet(lambda Y: -0.5 * Y[:, 0] ** 2, 1)
        box = ((-5.0, 5.0), (-5.0, 5.0))
        imp = [mc_integral_importance(alpha, beta, ZERO_COST,
                                      mean=np.zeros(2), cov=np.eye(2),
                                      n_s=500, seed=s) for s in range(100)]
        uni = [mc_integral_uniform(alpha, beta, ZERO_COST, box,
                                   n_s=500, seed=s) for s in range(100)]
        assert np.std(imp) < np.std(uni)
        assert np.mean(imp) == pytest.approx(2 * np.pi, rel=1e-10)


class TestLossEval:
    def test_all_zero_nets_unit_box(self, rng):
        xb = rng.random((10, 1))
        yb = rng.random((10, 1))
        got = loss_eval(ZERO_1D, ZERO_1D, ZERO_COST, xb, yb, xb, yb,
                        integral_estimate=1.0)
        assert got == 1.0

    def test_plan_values_invariant_under_joint_scaling(self, rng):
        a = rng.normal(size=50)
        b = rng.normal(size=50)
        c = rng.normal(size=50)
        for k in (0.5, 2.0, 8.0):  # powers of two keep the scaling exact
            assert np.array_equal(np.exp((k * a + k * b - k * c) / k),
                                  np.exp(a + b - c))

    def test_matches_term_by_term_oracle(self, rng):
        alpha = xavier_init([1, 6, 1], "identity", seed=1)
        beta = xavier_init([1, 6, 1], "identity", seed=2)
        cost = CostParameterization(
            "absdiff", xavier_init([1, 6, 1], "relu", seed=3))
        xb = rng.random((7, 1))
        yb = rng.random((9, 1))
        px = rng.random((5, 1))
        py = rng.random((5, 1))
        expect = 0.3  # regularizer value passed straight through
        expect -= np.mean([net_forward(alpha, x) for x in xb])
        expect -= np.mean([net_forward(beta, y) for y in yb])
        expect += np.mean([net_forward(cost.net, abs(x - y))
                           for x, y in zip(px, py)])
        expect += 0.8
        got = loss_eval(alpha, beta, cost, xb, yb, px, py,
                        integral_estimate=0.8, regularizer_value=0.3)
        assert got == pytest.approx(expect, abs=1e-12)


class TestGridEval:
    def test_zero_net(self, rng):
        cost = CostParameterization("absdiff", zero_net([1, 4, 1], "relu"))
        out = eval_cost_on_grid(cost, rng.random((20, 1)), rng.random((20, 1)))
        assert np.array_equal(out, np.zeros(20))

    def test_absdiff_symmetry_exact(self, rng):
        cost = CostParameterization(
            "absdiff", xavier_init([2, 8, 1], "relu", seed=4))
        X = rng.random((40, 2))
        Y = rng.random((40, 2))
        assert np.array_equal(cost.evaluate(X, Y), cost.evaluate(Y, X))

    def test_matches_pointwise_forward(self, rng):
        cost = CostParameterization(
            "raw", xavier_init([2, 8, 1], "relu", seed=5))
        X = rng.random((15, 1))
        Y = rng.random((15, 1))
        out = eval_cost_on_grid(cost, X, Y)
        for k in range(15):
            assert out[k] == pytest.approx(
                net_forward(cost.net, np.concatenate([X[k], Y[k]])),
                abs=1e-12)

    def test_relu_output_nonnegative(self, rng):
        cost = CostParameterization(
            "absdiff", xavier_init([1, 20, 20, 20, 1], "relu", seed=6))
        out = eval_cost_on_grid(cost, rng.random((200, 1)),
                                rng.random((200, 1)))
        assert np.all(out >= 0)


class TestLossGradients:
    def test_assembled_gradient_matches_finite_differences(self, rng):
        # full loss with frozen collocation points; analytic gradients are
        # assembled from weighted batched backward passes and checked against
        # central differences at h = 1e-5
        alpha = xavier_init([1, 5, 1], "identity", seed=11)
        beta = xavier_init([1, 5, 1], "identity", seed=12)
        cnet = xavier_init([1, 5, 1], "relu", seed=13)
        xb = rng.random((6, 1))
        yb = rng.random((6, 1))
        col_x = rng.random((8, 1))
        col_y = rng.random((8, 1))

        def nets_from(params):
            cut = [5, 10]
            mk = lambda dims, ps, act: FeedForwardNet(
                layer_dims=dims, weights=list(ps[0::2]),
                biases=list(ps[1::2]), output_activation=act)
            return (mk([1, 5, 1], params[0], "identity"),
                    mk([1, 5, 1], params[1], "identity"),
                    mk([1, 5, 1], params[2], "relu"))

        def loss(params):
            a, b, c = nets_from(params)
            av, _ = a.forward_batch(xb)
            bv, _ = b.forward_batch(yb)
            cv, _ = c.forward_batch(np.abs(xb - yb))
            ac, _ = a.forward_batch(col_x)
            bc, _ = b.forward_batch(col_y)
            cc, _ = c.forward_batch(np.abs(col_x - col_y))
            integral = float(np.mean(np.exp(ac + bc - cc)))
            return (-float(np.mean(av)) - float(np.mean(bv))
                    + float(np.mean(cv)) + integral)

        params = [[p.copy() for p in alpha.parameters()],
                  [p.copy() for p in beta.parameters()],
                  [p.copy() for p in cnet.parameters()]]
        a, b, c = nets_from(params)
        av, cache_a = a.forward_batch(xb)
        bv, cache_b = b.forward_batch(yb)
        cv, cache_c = c.forward_batch(np.abs(xb - yb))
        ac, cache_ac = a.forward_batch(col_x)
        bc, cache_bc = b.forward_batch(col_y)
        cc, cache_cc = c.forward_batch(np.abs(col_x - col_y))
        g_vals = np.exp(ac + bc - cc)
        w_col = g_vals / 8.0
        grads = [
            [x + y for x, y in zip(a.backward_batch(cache_a, -np.ones(6) / 6),
                                   a.backward_batch(cache_ac, w_col))],
            [x + y for x, y in zip(b.backward_batch(cache_b, -np.ones(6) / 6),
                                   b.backward_batch(cache_bc, w_col))],
            [x + y for x, y in zip(c.backward_batch(cache_c, np.ones(6) / 6),
                                   c.backward_batch(cache_cc, -w_col))],
        ]
        h = 1e-5
        for ni in range(3):
            for pi in range(len(params[ni])):
                flat = rng.integers(params[ni][pi].size)
                idx = np.unravel_index(flat, params[ni][pi].shape)
                up = [[p.copy() for p in group] for group in params]
                dn = [[p.copy() for p in group] for group in params]
                up[ni][pi][idx] += h
                dn[ni][pi][idx] -= h
                fd = (loss(up) - loss(dn)) / (2 * h)
                an = grads[ni][pi][idx]
                if abs(an) < 1e-8:
                    assert abs(fd - an) <= 1e-8
                else:
                    assert abs(fd - an) / abs(an) <= 1e-4


def quadratic_task(n_pairs=2000, seed=0):
    """Paired draws from a discretized quadratic-cost plan on [0, 1)."""
    from invot import (SolverConfig, SyntheticSpec, sample_pairs,
                       sinkhorn_solve, synth_cost, synth_marginals)
    n = 50
    eps = 0.5
    c_star = synth_cost(SyntheticSpec(n=n, p=2.0, epsilon=eps, seed=seed))
    mu, nu = synth_marginals(n, n, seed=seed)
    plan = sinkhorn_solve(c_star, mu, nu,
                          SolverConfig(epsilon=eps, max_iter=50000,
                                       tol=1e-10)).plan
    support = np.arange(n) / n
    return sample_pairs(plan, support, support, N=n_pairs, seed=seed)


def small_nets(seed=0):
    cost = CostParameterization(
        "absdiff", xavier_init([1, 20, 20, 20, 1], "relu", seed=seed))
    alpha = xavier_init([1, 20, 20, 20, 1], "identity", seed=seed + 1)
    beta = xavier_init([1, 20, 20, 20, 1], "identity", seed=seed + 2)
    return cost, alpha, beta


class TestTrain:
    def test_loss_decreases_over_epochs(self):
        samples = quadratic_task()
        cost, alpha, beta = small_nets()
        config = TrainConfig(learning_rate=1e-3, batch_size=200,
                             n_collocation=200, epochs=50, seed=0,
                             domain_box=UNIT_BOX)
        _, _, _, report = train(samples, cost, alpha, beta, config)
        trace = report.objective_trace
        assert trace[49] < trace[0]

    def test_bitwise_deterministic_per_seed(self):
        samples = quadratic_task(n_pairs=400)
        traces = []
        for _ in range(2):
            cost, alpha, beta = small_nets(seed=5)
            config = TrainConfig(batch_size=100, n_collocation=100, epochs=5,
                                 seed=9, domain_box=UNIT_BOX)
            _, _, _, report = train(samples, cost, alpha, beta, config)
            traces.append(report.objective_trace)
        assert np.array_equal(traces[0], traces[1])

    def test_independent_coupling_learns_flat_cost(self):
        rng = np.random.default_rng(3)
        samples = SampleSet(xs=rng.random((3000, 1)),
                            ys=rng.random((3000, 1)))
        cost, alpha, beta = small_nets(seed=2)
        config = TrainConfig(learning_rate=1e-3, batch_size=500,
                             n_collocation=500, epochs=400, seed=1,
                             domain_box=UNIT_BOX)
        cost_out = train(samples, cost, alpha, beta, config)[2]
        xi = np.linspace(0, 1, 100).reshape(-1, 1)
        vals, _ = cost_out.net.forward_batch(xi)
        assert vals.max() - vals.min() <= 0.05

    def test_divergence_is_loud(self):
        samples = quadratic_task(n_pairs=200)
        cost, alpha, beta = small_nets(seed=8)
        config = TrainConfig(learning_rate=30.0, batch_size=100,
                             n_collocation=100, epochs=50, seed=0,
                             domain_box=UNIT_BOX)
        with pytest.raises(Diverged):
            train(samples, cost, alpha, beta, config)
