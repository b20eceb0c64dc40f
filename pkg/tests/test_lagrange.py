import numpy as np
import pytest

from uoisched import (
    BanditSpec,
    MaxItersExceeded,
    build_truncated,
    choose_truncation,
    derivative_average,
    derivative_discounted,
    gradient_search,
    make_problem,
    objective_derivative,
    validate_chain,
)
from uoisched.lagrange import derivative_zero_tol
from uoisched.solvers import induced_transition

from conftest import FIG1, random_bandit


def fig1_mdps(beta, count=2, rho=1.0, eta=1e-6):
    bandit = BanditSpec(validate_chain(FIG1), rho, "fig1")
    L, _ = choose_truncation(bandit, eta)
    return [build_truncated(bandit, L, beta) for _ in range(count)]


def monte_carlo_discounted_activations(mdp, actions, start, runs, horizon, seed):
    """Oracle: simulate the truncated single-bandit chain under the policy and
    average the discounted activation sums (independent of the linear solver)."""
    rng = np.random.default_rng(seed)
    state = np.full(runs, start)
    total = np.zeros(runs)
    beta_pow = 1.0
    reset_ids = mdp.reset_states
    rho = mdp.bandit.success_prob
    for _ in range(horizon):
        act = actions[state].astype(bool)
        total += beta_pow * act
        beta_pow *= mdp.discount
        u = rng.uniform(size=runs)
        success = act & (u < rho)
        rows = np.cumsum(mdp.states[state], axis=1)
        draws = (rng.uniform(size=runs)[:, None] > rows).sum(axis=1)
        reset_to = reset_ids[np.minimum(draws, mdp.states.shape[1] - 1)]
        state = np.where(success, reset_to, mdp.passive_next[state])
    return total.mean(), total.std(ddof=1) / np.sqrt(runs)


class TestDerivativeDiscounted:
    def test_all_active_hits_upper_bound(self):
        (mdp,) = fig1_mdps(0.9, count=1)
        actions = np.ones(mdp.n_states, dtype=np.int8)
        assert derivative_discounted(mdp, actions, 0) == pytest.approx(10.0, abs=1e-10)

    def test_all_passive_is_zero(self):
        (mdp,) = fig1_mdps(0.9, count=1)
        actions = np.zeros(mdp.n_states, dtype=np.int8)
        assert derivative_discounted(mdp, actions, 0) == pytest.approx(0.0, abs=1e-12)

    def test_matches_monte_carlo(self):
        rng = np.random.default_rng(314)
        bandit = random_bandit(rng, 2, "mc", rho=0.8)
        mdp = build_truncated(bandit, 10, 0.9)
        actions = rng.integers(0, 2, mdp.n_states).astype(np.int8)
        exact = derivative_discounted(mdp, actions, 0)
        horizon = int(np.ceil(np.log(1e-6 * (1 - 0.9)) / np.log(0.9)))
        est, se = monte_carlo_discounted_activations(mdp, actions, 0, 100_000, horizon, 4000)
        assert abs(exact - est) <= 3 * se


class TestDerivativeAverage:
    def test_all_active_is_one(self):
        (mdp,) = fig1_mdps(1.0, count=1)
        assert derivative_average(mdp, np.ones(mdp.n_states, dtype=np.int8)) == pytest.approx(1.0, abs=1e-12)

    def test_all_passive_is_zero(self):
        (mdp,) = fig1_mdps(1.0, count=1)
        assert derivative_average(mdp, np.zeros(mdp.n_states, dtype=np.int8)) == pytest.approx(0.0, abs=1e-12)

    def test_active_only_at_omega_matches_stationary_mass(self):
        (mdp,) = fig1_mdps(1.0, count=1)
        actions = np.zeros(mdp.n_states, dtype=np.int8)
        actions[0] = 1  # transmit only from the equilibrium belief, rho = 1
        rate = derivative_average(mdp, actions)
        p = induced_transition(mdp, actions).toarray()
        n = mdp.n_states
        a = np.vstack([p.T - np.eye(n), np.ones(n)])
        pi_stat, *_ = np.linalg.lstsq(a, np.concatenate([np.zeros(n), [1.0]]), rcond=None)
        assert rate == pytest.approx(float(pi_stat[0]), abs=1e-9)
        assert 0.0 < rate < 1.0


class TestDerivativeFallback:
    def test_multichain_policy_rate_via_near_one_discount(self):
        from uoisched.lagrange import _derivative_average_fallback

        # rho = 1, active only on reset states, passive at omega: multichain
        (mdp,) = fig1_mdps(1.0, count=1)
        actions = np.zeros(mdp.n_states, dtype=np.int8)
        for k in (1, 2):
            actions[mdp.state_index(k, 1)] = 1
        with pytest.raises(Exception):
            derivative_average(mdp, actions)
        rate = _derivative_average_fallback(mdp, actions, 0)
        assert 0.0 <= rate <= 1.0


class TestObjectiveDerivative:
    def test_discounted_endpoint_at_zero(self):
        mdps = fig1_mdps(0.9, count=3)
        problem = make_problem(mdps, 2, "discounted")
        assert objective_derivative(problem, 0.0) == pytest.approx((3 - 2) / 0.1, abs=1e-9)

    def test_average_endpoint_at_zero(self):
        mdps = fig1_mdps(1.0, count=3)
        problem = make_problem(mdps, 1, "average")
        assert objective_derivative(problem, 0.0) == pytest.approx(3 - 1, abs=1e-9)

    def test_large_lambda_limit(self):
        mdps = fig1_mdps(0.9)
        problem = make_problem(mdps, 1, "discounted")
        assert objective_derivative(problem, 4000.0) == pytest.approx(-1 / 0.1, abs=1e-9)

    def test_rejects_negative_lambda(self):
        problem = make_problem(fig1_mdps(0.9), 1, "discounted")
        with pytest.raises(ValueError):
            objective_derivative(problem, -0.1)


class TestProblemConstruction:
    def test_m_equal_to_bandits_rejected(self):
        mdps = fig1_mdps(0.9)
        with pytest.raises(ValueError):
            make_problem(mdps, 2, "discounted")

    def test_scale_aware_defaults(self):
        problem = make_problem(fig1_mdps(0.9), 1, "discounted")
        assert problem.stepsize_c == pytest.approx((1 - 0.9) * 1.0)
        assert problem.epsilon == pytest.approx(1e-3)
        avg = make_problem(fig1_mdps(1.0), 1, "average")
        assert avg.stepsize_c == pytest.approx(1.0)


class TestGradientSearch:
    def test_converges_with_certificate(self):
        problem = make_problem(fig1_mdps(0.9), 1, "discounted", epsilon=1e-3)
        trace = gradient_search(problem)
        assert trace.stop_reason == "converged"
        lam_lo, lam_hi = trace.bracket
        assert abs(lam_hi - lam_lo) < problem.epsilon
        tol = derivative_zero_tol(problem)
        (_, d1), (_, d2) = trace.iterates[-2:]
        s1 = 0.0 if abs(d1) <= tol else d1
        s2 = 0.0 if abs(d2) <= tol else d2
        assert s1 * s2 <= 0.0
        assert objective_derivative(problem, lam_lo) >= -tol
        assert objective_derivative(problem, lam_hi) <= tol
        assert trace.lambda_star == lam_lo

    def test_dense_sweep_confirms_bracket(self):
        problem = make_problem(fig1_mdps(0.9), 1, "discounted")
        trace = gradient_search(problem)
        lam_lo, lam_hi = trace.bracket
        tol = derivative_zero_tol(problem)
        step = max(problem.epsilon / 10, (lam_hi - lam_lo) / 20)
        grid = np.arange(lam_lo, lam_hi + step, step)
        derivs = np.array([objective_derivative(problem, lam) for lam in grid])
        snapped = np.where(np.abs(derivs) <= tol, 0.0, derivs)
        assert np.any(snapped[:-1] * snapped[1:] <= 0.0)

    def test_iterates_stay_nonnegative(self):
        problem = make_problem(fig1_mdps(0.9), 1, "discounted")
        trace = gradient_search(problem)
        assert all(lam >= 0.0 for lam, _ in trace.iterates)

    def test_derivatives_nonincreasing_along_lambda(self):
        problem = make_problem(fig1_mdps(0.9), 1, "discounted")
        grid = np.linspace(0.0, 1.0, 12)
        derivs = [objective_derivative(problem, lam) for lam in grid]
        assert np.all(np.diff(derivs) <= 1e-6)

    def test_warm_and_cold_agree(self):
        rng = np.random.default_rng(5150)
        mdps = [build_truncated(random_bandit(rng, 2, f"b{i}"), 12, 0.9) for i in range(2)]
        problem = make_problem(mdps, 1, "discounted")
        warm = gradient_search(problem, warm_start=True)
        cold = gradient_search(problem, warm_start=False)
        assert abs(warm.lambda_star - cold.lambda_star) < problem.epsilon

    def test_max_iters_carries_trace(self):
        problem = make_problem(fig1_mdps(0.9), 1, "discounted", max_iters=3)
        with pytest.raises(MaxItersExceeded) as err:
            gradient_search(problem)
        assert err.value.trace.stop_reason == "max_iters"
        assert len(err.value.trace.iterates) == 4

    def test_average_criterion_converges(self):
        problem = make_problem(fig1_mdps(1.0), 1, "average")
        trace = gradient_search(problem)
        assert trace.stop_reason == "converged"
        assert trace.lambda_star > 0
