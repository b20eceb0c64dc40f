import json

import numpy as np
import pytest

from uoisched import (
    BanditSpec,
    ChainSpec,
    InfeasiblePolicy,
    RMABInstance,
    asymptotic_sweep,
    build_truncated,
    choose_truncation,
    discounted_horizon,
    evaluate_average,
    evaluate_discounted,
    gain_indices_average,
    gain_indices_discounted,
    gradient_search,
    make_problem,
    objective_value,
    simulate,
    validate_chain,
)

from conftest import FIG1, random_bandit


def constant_entropy_chain():
    # both columns equal [0.5, 0.5]: every reachable belief has entropy 1
    return validate_chain([[0.5, 0.5], [0.5, 0.5]])


def zero_entropy_chain():
    # degenerate sink chain (reducible, so built by hand): every belief is a
    # point mass and entropy is identically zero
    t = np.array([[1.0, 1.0], [0.0, 0.0]])
    return ChainSpec(n_states=2, transition=t, equilibrium=np.array([1.0, 0.0]))


def fig1_instance(criterion, beta, m=1, seed=3, rho=1.0):
    chain = validate_chain(FIG1)
    bandits = [BanditSpec(chain, rho, "a"), BanditSpec(chain, rho, "b")]
    return RMABInstance(bandits, m, criterion, beta, seed=seed)


def fig1_tables(criterion, beta, rho=1.0):
    chain = validate_chain(FIG1)
    bandit_a = BanditSpec(chain, rho, "a")
    bandit_b = BanditSpec(chain, rho, "b")
    L, _ = choose_truncation(bandit_a, 1e-6)
    mdps = [build_truncated(b, L, beta) for b in (bandit_a, bandit_b)]
    lam = gradient_search(make_problem(mdps, 1, criterion)).lambda_star
    maker = gain_indices_discounted if criterion == "discounted" else gain_indices_average
    return [maker(m, lam) for m in mdps], mdps, lam


class TestEvaluate:
    def test_zero_costs(self):
        assert evaluate_discounted(np.zeros(100), 0.9) == 0.0
        assert evaluate_average(np.zeros(100)) == 0.0

    def test_constant_cost_geometric_sum(self):
        c, beta, T = 0.7, 0.9, 300
        expected = c * (1 - beta ** T) / (1 - beta)
        assert evaluate_discounted(np.full(T, c), beta) == pytest.approx(expected, rel=1e-12)
        assert evaluate_average(np.full(T, c), burn_in=30) == pytest.approx(c, rel=1e-12)

    def test_average_requires_post_burn_in_slot(self):
        with pytest.raises(ValueError):
            evaluate_average(np.ones(5), burn_in=5)

    def test_horizon_tail_rule(self):
        T = discounted_horizon(0.9, 2.0, tail=1e-6)
        assert 0.9 ** T * 2.0 / 0.1 < 1e-6
        assert 0.9 ** (T - 1) * 2.0 / 0.1 >= 1e-6


class TestSimulateBasics:
    def test_zero_entropy_sources_cost_exactly_zero(self):
        bandits = [BanditSpec(zero_entropy_chain(), 1.0, l) for l in ("a", "b")]
        inst = RMABInstance(bandits, 1, "average", 1.0, seed=1)
        res = simulate(inst, "round_robin", horizon=500, runs=4, truncation_L=3)
        assert res.mean == 0.0 and res.stderr == 0.0

    def test_constant_entropy_sources_average_is_sum_of_equilibrium_entropies(self):
        # beliefs never move in value: time-average UoI = H(w1) + H(w2) exactly
        bandits = [BanditSpec(constant_entropy_chain(), 1.0, l) for l in ("a", "b")]
        inst = RMABInstance(bandits, 1, "average", 1.0, seed=2)
        res = simulate(inst, "round_robin", horizon=400, runs=3, truncation_L=4)
        assert res.mean == pytest.approx(2.0, abs=1e-12)
        assert np.allclose(res.per_run, 2.0)

    def test_round_robin_activation_frequencies_equal(self):
        rng = np.random.default_rng(8)
        bandits = [random_bandit(rng, 2, f"b{j}", rho=1.0) for j in range(5)]
        inst = RMABInstance(bandits, 2, "average", 1.0, seed=5)
        res = simulate(inst, "round_robin", horizon=1000, runs=3, truncation_L=6)
        assert np.allclose(res.activation_freq, 2 / 5, atol=1e-12)
        assert res.activation_freq.sum() == pytest.approx(inst.m, abs=1e-12)

    def test_infeasible_policy_rejected(self):
        inst = fig1_instance("average", 1.0)

        def bad_policy(t, beliefs, instance):
            return np.zeros((beliefs.shape[0], 2), dtype=int)  # same bandit twice

        with pytest.raises(InfeasiblePolicy):
            simulate(inst, bad_policy, horizon=10, runs=2, truncation_L=4)

    def test_gain_index_requires_tables(self):
        inst = fig1_instance("average", 1.0)
        with pytest.raises(ValueError):
            simulate(inst, "gain_index", horizon=10, runs=2, truncation_L=4)

    def test_channel_budget_must_leave_slack(self):
        chain = validate_chain(FIG1)
        bandits = [BanditSpec(chain, 1.0, "a"), BanditSpec(chain, 1.0, "b")]
        with pytest.raises(ValueError):
            RMABInstance(bandits, 2, "average", 1.0)
        with pytest.raises(ValueError):
            RMABInstance(bandits, 0, "average", 1.0)

    def test_unknown_policy_rejected(self):
        inst = fig1_instance("average", 1.0)
        with pytest.raises(ValueError):
            simulate(inst, "nonsense", horizon=10, runs=2, truncation_L=4)


class TestDeterminism:
    def test_same_seed_byte_identical_json(self):
        tables, _, _ = fig1_tables("average", 1.0)
        inst = fig1_instance("average", 1.0, seed=99)
        r1 = simulate(inst, "gain_index", horizon=800, runs=6, tables=tables, record_y=True)
        r2 = simulate(inst, "gain_index", horizon=800, runs=6, tables=tables, record_y=True)
        assert json.dumps(r1.to_json_dict(), sort_keys=True) == json.dumps(r2.to_json_dict(), sort_keys=True)

    def test_different_seeds_differ(self):
        tables, _, _ = fig1_tables("average", 1.0)
        inst = fig1_instance("average", 1.0)
        r1 = simulate(inst, "gain_index", horizon=800, runs=6, seed=1, tables=tables)
        r2 = simulate(inst, "gain_index", horizon=800, runs=6, seed=2, tables=tables)
        assert r1.per_run.tolist() != r2.per_run.tolist()

    def test_or_rounded_matches_gain_index_exactly(self):
        # same ranking, same common random numbers: identical traces
        tables, _, _ = fig1_tables("discounted", 0.9)
        inst = fig1_instance("discounted", 0.9, seed=31)
        kw = dict(horizon=400, runs=8, tables=tables)
        r1 = simulate(inst, "gain_index", **kw)
        r2 = simulate(inst, "or_rounded", **kw)
        assert np.array_equal(r1.per_run, r2.per_run)
        assert np.array_equal(r1.activation_freq, r2.activation_freq)


class TestPolicyQuality:
    def test_gain_index_beats_baselines_on_most_instances(self):
        rng = np.random.default_rng(4040)
        wins_myopic = wins_rr = 0
        n_inst = 5
        for i in range(n_inst):
            bandits = [random_bandit(rng, 2, f"b{j}") for j in range(5)]
            mdps = [build_truncated(b, choose_truncation(b, 1e-5)[0], 1.0) for b in bandits]
            lam = gradient_search(make_problem(mdps, 2, "average")).lambda_star
            tables = [gain_indices_average(m, lam) for m in mdps]
            inst = RMABInstance(bandits, 2, "average", 1.0, seed=600 + i)
            kw = dict(horizon=3000, runs=12)
            g = simulate(inst, "gain_index", tables=tables, **kw)
            my = simulate(inst, "myopic", truncation_L=[m.truncation_L for m in mdps], **kw)
            rr = simulate(inst, "round_robin", truncation_L=[m.truncation_L for m in mdps], **kw)
            se = max(g.stderr, my.stderr, rr.stderr)
            wins_myopic += g.mean <= my.mean + 2 * se
            wins_rr += g.mean <= rr.mean + 2 * se
        assert wins_myopic >= 4 and wins_rr >= 4

    def test_sandwich_cost_above_relaxed_bound(self):
        tables, mdps, lam = fig1_tables("average", 1.0)
        problem = make_problem(mdps, 1, "average")
        bound = objective_value(problem, lam)
        inst = fig1_instance("average", 1.0, seed=17)
        res = simulate(inst, "gain_index", horizon=5000, runs=10, tables=tables)
        assert res.mean >= bound - 3 * res.stderr

    def test_myopic_ranks_by_current_entropy(self):
        # two constant-entropy sources vs one live source: myopic must always
        # pick the live source once its belief entropy exceeds the constants'
        chain = validate_chain(FIG1)
        bandits = [
            BanditSpec(constant_entropy_chain(), 1.0, "flat1"),
            BanditSpec(chain, 1.0, "live"),
        ]
        inst = RMABInstance(bandits, 1, "average", 1.0, seed=4)
        res = simulate(inst, "myopic", horizon=2000, runs=4, truncation_L=20)
        # H(flat) = 1 always; live UoI <= H([0.3,0.7]) = 0.88 < 1, so myopic
        # always transmits the flat source
        assert res.activation_freq[0] == pytest.approx(1.0, abs=1e-12)


class TestYTrace:
    def test_or_activation_counts_recorded(self):
        tables, _, _ = fig1_tables("average", 1.0)
        inst = fig1_instance("average", 1.0, seed=12)
        res = simulate(inst, "or_rounded", horizon=600, runs=3, tables=tables, record_y=True)
        assert res.y_trace is not None and len(res.y_trace) == 600
        assert res.y_trace.min() >= 0 and res.y_trace.max() <= 2
        assert np.array_equal(res.or_mask_trace.sum(axis=1), res.y_trace)

    def test_top_m_matches_or_set_when_budget_met(self):
        # on every logged slot where the OR rule activates exactly m bandits,
        # the top-m index selection is the same set
        tables, _, _ = fig1_tables("average", 1.0)
        inst = fig1_instance("average", 1.0, seed=13)
        res = simulate(inst, "gain_index", horizon=2000, runs=2, tables=tables, record_y=True)
        hits = np.flatnonzero(res.y_trace == inst.m)
        assert len(hits) > 50  # the instance visits the exact-budget slots often
        for t in hits:
            or_set = set(np.flatnonzero(res.or_mask_trace[t]))
            assert set(res.selection_trace[t]) == or_set

    def test_concentration_at_moderate_population(self):
        rng = np.random.default_rng(2718)
        classes = [random_bandit(rng, 2, "c1", rho=1.0), random_bandit(rng, 2, "c2", rho=0.8)]
        mdps = [build_truncated(b, 14, 1.0) for b in classes]
        M, m = 24, 12
        reps = [mdps[i % 2] for i in range(M)]
        lam = gradient_search(make_problem(reps, m, "average")).lambda_star
        base = [gain_indices_average(mdp, lam) for mdp in mdps]
        bandits, tables = [], []
        for i in range(M):
            src = classes[i % 2]
            lbl = f"{src.label}-{i}"
            bandits.append(BanditSpec(src.chain, src.success_prob, lbl))
            t = base[i % 2]
            tables.append(
                type(t)(lbl, t.criterion, t.lambda_star, t.indices, t.values, t.beliefs, t.truncation_L)
            )
        inst = RMABInstance(bandits, m, "average", 1.0, seed=55)
        res = simulate(inst, "or_rounded", horizon=3000, runs=2, tables=tables, record_y=True)
        y = res.y_trace[300:] / M
        assert y.std() <= 1.1 / np.sqrt(4 * M)


class TestAsymptoticSweep:
    def _classes(self):
        chain_a = validate_chain(FIG1)
        chain_b = validate_chain([[0.9, 0.35], [0.1, 0.65]])
        return [
            (BanditSpec(chain_a, 1.0, "ca"), 0.5),
            (BanditSpec(chain_b, 0.8, "cb"), 0.5),
        ]

    def test_gap_shrinks_with_population(self):
        sweep = asymptotic_sweep(
            self._classes(),
            alpha=0.5,
            m_list=[4, 16],
            runs=8,
            seed=1234,
            criterion="average",
            discount=1.0,
            truncation_L=16,
            horizon=4000,
        )
        gaps = {r.n_bandits: r.gap for r in sweep.rows}
        assert gaps[16] < gaps[4]

    def test_bound_identical_across_population(self):
        sweep = asymptotic_sweep(
            self._classes(),
            alpha=0.5,
            m_list=[4, 8],
            runs=4,
            seed=9,
            criterion="average",
            discount=1.0,
            truncation_L=12,
            horizon=1500,
        )
        bounds = [r.per_bandit_bound for r in sweep.rows]
        assert bounds[0] == pytest.approx(bounds[1], abs=1e-12)

    def test_non_integral_channel_count_rejected(self):
        with pytest.raises(ValueError, match="not integral"):
            asymptotic_sweep(
                self._classes(),
                alpha=0.5,
                m_list=[5],
                runs=2,
                seed=1,
                criterion="average",
                discount=1.0,
                truncation_L=8,
                horizon=500,
            )

    def test_discounted_variant_runs(self):
        sweep = asymptotic_sweep(
            self._classes(),
            alpha=0.5,
            m_list=[4],
            runs=16,
            seed=77,
            criterion="discounted",
            discount=0.9,
            truncation_L=16,
        )
        row = sweep.rows[0]
        assert row.per_bandit_cost >= row.per_bandit_bound - 3 * row.per_bandit_stderr
