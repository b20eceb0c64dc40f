import mpmath
import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from uoisched import (
    DimensionMismatch,
    IndexOutOfRange,
    NotStochastic,
    Periodic,
    Reducible,
    belief_propagate,
    belief_reset,
    entropy,
    n_step_column,
    uoi,
    validate_chain,
)

from conftest import FIG1, random_chain


def entropy_bits_highprec(probs) -> float:
    """Independent high-precision entropy oracle (50 decimal digits)."""
    with mpmath.workdps(50):
        total = mpmath.mpf(0)
        for p in probs:
            p = mpmath.mpf(repr(p))
            if p > 0:
                total -= p * mpmath.log(p, 2)
        return float(total)


class TestValidateChain:
    def test_fig1_equilibrium(self):
        chain = validate_chain(FIG1)
        # oracle: direct linear solve of w = T w, sum(w) = 1
        t = np.array(FIG1)
        a = np.vstack([t - np.eye(2), np.ones(2)])
        w, *_ = np.linalg.lstsq(a, np.array([0.0, 0.0, 1.0]), rcond=None)
        assert np.allclose(chain.equilibrium, w, atol=1e-12)
        assert np.allclose(chain.equilibrium, [0.9677, 0.0323], atol=5e-5)

    def test_identity_is_reducible(self):
        with pytest.raises(Reducible):
            validate_chain(np.eye(2))

    def test_bad_column_sum(self):
        with pytest.raises(NotStochastic, match="column 1"):
            validate_chain([[0.5, 0.3], [0.6, 0.7]])

    def test_two_cycle_is_periodic(self):
        with pytest.raises(Periodic, match="period 2"):
            validate_chain([[0.0, 1.0], [1.0, 0.0]])

    def test_rejects_non_square(self):
        with pytest.raises(NotStochastic):
            validate_chain([[0.5, 0.5, 0.0], [0.5, 0.5, 1.0]])

    def test_fixed_point(self):
        chain = validate_chain(FIG1)
        assert np.max(np.abs(chain.transition @ chain.equilibrium - chain.equilibrium)) < 1e-10


class TestEntropy:
    def test_uniform_binary(self):
        assert entropy([0.5, 0.5]) == pytest.approx(1.0, abs=1e-15)

    def test_degenerate(self):
        assert entropy([1.0, 0.0, 0.0]) == 0.0

    def test_skewed_binary_high_precision(self):
        expected = entropy_bits_highprec([0.3, 0.7])
        assert entropy([0.3, 0.7]) == pytest.approx(expected, abs=1e-12)
        assert entropy([0.3, 0.7]) == pytest.approx(0.881290899, abs=1e-9)


class TestBeliefOps:
    def test_propagate_reset_belief(self, fig1_chain):
        assert np.allclose(belief_propagate(fig1_chain, [0.0, 1.0]), [0.3, 0.7], atol=1e-15)

    def test_propagate_one_product(self, fig1_chain):
        expected = np.array(FIG1) @ np.array([0.3, 0.7])  # oracle: plain matvec
        out = belief_propagate(fig1_chain, [0.3, 0.7])
        assert np.allclose(out, expected, atol=1e-15)
        assert np.allclose(out, [0.507, 0.493], atol=1e-12)

    def test_equilibrium_is_fixed_point(self, fig1_chain):
        w = fig1_chain.equilibrium
        assert np.allclose(belief_propagate(fig1_chain, w), w, atol=1e-12)

    def test_dimension_mismatch(self, fig1_chain):
        with pytest.raises(DimensionMismatch):
            belief_propagate(fig1_chain, [0.2, 0.3, 0.5])

    def test_reset_columns(self, fig1_chain):
        assert np.allclose(belief_reset(fig1_chain, 1), [0.99, 0.01])
        assert np.allclose(belief_reset(fig1_chain, 2), [0.3, 0.7])

    def test_reset_out_of_range(self, fig1_chain):
        for k in (0, 3, -1):
            with pytest.raises(IndexOutOfRange):
                belief_reset(fig1_chain, k)

    def test_reset_entropy_nonnegative(self, fig1_chain):
        for k in (1, 2):
            assert entropy(belief_reset(fig1_chain, k)) >= 0.0


class TestNStepColumn:
    def test_one_step_is_reset(self, fig1_chain):
        for k in (1, 2):
            assert np.array_equal(n_step_column(fig1_chain, k, 1), belief_reset(fig1_chain, k))

    def test_two_step_matches_matrix_power(self, fig1_chain):
        expected = np.linalg.matrix_power(np.array(FIG1), 2)[:, 1]  # oracle
        assert np.allclose(n_step_column(fig1_chain, 2, 2), expected, atol=1e-14)
        assert np.allclose(n_step_column(fig1_chain, 2, 2), [0.507, 0.493], atol=1e-12)

    def test_converges_to_equilibrium(self, fig1_chain):
        x = n_step_column(fig1_chain, 1, 2000)
        assert np.allclose(x, [0.9677, 0.0323], atol=5e-5)
        assert np.max(np.abs(x - fig1_chain.equilibrium)) < 1e-12

    def test_rejects_zero_steps(self, fig1_chain):
        with pytest.raises(ValueError):
            n_step_column(fig1_chain, 1, 0)


class TestUoi:
    def test_equilibrium_fixed_point(self, fig1_chain):
        assert uoi(fig1_chain, fig1_chain.equilibrium) == pytest.approx(
            entropy(fig1_chain.equilibrium), abs=1e-12
        )

    def test_after_observing_state_two(self, fig1_chain):
        assert uoi(fig1_chain, [0.0, 1.0]) == pytest.approx(
            entropy_bits_highprec([0.3, 0.7]), abs=1e-12
        )

    def test_after_observing_state_one(self, fig1_chain):
        # low curve of the motivating example: observing state 1 stays informative
        expected = entropy_bits_highprec([0.99, 0.01])
        assert uoi(fig1_chain, [1.0, 0.0]) == pytest.approx(expected, abs=1e-12)
        assert expected < 0.1 < entropy_bits_highprec([0.3, 0.7])


@settings(max_examples=30, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.integers(2, 4), st.integers(1, 50))
def test_matrix_powers_stay_stochastic(seed, n, steps):
    chain = random_chain(np.random.default_rng(seed), n, max_eig2=1.0)
    for k in range(1, n + 1):
        assert abs(n_step_column(chain, k, steps).sum() - 1.0) < 1e-10


@settings(max_examples=50, deadline=None)
@given(st.integers(0, 2 ** 32 - 1), st.floats(0.0, 1.0), st.integers(2, 5))
def test_entropy_is_concave(seed, theta, n):
    rng = np.random.default_rng(seed)
    x = rng.dirichlet(np.ones(n))
    y = rng.dirichlet(np.ones(n))
    mix = entropy(theta * x + (1 - theta) * y)
    assert mix >= theta * entropy(x) + (1 - theta) * entropy(y) - 1e-12


@settings(max_examples=20, deadline=None)
@given(st.floats(0.05, 0.95), st.integers(1, 40))
def test_symmetric_binary_chain_uoi_is_age_function(p, n):
    # columns are permutations of each other: UoI collapses to a function of age
    chain = validate_chain([[p, 1 - p], [1 - p, p]])
    assert uoi(chain, n_step_column(chain, 1, n)) == pytest.approx(
        uoi(chain, n_step_column(chain, 2, n)), abs=1e-12
    )


def test_columns_converge_monotonically_in_tail():
    rng = np.random.default_rng(424242)
    for _ in range(5):
        chain = random_chain(rng, int(rng.integers(2, 5)))
        for k in range(1, chain.n_states + 1):
            gaps = []
            x = belief_reset(chain, k)
            for _ in range(200):
                gaps.append(np.max(np.abs(x - chain.equilibrium)))
                x = chain.transition @ x
            gaps = np.array(gaps)
            assert gaps[-1] < 1e-8
            tail = gaps[100:]
            assert np.all(np.diff(tail) <= 1e-15)
