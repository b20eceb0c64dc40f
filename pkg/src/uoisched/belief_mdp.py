"""Finite truncation of a single bandit's belief MDP and its error certificates.

State layout of the L-truncated MDP (N*L + 1 states):

    index 0                   equilibrium belief omega
    index (k-1)*L + n         the belief T^n e_k, for k in 1..N, n in 1..L

Passive action ages a belief by one step; from age L (and from omega) it
lands on omega.  Active action resets to T_k^1 with probability rho * x_k
and otherwise follows the passive successor.  Duplicate belief vectors are
kept as distinct symbolic (k, n) states so indexing stays bijective.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .errors import TruncationTooDeep
from .markov import ChainSpec, entropy

ROW_SUM_TOL = 1e-12


@dataclass(frozen=True)
class BanditSpec:
    chain: ChainSpec
    success_prob: float
    label: str

    def __post_init__(self):
        if not 0.0 < self.success_prob <= 1.0:
            raise ValueError(f"success_prob must be in (0, 1], got {self.success_prob}")


@dataclass(frozen=True)
class TruncationDiagnostics:
    """Certificate inputs for the approximation-error bounds."""

    truncation_L: int
    eta_L: float       # max_k || T_k^L - omega ||_inf
    sigma_L: float     # max entropy gap |H(T_k^{L+j}) - H(omega)| over the probed tail
    b_h: float         # entropy bound over the state space: log2 N
    probe_depth: int   # j was probed directly for 0..probe_depth; beyond that a tail bound


@dataclass(frozen=True)
class TruncatedBeliefMDP:
    bandit: BanditSpec
    truncation_L: int
    discount: float                       # beta in [0,1]; 1.0 flags average-cost use
    states: np.ndarray                    # (n, N) belief vector per state
    costs_passive: np.ndarray             # (n,) entropy of each state
    passive_next: np.ndarray              # (n,) deterministic passive successor
    reset_states: np.ndarray              # (N,) ids of T_k^1 for k = 1..N
    passive_transitions: sp.csr_matrix    # (n, n)
    active_transitions: sp.csr_matrix     # (n, n)

    @property
    def n_states(self) -> int:
        return self.states.shape[0]

    def state_index(self, k: int, n: int) -> int:
        """Id of symbolic state (k, n); (0, 0) is omega."""
        if k == 0 and n == 0:
            return 0
        N, L = self.bandit.chain.n_states, self.truncation_L
        if not (1 <= k <= N and 1 <= n <= L):
            raise IndexError(f"no state (k={k}, n={n}) with N={N}, L={L}")
        return (k - 1) * L + n

    def state_labels(self) -> list[tuple[int, int]]:
        N, L = self.bandit.chain.n_states, self.truncation_L
        return [(0, 0)] + [(k, n) for k in range(1, N + 1) for n in range(1, L + 1)]

    def nearest_state(self, belief) -> int:
        """Id of the state closest to `belief` in max norm (initial-state mapping)."""
        belief = np.asarray(belief, dtype=float)
        gaps = np.max(np.abs(self.states - belief[None, :]), axis=1)
        return int(np.argmin(gaps))


def build_truncated(bandit: BanditSpec, L: int, discount: float) -> TruncatedBeliefMDP:
    """Construct the L-truncated belief MDP of a bandit."""
    if L < 1:
        raise ValueError("L must be >= 1")
    if not 0.0 <= discount <= 1.0:
        raise ValueError("discount must be in [0, 1]")
    chain, rho = bandit.chain, bandit.success_prob
    N = chain.n_states
    n = N * L + 1

    states = np.empty((n, N))
    states[0] = chain.equilibrium
    for k in range(1, N + 1):
        x = chain.transition[:, k - 1].copy()
        for age in range(1, L + 1):
            states[(k - 1) * L + age] = x
            x = chain.transition @ x

    costs = np.array([entropy(states[s]) for s in range(n)])

    passive_next = np.zeros(n, dtype=np.int64)
    for k in range(1, N + 1):
        for age in range(1, L):
            passive_next[(k - 1) * L + age] = (k - 1) * L + age + 1
        passive_next[(k - 1) * L + L] = 0
    # omega -> omega is already 0

    reset_states = np.array([(k - 1) * L + 1 for k in range(1, N + 1)], dtype=np.int64)

    p_passive = sp.csr_matrix(
        (np.ones(n), (np.arange(n), passive_next)), shape=(n, n)
    )

    rows = np.repeat(np.arange(n), N + 1)
    cols = np.empty((n, N + 1), dtype=np.int64)
    vals = np.empty((n, N + 1))
    cols[:, :N] = reset_states[None, :]
    cols[:, N] = passive_next
    vals[:, :N] = rho * states
    vals[:, N] = 1.0 - rho
    p_active = sp.csr_matrix((vals.ravel(), (rows, cols.ravel())), shape=(n, n))
    p_active.sum_duplicates()
    p_active.eliminate_zeros()

    for name, mat in (("passive", p_passive), ("active", p_active)):
        row_sums = np.asarray(mat.sum(axis=1)).ravel()
        if np.max(np.abs(row_sums - 1.0)) > ROW_SUM_TOL:
            raise AssertionError(f"{name} transition rows do not sum to 1")

    states.setflags(write=False)
    costs.setflags(write=False)
    passive_next.setflags(write=False)
    reset_states.setflags(write=False)
    return TruncatedBeliefMDP(
        bandit=bandit,
        truncation_L=L,
        discount=float(discount),
        states=states,
        costs_passive=costs,
        passive_next=passive_next,
        reset_states=reset_states,
        passive_transitions=p_passive,
        active_transitions=p_active,
    )


def _max_gap_to_omega(powers: np.ndarray, omega: np.ndarray) -> float:
    return float(np.max(np.abs(powers - omega[:, None])))


def _fannes_gap(tv: float, n: int) -> float:
    """Entropy-continuity bound |H(p) - H(q)| <= tv*log2(n-1) + Hb(tv) at TV distance tv."""
    if tv <= 0.0:
        return 0.0
    if tv >= 1.0 - 1.0 / n:
        return float(np.log2(n))
    hb = -tv * np.log2(tv) - (1.0 - tv) * np.log2(1.0 - tv)
    return float(tv * np.log2(max(n - 1, 1)) + hb)


def truncation_diagnostics(chain: ChainSpec, L: int, probe_depth: int | None = None) -> TruncationDiagnostics:
    """Compute (eta_L, sigma_L, B_H) for a chain at truncation depth L.

    sigma_L must dominate |H(T_k^{L+j}) - H(omega)| for every j >= 0.  We probe
    j = 0..probe_depth (default 4L) directly and close the tail with a
    Fannes-type bound at the depth-(L+probe) total-variation gap; TV to omega
    never increases under the chain map, so that single gap bounds the tail.
    """
    if probe_depth is None:
        probe_depth = 4 * L
    omega = chain.equilibrium
    h_omega = entropy(omega)
    n = chain.n_states

    powers = np.linalg.matrix_power(chain.transition, L)
    eta_l = _max_gap_to_omega(powers, omega)

    sigma = 0.0
    cur = powers
    for _ in range(probe_depth + 1):
        gaps = [abs(entropy(cur[:, k]) - h_omega) for k in range(n)]
        sigma = max(sigma, max(gaps))
        cur = chain.transition @ cur
    tail_tv = 0.5 * float(np.max(np.abs(cur - omega[:, None]).sum(axis=0)))
    sigma = max(sigma, _fannes_gap(tail_tv, n))

    return TruncationDiagnostics(
        truncation_L=L,
        eta_L=eta_l,
        sigma_L=sigma,
        b_h=float(np.log2(n)),
        probe_depth=probe_depth,
    )


def choose_truncation(
    bandit: BanditSpec, eta_target: float, l_max: int = 10000
) -> tuple[int, TruncationDiagnostics]:
    """Smallest L <= l_max with max_k ||T_k^L - omega||_inf <= eta_target."""
    if eta_target <= 0.0:
        raise ValueError("eta_target must be > 0")
    chain = bandit.chain
    omega = chain.equilibrium
    cur = chain.transition.copy()
    for L in range(1, l_max + 1):
        if _max_gap_to_omega(cur, omega) <= eta_target:
            return L, truncation_diagnostics(chain, L)
        cur = chain.transition @ cur
    raise TruncationTooDeep(
        f"no L <= {l_max} reaches eta_target={eta_target:g} "
        f"(gap at L={l_max}: {_max_gap_to_omega(cur, omega):.3g})"
    )


def discounted_error_bound(
    diag: TruncationDiagnostics, lam: float, beta: float, n_states: int, rho: float
) -> float:
    """Value-error certificate for the L-truncation of a discounted bandit:
    beta*sigma_L/(1-beta) + beta*rho*eta_L*N*(B_H+lambda)/(1-beta)^2."""
    if beta >= 1.0:
        raise ValueError("beta must be < 1")
    if beta == 0.0:
        return 0.0
    term1 = beta * diag.sigma_L / (1.0 - beta)
    term2 = beta * rho * diag.eta_L * n_states * (diag.b_h + lam) / (1.0 - beta) ** 2
    return term1 + term2


def average_error_bound(diag: TruncationDiagnostics) -> float:
    """Average-cost certificate: |g - g^L| <= sigma_L."""
    return diag.sigma_L
