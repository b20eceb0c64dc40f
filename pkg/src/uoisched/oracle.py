"""Exact solution of the joint RMAB on the product of truncated state spaces.

Feasible for small M only: the joint state space is the mixed-radix product
of the per-bandit truncated spaces and the action set enumerates the m-subsets
of bandits in lexicographic order.  Per-action joint transition matrices are
sparse Kronecker products of the per-bandit active/passive matrices.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass

import numpy as np
import scipy.sparse as sp

from .belief_mdp import TruncatedBeliefMDP
from .errors import NoConvergence, StateSpaceTooLarge

DEFAULT_CAP = 2_000_000


@dataclass
class JointMDP:
    mdps: list[TruncatedBeliefMDP]
    m: int
    actions: list[tuple[int, ...]]        # m-subsets, lexicographic
    transitions: list[sp.csr_matrix]      # one per action
    cost: np.ndarray                      # (n_joint,) summed entropies
    state_counts: list[int]
    strides: list[int]

    @property
    def n_joint(self) -> int:
        return self.cost.shape[0]

    def joint_index(self, per_bandit_states) -> int:
        return int(sum(s * w for s, w in zip(per_bandit_states, self.strides)))


def build_joint(mdps: list[TruncatedBeliefMDP], m: int, cap: int = DEFAULT_CAP) -> JointMDP:
    M = len(mdps)
    if not 1 <= m < M:
        raise ValueError(f"need 1 <= m < M, got m={m}, M={M}")
    counts = [mdp.n_states for mdp in mdps]
    n_joint = int(np.prod(counts))
    n_actions = math.comb(M, m)
    if n_joint * n_actions > cap:
        raise StateSpaceTooLarge(
            f"joint problem has {n_joint} states x {n_actions} actions "
            f"= {n_joint * n_actions} state-action pairs (cap {cap})",
            size=n_joint * n_actions,
        )
    strides = [int(np.prod(counts[i + 1:])) for i in range(M)]

    cost = np.zeros(1)
    for mdp in mdps:
        cost = np.add.outer(cost, mdp.costs_passive).ravel()

    actions = list(itertools.combinations(range(M), m))
    transitions = []
    for subset in actions:
        mat = None
        for i, mdp in enumerate(mdps):
            factor = mdp.active_transitions if i in subset else mdp.passive_transitions
            mat = factor if mat is None else sp.kron(mat, factor, format="csr")
        transitions.append(mat.tocsr())
    return JointMDP(
        mdps=list(mdps),
        m=m,
        actions=actions,
        transitions=transitions,
        cost=cost,
        state_counts=counts,
        strides=strides,
    )


@dataclass
class OracleResult:
    value: float                 # discounted value (or gain) at the initial state
    values: np.ndarray           # per-joint-state V (or differential values)
    policy: np.ndarray           # argmin action index per joint state
    gain: float                  # average cost (average criterion only)
    joint: JointMDP


def _sweep(joint: JointMDP, v: np.ndarray, beta: float):
    q = np.empty((len(joint.actions), joint.n_joint))
    for a, p in enumerate(joint.transitions):
        q[a] = joint.cost + beta * (p @ v)
    return q.min(axis=0), q.argmin(axis=0)


def joint_solve_discounted(
    mdps: list[TruncatedBeliefMDP],
    m: int,
    tol: float = 1e-8,
    cap: int = DEFAULT_CAP,
    initial_states=None,
    max_iters: int = 2_000_000,
) -> OracleResult:
    """tol-accurate optimal discounted value of the joint truncated problem."""
    betas = {mdp.discount for mdp in mdps}
    if len(betas) != 1:
        raise ValueError("bandits must share one discount factor")
    beta = betas.pop()
    if not beta < 1.0:
        raise ValueError("discounted oracle requires discount < 1")
    joint = build_joint(mdps, m, cap)
    v = np.zeros(joint.n_joint)
    stop = tol * (1.0 - beta) / (2.0 * beta) if beta > 0 else np.inf
    for _ in range(max_iters):
        v_new, policy = _sweep(joint, v, beta)
        if np.max(np.abs(v_new - v)) <= stop:
            break
        v = v_new
    else:
        raise NoConvergence("joint value iteration did not converge")
    start = joint.joint_index(initial_states or [0] * len(mdps))
    return OracleResult(value=float(v_new[start]), values=v_new, policy=policy, gain=0.0, joint=joint)


def joint_solve_average(
    mdps: list[TruncatedBeliefMDP],
    m: int,
    tol: float = 1e-6,
    cap: int = DEFAULT_CAP,
    max_iters: int = 500_000,
) -> OracleResult:
    """Optimal average cost of the joint truncated problem by damped relative
    value iteration with span-seminorm stopping."""
    joint = build_joint(mdps, m, cap)
    w = np.zeros(joint.n_joint)
    for _ in range(max_iters):
        tw, policy = _sweep(joint, w, 1.0)
        d = tw - w
        span = d.max() - d.min()
        if span <= tol:
            gain = 0.5 * (d.max() + d.min())
            z = w - w[0]
            return OracleResult(value=float(gain), values=z, policy=policy, gain=float(gain), joint=joint)
        w = 0.5 * (w + tw)
        w -= w[0]
    raise NoConvergence(f"joint relative value iteration span not below {tol}")
