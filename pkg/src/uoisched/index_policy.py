"""Gain-index tables and the relaxed-optimal (OR) decision rule.

The index of a belief state X is the activation gain

    W(X) = rho * [ V(TX, lam*) - sum_k x_k V(T_k^1, lam*) ]

with V the optimal value function at the dual optimizer lam* (differential
value Z at lam^a for the average criterion).  TX is read through the
truncated passive successor.  The scheduling policy activates the m largest
indices each slot; the OR rule activates whenever the active continuation
value does not exceed the passive one, equivalently beta*W(X) >= lam*.
"""

from __future__ import annotations

import json
from dataclasses import dataclass

import numpy as np

from .belief_mdp import TruncatedBeliefMDP
from .errors import ConfigError
from .solvers import (
    ACTIVE_TIE_TOL,
    AVERAGE,
    DISCOUNTED,
    active_passive_values,
    policy_iteration_discounted,
    solve_average,
)

TABLE_SCHEMA_VERSION = 1


@dataclass
class GainIndexTable:
    bandit_label: str
    criterion: str
    lambda_star: float
    indices: np.ndarray            # (n,) index per truncated state
    values: np.ndarray | None      # value function the indices came from
    beliefs: np.ndarray            # (n, N) belief vector per state
    truncation_L: int

    def state_index(self, k: int, n: int) -> int:
        if k == 0 and n == 0:
            return 0
        return (k - 1) * self.truncation_L + n


def _indices_from_values(mdp: TruncatedBeliefMDP, values: np.ndarray) -> np.ndarray:
    rho = mdp.bandit.success_prob
    v_tx = values[mdp.passive_next]
    v_reset = mdp.states @ values[mdp.reset_states]
    return rho * (v_tx - v_reset)


def gain_indices_discounted(
    mdp: TruncatedBeliefMDP, lambda_star: float, policy=None
) -> GainIndexTable:
    """Index table from the policy-evaluated optimal value at lambda_star."""
    if lambda_star < 0:
        raise ValueError("lambda_star must be >= 0")
    if policy is None:
        policy = policy_iteration_discounted(mdp, lambda_star)
    values = policy.values
    return GainIndexTable(
        bandit_label=mdp.bandit.label,
        criterion=DISCOUNTED,
        lambda_star=float(lambda_star),
        indices=_indices_from_values(mdp, values),
        values=values,
        beliefs=mdp.states,
        truncation_L=mdp.truncation_L,
    )


def gain_indices_average(mdp: TruncatedBeliefMDP, lambda_a: float, policy=None) -> GainIndexTable:
    """Index table from the differential value function at lambda_a."""
    if lambda_a < 0:
        raise ValueError("lambda_a must be >= 0")
    if policy is None:
        policy = solve_average(mdp, lambda_a)
    return GainIndexTable(
        bandit_label=mdp.bandit.label,
        criterion=AVERAGE,
        lambda_star=float(lambda_a),
        indices=_indices_from_values(mdp, policy.values),
        values=policy.values,
        beliefs=mdp.states,
        truncation_L=mdp.truncation_L,
    )


def gain_index_general(transitions_active, transitions_passive, values, state: int) -> float:
    """Index for a general bounded-cost bandit: expected passive value minus
    expected active value.  Reduces to the belief-MDP formula on Eq.-style
    reset/propagate transitions."""
    values = np.asarray(values, dtype=float)

    def _row(mat):
        if hasattr(mat, "getrow"):
            return np.asarray(mat.getrow(state).todense()).ravel()
        return np.asarray(mat, dtype=float)[state]

    return float(_row(transitions_passive) @ values - _row(transitions_active) @ values)


def or_decision(mdp: TruncatedBeliefMDP, values, state: int, lambda_star: float) -> bool:
    """True iff the OR policy transmits in this state: a(X, lam*) <= r(X, lam*)."""
    a, r = active_passive_values(mdp, values, state, lambda_star)
    return bool(a <= r + ACTIVE_TIE_TOL)


def table_to_doc(table: GainIndexTable, config_hash: str | None = None) -> dict:
    """Versioned JSON document: omega is encoded as k = 0, n = 0."""
    n_chain = table.beliefs.shape[1]
    labels = [(0, 0)] + [
        (k, n) for k in range(1, n_chain + 1) for n in range(1, table.truncation_L + 1)
    ]
    doc = {
        "schema_version": TABLE_SCHEMA_VERSION,
        "bandit_label": table.bandit_label,
        "criterion": table.criterion,
        "lambda_star": table.lambda_star,
        "states": [
            {
                "k": k,
                "n": n,
                "belief": [float(b) for b in table.beliefs[i]],
                "index": float(table.indices[i]),
            }
            for i, (k, n) in enumerate(labels)
        ],
    }
    if config_hash is not None:
        doc["config_hash"] = config_hash
    return doc


def table_from_doc(doc: dict) -> GainIndexTable:
    allowed = {"schema_version", "bandit_label", "criterion", "lambda_star", "states", "config_hash"}
    unknown = set(doc) - allowed
    if unknown:
        raise ConfigError(f"unknown fields in index table document: {sorted(unknown)}")
    if doc.get("schema_version") != TABLE_SCHEMA_VERSION:
        raise ConfigError(f"unsupported index table schema_version: {doc.get('schema_version')!r}")
    states = doc["states"]
    l_max = max(s["n"] for s in states)
    n_chain = max(s["k"] for s in states)
    count = n_chain * l_max + 1
    if len(states) != count:
        raise ConfigError(f"index table has {len(states)} states, expected {count}")
    indices = np.empty(count)
    beliefs = np.empty((count, n_chain))
    for s in states:
        k, n = int(s["k"]), int(s["n"])
        i = 0 if k == 0 else (k - 1) * l_max + n
        indices[i] = float(s["index"])
        beliefs[i] = np.asarray(s["belief"], dtype=float)
    return GainIndexTable(
        bandit_label=doc["bandit_label"],
        criterion=doc["criterion"],
        lambda_star=float(doc["lambda_star"]),
        indices=indices,
        values=None,
        beliefs=beliefs,
        truncation_L=l_max,
    )


def save_table(table: GainIndexTable, path, config_hash: str | None = None) -> None:
    with open(path, "w") as fh:
        json.dump(table_to_doc(table, config_hash), fh, indent=2, sort_keys=True)
        fh.write("\n")


def load_table(path) -> GainIndexTable:
    with open(path) as fh:
        return table_from_doc(json.load(fh))
