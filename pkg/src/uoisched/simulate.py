"""Slot-level Monte-Carlo simulation of the M-source, m-channel system.

Beliefs are tracked symbolically as truncated-state ids (0 = equilibrium,
(k-1)*L + n = belief of age n after observing state k), so the simulator
follows the truncated dynamics: ages beyond L are pinned to the equilibrium
belief.  All runs advance in lockstep as vectorized numpy operations, each
run drawing from its own xoshiro256** substream.  Every slot consumes one
success draw and one transition draw per bandit regardless of the policy's
selections, so different policies under the same seed see identical source
paths (common random numbers).
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np

from .belief_mdp import BanditSpec, build_truncated
from .errors import InfeasiblePolicy
from .index_policy import GainIndexTable, gain_indices_average, gain_indices_discounted
from .lagrange import gradient_search, make_problem
from .rng import Xoshiro256StarStar
from .solvers import AVERAGE, DISCOUNTED, policy_iteration_discounted, solve_average

RESULT_SCHEMA_VERSION = 1

POLICIES = ("gain_index", "myopic", "round_robin", "or_rounded")


@dataclass
class RMABInstance:
    bandits: list[BanditSpec]
    m: int
    criterion: str
    discount: float                    # beta < 1 for discounted, 1.0 for average
    initial_beliefs: list | None = None
    seed: int = 0

    def __post_init__(self):
        M = len(self.bandits)
        if not 1 <= self.m < M:
            raise ValueError(f"need 1 <= m < M, got m={self.m}, M={M}")
        labels = [b.label for b in self.bandits]
        if len(set(labels)) != M:
            raise ValueError("bandit labels must be unique")
        if self.criterion == DISCOUNTED and not 0.0 <= self.discount < 1.0:
            raise ValueError("discounted criterion needs 0 <= beta < 1")
        if self.criterion == AVERAGE and self.discount != 1.0:
            raise ValueError("average criterion requires discount = 1.0")
        if self.initial_beliefs is not None and len(self.initial_beliefs) != M:
            raise ValueError("one initial belief per bandit required")

    @property
    def n_bandits(self) -> int:
        return len(self.bandits)


@dataclass
class SimResult:
    policy: str
    criterion: str
    m: int
    n_bandits: int
    runs: int
    horizon: int
    burn_in: int
    seed: int
    discount: float
    per_run: np.ndarray
    mean: float
    stderr: float
    activation_freq: np.ndarray
    y_trace: np.ndarray | None = field(default=None)
    or_mask_trace: np.ndarray | None = field(default=None)   # run 0, (T, M) OR decisions
    selection_trace: np.ndarray | None = field(default=None)  # run 0, (T, m) selected bandits

    def to_json_dict(self) -> dict:
        doc = {
            "schema_version": RESULT_SCHEMA_VERSION,
            "policy": self.policy,
            "criterion": self.criterion,
            "m": self.m,
            "n_bandits": self.n_bandits,
            "runs": self.runs,
            "horizon": self.horizon,
            "burn_in": self.burn_in,
            "seed": self.seed,
            "discount": self.discount,
            "mean": self.mean,
            "stderr": self.stderr,
            "per_run": [float(v) for v in self.per_run],
            "activation_freq": [float(v) for v in self.activation_freq],
        }
        if self.y_trace is not None:
            doc["y_trace"] = [int(v) for v in self.y_trace]
        return doc


def discounted_horizon(beta: float, total_entropy_bound: float, tail: float = 1e-6) -> int:
    """Smallest T with beta^T * bound / (1 - beta) < tail (estimator bias cap)."""
    if not 0.0 <= beta < 1.0:
        raise ValueError("beta must be in [0, 1)")
    if beta == 0.0:
        return 1
    t = math.log(tail * (1.0 - beta) / total_entropy_bound) / math.log(beta)
    return max(1, int(math.ceil(t)))


def evaluate_discounted(cost_trace, beta: float) -> float:
    """Sum of beta^(t-1) * c_t over a per-slot cost trace."""
    c = np.asarray(cost_trace, dtype=float)
    weights = beta ** np.arange(c.shape[-1])
    return float(c @ weights)


def evaluate_average(cost_trace, burn_in: int = 0) -> float:
    """Mean per-slot cost after discarding the first burn_in slots."""
    c = np.asarray(cost_trace, dtype=float)
    if burn_in >= c.shape[-1]:
        raise ValueError("burn_in must leave at least one slot")
    return float(c[..., burn_in:].mean())


class _BanditSim:
    """Per-bandit lookup arrays used inside the slot loop."""

    def __init__(self, bandit: BanditSpec, L: int, table: GainIndexTable | None):
        mdp = build_truncated(bandit, L, discount=0.0)  # structure only
        self.n_chain = bandit.chain.n_states
        self.L = L
        self.rho = bandit.success_prob
        self.entropy = mdp.costs_passive
        self.passive_next = mdp.passive_next
        self.states = mdp.states
        self.cum_transition = np.cumsum(bandit.chain.transition, axis=0)
        self.indices = table.indices if table is not None else None


def _sample_from_rows(prob_rows: np.ndarray, u: np.ndarray) -> np.ndarray:
    """Inverse-CDF sample per run; prob_rows is (R, N) of probabilities."""
    cum = np.cumsum(prob_rows, axis=1)
    draws = (u[:, None] > cum).sum(axis=1)
    return np.minimum(draws, prob_rows.shape[1] - 1)


def _check_tables(instance: RMABInstance, tables) -> list[GainIndexTable]:
    if tables is None:
        raise ValueError("this policy requires one index table per bandit")
    if len(tables) != instance.n_bandits:
        raise ValueError(f"expected {instance.n_bandits} tables, got {len(tables)}")
    lam = tables[0].lambda_star
    for bandit, table in zip(instance.bandits, tables):
        if table.bandit_label != bandit.label:
            raise ValueError(f"table label {table.bandit_label!r} does not match bandit {bandit.label!r}")
        if table.criterion != instance.criterion:
            raise ValueError(f"table criterion {table.criterion!r} does not match instance")
        if abs(table.lambda_star - lam) > 1e-9:
            raise ValueError("index tables were computed at different multipliers")
    return list(tables)


def simulate(
    instance: RMABInstance,
    policy,
    horizon: int,
    runs: int,
    seed: int | None = None,
    tables=None,
    truncation_L=None,
    burn_in: int | None = None,
    record_y: bool = False,
) -> SimResult:
    """Simulate a scheduling policy and return per-run objective estimates.

    `policy` is one of POLICIES, or a callable (t, belief_ids, instance) ->
    (runs, m) array of selected bandit columns (InfeasiblePolicy if it picks
    a wrong number of distinct bandits).  `tables` are required for
    gain_index / or_rounded; `truncation_L` (int or per-bandit list) sets the
    belief truncation when no tables are given.  Cost H(X_i(t)) accrues at
    the start of slot t with weight beta^(t-1) (discounted) or enters the
    post-burn-in time average.  `record_y` logs the first run's per-slot
    OR-activation count (how many bandits the unconstrained relaxed-optimal
    rule would transmit).  Identical seeds yield identical traces.
    """
    if horizon < 1:
        raise ValueError("horizon must be >= 1")
    if runs < 1:
        raise ValueError("runs must be >= 1")
    M = instance.n_bandits
    m = instance.m
    seed = instance.seed if seed is None else int(seed)
    beta = instance.discount
    named = isinstance(policy, str)
    if named and policy not in POLICIES:
        raise ValueError(f"unknown policy {policy!r}; expected one of {POLICIES}")

    if named and policy in ("gain_index", "or_rounded"):
        tables = _check_tables(instance, tables)
    have_tables = tables is not None and len(tables) == M

    if have_tables:
        l_per_bandit = [t.truncation_L for t in tables]
    elif truncation_L is None:
        raise ValueError("truncation_L is required when no index tables are given")
    elif np.isscalar(truncation_L):
        l_per_bandit = [int(truncation_L)] * M
    else:
        l_per_bandit = [int(l) for l in truncation_L]

    sims = [
        _BanditSim(b, l_per_bandit[i], tables[i] if have_tables else None)
        for i, b in enumerate(instance.bandits)
    ]
    lam_star = tables[0].lambda_star if have_tables else None

    if instance.criterion == AVERAGE:
        burn = int(0.1 * horizon) if burn_in is None else int(burn_in)
        if burn >= horizon:
            raise ValueError("burn_in must leave at least one slot")
    else:
        burn = 0

    # ties: highest score wins, then lowest bandit label (stable sort on the
    # label-ordered column permutation)
    label_order = np.argsort(np.array([b.label for b in instance.bandits]))

    rng = Xoshiro256StarStar(seed, runs)
    belief = np.zeros((runs, M), dtype=np.int64)
    if instance.initial_beliefs is not None:
        for i, chi in enumerate(instance.initial_beliefs):
            if chi is not None:
                gaps = np.max(np.abs(sims[i].states - np.asarray(chi, dtype=float)[None, :]), axis=1)
                belief[:, i] = int(np.argmin(gaps))
    true_state = np.zeros((runs, M), dtype=np.int64)
    for i in range(M):
        u = rng.uniform()
        true_state[:, i] = _sample_from_rows(sims[i].states[belief[:, i]], u)

    disc_total = np.zeros(runs)
    avg_total = np.zeros(runs)
    act_counts = np.zeros((runs, M), dtype=np.int64)
    beta_pow = 1.0
    record_traces = record_y and have_tables
    y_trace = np.zeros(horizon, dtype=np.int64) if record_traces else None
    or_mask_trace = np.zeros((horizon, M), dtype=bool) if record_traces else None
    selection_trace = np.zeros((horizon, m), dtype=np.int64) if record_traces else None
    scores = np.empty((runs, M))
    rows = np.arange(runs)

    for t in range(1, horizon + 1):
        cost_t = np.zeros(runs)
        for i in range(M):
            cost_t += sims[i].entropy[belief[:, i]]
        if instance.criterion == DISCOUNTED:
            disc_total += beta_pow * cost_t
            beta_pow *= beta
        elif t > burn:
            avg_total += cost_t

        if named and policy == "round_robin":
            chosen = (np.arange(m) + (t - 1) * m) % M
            sel_cols = np.broadcast_to(chosen, (runs, m))
        else:
            if named and policy == "myopic":
                for i in range(M):
                    scores[:, i] = sims[i].entropy[belief[:, i]]
            elif named and policy == "gain_index":
                for i in range(M):
                    scores[:, i] = sims[i].indices[belief[:, i]]
            elif named and policy == "or_rounded":
                # gain of active over passive: d = beta*W - lambda* (discounted),
                # W - lambda^a (average); same selections as gain_index by ranking
                scale = beta if instance.criterion == DISCOUNTED else 1.0
                for i in range(M):
                    scores[:, i] = scale * sims[i].indices[belief[:, i]] - lam_star
            if named:
                ordered = np.argsort(-scores[:, label_order], axis=1, kind="stable")
                sel_cols = label_order[ordered[:, :m]]
            else:
                sel_cols = np.asarray(policy(t, belief.copy(), instance))
                if sel_cols.shape != (runs, m):
                    raise InfeasiblePolicy(
                        f"policy returned shape {sel_cols.shape}, expected {(runs, m)}"
                    )
                check = np.zeros((runs, M), dtype=bool)
                try:
                    check[rows[:, None], sel_cols] = True
                except IndexError as exc:
                    raise InfeasiblePolicy(f"policy selected an invalid bandit: {exc}") from exc
                if not np.all(check.sum(axis=1) == m):
                    raise InfeasiblePolicy("policy selected a repeated or invalid bandit")

        sel_mask = np.zeros((runs, M), dtype=bool)
        sel_mask[rows[:, None], sel_cols] = True
        act_counts += sel_mask

        if y_trace is not None:
            # OR-policy decisions along the first run's trajectory: a bandit is
            # OR-active when its activation gain clears the charge,
            # beta*W >= lambda* (W >= lambda^a for the average criterion)
            scale = beta if instance.criterion == DISCOUNTED else 1.0
            for i in range(M):
                or_mask_trace[t - 1, i] = (
                    scale * sims[i].indices[belief[0, i]] >= lam_star - 1e-12
                )
            y_trace[t - 1] = int(or_mask_trace[t - 1].sum())
            selection_trace[t - 1] = np.sort(sel_cols[0])

        # fixed draw order per slot: success draws for bandits 0..M-1, then
        # transition draws for bandits 0..M-1
        success = np.zeros((runs, M), dtype=bool)
        for i in range(M):
            u = rng.uniform()
            success[:, i] = sel_mask[:, i] & (u < sims[i].rho)

        for i in range(M):
            obs = true_state[:, i].copy()
            u = rng.uniform()
            col = sims[i].cum_transition[:, true_state[:, i]]  # (N, runs)
            nxt = (u[None, :] > col).sum(axis=0)
            true_state[:, i] = np.minimum(nxt, sims[i].n_chain - 1)
            belief[:, i] = np.where(
                success[:, i], obs * sims[i].L + 1, sims[i].passive_next[belief[:, i]]
            )

    if instance.criterion == DISCOUNTED:
        per_run = disc_total
    else:
        per_run = avg_total / (horizon - burn)
        cap = sum(np.log2(b.chain.n_states) for b in instance.bandits)
        if per_run.min() < -1e-12 or per_run.max() > cap + 1e-9:
            raise AssertionError("time-average UoI left its feasible range")

    mean = float(per_run.mean())
    stderr = float(per_run.std(ddof=1) / math.sqrt(runs)) if runs > 1 else 0.0
    return SimResult(
        policy=policy if named else getattr(policy, "__name__", "custom"),
        criterion=instance.criterion,
        m=m,
        n_bandits=M,
        runs=runs,
        horizon=horizon,
        burn_in=burn,
        seed=seed,
        discount=beta,
        per_run=per_run,
        mean=mean,
        stderr=stderr,
        activation_freq=act_counts.sum(axis=0) / (runs * horizon),
        y_trace=y_trace,
        or_mask_trace=or_mask_trace,
        selection_trace=selection_trace,
    )


@dataclass
class SweepRow:
    n_bandits: int
    m: int
    class_counts: list[int]
    rounding_residues: list[float]
    per_bandit_cost: float
    per_bandit_stderr: float
    per_bandit_bound: float
    gap: float


@dataclass
class AsymptoticSweep:
    alpha: float
    proportions: list[float]
    criterion: str
    discount: float
    lambda_star: float
    m_list: list[int]
    rows: list[SweepRow]

    def to_json_dict(self) -> dict:
        return {
            "schema_version": RESULT_SCHEMA_VERSION,
            "alpha": self.alpha,
            "proportions": self.proportions,
            "criterion": self.criterion,
            "discount": self.discount,
            "lambda_star": self.lambda_star,
            "m_list": self.m_list,
            "rows": [
                {
                    "n_bandits": r.n_bandits,
                    "m": r.m,
                    "class_counts": r.class_counts,
                    "rounding_residues": r.rounding_residues,
                    "per_bandit_cost": r.per_bandit_cost,
                    "per_bandit_stderr": r.per_bandit_stderr,
                    "per_bandit_bound": r.per_bandit_bound,
                    "gap": r.gap,
                }
                for r in self.rows
            ],
        }


def _class_counts(proportions, m_int, alpha) -> tuple[int, list[int], list[float]]:
    m_req = alpha * m_int
    if abs(m_req - round(m_req)) > 1e-9:
        raise ValueError(f"M*alpha = {m_req} is not integral for M = {m_int}")
    counts = [int(round(q * m_int)) for q in proportions]
    residues = [q * m_int - c for q, c in zip(proportions, counts)]
    if sum(counts) != m_int:
        raise ValueError(f"class proportions do not fill M = {m_int}: counts {counts}")
    return int(round(m_req)), counts, residues


def asymptotic_sweep(
    classes: list[tuple[BanditSpec, float]],
    alpha: float,
    m_list: list[int],
    runs: int,
    seed: int,
    criterion: str,
    discount: float,
    truncation_L,
    horizon: int | None = None,
    burn_in: int | None = None,
    gradient_opts: dict | None = None,
) -> AsymptoticSweep:
    """Scale the population at fixed class mix and channel ratio alpha = m/M.

    For each M the gain-index policy is simulated (class duplicates share one
    index table) and compared against the per-bandit relaxed lower bound
    f(lam*)/M, which depends only on the class mix.  Reports the gap series.
    """
    proportions = [q for _, q in classes]
    if abs(sum(proportions) - 1.0) > 1e-9:
        raise ValueError("class proportions must sum to 1")
    if not 0.0 < alpha < 1.0:
        raise ValueError("alpha must be in (0, 1)")
    m_list = sorted(int(v) for v in m_list)
    plans = {M: _class_counts(proportions, M, alpha) for M in m_list}

    beta = 1.0 if criterion == AVERAGE else discount
    class_mdps = [
        build_truncated(b, int(truncation_L) if np.isscalar(truncation_L) else int(truncation_L[k]), beta)
        for k, (b, _) in enumerate(classes)
    ]

    # lambda* is mix-invariant: compute it on the smallest population
    m0 = m_list[0]
    m_chan0, counts0, _ = plans[m0]
    mdps0 = [class_mdps[k] for k, c in enumerate(counts0) for _ in range(c)]
    problem = make_problem(mdps0, m_chan0, criterion, **(gradient_opts or {}))
    trace = gradient_search(problem)
    lam_star = trace.lambda_star

    if criterion == DISCOUNTED:
        sols = [policy_iteration_discounted(mdp, lam_star) for mdp in class_mdps]
        tables = [gain_indices_discounted(mdp, lam_star, policy=s) for mdp, s in zip(class_mdps, sols)]
        class_values = [float(s.values[0]) for s in sols]  # initial state omega
        bound_terms = lambda counts, M, m_chan: (
            sum(c * v for c, v in zip(counts, class_values)) - m_chan * lam_star / (1.0 - beta)
        ) / M
    else:
        sols = [solve_average(mdp, lam_star) for mdp in class_mdps]
        tables = [gain_indices_average(mdp, lam_star, policy=s) for mdp, s in zip(class_mdps, sols)]
        class_gains = [float(s.gain) for s in sols]
        bound_terms = lambda counts, M, m_chan: (
            sum(c * g for c, g in zip(counts, class_gains)) - m_chan * lam_star
        ) / M

    if horizon is None:
        total_bh = max(m_list) * max(np.log2(b.chain.n_states) for b, _ in classes)
        horizon = discounted_horizon(beta, total_bh) if criterion == DISCOUNTED else 10_000

    rows = []
    for M in m_list:
        m_chan, counts, residues = plans[M]
        bandits, rep_tables = [], []
        for k, c in enumerate(counts):
            base = classes[k][0]
            for j in range(c):
                label = f"{base.label}-{j + 1}"
                bandits.append(BanditSpec(base.chain, base.success_prob, label))
                tab = tables[k]
                rep_tables.append(
                    GainIndexTable(
                        bandit_label=label,
                        criterion=tab.criterion,
                        lambda_star=tab.lambda_star,
                        indices=tab.indices,
                        values=tab.values,
                        beliefs=tab.beliefs,
                        truncation_L=tab.truncation_L,
                    )
                )
        instance = RMABInstance(bandits, m_chan, criterion, beta, seed=seed)
        res = simulate(instance, "gain_index", horizon, runs, seed=seed, tables=rep_tables, burn_in=burn_in)
        bound = bound_terms(counts, M, m_chan)
        cost = res.mean / M
        rows.append(
            SweepRow(
                n_bandits=M,
                m=m_chan,
                class_counts=counts,
                rounding_residues=residues,
                per_bandit_cost=cost,
                per_bandit_stderr=res.stderr / M,
                per_bandit_bound=float(bound),
                gap=float(cost - bound),
            )
        )
    return AsymptoticSweep(
        alpha=alpha,
        proportions=proportions,
        criterion=criterion,
        discount=beta,
        lambda_star=float(lam_star),
        m_list=m_list,
        rows=rows,
    )
