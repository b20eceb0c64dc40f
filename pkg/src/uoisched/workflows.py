"""End-to-end pipelines shared by the CLI, the demos, and the test suite."""

from __future__ import annotations

from dataclasses import dataclass

from .belief_mdp import (
    TruncatedBeliefMDP,
    TruncationDiagnostics,
    average_error_bound,
    build_truncated,
    choose_truncation,
    discounted_error_bound,
    truncation_diagnostics,
)
from .config import ExperimentConfig
from .index_policy import GainIndexTable, gain_indices_average, gain_indices_discounted
from .lagrange import GradientTrace, gradient_search, make_problem
from .oracle import OracleResult, joint_solve_average, joint_solve_discounted
from .simulate import SimResult, simulate
from .solvers import DISCOUNTED


@dataclass
class PreparedInstance:
    config: ExperimentConfig
    mdps: list[TruncatedBeliefMDP]
    diagnostics: list[TruncationDiagnostics]
    initial_states: list[int]

    @property
    def l_per_bandit(self) -> list[int]:
        return [mdp.truncation_L for mdp in self.mdps]


def prepare(config: ExperimentConfig) -> PreparedInstance:
    """Choose truncations, build the per-bandit MDPs, map initial beliefs."""
    mdps, diags, init_ids = [], [], []
    for bandit, chi in zip(config.bandits, config.initial_beliefs):
        if config.truncation_mode == "fixed":
            L = config.truncation_L
            diag = truncation_diagnostics(bandit.chain, L)
        else:
            L, diag = choose_truncation(bandit, config.eta_target)
        mdp = build_truncated(bandit, L, config.discount)
        mdps.append(mdp)
        diags.append(diag)
        init_ids.append(0 if chi is None else mdp.nearest_state(chi))
    return PreparedInstance(config=config, mdps=mdps, diagnostics=diags, initial_states=init_ids)


@dataclass
class IndexComputation:
    tables: list[GainIndexTable]
    trace: GradientTrace
    lambda_star: float


def compute_index_tables(prep: PreparedInstance) -> IndexComputation:
    """Gradient search for the optimal multiplier, then one table per bandit."""
    cfg = prep.config
    problem = make_problem(
        prep.mdps,
        cfg.m,
        cfg.criterion,
        initial_states=prep.initial_states,
        stepsize_c=cfg.gradient_c,
        epsilon=cfg.gradient_epsilon,
        max_iters=cfg.gradient_max_iters,
    )
    trace = gradient_search(problem)
    lam = trace.lambda_star
    if cfg.criterion == DISCOUNTED:
        tables = [gain_indices_discounted(mdp, lam) for mdp in prep.mdps]
    else:
        tables = [gain_indices_average(mdp, lam) for mdp in prep.mdps]
    return IndexComputation(tables=tables, trace=trace, lambda_star=lam)


def bound_report(prep: PreparedInstance, lam: float = 0.0) -> list[dict]:
    """Truncation certificates per bandit (value bound at `lam`, average bound)."""
    rows = []
    for bandit, mdp, diag in zip(prep.config.bandits, prep.mdps, prep.diagnostics):
        row = {
            "label": bandit.label,
            "L": mdp.truncation_L,
            "eta_L": diag.eta_L,
            "sigma_L": diag.sigma_L,
            "b_h": diag.b_h,
            "probe_depth": diag.probe_depth,
            "average_bound": average_error_bound(diag),
        }
        if prep.config.criterion == DISCOUNTED:
            row["discounted_bound"] = discounted_error_bound(
                diag, lam, prep.config.discount, bandit.chain.n_states, bandit.success_prob
            )
            row["bound_at_lambda"] = lam
        rows.append(row)
    return rows


def run_simulation(
    prep: PreparedInstance, policy: str, tables=None, record_y: bool = False
) -> SimResult:
    cfg = prep.config
    return simulate(
        cfg.build_instance(),
        policy,
        horizon=cfg.horizon,
        runs=cfg.runs,
        seed=cfg.seed,
        tables=tables,
        truncation_L=prep.l_per_bandit,
        burn_in=cfg.burn_in,
        record_y=record_y,
    )


def run_oracle(prep: PreparedInstance, tol: float = 1e-8, cap: int | None = None) -> OracleResult:
    kwargs = {} if cap is None else {"cap": cap}
    if prep.config.criterion == DISCOUNTED:
        return joint_solve_discounted(
            prep.mdps, prep.config.m, tol=tol, initial_states=prep.initial_states, **kwargs
        )
    return joint_solve_average(prep.mdps, prep.config.m, tol=max(tol, 1e-8), **kwargs)
