"""Dual objective of the relaxed scheduling problem and its gradient search.

For service charge lam the relaxed problem decouples into single-bandit
solves; the dual objective is

    discounted:  f(lam) = sum_i V_i(chi_i, lam) - m*lam/(1-beta)
    average:     l(lam) = sum_i g_i(lam)        - m*lam

Both are concave and piecewise linear in lam, with derivative equal to the
summed expected activation usage minus the channel budget.  The gradient
iteration lam_{k+1} = lam_k + a_k * f'(lam_k) with a_k = c/(k+1) stops once
consecutive derivatives bracket a sign change within epsilon.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .belief_mdp import TruncatedBeliefMDP
from .errors import MaxItersExceeded, MultichainPolicy
from .solvers import (
    AVERAGE,
    DISCOUNTED,
    PolicyAndValues,
    average_policy_evaluation,
    policy_evaluation_discounted,
    policy_iteration_discounted,
    solve_average,
)


@dataclass
class LagrangeProblem:
    mdps: list[TruncatedBeliefMDP]
    initial_states: list[int]
    m: int
    criterion: str
    stepsize_c: float
    epsilon: float
    max_iters: int = 5000

    def __post_init__(self):
        if not 1 <= self.m < len(self.mdps):
            raise ValueError(f"need 1 <= m < M, got m={self.m}, M={len(self.mdps)}")
        if self.epsilon <= 0 or self.stepsize_c <= 0:
            raise ValueError("stepsize_c and epsilon must be > 0")
        if len(self.initial_states) != len(self.mdps):
            raise ValueError("one initial state per bandit required")
        betas = {mdp.discount for mdp in self.mdps}
        if len(betas) != 1:
            raise ValueError("all bandits must share one discount factor")
        self.beta = betas.pop()
        if self.criterion == DISCOUNTED and not self.beta < 1.0:
            raise ValueError("discounted problems need discount < 1")
        if self.criterion == AVERAGE and self.beta != 1.0:
            raise ValueError("average problems need MDPs built with discount = 1")


def make_problem(
    mdps,
    m,
    criterion,
    initial_states=None,
    stepsize_c=None,
    epsilon=None,
    max_iters=5000,
) -> LagrangeProblem:
    """LagrangeProblem with scale-aware defaults: c = (1-beta)*B_H (discounted)
    or B_H (average), epsilon = 1e-3*B_H, where B_H = max_i log2 N_i."""
    if initial_states is None:
        initial_states = [0] * len(mdps)  # omega
    b_h = max(np.log2(mdp.bandit.chain.n_states) for mdp in mdps)
    beta = mdps[0].discount
    if stepsize_c is None:
        stepsize_c = (1.0 - beta) * b_h if criterion == DISCOUNTED else b_h
    if epsilon is None:
        epsilon = 1e-3 * b_h
    return LagrangeProblem(
        mdps=list(mdps),
        initial_states=list(initial_states),
        m=m,
        criterion=criterion,
        stepsize_c=float(stepsize_c),
        epsilon=float(epsilon),
        max_iters=max_iters,
    )


@dataclass
class GradientTrace:
    iterates: list[tuple[float, float]]          # (lam_k, derivative at lam_k)
    lambda_star: float | None
    stop_reason: str                             # 'converged' | 'max_iters'
    bracket: tuple[float, float] | None = field(default=None)


def derivative_discounted(mdp: TruncatedBeliefMDP, optimal_policy, initial_state: int) -> float:
    """dV/dlam at the policy's lam: expected discounted number of activations
    from the initial state, via policy evaluation with the action-indicator cost."""
    actions = optimal_policy.actions if isinstance(optimal_policy, PolicyAndValues) else np.asarray(optimal_policy)
    h = policy_evaluation_discounted(mdp, actions, actions.astype(float))
    return float(h[initial_state])


def derivative_average(mdp: TruncatedBeliefMDP, optimal_policy) -> float:
    """dg/dlam: long-run activation rate of the policy, in [0, 1]."""
    actions = optimal_policy.actions if isinstance(optimal_policy, PolicyAndValues) else np.asarray(optimal_policy)
    rate, _ = average_policy_evaluation(mdp, actions, actions.astype(float))
    return float(rate)


def _derivative_average_fallback(mdp, actions, initial_state) -> float:
    # Multichain chain at rho = 1: approximate the activation rate by the
    # (1-beta)-scaled discounted activation value near beta = 1.
    beta = 0.9999
    proxy = TruncatedBeliefMDP(
        bandit=mdp.bandit,
        truncation_L=mdp.truncation_L,
        discount=beta,
        states=mdp.states,
        costs_passive=mdp.costs_passive,
        passive_next=mdp.passive_next,
        reset_states=mdp.reset_states,
        passive_transitions=mdp.passive_transitions,
        active_transitions=mdp.active_transitions,
    )
    h = policy_evaluation_discounted(proxy, actions, np.asarray(actions, dtype=float))
    return float((1.0 - beta) * h[initial_state])


def _solve_bandit(problem, i, lam, warm):
    mdp = problem.mdps[i]
    if problem.criterion == DISCOUNTED:
        init = warm.get(i) if warm is not None else None
        pol = policy_iteration_discounted(mdp, lam, init=init)
        if warm is not None:
            warm[i] = pol.actions
        deriv = derivative_discounted(mdp, pol, problem.initial_states[i])
    else:
        init_z = warm.get(i) if warm is not None else None
        pol = solve_average(mdp, lam, init_z=init_z)
        if warm is not None:
            warm[i] = pol.values
        try:
            deriv = derivative_average(mdp, pol)
        except MultichainPolicy:
            deriv = _derivative_average_fallback(mdp, pol.actions, problem.initial_states[i])
    return pol, deriv


def _solve_all(problem, lam, warm):
    """Solve every bandit at lam; identical (mdp, initial state) pairs are
    solved once and shared (duplicated bandits are common in sweeps)."""
    cache = {}
    out = []
    for i in range(len(problem.mdps)):
        key = (id(problem.mdps[i]), problem.initial_states[i])
        if key not in cache:
            cache[key] = _solve_bandit(problem, i, lam, warm)
        out.append(cache[key])
    return out


def objective_derivative(problem: LagrangeProblem, lam: float, warm=None) -> float:
    """f'(lam) = sum_i dV_i/dlam - m/(1-beta), or l'(lam) = sum_i g_i' - m."""
    if lam < 0:
        raise ValueError("lam must be >= 0")
    solved = _solve_all(problem, lam, warm)
    total = sum(d for _, d in solved)
    if problem.criterion == DISCOUNTED:
        return float(total - problem.m / (1.0 - problem.beta))
    return float(total - problem.m)


def objective_value(problem: LagrangeProblem, lam: float, warm=None) -> float:
    """f(lam) or l(lam); a lower bound on the original problem's optimum."""
    solved = _solve_all(problem, lam, warm)
    if problem.criterion == DISCOUNTED:
        total = sum(pol.values[problem.initial_states[i]] for i, (pol, _) in enumerate(solved))
        return float(total - problem.m * lam / (1.0 - problem.beta))
    total = sum(pol.gain for pol, _ in solved)
    return float(total - problem.m * lam)


def derivative_zero_tol(problem: LagrangeProblem) -> float:
    """Width of the numerical zero band for f' in the stopping test.

    On a flat-optimum interval f' is exactly zero in theory but comes out of
    the linear solves as O(1e-14) noise of either sign; snapping |f'| below
    this band to zero lets the sign-product criterion fire there.
    """
    budget = problem.m / (1.0 - problem.beta) if problem.criterion == DISCOUNTED else problem.m
    return 1e-9 * max(1.0, budget)


def gradient_search(
    problem: LagrangeProblem, warm_start: bool = True, deriv_tol: float | None = None
) -> GradientTrace:
    """Run lam_{k+1} = max(lam_k + c/(k+1) * f'(lam_k), 0) from lam_0 = 0.

    Stops when f'(lam_k) * f'(lam_{k+1}) <= 0 and |lam_{k+1} - lam_k| <
    epsilon, returning lambda_star = min of the bracketing pair; derivatives
    within deriv_tol of zero count as zero in the sign test.  Each bandit's
    solve is warm-started with the previous iterate's policy.
    """
    if deriv_tol is None:
        deriv_tol = derivative_zero_tol(problem)

    def snap(d):
        return 0.0 if abs(d) <= deriv_tol else d

    warm = {} if warm_start else None
    lam = 0.0
    deriv = objective_derivative(problem, lam, warm)
    iterates = [(lam, deriv)]
    for k in range(problem.max_iters):
        step = problem.stepsize_c / (k + 1) * deriv
        lam_next = max(lam + step, 0.0)
        deriv_next = objective_derivative(problem, lam_next, warm)
        iterates.append((lam_next, deriv_next))
        if snap(deriv) * snap(deriv_next) <= 0.0 and abs(lam_next - lam) < problem.epsilon:
            bracket = (min(lam, lam_next), max(lam, lam_next))
            return GradientTrace(
                iterates=iterates,
                lambda_star=min(lam, lam_next),
                stop_reason="converged",
                bracket=bracket,
            )
        lam, deriv = lam_next, deriv_next
    trace = GradientTrace(iterates=iterates, lambda_star=None, stop_reason="max_iters")
    raise MaxItersExceeded(
        f"gradient search did not meet the stopping criterion in {problem.max_iters} iterations",
        trace=trace,
    )
