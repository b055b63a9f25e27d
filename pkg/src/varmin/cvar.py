"""Convex side of the problem: CVaR minimization over the polytope, fast
CVaR evaluation through the knapsack dual, and exact VaR for a fixed
portfolio via the least-element LP.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import Instance
from .lp import INFEASIBLE, LpModel, LpSolution, solve_lp


class Infeasible(Exception):
    """The feasible set is empty."""


@dataclass
class CvarSolution:
    cvar: float
    m: float
    x: np.ndarray
    tau: np.ndarray


def _cvar_model(inst: Instance) -> tuple[LpModel, int, list[int], list[int]]:
    """LP over (m, x, tau): min m + sum(p_i tau_i)/(1-beta) with
    tau_i >= x.y^i - m, tau >= 0, x in X."""
    model = LpModel()
    m_col = model.add_var("m", -np.inf, np.inf)
    x_cols = inst.polytope.install(model)
    t_cols = [model.add_var(f"tau{i}") for i in range(inst.k)]
    for i in range(inst.k):
        row = {m_col: 1.0, t_cols[i]: 1.0}
        for j in range(inst.n):
            row[x_cols[j]] = row.get(x_cols[j], 0.0) - inst.losses[i, j]
        model.add_row(row, ">=", 0.0)
    scale = 1.0 / (1.0 - inst.beta)
    obj = {m_col: 1.0}
    for i in range(inst.k):
        obj[t_cols[i]] = inst.probs[i] * scale
    model.set_objective(obj)
    return model, m_col, x_cols, t_cols


def minimize_cvar(inst: Instance) -> CvarSolution:
    """Global CVaR minimizer over X. Raises Infeasible when X is empty."""
    model, m_col, x_cols, t_cols = _cvar_model(inst)
    sol = solve_lp(model)
    if sol.status == INFEASIBLE:
        raise Infeasible("feasible set is empty")
    return CvarSolution(cvar=float(sol.objective),
                        m=float(sol.x[m_col]),
                        x=sol.x[x_cols].copy(),
                        tau=sol.x[t_cols].copy())


def knapsack_weights(inst: Instance, x) -> np.ndarray:
    """Optimal dual weights: fill capacities p_i/(1-beta) in order of
    decreasing loss until the weights sum to one. Ties at equal losses are
    filled in ascending scenario index."""
    losses = inst.scenario_losses(x)
    caps = inst.caps
    order = np.lexsort((np.arange(inst.k), -losses))
    lam = np.zeros(inst.k)
    remaining = 1.0
    for i in order:
        take = caps[i] if caps[i] < remaining else remaining
        lam[i] = take
        remaining -= take
        if remaining <= 0.0:
            break
    return lam


def cvar_of(inst: Instance, x) -> float:
    """CVaR_beta of the loss of portfolio x, by the sorting procedure."""
    lam = knapsack_weights(inst, x)
    return float(lam @ inst.scenario_losses(x))


def cvar_lp_of(inst: Instance, x) -> float:
    """CVaR_beta of x through the primal LP over (m, tau); test oracle for
    the knapsack route."""
    model = LpModel()
    m_col = model.add_var("m", -np.inf, np.inf)
    t_cols = [model.add_var(f"tau{i}") for i in range(inst.k)]
    losses = inst.scenario_losses(x)
    for i in range(inst.k):
        model.add_row({m_col: 1.0, t_cols[i]: 1.0}, ">=", losses[i])
    scale = 1.0 / (1.0 - inst.beta)
    obj = {m_col: 1.0}
    for i in range(inst.k):
        obj[t_cols[i]] = inst.probs[i] * scale
    model.set_objective(obj)
    sol = solve_lp(model)
    return float(sol.objective)


def _least_element_model(inst: Instance, losses: np.ndarray, cvar: float,
                         sense: float) -> LpSolution:
    model = LpModel()
    m_col = model.add_var("m", -np.inf, np.inf)
    t_cols = [model.add_var(f"tau{i}") for i in range(inst.k)]
    for i in range(inst.k):
        model.add_row({m_col: 1.0, t_cols[i]: 1.0}, ">=", losses[i])
    scale = 1.0 / (1.0 - inst.beta)
    row = {m_col: 1.0}
    for i in range(inst.k):
        row[t_cols[i]] = inst.probs[i] * scale
    model.add_row(row, "<=", cvar)
    model.set_objective({m_col: sense})
    return solve_lp(model)


def var_of(inst: Instance, x) -> float:
    """VaR_beta of portfolio x: the least element of the CVaR argmin,
    computed by an LP with the CVaR level as a budget row."""
    losses = inst.scenario_losses(x)
    sol = _least_element_model(inst, losses, cvar_of(inst, x), 1.0)
    return float(sol.objective)


def mbeta_interval(inst: Instance, x) -> tuple[float, float]:
    """Least and greatest elements of the CVaR argmin interval at x.

    A width above tolerance means the VaR level is not unique, which is
    worth reporting next to smoothing results.
    """
    losses = inst.scenario_losses(x)
    cv = cvar_of(inst, x)
    lo = _least_element_model(inst, losses, cv, 1.0)
    hi = _least_element_model(inst, losses, cv, -1.0)
    return float(lo.objective), float(-hi.objective)


def var_quantile(inst: Instance, x) -> float:
    """Discrete beta-quantile of the loss distribution: the smallest loss m
    with total probability of {losses <= m} at least beta. Test oracle for
    var_of."""
    losses = inst.scenario_losses(x)
    order = np.argsort(losses, kind="stable")
    acc = 0.0
    for i in order:
        acc += inst.probs[i]
        if acc >= inst.beta - 1e-12:
            return float(losses[i])
    return float(losses[order[-1]])
