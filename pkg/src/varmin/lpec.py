"""Complementarity formulation of minimum VaR: feasible-point
representation, residuals, index classification, and multiplier recovery.

A point carries (m, x, tau, lam, s) with s_i = m + tau_i - x.y^i. The two
complementarity pairs are (tau_i, cap_i - lam_i) and (lam_i, s_i), with
cap_i = p_i/(1-beta), plus the normalization sum(lam) = 1.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .instances import Instance
from .lp import LpModel, solve_lp

CLASSIFY_TOL = 1e-6


class AmbiguousClassification(Exception):
    """A quantity falls in the (tol, 2 tol) band: tighten the solve."""


@dataclass
class LpecPoint:
    m: float
    x: np.ndarray
    tau: np.ndarray
    lam: np.ndarray
    s: np.ndarray

    @classmethod
    def build(cls, inst: Instance, m: float, x, tau=None, lam=None,
              tol: float = CLASSIFY_TOL) -> "LpecPoint":
        """Complete a point from partial data: tau defaults to the positive
        part of (x.y^i - m); lam is recovered when absent."""
        x = np.asarray(x, dtype=float)
        losses = inst.scenario_losses(x)
        if tau is None:
            tau = np.maximum(0.0, losses - m)
        tau = np.asarray(tau, dtype=float)
        s = m + tau - losses
        if lam is None:
            lam = recover_multipliers(inst, m, x, tau, tol=tol)
        return cls(m=float(m), x=x, tau=tau, lam=np.asarray(lam, dtype=float), s=s)


@dataclass
class IndexClassification:
    """Sign-pattern classification of both complementarity pairs.

    alpha: strictly active side one (tau > 0, resp. lam > 0); beta: doubly
    degenerate; gamma: strictly active side two. Indices are 0-based.
    """

    alpha_tau: tuple[int, ...]
    beta_tau: tuple[int, ...]
    gamma_tau: tuple[int, ...]
    alpha_lam: tuple[int, ...]
    beta_lam: tuple[int, ...]
    gamma_lam: tuple[int, ...]
    tol: float = CLASSIFY_TOL


def residuals(inst: Instance, pt: LpecPoint) -> tuple[float, float]:
    """(worst linear-constraint violation, total complementarity gap).

    The gap is sum_i [tau_i (cap_i - lam_i) + lam_i s_i]; both are
    nonnegative at any linearly feasible point.
    """
    caps = inst.caps
    losses = inst.scenario_losses(pt.x)
    poly = inst.polytope
    feas = 0.0
    Aeq, beq = poly.eq
    if Aeq.size:
        feas = max(feas, float(np.max(np.abs(Aeq @ pt.x - beq))))
    Aub, bub = poly.ineq
    if Aub.size:
        feas = max(feas, float(np.max(Aub @ pt.x - bub)))
    feas = max(feas, float(np.max(poly.lower - pt.x, initial=0.0)))
    feas = max(feas, float(np.max(pt.x - poly.upper, initial=0.0)))
    feas = max(feas, float(np.max(-pt.tau, initial=0.0)))
    feas = max(feas, float(np.max(-pt.lam, initial=0.0)))
    feas = max(feas, float(np.max(pt.lam - caps, initial=0.0)))
    feas = max(feas, float(np.max(-pt.s, initial=0.0)))
    feas = max(feas, float(np.max(np.abs(pt.s - (pt.m + pt.tau - losses)))))
    feas = max(feas, abs(float(pt.lam.sum()) - 1.0))
    gap = float(np.sum(pt.tau * (caps - pt.lam) + pt.lam * pt.s))
    return feas, gap


def _split(primal: np.ndarray, dual: np.ndarray, tol: float):
    """Classify each index by the sign pattern of a complementarity pair."""
    for v in (primal, dual):
        band = (np.abs(v) > tol) & (np.abs(v) < 2.0 * tol)
        if band.any():
            i = int(np.flatnonzero(band)[0])
            raise AmbiguousClassification(
                f"value {v[i]:.3e} at index {i} falls inside ({tol:g}, {2*tol:g})")
    p_pos = primal > tol
    d_pos = dual > tol
    alpha = tuple(np.flatnonzero(p_pos & ~d_pos).tolist())
    beta = tuple(np.flatnonzero(~p_pos & ~d_pos).tolist())
    gamma = tuple(np.flatnonzero(~p_pos & d_pos).tolist())
    return alpha, beta, gamma, p_pos & d_pos


def classify(inst: Instance, pt: LpecPoint, tol: float = CLASSIFY_TOL) -> IndexClassification:
    """Assign every scenario to alpha/beta/gamma for both pairs.

    Raises AmbiguousClassification when a value sits in the (tol, 2 tol)
    guard band, and ValueError if some pair has both members positive
    (the point is not complementary at this tolerance).
    """
    caps = inst.caps
    a_t, b_t, g_t, both_t = _split(pt.tau, caps - pt.lam, tol)
    a_l, b_l, g_l, both_l = _split(pt.lam, pt.s, tol)
    if both_t.any() or both_l.any():
        raise ValueError("point violates complementarity beyond tolerance")
    return IndexClassification(alpha_tau=a_t, beta_tau=b_t, gamma_tau=g_t,
                               alpha_lam=a_l, beta_lam=b_l, gamma_lam=g_l, tol=tol)


def recover_multipliers(inst: Instance, m: float, x, tau,
                        tol: float = CLASSIFY_TOL) -> np.ndarray:
    """Recover dual weights for an (m, x, tau) restricted-LP solution.

    Weights are forced to cap where tau is positive, to zero where s is
    positive, and the remaining mass is spread over the doubly-degenerate
    indices by a small feasibility LP (ascending-index cost, so earlier
    scenarios fill first, deterministically).
    """
    x = np.asarray(x, dtype=float)
    tau = np.asarray(tau, dtype=float)
    caps = inst.caps
    s = m + tau - inst.scenario_losses(x)
    lam = np.zeros(inst.k)
    forced = (np.abs(s) <= tol) & (tau > tol)
    lam[forced] = caps[forced]
    free = (np.abs(s) <= tol) & ~forced
    remaining = 1.0 - lam.sum()
    if remaining < -tol:
        raise ValueError("forced cap weights already exceed one: point infeasible")
    remaining = max(remaining, 0.0)
    free_idx = np.flatnonzero(free)
    if remaining > tol and free_idx.size == 0:
        raise ValueError("no degenerate indices left to absorb dual mass")
    if free_idx.size:
        if remaining > float(caps[free_idx].sum()) + tol:
            raise ValueError("degenerate indices cannot absorb the dual mass")
        model = LpModel()
        cols = [model.add_var(f"lam{i}", 0.0, caps[i]) for i in free_idx]
        model.add_row({c: 1.0 for c in cols}, "=", remaining)
        model.set_objective({c: float(i + 1) for c, i in zip(cols, free_idx)})
        sol = solve_lp(model)
        if not sol.is_optimal:
            raise ValueError("multiplier recovery LP failed")
        lam[free_idx] = sol.x
    return lam


def min_var_exists_check(inst: Instance) -> float:
    """Floor on the objective: min over scenarios of min_{x in X} x.y^j,
    one LP per scenario. Certifies the problem is bounded below."""
    best = np.inf
    for i in range(inst.k):
        model = LpModel()
        cols = inst.polytope.install(model)
        model.set_objective({cols[j]: inst.losses[i, j] for j in range(inst.n)})
        sol = solve_lp(model)
        if sol.is_optimal:
            best = min(best, float(sol.objective))
    return best
