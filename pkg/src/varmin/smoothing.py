"""Smoothed VaR: twice-differentiable approximations of the plus function,
the smoothed quantile as the root of a monotone scalar equation, its
implicit-function gradient, and a Frank-Wolfe descent over the polytope
with epsilon continuation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, replace

import numpy as np

from .instances import Instance
from .lp import LpModel, solve_lp

LOGEXP = "logexp"
SQRT = "sqrt"

FW_TOL = 1e-7
ROOT_RESIDUAL = 1e-12
BISECT_WIDTH = 1e-6


class DegenerateCurvature(Exception):
    """Total curvature underflowed: epsilon too small for the data scale."""


@dataclass(frozen=True)
class SmoothKind:
    """Plus-function smoothing family and its epsilon.

    logexp: eps*log(1 + exp(t/eps)), uniform error eps*log(2).
    sqrt:   (sqrt(t^2 + 4 eps^2) + t)/2, uniform error eps, and an upper
            envelope of the plus function.
    """

    kind: str
    epsilon: float

    def __post_init__(self):
        if self.kind not in (LOGEXP, SQRT):
            raise ValueError(f"kind must be '{LOGEXP}' or '{SQRT}'")
        if not self.epsilon > 0.0:
            raise ValueError("epsilon must be positive")

    @property
    def uniform_constant(self) -> float:
        return math.log(2.0) if self.kind == LOGEXP else 1.0


def rho(kind: SmoothKind, t):
    """Smoothed plus function, overflow-safe for large |t|/eps."""
    t = np.asarray(t, dtype=float)
    eps = kind.epsilon
    if kind.kind == SQRT:
        out = (np.sqrt(t * t + 4.0 * eps * eps) + t) / 2.0
    else:
        u = t / eps
        out = np.where(u > 30.0,
                       t + eps * np.log1p(np.exp(-np.clip(u, 30.0, None))),
                       eps * np.log1p(np.exp(np.clip(u, None, 30.0))))
    return float(out) if out.ndim == 0 else out


def rho_prime(kind: SmoothKind, t):
    t = np.asarray(t, dtype=float)
    eps = kind.epsilon
    if kind.kind == SQRT:
        out = 0.5 * (t / np.sqrt(t * t + 4.0 * eps * eps) + 1.0)
    else:
        u = t / eps
        out = np.where(u >= 0.0,
                       1.0 / (1.0 + np.exp(-np.abs(u))),
                       np.exp(-np.abs(u)) / (1.0 + np.exp(-np.abs(u))))
    return float(out) if out.ndim == 0 else out


def rho_second(kind: SmoothKind, t):
    t = np.asarray(t, dtype=float)
    eps = kind.epsilon
    if kind.kind == SQRT:
        out = 2.0 * eps * eps / np.power(t * t + 4.0 * eps * eps, 1.5)
    else:
        sig = rho_prime(kind, t)
        out = np.asarray(sig * (1.0 - sig) / eps)
    return float(out) if out.ndim == 0 else out


def smoothed_var(inst: Instance, kind: SmoothKind, x) -> float:
    """The unique m with sum_i p_i rho'(x.y^i - m) = 1 - beta.

    The left side is strictly decreasing in m with limits 1 and 0, so the
    root exists and is unique; bracketed bisection narrows it down, then
    safeguarded Newton polishes to residual 1e-12.
    """
    losses = inst.scenario_losses(x)
    target = 1.0 - inst.beta
    eps = kind.epsilon

    def h(m):
        return float(inst.probs @ rho_prime(kind, losses - m))

    lo = float(losses.min()) - 1.0 - eps
    hi = float(losses.max()) + 1.0 + eps
    # the stated bracket straddles for small eps; widen if it does not
    width = hi - lo
    for _ in range(60):
        if h(lo) >= target >= h(hi):
            break
        lo -= width
        hi += width
        width *= 2.0
    for _ in range(200):
        if hi - lo <= BISECT_WIDTH:
            break
        mid = 0.5 * (lo + hi)
        if h(mid) >= target:
            lo = mid
        else:
            hi = mid
    m = 0.5 * (lo + hi)
    for _ in range(100):
        resid = h(m) - target
        if abs(resid) <= ROOT_RESIDUAL:
            break
        slope = -float(inst.probs @ rho_second(kind, losses - m))
        if slope == 0.0:
            break
        step = -resid / slope
        m_new = m + step
        if not lo <= m_new <= hi:
            m_new = 0.5 * (lo + hi)
        if h(m_new) - target >= 0.0:
            lo = m_new
        else:
            hi = m_new
        m = m_new
    return float(m)


def smoothed_var_grad(inst: Instance, kind: SmoothKind, x) -> np.ndarray:
    """Gradient of the smoothed VaR at x: a curvature-weighted convex
    combination of the scenario loss vectors."""
    losses = inst.scenario_losses(x)
    m = smoothed_var(inst, kind, x)
    weights = inst.probs * rho_second(kind, losses - m)
    denom = float(weights.sum())
    if denom < 1e-300:
        raise DegenerateCurvature(
            f"total curvature {denom:g} underflowed at epsilon={kind.epsilon:g}")
    return (weights @ inst.losses) / denom


@dataclass
class SmoothResult:
    x: np.ndarray
    m: float
    grad: np.ndarray
    iterations: int
    stationarity: float
    epsilon: float


def _linear_minimizer(inst: Instance, g: np.ndarray) -> np.ndarray:
    model = LpModel()
    cols = inst.polytope.install(model)
    model.set_objective({cols[j]: g[j] for j in range(inst.n)})
    sol = solve_lp(model)
    if not sol.is_optimal:
        raise ValueError(f"linear minimization oracle returned {sol.status}")
    return sol.x[cols].copy()


def smooth_minimize(inst: Instance, kind: SmoothKind, x0,
                    schedule=None, max_iter: int = 500,
                    fw_tol: float = FW_TOL) -> SmoothResult:
    """Frank-Wolfe descent on the smoothed VaR over the polytope.

    Each iteration solves one linear minimization over X and backtracks
    along the segment toward the vertex. schedule=None runs the default
    continuation (0.1, 0.01, then kind.epsilon), re-anchoring at each
    stage; pass an explicit sequence to control it.
    """
    if schedule is None:
        schedule = [e for e in (1e-1, 1e-2) if e > kind.epsilon] + [kind.epsilon]
    x = np.asarray(x0, dtype=float).copy()
    total_iters = 0
    for eps in schedule:
        stage = replace(kind, epsilon=float(eps))
        f = smoothed_var(inst, stage, x)
        for _ in range(max_iter):
            g = smoothed_var_grad(inst, stage, x)
            v = _linear_minimizer(inst, g)
            gap = float(g @ (x - v))
            if gap <= fw_tol:
                break
            total_iters += 1
            d = v - x
            step = 1.0
            improved = False
            while step > 1e-14:
                xn = x + step * d
                fn = smoothed_var(inst, stage, xn)
                if fn <= f - 1e-4 * step * gap:
                    x, f = xn, fn
                    improved = True
                    break
                step *= 0.5
            if not improved:
                break
    final = replace(kind, epsilon=float(schedule[-1]))
    m = smoothed_var(inst, final, x)
    g = smoothed_var_grad(inst, final, x)
    v = _linear_minimizer(inst, g)
    gap = float(g @ (x - v))
    return SmoothResult(x=x, m=m, grad=g, iterations=total_iters,
                        stationarity=gap, epsilon=float(schedule[-1]))
