"""Upper bounds by piece restriction.

A piece of the complementarity feasible region pins each scenario to one
side of both pairs; the restricted problem collapses to an LP over
(m, x, tau). Starting from any feasible portfolio, sweeping the degenerate
index sets drives the bound down; for tiny k the exact optimum comes from
exhausting all pieces.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field

import numpy as np

from . import cvar, lpec
from .instances import Instance
from .lp import LpModel, LpSolution, solve_lp

ENUM_GUARD = 12
IMPROVE_TOL = 1e-9


class TooLarge(Exception):
    """Piece enumeration requested above the scenario-count guard."""


@dataclass(frozen=True)
class PieceSpec:
    """One piece: tau is free (weight pinned at cap) on free_tau and zero
    elsewhere; the slack s is pinned to zero on eq_s and free elsewhere.

    free_tau must be contained in eq_s: a positive tau forces the weight to
    its cap, which in turn forces the slack to vanish.
    """

    k: int
    free_tau: frozenset[int]
    eq_s: frozenset[int]

    def __post_init__(self):
        object.__setattr__(self, "free_tau", frozenset(self.free_tau))
        object.__setattr__(self, "eq_s", frozenset(self.eq_s))
        if not self.free_tau <= self.eq_s:
            raise ValueError("free_tau must be a subset of eq_s")
        if any(i < 0 or i >= self.k for i in self.eq_s):
            raise ValueError("piece indices out of range")

    @property
    def zero_tau(self) -> frozenset[int]:
        return frozenset(range(self.k)) - self.free_tau

    @property
    def free_s(self) -> frozenset[int]:
        return frozenset(range(self.k)) - self.eq_s

    def sort_key(self):
        return (tuple(sorted(self.free_tau)), tuple(sorted(self.eq_s)))


@dataclass
class UpperBoundTrace:
    """Accepted improvement steps and the best point found.

    steps holds (piece, lp_value, refreshed_var) per accepted move; the
    refreshed values are weakly decreasing.
    """

    start_value: float
    steps: list[tuple[PieceSpec, float, float]] = field(default_factory=list)
    best_value: float = math.inf
    best_x: np.ndarray | None = None
    witness: lpec.LpecPoint | None = None
    pieces_solved: int = 0


def restricted_lp(inst: Instance, piece: PieceSpec) -> LpSolution:
    """Solve min m over the given piece; variables are [m, x, tau...].

    Infeasible is a legal outcome (the piece may be empty).
    """
    model = LpModel()
    m_col = model.add_var("m", -math.inf, math.inf)
    x_cols = inst.polytope.install(model)
    t_cols = []
    for i in range(inst.k):
        up = math.inf if i in piece.free_tau else 0.0
        t_cols.append(model.add_var(f"tau{i}", 0.0, up))
    for i in range(inst.k):
        row = {m_col: 1.0, t_cols[i]: 1.0}
        for j in range(inst.n):
            row[x_cols[j]] = row.get(x_cols[j], 0.0) - inst.losses[i, j]
        model.add_row(row, "=" if i in piece.eq_s else ">=", 0.0)
    model.set_objective({m_col: 1.0})
    return solve_lp(model)


def _point_from_solution(inst: Instance, sol: LpSolution) -> tuple[float, np.ndarray, np.ndarray]:
    m = float(sol.x[0])
    x = sol.x[1:1 + inst.n].copy()
    tau = sol.x[1 + inst.n:1 + inst.n + inst.k].copy()
    return m, x, tau


def _delta_subsets(pool: tuple[int, ...], max_size: int | None):
    sizes = range(len(pool) + 1) if max_size is None else range(min(len(pool), max_size) + 1)
    for size in sizes:
        yield from itertools.combinations(pool, size)


def _pieces_from(inst: Instance, cls: lpec.IndexClassification, strategy: str):
    """Candidate pieces from a classification, deterministic order."""
    if strategy == "full" or (strategy == "auto"
                              and len(cls.beta_tau) + len(cls.beta_lam) <= 10):
        cap = None
    else:
        cap = 2
    seen = set()
    for dt in _delta_subsets(cls.beta_tau, cap):
        for dl in _delta_subsets(cls.beta_lam, cap):
            if cap is not None and len(dt) + len(dl) > cap:
                continue
            piece = PieceSpec(inst.k,
                              frozenset(cls.alpha_tau) | frozenset(dt),
                              frozenset(cls.alpha_lam) | frozenset(dl))
            key = piece.sort_key()
            if key not in seen:
                seen.add(key)
                yield piece


def improve(inst: Instance, start_x, strategy: str = "auto",
            max_rounds: int = 200) -> UpperBoundTrace:
    """Drive the bound down from a starting portfolio.

    Each round classifies the current point, sweeps the piece candidates,
    refreshes every candidate value as a true VaR, and re-anchors at the
    best strict improvement; it stops when a full sweep improves nothing.
    """
    x = np.asarray(start_x, dtype=float)
    m0 = cvar.var_of(inst, x)
    trace = UpperBoundTrace(start_value=m0)
    best_m, best_x = m0, x
    for _ in range(max_rounds):
        pt = lpec.LpecPoint.build(inst, best_m, best_x)
        cls = lpec.classify(inst, pt)
        round_best = None
        for piece in _pieces_from(inst, cls, strategy):
            sol = restricted_lp(inst, piece)
            trace.pieces_solved += 1
            if not sol.is_optimal:
                continue
            m_half, x1, _ = _point_from_solution(inst, sol)
            m1 = cvar.var_of(inst, x1)
            if round_best is None or m1 < round_best[2]:
                round_best = (piece, m_half, m1, x1)
        if round_best is None or round_best[2] >= best_m - IMPROVE_TOL:
            break
        piece, m_half, m1, x1 = round_best
        trace.steps.append((piece, m_half, m1))
        best_m, best_x = m1, x1
    trace.best_value = best_m
    trace.best_x = best_x
    trace.witness = lpec.LpecPoint.build(inst, best_m, best_x)
    return trace


def _mass_feasible(caps: np.ndarray, assign: tuple[int, ...]) -> bool:
    cap_a = sum(caps[i] for i, a in enumerate(assign) if a == 0)
    cap_ab = cap_a + sum(caps[i] for i, a in enumerate(assign) if a == 1)
    return cap_a <= 1.0 + 1e-9 and cap_ab >= 1.0 - 1e-9


def enumerate_pieces(inst: Instance, guard: int = ENUM_GUARD) -> float:
    """Exact optimum by solving the restricted LP of every consistent piece.

    Each scenario takes one of three sides (weight at cap with free tau;
    weight interior with tau = 0 and slack = 0; weight zero with free
    slack); assignments whose weights cannot sum to one are skipped. Only
    meant for tiny k: the count is 3^k.
    """
    if inst.k > guard:
        raise TooLarge(f"piece enumeration is 3^k; k={inst.k} exceeds guard {guard}")
    caps = inst.caps
    best = math.inf
    for assign in itertools.product((0, 1, 2), repeat=inst.k):
        if not _mass_feasible(caps, assign):
            continue
        piece = PieceSpec(inst.k,
                          frozenset(i for i, a in enumerate(assign) if a == 0),
                          frozenset(i for i, a in enumerate(assign) if a != 2))
        sol = restricted_lp(inst, piece)
        if sol.is_optimal:
            best = min(best, float(sol.objective))
    if best is math.inf:
        raise cvar.Infeasible("no feasible piece: empty feasible set")
    return best
