"""Dense linear-program model and bounded-variable primal simplex solver.

Every other module builds its LPs through this interface. The pivoting
kernel exists in two flavors: a numba-jitted loop (default) and a pure
numpy fallback, selected at import time by the VARMIN_NO_NUMBA environment
variable or at runtime via use_backend().

Solver outline: constraints are converted to equalities with one slack per
row, an artificial basis seeds phase 1 (minimize total artificial mass),
phase 2 then minimizes the true objective. Pricing is Dantzig's rule with
a switch to Bland's rule after a streak of degenerate pivots.

Tolerances: primal feasibility 1e-8, reduced-cost optimality 1e-9, pivot
threshold 1e-10. A phase-1 objective above 1e-7 means Infeasible.
"""

from __future__ import annotations

import math
import os
from dataclasses import dataclass

import numpy as np

from . import _simplex_np

FEAS_TOL = 1e-8
DUAL_TOL = 1e-9
PIVOT_TOL = 1e-10
PHASE1_TOL = 1e-7
BLAND_AFTER = 50

OPTIMAL = "optimal"
INFEASIBLE = "infeasible"
UNBOUNDED = "unbounded"

solve_count = 0  # total solve_lp calls this process; reporting only


class NumericalFailure(Exception):
    """Pivoting stalled beyond the anti-cycling iteration cap."""


def _load_numba_backend():
    from . import _simplex_nb
    return _simplex_nb


if os.environ.get("VARMIN_NO_NUMBA"):
    _kernel = _simplex_np
else:
    try:
        _kernel = _load_numba_backend()
    except ImportError:  # pragma: no cover - numba is a declared dependency
        _kernel = _simplex_np


def use_backend(name: str) -> None:
    """Select the pivot kernel: "numba" or "numpy". Used by benchmarks/tests."""
    global _kernel
    if name == "numpy":
        _kernel = _simplex_np
    elif name == "numba":
        _kernel = _load_numba_backend()
    else:
        raise ValueError(f"unknown backend {name!r}")


def backend_name() -> str:
    return "numpy" if _kernel is _simplex_np else "numba"


def _norm_rel(rel: str) -> str:
    if rel in ("<=", "<"):
        return "<="
    if rel in ("=", "=="):
        return "="
    if rel in (">=", ">"):
        return ">="
    raise ValueError(f"unknown relation {rel!r}")


class LpModel:
    """Minimization LP over named bounded variables and dense-ish rows.

    Rows are stored as {var_index: coefficient} mappings and densified at
    solve time.
    """

    def __init__(self):
        self.names: list[str] = []
        self.lower: list[float] = []
        self.upper: list[float] = []
        self.obj: dict[int, float] = {}
        self.rows: list[dict[int, float]] = []
        self.rels: list[str] = []
        self.rhs: list[float] = []

    @property
    def n_vars(self) -> int:
        return len(self.names)

    @property
    def n_rows(self) -> int:
        return len(self.rows)

    def add_var(self, name: str, lo: float = 0.0, up: float = math.inf) -> int:
        if math.isnan(lo) or math.isnan(up) or lo > up:
            raise ValueError(f"bad bounds for {name}: [{lo}, {up}]")
        self.names.append(name)
        self.lower.append(float(lo))
        self.upper.append(float(up))
        return len(self.names) - 1

    def set_bounds(self, idx: int, lo: float, up: float) -> None:
        if lo > up:
            raise ValueError(f"bad bounds for var {idx}: [{lo}, {up}]")
        self.lower[idx] = float(lo)
        self.upper[idx] = float(up)

    def fix_var(self, idx: int, val: float) -> None:
        self.set_bounds(idx, val, val)

    def add_row(self, coeffs, rel: str, rhs: float) -> int:
        row = {int(j): float(v) for j, v in dict(coeffs).items() if v != 0.0}
        for j in row:
            if not 0 <= j < self.n_vars:
                raise ValueError(f"row references unknown variable {j}")
        self.rows.append(row)
        self.rels.append(_norm_rel(rel))
        self.rhs.append(float(rhs))
        return len(self.rows) - 1

    def set_relation(self, ridx: int, rel: str) -> None:
        self.rels[ridx] = _norm_rel(rel)

    def set_objective(self, coeffs) -> None:
        self.obj = {int(j): float(v) for j, v in dict(coeffs).items()}

    def copy(self) -> "LpModel":
        other = LpModel.__new__(LpModel)
        other.names = list(self.names)
        other.lower = list(self.lower)
        other.upper = list(self.upper)
        other.obj = dict(self.obj)
        other.rows = [dict(r) for r in self.rows]
        other.rels = list(self.rels)
        other.rhs = list(self.rhs)
        return other

    def dense(self):
        nv, m = self.n_vars, self.n_rows
        c = np.zeros(nv)
        for j, v in self.obj.items():
            c[j] = v
        A = np.zeros((m, nv))
        for i, row in enumerate(self.rows):
            for j, v in row.items():
                A[i, j] = v
        return c, A, list(self.rels), np.array(self.rhs, dtype=float), \
            np.array(self.lower, dtype=float), np.array(self.upper, dtype=float)


@dataclass
class LpSolution:
    status: str
    x: np.ndarray | None = None
    objective: float | None = None
    iterations: int = 0

    @property
    def is_optimal(self) -> bool:
        return self.status == OPTIMAL

    def value_or_inf(self) -> float:
        """Objective with the infeasible-LP-is-plus-infinity convention."""
        if self.status == OPTIMAL:
            return float(self.objective)
        if self.status == INFEASIBLE:
            return math.inf
        return -math.inf


def _refresh_basic(T, value, status, basis, b, n_art):
    """Recompute basic values from scratch to cancel pivoting drift.

    The artificial block of T holds the current basis inverse, because the
    artificial columns of the constraint matrix form an identity.
    """
    N = T.shape[1]
    Z = T[:, N - n_art:]
    xB = Z @ b
    nb = np.flatnonzero((status != _simplex_np.BASIC) & (value != 0.0))
    if nb.size:
        xB -= T[:, nb] @ value[nb]
    value[basis] = xB


def solve_lp(model: LpModel, debug: bool | None = None) -> LpSolution:
    """Solve the model. Deterministic: identical input gives identical output.

    Raises NumericalFailure if pivoting exceeds the iteration cap.
    """
    global solve_count
    solve_count += 1
    if debug is None:
        debug = bool(os.environ.get("VARMIN_LP_DEBUG"))
    c, A, rels, b, xlo, xup = model.dense()
    nv, m = model.n_vars, model.n_rows

    N = nv + 2 * m
    lo = np.empty(N)
    up = np.empty(N)
    lo[:nv] = xlo
    up[:nv] = xup
    for i, rel in enumerate(rels):
        if rel == "<=":
            lo[nv + i], up[nv + i] = 0.0, math.inf
        elif rel == ">=":
            lo[nv + i], up[nv + i] = -math.inf, 0.0
        else:
            lo[nv + i], up[nv + i] = 0.0, 0.0

    value = np.zeros(N)
    status = np.empty(N, dtype=np.int8)
    for j in range(nv):
        if lo[j] > -math.inf:
            status[j] = _simplex_np.AT_LO
            value[j] = lo[j]
        elif up[j] < math.inf:
            status[j] = _simplex_np.AT_UP
            value[j] = up[j]
        else:
            status[j] = _simplex_np.FREE_NB
            value[j] = 0.0
    for i in range(m):
        j = nv + i
        status[j] = _simplex_np.AT_UP if rels[i] == ">=" else _simplex_np.AT_LO
        value[j] = 0.0

    # The slack and artificial columns of row i are both e_i, so either may
    # seed the basis with T = A_full unchanged. Rows whose initial slack
    # value already fits its bounds start with the slack basic; only
    # violated rows get a costed artificial, which keeps phase 1 short.
    resid = b - A @ value[:nv]
    art0 = nv + m
    basis = np.empty(m, dtype=np.int64)
    c1 = np.zeros(N)
    for i in range(m):
        s_col = nv + i
        a_col = art0 + i
        rel = rels[i]
        slack_fits = ((rel == "<=" and resid[i] >= 0.0)
                      or (rel == ">=" and resid[i] <= 0.0)
                      or (rel == "=" and resid[i] == 0.0))
        if slack_fits:
            basis[i] = s_col
            status[s_col] = _simplex_np.BASIC
            value[s_col] = resid[i]
            lo[a_col], up[a_col] = 0.0, 0.0
            status[a_col] = _simplex_np.AT_LO
            value[a_col] = 0.0
        else:
            basis[i] = a_col
            status[a_col] = _simplex_np.BASIC
            value[a_col] = resid[i]
            if resid[i] >= 0.0:
                lo[a_col], up[a_col] = 0.0, math.inf
                c1[a_col] = 1.0
            else:
                lo[a_col], up[a_col] = -math.inf, 0.0
                c1[a_col] = -1.0

    T = np.zeros((m, N))
    T[:, :nv] = A
    T[:, nv:art0] = np.eye(m)
    T[:, art0:] = np.eye(m)

    max_iter = 10000 + 200 * (m + N)
    # phase 1: minimize total artificial mass
    d = c1 - T.T @ c1[basis]
    code, it1 = _kernel.run_phase(T, d, value, status, basis, lo, up,
                                  DUAL_TOL, PIVOT_TOL, BLAND_AFTER, max_iter)
    if code == _simplex_np.ITER_LIMIT:
        raise NumericalFailure(f"phase 1 stalled after {it1} iterations")
    if code == _simplex_np.UNBOUNDED:
        raise NumericalFailure("phase 1 reported unbounded: numerical breakdown")
    _refresh_basic(T, value, status, basis, b, m)
    phase1_obj = float(c1 @ value)
    if phase1_obj > PHASE1_TOL:
        return LpSolution(INFEASIBLE, iterations=it1)

    # phase 2: pin artificials at zero, minimize the true objective
    lo[art0:] = 0.0
    up[art0:] = 0.0
    nonbasic_art = (status[art0:] != _simplex_np.BASIC)
    value[art0:][nonbasic_art] = 0.0
    status[art0:][nonbasic_art] = _simplex_np.AT_LO

    c2 = np.zeros(N)
    c2[:nv] = c
    d = c2 - T.T @ c2[basis]
    code, it2 = _kernel.run_phase(T, d, value, status, basis, lo, up,
                                  DUAL_TOL, PIVOT_TOL, BLAND_AFTER, max_iter)
    if code == _simplex_np.ITER_LIMIT:
        raise NumericalFailure(f"phase 2 stalled after {it2} iterations")
    if code == _simplex_np.UNBOUNDED:
        return LpSolution(UNBOUNDED, iterations=it1 + it2)
    _refresh_basic(T, value, status, basis, b, m)

    x = value[:nv].copy()
    sol = LpSolution(OPTIMAL, x=x, objective=float(c @ x), iterations=it1 + it2)
    if debug:
        check_solution(model, sol)
        _check_dual_signs(model, d, status, lo, up)
    return sol


def solve_lp_with(model: LpModel, extra_rows, debug: bool | None = None) -> LpSolution:
    """Solve the model augmented with extra (coeffs, rel, rhs) rows.

    The base model is left untouched.
    """
    aug = model.copy()
    for coeffs, rel, rhs in extra_rows:
        aug.add_row(coeffs, rel, rhs)
    return solve_lp(aug, debug=debug)


def constraint_violations(model: LpModel, x: np.ndarray) -> np.ndarray:
    """Per-row constraint violation of a point (0 where satisfied)."""
    out = np.zeros(model.n_rows)
    for i, row in enumerate(model.rows):
        lhs = sum(v * x[j] for j, v in row.items())
        rel, rhs = model.rels[i], model.rhs[i]
        if rel == "<=":
            out[i] = max(0.0, lhs - rhs)
        elif rel == ">=":
            out[i] = max(0.0, rhs - lhs)
        else:
            out[i] = abs(lhs - rhs)
    return out


def max_violation(model: LpModel, x: np.ndarray) -> float:
    """Worst violation over rows and variable bounds."""
    worst = 0.0
    if model.n_rows:
        worst = float(constraint_violations(model, x).max())
    for j in range(model.n_vars):
        worst = max(worst, model.lower[j] - x[j], x[j] - model.upper[j])
    return worst


def check_solution(model: LpModel, sol: LpSolution) -> None:
    """Assert the Optimal-solution contract: feasibility and objective consistency."""
    if sol.status != OPTIMAL:
        return
    viol = max_violation(model, sol.x)
    if viol > FEAS_TOL:
        raise AssertionError(f"optimal solution violates constraints by {viol:g}")
    obj = sum(v * sol.x[j] for j, v in model.obj.items())
    denom = max(1.0, abs(obj))
    if abs(obj - sol.objective) > 1e-9 * denom:
        raise AssertionError("objective inconsistent with reported x")


def _check_dual_signs(model, d, status, lo, up) -> None:
    """Reduced-cost sign conditions at termination (weak-duality debug check)."""
    for j in range(len(d)):
        st = status[j]
        if st == _simplex_np.BASIC or lo[j] == up[j]:
            continue
        if st == _simplex_np.AT_LO and d[j] < -1e-6:
            raise AssertionError(f"at-lower var {j} has negative reduced cost {d[j]:g}")
        if st == _simplex_np.AT_UP and d[j] > 1e-6:
            raise AssertionError(f"at-upper var {j} has positive reduced cost {d[j]:g}")
        if st == _simplex_np.FREE_NB and abs(d[j]) > 1e-6:
            raise AssertionError(f"free var {j} has nonzero reduced cost {d[j]:g}")


def dump_lp(model: LpModel) -> str:
    """Plain-text LP listing for external cross-checks."""
    lines = ["minimize"]
    terms = [f"{v:+g} {model.names[j]}" for j, v in sorted(model.obj.items())]
    lines.append("  " + (" ".join(terms) if terms else "0"))
    lines.append("subject to")
    for row, rel, rhs in zip(model.rows, model.rels, model.rhs):
        terms = [f"{v:+g} {model.names[j]}" for j, v in sorted(row.items())]
        lines.append("  " + " ".join(terms) + f" {rel} {rhs:g}")
    lines.append("bounds")
    for j, name in enumerate(model.names):
        lines.append(f"  {model.lower[j]:g} <= {name} <= {model.upper[j]:g}")
    return "\n".join(lines) + "\n"
