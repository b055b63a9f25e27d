"""Lower bounds for the minimum VaR.

Two relaxation families. The z-substitution family replaces the products
lambda_i * x by vectors z^i (valid under a sign hypothesis on the
objective, so it comes in a nonneg and a nonpos flavor, the latter with
reversed middle inequalities). The convex-hull family keeps lambda and
relaxes the bilinear terms lambda_i * (x.y^i) with McCormick envelopes.
Three disjunctive cuts per scenario (weight zero / at cap / interior)
sharpen either family; aggregating them over scenarios and signs yields a
certified bound.
"""

from __future__ import annotations

import csv
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass

import numpy as np

from .instances import Instance
from .lp import LpModel, LpSolution, solve_lp

ZSUB = "zsub"
HULL = "hull"
NONNEG = "nonneg"
NONPOS = "nonpos"

BRANCH_ZERO = "I"
BRANCH_CAP = "II"
BRANCH_INTERIOR = "III"
BRANCHES = (BRANCH_ZERO, BRANCH_CAP, BRANCH_INTERIOR)


class MissingAbsBound(Exception):
    """The polytope is not sign-restricted and carries no absolute bound."""


@dataclass(frozen=True)
class RelaxKind:
    family: str
    sign: str | None = None

    def __post_init__(self):
        if self.family not in (ZSUB, HULL):
            raise ValueError(f"unknown relaxation family {self.family!r}")
        if self.family == HULL and self.sign is not None:
            raise ValueError("the convex-hull relaxation carries no sign")
        if self.family == ZSUB and self.sign not in (NONNEG, NONPOS, None):
            raise ValueError("z-substitution sign must be 'nonneg' or 'nonpos'")


@dataclass(frozen=True)
class CutSpec:
    """One disjunctive cut: scenario index (0-based) and weight branch."""

    index: int
    branch: str

    def __post_init__(self):
        if self.branch not in BRANCHES:
            raise ValueError(f"branch must be one of {BRANCHES}")


@dataclass
class HullBounds:
    """Ranges [L_i, U_i] of the scenario losses x.y^i over the polytope."""

    L: np.ndarray
    U: np.ndarray

    def __post_init__(self):
        self.L = np.asarray(self.L, dtype=float)
        self.U = np.asarray(self.U, dtype=float)
        if np.any(self.L > self.U + 1e-12):
            raise ValueError("loss range has L > U")


@dataclass
class _ZsubMeta:
    k: int
    n: int
    s_rows: list[int]

    def tau_col(self, i: int) -> int:
        return 1 + i

    def z_col(self, i: int, j: int) -> int:
        return 1 + self.k + i * self.n + j


def _build_zsub(inst: Instance, sign: str) -> tuple[LpModel, _ZsubMeta]:
    if sign not in (NONNEG, NONPOS):
        raise ValueError(f"sign must be 'nonneg' or 'nonpos', got {sign!r}")
    poly = inst.polytope
    k, n = inst.k, inst.n
    caps = inst.caps
    Y = inst.losses
    if not poly.nonneg and poly.abs_bound is None:
        raise MissingAbsBound("validate() the instance first to record abs_bound")

    model = LpModel()
    meta = _ZsubMeta(k=k, n=n, s_rows=[])
    m_col = model.add_var("m", -math.inf, math.inf)
    for i in range(k):
        model.add_var(f"tau{i}")
    for i in range(k):
        for j in range(n):
            if poly.nonneg:
                model.add_var(f"z{i}_{j}", 0.0, math.inf)
            else:
                a = caps[i] * poly.abs_bound[j]
                model.add_var(f"z{i}_{j}", -a, a)

    def x_expr(coeffs_per_coord):
        """Row dict for sum_j c_j x_j with x_j = sum_i z_ij."""
        row = {}
        for j, cj in coeffs_per_coord.items():
            if cj == 0.0:
                continue
            for i in range(k):
                col = meta.z_col(i, j)
                row[col] = row.get(col, 0.0) + cj
        return row

    Aeq, beq = poly.eq
    for r in range(Aeq.shape[0]):
        model.add_row(x_expr({j: Aeq[r, j] for j in range(n)}), "=", beq[r])
    Aub, bub = poly.ineq
    for r in range(Aub.shape[0]):
        model.add_row(x_expr({j: Aub[r, j] for j in range(n)}), "<=", bub[r])
    for j in range(n):
        if poly.lower[j] > -math.inf:
            model.add_row(x_expr({j: 1.0}), ">=", poly.lower[j])
        if poly.upper[j] < math.inf:
            model.add_row(x_expr({j: 1.0}), "<=", poly.upper[j])

    # objective definition: m = sum_i [(z^i).y^i - cap_i tau_i]
    row = {m_col: 1.0}
    for i in range(k):
        row[meta.tau_col(i)] = caps[i]
        for j in range(n):
            row[meta.z_col(i, j)] = row.get(meta.z_col(i, j), 0.0) - Y[i, j]
    model.add_row(row, "=", 0.0)

    for i in range(k):
        # slack row: m + tau_i - x.y^i >= 0
        row = {m_col: 1.0, meta.tau_col(i): 1.0}
        for j in range(n):
            if Y[i, j] != 0.0:
                for l in range(k):
                    col = meta.z_col(l, j)
                    row[col] = row.get(col, 0.0) - Y[i, j]
        meta.s_rows.append(model.add_row(row, ">=", 0.0))

        # per-scenario share of the objective: (z^i).y^i - cap_i tau_i,
        # trapped between 0 and cap_i m (reversed when m <= 0)
        share = {meta.tau_col(i): -caps[i]}
        for j in range(n):
            share[meta.z_col(i, j)] = Y[i, j]
        shifted = dict(share)
        shifted[m_col] = -caps[i]
        if sign == NONNEG:
            model.add_row(share, ">=", 0.0)
            model.add_row(shifted, "<=", 0.0)
        else:
            model.add_row(share, "<=", 0.0)
            model.add_row(shifted, ">=", 0.0)

    if poly.nonneg:
        # z^i <= cap_i x, coordinatewise
        for i in range(k):
            for j in range(n):
                row = {}
                for l in range(k):
                    row[meta.z_col(l, j)] = -caps[i]
                row[meta.z_col(i, j)] += 1.0
                model.add_row(row, "<=", 0.0)

    model.set_objective({m_col: 1.0})
    return model, meta


def z_relax_model(inst: Instance, sign: str) -> LpModel:
    """Sign-hypothesis relaxation LP over (m, tau, z^1..z^k)."""
    model, _ = _build_zsub(inst, sign)
    return model


def _apply_zsub_cut(model: LpModel, meta: _ZsubMeta, inst: Instance, cut: CutSpec) -> None:
    i0 = cut.index
    caps = inst.caps
    Y = inst.losses
    if cut.branch == BRANCH_ZERO:
        for j in range(meta.n):
            model.fix_var(meta.z_col(i0, j), 0.0)
        model.fix_var(meta.tau_col(i0), 0.0)
    elif cut.branch == BRANCH_CAP:
        for j in range(meta.n):
            row = {}
            for l in range(meta.k):
                row[meta.z_col(l, j)] = -caps[i0]
            row[meta.z_col(i0, j)] += 1.0
            model.add_row(row, "=", 0.0)
        model.set_relation(meta.s_rows[i0], "=")
    else:
        model.fix_var(meta.tau_col(i0), 0.0)
        model.set_relation(meta.s_rows[i0], "=")


def cut_lp_value(inst: Instance, sign: str, cut: CutSpec,
                 extra_fixings=()) -> LpSolution:
    """Solve the sign relaxation sharpened by one cut plus prior fixings.

    An Infeasible status is a legal value (plus infinity in bound
    arithmetic, see LpSolution.value_or_inf).
    """
    model, meta = _build_zsub(inst, sign)
    for fixing in extra_fixings:
        _apply_zsub_cut(model, meta, inst, fixing)
    _apply_zsub_cut(model, meta, inst, cut)
    return solve_lp(model)


def _pmap(fn, items, threads: int):
    """Map preserving input order; threads > 1 fans the work out."""
    if threads <= 1:
        return [fn(it) for it in items]
    with ThreadPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, items))


def corollary_bound(inst: Instance, threads: int = 1) -> float:
    """Aggregate cut bound: min over signs of max over scenarios of the
    smallest of the three cut values. Certified lower bound on the optimum."""
    jobs = [(sign, i, br) for sign in (NONNEG, NONPOS)
            for i in range(inst.k) for br in BRANCHES]
    vals = _pmap(lambda job: cut_lp_value(inst, job[0], CutSpec(job[1], job[2]))
                 .value_or_inf(), jobs, threads)
    by_job = dict(zip(jobs, vals))
    per_sign = []
    for sign in (NONNEG, NONPOS):
        worst = -math.inf
        for i in range(inst.k):
            worst = max(worst, min(by_job[(sign, i, br)] for br in BRANCHES))
        per_sign.append(worst)
    return min(per_sign)


def hull_bounds(inst: Instance) -> HullBounds:
    """Ranges of each scenario loss over the polytope, via 2k LPs."""
    L = np.empty(inst.k)
    U = np.empty(inst.k)
    for i in range(inst.k):
        for sense, target in ((1.0, L), (-1.0, U)):
            model = LpModel()
            cols = inst.polytope.install(model)
            model.set_objective({cols[j]: sense * inst.losses[i, j]
                                 for j in range(inst.n)})
            sol = solve_lp(model)
            if not sol.is_optimal:
                raise ValueError(f"loss-range LP for scenario {i} is {sol.status}")
            target[i] = sense * sol.objective
    return HullBounds(L=L, U=U)


@dataclass
class _HullMeta:
    k: int
    n: int
    m_col: int
    x_cols: list[int]
    tau0: int
    lam0: int
    gam0: int
    w0: int
    s_rows: list[int]


def _build_hull(inst: Instance, bounds: HullBounds) -> tuple[LpModel, _HullMeta]:
    k, n = inst.k, inst.n
    caps = inst.caps
    Y = inst.losses
    L, U = bounds.L, bounds.U

    model = LpModel()
    m_col = model.add_var("m", -math.inf, math.inf)
    x_cols = inst.polytope.install(model)
    tau0 = model.n_vars
    for i in range(k):
        model.add_var(f"tau{i}")
    lam0 = model.n_vars
    for i in range(k):
        model.add_var(f"lam{i}", 0.0, caps[i])
    gam0 = model.n_vars
    for i in range(k):
        model.add_var(f"gam{i}", L[i], U[i])
    w0 = model.n_vars
    for i in range(k):
        model.add_var(f"w{i}", -math.inf, math.inf)

    model.add_row({lam0 + i: 1.0 for i in range(k)}, "=", 1.0)
    s_rows = []
    for i in range(k):
        row = {m_col: 1.0, tau0 + i: 1.0}
        for j in range(n):
            row[x_cols[j]] = row.get(x_cols[j], 0.0) - Y[i, j]
        s_rows.append(model.add_row(row, ">=", 0.0))
        gam_def = {gam0 + i: 1.0}
        for j in range(n):
            gam_def[x_cols[j]] = gam_def.get(x_cols[j], 0.0) - Y[i, j]
        model.add_row(gam_def, "=", 0.0)
        # McCormick envelope of w_i = gam_i * lam_i over the box
        model.add_row({w0 + i: 1.0, lam0 + i: -L[i]}, ">=", 0.0)
        model.add_row({w0 + i: 1.0, gam0 + i: -caps[i], lam0 + i: -U[i]},
                      ">=", -caps[i] * U[i])
        model.add_row({w0 + i: 1.0, lam0 + i: -U[i]}, "<=", 0.0)
        model.add_row({w0 + i: 1.0, gam0 + i: -caps[i], lam0 + i: -L[i]},
                      "<=", -caps[i] * L[i])
    # complementarity aggregate: 0 = m + sum_i (cap_i tau_i - w_i)
    row = {m_col: 1.0}
    for i in range(k):
        row[tau0 + i] = caps[i]
        row[w0 + i] = -1.0
    model.add_row(row, "=", 0.0)
    model.set_objective({m_col: 1.0})
    return model, _HullMeta(k=k, n=n, m_col=m_col, x_cols=x_cols, tau0=tau0,
                            lam0=lam0, gam0=gam0, w0=w0, s_rows=s_rows)


def hull_relax_model(inst: Instance, bounds: HullBounds) -> LpModel:
    """McCormick relaxation LP over (m, x, tau, lam, gamma, w)."""
    model, _ = _build_hull(inst, bounds)
    return model


def cut_sweep(inst: Instance, threads: int = 1) -> list[dict]:
    """All 3k cut values for both signs, index-ordered."""
    jobs = [(sign, i, br) for sign in (NONNEG, NONPOS)
            for i in range(inst.k) for br in BRANCHES]
    sols = _pmap(lambda job: cut_lp_value(inst, job[0], CutSpec(job[1], job[2])),
                 jobs, threads)
    return [{
        "i0": i,
        "branch": br,
        "sign": sign,
        "status": sol.status,
        "value": "inf" if not sol.is_optimal else repr(sol.objective),
    } for (sign, i, br), sol in zip(jobs, sols)]


def sweep_to_csv(rows: list[dict], path_or_file) -> None:
    """Write a cut sweep as CSV with columns i0, branch, sign, status, value."""
    def _write(fh):
        writer = csv.DictWriter(fh, fieldnames=["i0", "branch", "sign", "status", "value"])
        writer.writeheader()
        writer.writerows(rows)

    if isinstance(path_or_file, (str, bytes)) or hasattr(path_or_file, "__fspath__"):
        with open(path_or_file, "w", newline="", encoding="utf-8") as fh:
            _write(fh)
    else:
        _write(path_or_file)
