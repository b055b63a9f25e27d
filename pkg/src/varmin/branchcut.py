"""Branch-and-cut driver.

verify_global proves a candidate point optimal by rounds of cut-based
variable fixing on the sign relaxation: for each scenario it solves the
sibling branches of the candidate's own branch, eliminates those whose
bound beats the incumbent, fixes the survivor, propagates the resulting
status contradictions without solving (grey nodes), and re-solves the
tightened relaxation until the bound meets the incumbent. solve_global
falls back to a full best-bound tree search with three-way branching on
the most violated complementarity pair.
"""

from __future__ import annotations

import heapq
import math
from dataclasses import dataclass, field, replace

import numpy as np

from . import cvar as cvar_mod
from . import lower, lpec, upper
from .instances import Instance, validate
from .lp import INFEASIBLE, LpSolution, solve_lp
from .lower import (BRANCH_CAP, BRANCH_INTERIOR, BRANCH_ZERO, CutSpec, HULL,
                    NONNEG, NONPOS, ZSUB, RelaxKind, _build_hull, _build_zsub,
                    hull_bounds)

LAM_FREE = "free"
LAM_ZERO = "zero"
LAM_INTERIOR = "interior"
LAM_CAP = "cap"
TAU_FREE = "free"
TAU_ZERO = "zero"
TAU_POSITIVE = "positive"
SIGN_UNKNOWN = "unknown"

FATHOM_BOUND = "BoundDominated"
FATHOM_INFEASIBLE = "Infeasible"
FATHOM_INTEGRAL = "IntegralPiece"

CERTIFIED = "certified"
NOT_CERTIFIED = "not_certified"
BUDGET_EXCEEDED = "budget_exceeded"
INFEASIBLE_STATUS = "infeasible"

GAP_TOL = 1e-6
COMPL_TOL = 1e-7
MASS_TOL = 1e-9

_LAM_BRANCH = {LAM_ZERO: BRANCH_ZERO, LAM_CAP: BRANCH_CAP, LAM_INTERIOR: BRANCH_INTERIOR}
_LAM_LABEL = {LAM_ZERO: "=0", LAM_INTERIOR: " int", LAM_CAP: "=cap"}


@dataclass(frozen=True)
class NodeState:
    """Per-scenario branching state defining one relaxation LP."""

    lam: tuple[str, ...]
    tau: tuple[str, ...]
    sign: str
    relax: RelaxKind

    @classmethod
    def root(cls, k: int, relax: RelaxKind) -> "NodeState":
        sign = relax.sign if relax.sign is not None else SIGN_UNKNOWN
        return cls(lam=(LAM_FREE,) * k, tau=(TAU_FREE,) * k, sign=sign, relax=relax)

    def with_lam(self, i: int, st: str) -> "NodeState":
        lam = list(self.lam)
        lam[i] = st
        return replace(self, lam=tuple(lam))

    def with_tau(self, i: int, st: str) -> "NodeState":
        tau = list(self.tau)
        tau[i] = st
        return replace(self, tau=tuple(tau))

    def contradiction(self, inst: Instance) -> str | None:
        """Status-level inconsistency check; such nodes are never solved.

        The dual weights must sum to one: scenarios pinned at cap (or with
        positive tau, which forces cap) cannot carry more than unit mass,
        and the scenarios not pinned at zero must be able to supply it.
        """
        caps = inst.caps
        lo_mass = 0.0
        hi_mass = 0.0
        for i in range(inst.k):
            if self.tau[i] == TAU_POSITIVE and self.lam[i] in (LAM_ZERO, LAM_INTERIOR):
                return f"tau{i}>0 forces the weight to cap but lam{i} is {self.lam[i]}"
            forced_cap = self.lam[i] == LAM_CAP or self.tau[i] == TAU_POSITIVE
            if forced_cap:
                lo_mass += caps[i]
            if self.lam[i] != LAM_ZERO:
                hi_mass += caps[i]
        if lo_mass > 1.0 + MASS_TOL:
            return f"weights pinned at cap sum to {lo_mass:.6g} > 1"
        if hi_mass < 1.0 - MASS_TOL:
            return f"weights can sum to at most {hi_mass:.6g} < 1"
        return None


@dataclass
class TreeNode:
    id: int
    parent: int | None
    label: str
    bound: float | None
    status: str
    fathom: str | None = None
    solved: bool = True
    grey: bool = False


@dataclass
class Certificate:
    """Outcome of a certification or search run."""

    status: str
    m_ub: float
    m_lb: float
    gap: float
    lps_solved: int
    eliminated_without_solve: int
    tree: list[TreeNode]
    fixings: list[str]
    relax: RelaxKind | None
    witness: lpec.LpecPoint | None
    nodes_expanded: int = 0
    wall_time: float | None = None

    @property
    def certified(self) -> bool:
        return self.status == CERTIFIED

    def to_dict(self, include_timings: bool = False) -> dict:
        doc = {
            "status": self.status,
            "m_ub": None if math.isinf(self.m_ub) else self.m_ub,
            "m_lb": None if math.isinf(self.m_lb) else self.m_lb,
            "gap": self.gap,
            "lps_solved": self.lps_solved,
            "eliminated_without_solve": self.eliminated_without_solve,
            "nodes_expanded": self.nodes_expanded,
            "relax": None if self.relax is None else
                {"family": self.relax.family, "sign": self.relax.sign},
            "fixings": list(self.fixings),
            "witness": None if self.witness is None else {
                "m": self.witness.m,
                "x": self.witness.x.tolist(),
                "tau": self.witness.tau.tolist(),
                "lam": self.witness.lam.tolist(),
                "s": self.witness.s.tolist(),
            },
            "tree": [{
                "id": nd.id, "parent": nd.parent, "label": nd.label,
                "bound": None if nd.bound is None or math.isinf(nd.bound) else nd.bound,
                "status": nd.status, "fathom": nd.fathom,
                "solved": nd.solved, "grey": nd.grey,
            } for nd in self.tree],
        }
        if include_timings:
            doc["wall_time_sec"] = self.wall_time
        return doc

    @classmethod
    def from_dict(cls, doc: dict) -> "Certificate":
        witness = None
        if doc.get("witness"):
            w = doc["witness"]
            witness = lpec.LpecPoint(m=w["m"], x=np.array(w["x"]),
                                     tau=np.array(w["tau"]), lam=np.array(w["lam"]),
                                     s=np.array(w["s"]))
        relax = None
        if doc.get("relax"):
            relax = RelaxKind(doc["relax"]["family"], doc["relax"].get("sign"))
        tree = [TreeNode(id=nd["id"], parent=nd["parent"], label=nd["label"],
                         bound=nd["bound"], status=nd["status"],
                         fathom=nd.get("fathom"), solved=nd.get("solved", True),
                         grey=nd.get("grey", False)) for nd in doc.get("tree", [])]
        return cls(status=doc["status"],
                   m_ub=math.inf if doc["m_ub"] is None else doc["m_ub"],
                   m_lb=math.inf if doc["m_lb"] is None else doc["m_lb"],
                   gap=doc["gap"], lps_solved=doc["lps_solved"],
                   eliminated_without_solve=doc.get("eliminated_without_solve", 0),
                   tree=tree, fixings=list(doc.get("fixings", [])),
                   relax=relax, witness=witness,
                   nodes_expanded=doc.get("nodes_expanded", 0))


def _relative_gap(m_ub: float, m_lb: float) -> float:
    if m_lb >= m_ub:
        return 0.0
    if math.isinf(m_ub) or math.isinf(m_lb):
        return math.inf
    return (m_ub - m_lb) / max(abs(m_lb), 1.0)


def node_lp(inst: Instance, node: NodeState, hull: lower.HullBounds | None = None) -> LpSolution:
    """Build and solve the node's relaxation.

    Contradictory nodes short-circuit to Infeasible without an LP solve.
    """
    reason = node.contradiction(inst)
    if reason is not None:
        return LpSolution(INFEASIBLE)
    if node.relax.family == ZSUB:
        if node.sign not in (NONNEG, NONPOS):
            raise ValueError("z-substitution node needs a resolved sign")
        model, meta = _build_zsub(inst, node.sign)
        for i in range(inst.k):
            lam_st = node.lam[i]
            if lam_st != LAM_FREE:
                lower._apply_zsub_cut(model, meta, inst, CutSpec(i, _LAM_BRANCH[lam_st]))
            if node.tau[i] == TAU_ZERO:
                model.fix_var(meta.tau_col(i), 0.0)
            elif node.tau[i] == TAU_POSITIVE and lam_st != LAM_CAP:
                lower._apply_zsub_cut(model, meta, inst, CutSpec(i, BRANCH_CAP))
    else:
        bounds = hull if hull is not None else hull_bounds(inst)
        model, meta = _build_hull(inst, bounds)
        caps = inst.caps
        for i in range(inst.k):
            lam_st = node.lam[i]
            if lam_st == LAM_ZERO:
                model.fix_var(meta.lam0 + i, 0.0)
                model.fix_var(meta.tau0 + i, 0.0)
            elif lam_st == LAM_CAP:
                model.fix_var(meta.lam0 + i, caps[i])
                model.set_relation(meta.s_rows[i], "=")
            elif lam_st == LAM_INTERIOR:
                model.fix_var(meta.tau0 + i, 0.0)
                model.set_relation(meta.s_rows[i], "=")
            if node.tau[i] == TAU_ZERO:
                model.fix_var(meta.tau0 + i, 0.0)
            elif node.tau[i] == TAU_POSITIVE and lam_st != LAM_CAP:
                model.fix_var(meta.lam0 + i, caps[i])
                model.set_relation(meta.s_rows[i], "=")
    return solve_lp(model)


def _node_point(inst: Instance, node: NodeState, sol: LpSolution):
    """Recover (x, tau, lam, s) estimates from a node relaxation solution."""
    k, n = inst.k, inst.n
    caps = inst.caps
    if node.relax.family == ZSUB:
        tau = sol.x[1:1 + k].copy()
        z = sol.x[1 + k:1 + k + k * n].reshape(k, n)
        x = z.sum(axis=0)
        xsum = x.sum()
        if abs(xsum) > 1e-9:
            lam = z.sum(axis=1) / xsum
        else:
            lam = np.full(k, 1.0 / k)
    else:
        x = sol.x[1:1 + n].copy()
        tau = sol.x[1 + n:1 + n + k].copy()
        lam = sol.x[1 + n + k:1 + n + 2 * k].copy()
    lam = np.clip(lam, 0.0, caps)
    m = float(sol.x[0])
    s = m + tau - inst.scenario_losses(x)
    return x, tau, lam, s


def _compl_violation(inst: Instance, tau, lam, s) -> np.ndarray:
    return tau * (inst.caps - lam) + lam * np.maximum(s, 0.0)


class _TreeLog:
    def __init__(self):
        self.nodes: list[TreeNode] = []

    def add(self, parent, label, bound, status, fathom=None, solved=True, grey=False) -> int:
        nid = len(self.nodes)
        self.nodes.append(TreeNode(id=nid, parent=parent, label=label, bound=bound,
                                   status=status, fathom=fathom, solved=solved,
                                   grey=grey))
        return nid


@dataclass
class FixingResult:
    node: NodeState
    bound: float
    lps_solved: int
    eliminated_without_solve: int
    fixings: list[str]
    certified: bool
    node_id: int


def fixing_round(inst: Instance, m_ub: float, node: NodeState,
                 candidate: lpec.LpecPoint | None = None,
                 certify_target: float | None = None,
                 hull: lower.HullBounds | None = None,
                 tree: _TreeLog | None = None,
                 parent_id: int | None = None,
                 node_bound: float = -math.inf) -> FixingResult:
    """Rounds of cut-based fixing against the upper bound m_ub.

    For every unfixed scenario the sibling weight branches are solved; a
    sibling whose bound strictly beats m_ub (beyond the 1e-6 relative
    fathoming tolerance) or is infeasible is eliminated, and once only one
    branch survives it is fixed. Status contradictions fix tau variables
    without any solve (grey nodes). With a candidate point, probing is
    ordered by the candidate's own branch pattern (cap, then zero, then
    interior) and the round stops as soon as the re-solved bound reaches
    certify_target. Repeats until a full pass fixes nothing.

    Tree shape mirrors the search: siblings hang off the current anchor,
    an accepted fixing becomes a child anchor (unsolved until the next
    re-solve fills its bound in).
    """
    if tree is None:
        tree = _TreeLog()
    fath_tol = GAP_TOL * max(1.0, abs(m_ub))
    target = certify_target
    lps = 0
    grey_count = 0
    fixings: list[str] = []
    caps = inst.caps
    bound = node_bound
    anchor = parent_id if parent_id is not None else tree.add(
        None, "root", None if math.isinf(node_bound) else node_bound,
        "open", solved=False)

    def tau_implications(nd: NodeState) -> NodeState:
        nonlocal grey_count
        changed = True
        while changed:
            changed = False
            for i in range(inst.k):
                if nd.tau[i] != TAU_FREE:
                    continue
                if nd.with_tau(i, TAU_POSITIVE).contradiction(inst) is not None:
                    tree.add(anchor, f"tau{i}>0", None, INFEASIBLE,
                             fathom=FATHOM_INFEASIBLE, solved=False, grey=True)
                    grey_count += 1
                    nd = nd.with_tau(i, TAU_ZERO)
                    fixings.append(f"tau{i}=0")
                    changed = True
        return nd

    def eliminated(nd: NodeState, label: str) -> bool:
        nonlocal lps, grey_count
        if nd.contradiction(inst) is not None:
            tree.add(anchor, label, None, INFEASIBLE,
                     fathom=FATHOM_INFEASIBLE, solved=False, grey=True)
            grey_count += 1
            return True
        sol = node_lp(inst, nd, hull=hull)
        lps += 1
        if sol.status == INFEASIBLE:
            tree.add(anchor, label, None, INFEASIBLE, fathom=FATHOM_INFEASIBLE)
            return True
        if sol.is_optimal and sol.objective > m_ub + fath_tol:
            tree.add(anchor, label, sol.objective, sol.status, fathom=FATHOM_BOUND)
            return True
        tree.add(anchor, label, sol.objective if sol.is_optimal else None, sol.status)
        return False

    def accept(nd: NodeState, label: str) -> NodeState:
        nonlocal anchor
        anchor = tree.add(anchor, label, None, "open", solved=False)
        fixings.append(label)
        return tau_implications(nd)

    node = tau_implications(node)

    if candidate is not None:
        tol = lpec.CLASSIFY_TOL
        cap_pins = [i for i in range(inst.k) if candidate.lam[i] >= caps[i] - tol]
        zero_pins = [i for i in range(inst.k) if candidate.lam[i] <= tol]
        int_pins = [i for i in range(inst.k)
                    if i not in cap_pins and i not in zero_pins]
        stages = [(cap_pins, LAM_CAP, (LAM_ZERO, LAM_INTERIOR)),
                  (zero_pins, LAM_ZERO, (LAM_CAP, LAM_INTERIOR)),
                  (int_pins, LAM_INTERIOR, (LAM_ZERO, LAM_CAP))]
    else:
        stages = [(list(range(inst.k)), None, None)]

    max_passes = 2 * inst.k + 2
    for _ in range(max_passes):
        progress = False
        for pins, pin_st, siblings in stages:
            stage_progress = False
            for i in pins:
                if node.lam[i] != LAM_FREE:
                    continue
                if pin_st is not None:
                    if all(eliminated(node.with_lam(i, st), f"lam{i}{_LAM_LABEL[st]}")
                           for st in siblings):
                        node = accept(node.with_lam(i, pin_st),
                                      f"lam{i}{_LAM_LABEL[pin_st]}")
                        stage_progress = True
                else:
                    survivors = []
                    for st in (LAM_ZERO, LAM_INTERIOR, LAM_CAP):
                        if not eliminated(node.with_lam(i, st), f"lam{i}{_LAM_LABEL[st]}"):
                            survivors.append(st)
                            if len(survivors) > 1:
                                break
                    if len(survivors) == 1:
                        node = accept(node.with_lam(i, survivors[0]),
                                      f"lam{i}{_LAM_LABEL[survivors[0]]}")
                        stage_progress = True
            if stage_progress:
                progress = True
                sol = node_lp(inst, node, hull=hull)
                lps += 1
                bound = sol.value_or_inf()
                tree.nodes[anchor].bound = None if not sol.is_optimal else bound
                tree.nodes[anchor].status = sol.status
                tree.nodes[anchor].solved = True
                if target is not None and bound >= target:
                    return FixingResult(node, bound, lps, grey_count, fixings,
                                        True, anchor)
        if not progress:
            break
    certified = target is not None and bound >= target
    return FixingResult(node, bound, lps, grey_count, fixings, certified, anchor)


def verify_global(inst: Instance, candidate: lpec.LpecPoint,
                  relax: str = ZSUB) -> Certificate:
    """Certify a candidate's optimality by sign probes plus fixing rounds.

    Returns a Certificate with status "certified" or "not_certified" (the
    caller escalates to solve_global in the latter case). The candidate
    must be feasible to residual tolerance 1e-7.
    """
    report = validate(inst)
    if not report.ok and "polytope is empty" in report.problems:
        return Certificate(INFEASIBLE_STATUS, math.inf, math.inf, 0.0, 0, 0, [],
                           [], None, None)
    feas, gap = lpec.residuals(inst, candidate)
    if feas > COMPL_TOL or gap > COMPL_TOL:
        raise ValueError(f"candidate is not feasible: residuals ({feas:g}, {gap:g})")
    m_ub = candidate.m
    target = m_ub - GAP_TOL * max(1.0, abs(m_ub))
    tree = _TreeLog()
    lps = 0
    grey = 0
    fixings: list[str] = []

    # sign probes on the z-substitution relaxation, both hypotheses
    sign_roots: dict[str, tuple[int, float]] = {}
    for sign in (NONPOS, NONNEG):
        sol = solve_lp(lower.z_relax_model(inst, sign))
        lps += 1
        label = f"sign {sign}"
        if sol.status == INFEASIBLE:
            tree.add(None, label, None, sol.status, fathom=FATHOM_INFEASIBLE)
        else:
            nid = tree.add(None, label, sol.objective, sol.status)
            sign_roots[sign] = (nid, float(sol.objective))
    if not sign_roots:
        raise RuntimeError("both sign relaxations infeasible for a feasible candidate")

    def run_fixing(node, nid, root_bound, prefix=""):
        nonlocal lps, grey
        if root_bound >= target:
            return root_bound
        res = fixing_round(inst, m_ub, node, candidate=candidate,
                           certify_target=target, hull=hull, tree=tree,
                           parent_id=nid, node_bound=root_bound)
        lps += res.lps_solved
        grey += res.eliminated_without_solve
        fixings.extend(prefix + f for f in res.fixings)
        return res.bound

    bounds = []
    if relax == HULL:
        hull = hull_bounds(inst)
        lps += 2 * inst.k
        relax_used = RelaxKind(HULL)
        node = NodeState.root(inst.k, relax_used)
        sol = node_lp(inst, node, hull=hull)
        lps += 1
        nid = tree.add(None, "hull root", sol.objective if sol.is_optimal else None,
                       sol.status)
        bounds.append(run_fixing(node, nid, sol.value_or_inf()))
    else:
        hull = None
        relax_used = RelaxKind(ZSUB, None if len(sign_roots) > 1
                               else next(iter(sign_roots)))
        for sign, (nid, root_bound) in sorted(sign_roots.items()):
            node = NodeState.root(inst.k, RelaxKind(ZSUB, sign))
            prefix = f"{sign}:" if len(sign_roots) > 1 else ""
            bounds.append(run_fixing(node, nid, root_bound, prefix))

    m_lb = min(bounds) if bounds else math.inf
    status = CERTIFIED if m_lb >= target else NOT_CERTIFIED
    return Certificate(status=status, m_ub=m_ub, m_lb=min(m_lb, m_ub),
                       gap=_relative_gap(m_ub, m_lb), lps_solved=lps,
                       eliminated_without_solve=grey, tree=tree.nodes,
                       fixings=fixings, relax=relax_used, witness=candidate)


def solve_global(inst: Instance, budget: int = 100000, relax: str = "auto",
                 gap_tol: float = GAP_TOL) -> Certificate:
    """Certified global optimum by best-bound search.

    Node selection: smallest bound, ties by creation order. Branching:
    three-way on the weight of the scenario with the largest
    complementarity violation in the node solution. The upper bound is
    refreshed through the piece-improvement procedure whenever a node
    solution is complementary. Returns the best certificate found when the
    node budget runs out.
    """
    report = validate(inst)
    if not report.ok and "polytope is empty" in report.problems:
        return Certificate(INFEASIBLE_STATUS, math.inf, math.inf, 0.0, 0, 0, [],
                           [], None, None)
    lps = 0
    grey = 0
    tree = _TreeLog()

    cs = cvar_mod.minimize_cvar(inst)
    trace = upper.improve(inst, cs.x)
    m_ub = trace.best_value
    witness = trace.witness
    fath = lambda: gap_tol * max(1.0, abs(m_ub))

    # root relaxations; with relax="auto" the tighter family wins
    zsub_roots = {}
    if relax in ("auto", ZSUB):
        for sign in (NONPOS, NONNEG):
            sol = solve_lp(lower.z_relax_model(inst, sign))
            lps += 1
            zsub_roots[sign] = sol
    hull = None
    hull_root = None
    if relax in ("auto", HULL):
        hull = hull_bounds(inst)
        lps += 2 * inst.k
        hull_root = node_lp(inst, NodeState.root(inst.k, RelaxKind(HULL)), hull=hull)
        lps += 1

    if relax == "auto":
        zsub_bound = min(s.value_or_inf() for s in zsub_roots.values())
        family = ZSUB if zsub_bound >= hull_root.value_or_inf() else HULL
    else:
        family = relax

    heap: list[tuple[float, int, NodeState, LpSolution, int]] = []
    seq = 0

    def push(node, sol, nid):
        nonlocal seq
        heapq.heappush(heap, (float(sol.objective), seq, node, sol, nid))
        seq += 1

    if family == ZSUB:
        for sign in (NONPOS, NONNEG):
            sol = zsub_roots.get(sign) or solve_lp(lower.z_relax_model(inst, sign))
            label = f"sign {sign}"
            if sol.status == INFEASIBLE:
                tree.add(None, label, None, sol.status, fathom=FATHOM_INFEASIBLE)
                continue
            nid = tree.add(None, label, sol.objective, sol.status)
            push(NodeState.root(inst.k, RelaxKind(ZSUB, sign)), sol, nid)
    else:
        sol = hull_root
        nid = tree.add(None, "hull root", sol.objective if sol.is_optimal else None,
                       sol.status)
        if sol.is_optimal:
            push(NodeState.root(inst.k, RelaxKind(HULL)), sol, nid)
        elif sol.status == INFEASIBLE:
            tree.nodes[nid].fathom = FATHOM_INFEASIBLE

    nodes_expanded = 0
    status = CERTIFIED
    m_lb = m_ub if not heap else heap[0][0]
    while heap:
        m_lb = heap[0][0]
        if m_lb >= m_ub - fath():
            m_lb = m_ub
            break
        if nodes_expanded >= budget:
            status = BUDGET_EXCEEDED
            break
        bound, _, node, sol, nid = heapq.heappop(heap)
        nodes_expanded += 1
        x_hat, tau_hat, lam_hat, s_hat = _node_point(inst, node, sol)
        viol = _compl_violation(inst, tau_hat, lam_hat, s_hat)
        free_mask = np.array([st == LAM_FREE for st in node.lam])
        viol_masked = np.where(free_mask, viol, -math.inf)
        if float(np.max(viol, initial=0.0)) <= COMPL_TOL or not free_mask.any():
            # complementary node solution: a genuine piece point
            tree.nodes[nid].fathom = FATHOM_INTEGRAL
            sub = upper.improve(inst, x_hat)
            if sub.best_value < m_ub - 1e-12:
                m_ub = sub.best_value
                witness = sub.witness
            continue
        branch_i = int(np.argmax(viol_masked))
        for st in (LAM_ZERO, LAM_INTERIOR, LAM_CAP):
            child = node.with_lam(branch_i, st)
            label = f"lam{branch_i}{_LAM_LABEL[st]}"
            if child.contradiction(inst) is not None:
                tree.add(nid, label, None, INFEASIBLE, fathom=FATHOM_INFEASIBLE,
                         solved=False, grey=True)
                grey += 1
                continue
            csol = node_lp(inst, child, hull=hull)
            lps += 1
            if csol.status == INFEASIBLE:
                tree.add(nid, label, None, csol.status, fathom=FATHOM_INFEASIBLE)
            elif csol.is_optimal and csol.objective >= m_ub - fath():
                tree.add(nid, label, csol.objective, csol.status, fathom=FATHOM_BOUND)
            else:
                cid = tree.add(nid, label, csol.objective, csol.status)
                push(child, csol, cid)
    else:
        m_lb = m_ub

    relax_kind = RelaxKind(family, None)
    return Certificate(status=status, m_ub=m_ub, m_lb=min(m_lb, m_ub),
                       gap=_relative_gap(m_ub, m_lb), lps_solved=lps,
                       eliminated_without_solve=grey, tree=tree.nodes,
                       fixings=[], relax=relax_kind, witness=witness,
                       nodes_expanded=nodes_expanded)


def export_tree(cert: Certificate, fmt: str = "dot") -> str:
    """Render the certificate tree as a DOT digraph or an indented listing.

    Bounds are rounded to two digits in node labels; fathomed nodes get a
    double border and preprocessor-eliminated (grey) nodes a grey fill.
    """
    def bound_text(nd: TreeNode) -> str:
        if nd.bound is not None:
            return f"{nd.bound:.2f}"
        return "infeasible" if nd.status == "infeasible" else "empty"

    if fmt == "dot":
        lines = ["digraph branchcut {", '  node [shape=box];']
        for nd in cert.tree:
            attrs = [f'label="{bound_text(nd)}"']
            if nd.grey:
                attrs.append("style=filled")
                attrs.append("fillcolor=gray85")
            if nd.fathom == FATHOM_BOUND or nd.fathom == FATHOM_INTEGRAL:
                attrs.append("peripheries=2")
            lines.append(f"  n{nd.id} [{', '.join(attrs)}];")
        for nd in cert.tree:
            if nd.parent is not None:
                lines.append(f'  n{nd.parent} -> n{nd.id} [label="{nd.label}"];')
        lines.append("}")
        return "\n".join(lines) + "\n"
    if fmt == "text":
        depth = {}
        lines = []
        for nd in cert.tree:
            depth[nd.id] = 0 if nd.parent is None else depth[nd.parent] + 1
            fields = [f"id={nd.id}", f"bound={bound_text(nd)}", f"status={nd.status}"]
            if nd.fathom:
                fields.append(f"fathom={nd.fathom}")
            if nd.grey:
                fields.append("grey=1")
            label = nd.label if nd.parent is not None else "root:" + nd.label
            lines.append("  " * depth[nd.id] + label + " :: " + " ".join(fields))
        return "\n".join(lines) + "\n"
    raise ValueError(f"unknown tree format {fmt!r}")
