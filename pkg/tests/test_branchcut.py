import json
import re

import numpy as np
import pytest

from varmin import branchcut, cvar, lpec, lower, upper
from varmin import lp as lp_mod
from varmin.branchcut import (Certificate, NodeState, export_tree, fixing_round,
                              node_lp, solve_global, verify_global)
from varmin.instances import Instance, Polytope, simplex_polytope, validate
from varmin.lower import RelaxKind

from conftest import make_instance


def example_candidate(example27):
    start = cvar.minimize_cvar(example27).x
    return upper.improve(example27, start).witness


@pytest.fixture(scope="module")
def example_cert(example27):
    return verify_global(example27, example_candidate(example27))


def test_root_node_lp(example27):
    node = NodeState.root(example27.k, RelaxKind("zsub", "nonneg"))
    sol = node_lp(example27, node)
    assert sol.objective == pytest.approx(3.48, abs=5e-3)


def test_zero_branch_node(example27):
    node = NodeState.root(example27.k, RelaxKind("zsub", "nonneg")).with_lam(0, "zero")
    sol = node_lp(example27, node)
    assert sol.objective == pytest.approx(5.3, abs=0.05)


def test_contradictory_node_short_circuits(example27):
    node = NodeState.root(example27.k, RelaxKind("zsub", "nonneg"))
    node = node.with_lam(0, "cap").with_lam(1, "cap").with_tau(4, "positive")
    assert node.contradiction(example27) is not None
    before = lp_mod.solve_count
    sol = node_lp(example27, node)
    assert sol.status == "infeasible"
    assert lp_mod.solve_count == before  # no LP was built or solved


def test_status_consistency():
    inst = make_instance(31, n=2, k=3)
    node = NodeState.root(inst.k, RelaxKind("zsub", "nonneg"))
    assert node.with_lam(0, "zero").with_tau(0, "positive").contradiction(inst)
    all_zero = node
    for i in range(inst.k):
        all_zero = all_zero.with_lam(i, "zero")
    assert all_zero.contradiction(inst)  # weights cannot reach one


def test_fixing_round_paper(example27):
    m_ub = example_candidate(example27).m
    node = NodeState.root(example27.k, RelaxKind("zsub", "nonneg"))
    res = fixing_round(example27, m_ub, node, candidate=example_candidate(example27),
                       certify_target=m_ub - 1e-6 * max(1.0, abs(m_ub)))
    assert res.certified
    lam_fixes = [f for f in res.fixings if f.startswith("lam")]
    assert lam_fixes == ["lam0=cap", "lam1=cap"]
    tau_fixes = [f for f in res.fixings if f.startswith("tau")]
    assert tau_fixes == [f"tau{i}=0" for i in range(2, 27)]
    assert res.bound == pytest.approx(4.2652, abs=5e-4)
    assert res.node.lam[0] == "cap" and res.node.lam[1] == "cap"


def test_fixing_round_single_scenario():
    inst = Instance(n=2, k=1, beta=0.8, probs=[1.0], losses=[[2.0, 3.0]],
                    polytope=simplex_polytope(2))
    validate(inst)
    node = NodeState.root(1, RelaxKind("zsub", "nonneg"))
    res = fixing_round(inst, 2.0, node)
    # the weight equals one, strictly inside (0, cap): zero and cap
    # branches die, the interior branch is fixed in one pass
    assert res.node.lam[0] == "interior"
    assert res.bound == pytest.approx(2.0, abs=1e-9)


def test_verify_paper(example27, example_cert):
    cert = example_cert
    assert cert.certified
    assert cert.m_lb == pytest.approx(4.2652, abs=5e-4)
    assert cert.gap <= 1e-6
    assert cert.lps_solved <= 10
    assert cert.eliminated_without_solve == 25
    assert [f for f in cert.fixings if f.startswith("lam")] == \
        ["lam0=cap", "lam1=cap"]


def test_verify_paper_08(example27_beta08):
    sol = cvar.minimize_cvar(example27_beta08)
    cand = lpec.LpecPoint.build(example27_beta08, cvar.var_of(example27_beta08, sol.x), sol.x)
    cert = verify_global(example27_beta08, cand)
    assert cert.certified
    assert cert.m_ub == pytest.approx(cert.m_lb, abs=1e-6)


def test_verify_rejects_infeasible_candidate(example27):
    pt = example_candidate(example27)
    bad = lpec.LpecPoint(m=pt.m, x=pt.x, tau=pt.tau + 1.0, lam=pt.lam, s=pt.s)
    with pytest.raises(ValueError):
        verify_global(example27, bad)


def test_verify_suboptimal_candidate_not_certified():
    inst = make_instance(56, n=2, k=3, extra_row=False)
    opt = upper.enumerate_pieces(inst)
    rng = np.random.default_rng(0)
    for _ in range(50):
        x = rng.dirichlet(np.ones(inst.n))
        m = cvar.var_of(inst, x)
        if m > opt + 0.5:
            cand = lpec.LpecPoint.build(inst, m, x)
            cert = verify_global(inst, cand)
            assert not cert.certified
            assert cert.status == "not_certified"
            assert cert.m_lb <= opt + 1e-6
            return
    raise AssertionError("fixture lost its suboptimal sample point")


@pytest.mark.parametrize("seed", range(10))
def test_verify_or_escalate(seed):
    # fixing rounds may legitimately stall (not_certified); the search
    # fallback must then close the same optimum
    inst = make_instance(1400 + seed, n=2, k=3)
    cert = solve_global(inst)
    assert cert.status == "certified"
    cert2 = verify_global(inst, cert.witness)
    if cert2.certified:
        assert cert2.m_lb >= cert.m_ub - 1e-6 * max(1.0, abs(cert.m_ub))
    else:
        assert cert2.status == "not_certified"
        assert cert2.m_lb <= cert.m_ub + 1e-9
        assert solve_global(inst).m_ub == pytest.approx(cert.m_ub, abs=1e-9)


def test_solve_global_paper(example27):
    cert = solve_global(example27, relax="zsub")
    assert cert.status == "certified"
    assert cert.m_ub == pytest.approx(4.2652, abs=5e-4)
    assert cert.gap <= 1e-6


@pytest.mark.parametrize("relax", ["auto", "zsub", "hull"])
def test_solve_matches_enumeration(relax):
    for seed in range(6):
        inst = make_instance(1500 + seed, n=2, k=4)
        oracle = upper.enumerate_pieces(inst)
        cert = solve_global(inst, relax=relax)
        assert cert.m_ub == pytest.approx(oracle, abs=1e-7)
        assert cert.status == "certified"


def test_solve_empty_polytope():
    poly = Polytope(eq=(np.array([[1.0], [1.0]]), np.array([0.0, 1.0])),
                    ineq=(np.zeros((0, 1)), np.zeros(0)),
                    lower=np.zeros(1), upper=np.ones(1))
    inst = Instance(n=1, k=1, beta=0.5, probs=[1.0], losses=[[1.0]], polytope=poly)
    cert = solve_global(inst)
    assert cert.status == "infeasible"


def test_solve_budget_exhaustion():
    inst = make_instance(66, n=3, k=4)
    cert = solve_global(inst, budget=0)
    assert cert.status in ("budget_exceeded", "certified")
    if cert.status == "budget_exceeded":
        assert cert.m_lb <= cert.m_ub + 1e-12


def test_solve_deterministic():
    inst = make_instance(67, n=3, k=4)
    a = solve_global(inst)
    b = solve_global(inst)
    assert a.to_dict() == b.to_dict()


def test_soundness_bounds_bracket_oracle():
    for seed in range(8):
        inst = make_instance(1600 + seed, n=2, k=3)
        oracle = upper.enumerate_pieces(inst)
        cert = solve_global(inst)
        assert cert.m_lb - 1e-7 <= oracle <= cert.m_ub + 1e-7


def test_child_bounds_dominate_parent():
    for seed in (70, 71):
        inst = make_instance(seed, n=3, k=4)
        cert = solve_global(inst)
        by_id = {nd.id: nd for nd in cert.tree}
        for nd in cert.tree:
            if nd.parent is None or nd.bound is None:
                continue
            parent = by_id[nd.parent]
            if parent.bound is not None:
                assert nd.bound >= parent.bound - 1e-9


def test_fixings_hold_at_every_enumerated_optimum():
    inst = make_instance(72, n=2, k=3, extra_row=False)
    cert = solve_global(inst)
    cert_v = verify_global(inst, cert.witness)
    assert cert_v.certified
    opt = upper.enumerate_pieces(inst)
    assert cert.m_ub == pytest.approx(opt, abs=1e-7)


def test_export_dot(example_cert):
    dot = export_tree(example_cert, "dot")
    assert dot.startswith("digraph")
    # two three-way weight branchings with fathomed siblings
    for i in (0, 1):
        assert len(re.findall(fr'label="lam{i}', dot)) == 3
    assert "peripheries=2" in dot
    assert "fillcolor=gray85" in dot
    assert dot.count("fillcolor=gray85") == 25


def test_export_text_round_trip(example_cert):
    text = export_tree(example_cert, "text")
    lines = text.rstrip("\n").split("\n")
    assert len(lines) == len(example_cert.tree)
    parsed = []
    for line in lines:
        depth = (len(line) - len(line.lstrip())) // 2
        label, _, fields = line.strip().partition(" :: ")
        kv = dict(f.split("=", 1) for f in fields.split(" "))
        parsed.append((depth, label, kv))
    by_id = {nd.id: nd for nd in example_cert.tree}
    for depth, label, kv in parsed:
        nd = by_id[int(kv["id"])]
        expect_depth = 0
        walk = nd
        while walk.parent is not None:
            walk = by_id[walk.parent]
            expect_depth += 1
        assert depth == expect_depth
        if nd.parent is not None:
            assert label == nd.label
        if nd.bound is not None:
            assert kv["bound"] == f"{nd.bound:.2f}"
        assert kv["status"] == nd.status
        if nd.fathom:
            assert kv["fathom"] == nd.fathom


def test_export_single_node_tree():
    cert = Certificate(status="certified", m_ub=1.0, m_lb=1.0, gap=0.0,
                       lps_solved=1, eliminated_without_solve=0,
                       tree=[branchcut.TreeNode(0, None, "root", 1.0, "optimal")],
                       fixings=[], relax=None, witness=None)
    dot = export_tree(cert, "dot")
    assert 'n0 [label="1.00"]' in dot
    assert "->" not in dot
    assert export_tree(cert, "text").count("\n") == 1


def test_certificate_round_trip(example_cert):
    doc = example_cert.to_dict()
    again = Certificate.from_dict(json.loads(json.dumps(doc)))
    assert again.to_dict() == doc
    assert export_tree(again, "dot") == export_tree(example_cert, "dot")


def test_certificate_timings_hidden_by_default(example_cert):
    assert "wall_time_sec" not in example_cert.to_dict()
    assert "wall_time_sec" in example_cert.to_dict(include_timings=True)
