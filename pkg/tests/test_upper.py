import itertools

import numpy as np
import pytest
from scipy.optimize import linprog

from varmin import cvar, lpec, upper
from varmin.instances import Instance, simplex_polytope, validate
from varmin.upper import (PieceSpec, TooLarge, enumerate_pieces, improve,
                          restricted_lp)

from conftest import make_instance


def test_piece_invariant():
    with pytest.raises(ValueError):
        PieceSpec(3, frozenset({0, 1}), frozenset({0}))
    piece = PieceSpec(3, frozenset({0}), frozenset({0, 2}))
    assert piece.zero_tau == frozenset({1, 2})
    assert piece.free_s == frozenset({1})


def test_paper_piece_value(example27):
    piece = PieceSpec(example27.k, frozenset({0, 1}), frozenset({0, 1, 9}))
    sol = restricted_lp(example27, piece)
    assert sol.is_optimal
    assert sol.objective == pytest.approx(4.2652, abs=5e-4)
    # the solve leaves the slack of scenario 3 (0-based 2) at zero as an
    # outcome even though the piece does not pin it
    m = sol.x[0]
    x = sol.x[1:4]
    s = m + sol.x[4 + 2] - example27.scenario_losses(x)[2]
    assert abs(s) <= 1e-7


def test_paper_alternative_piece_no_improvement(example27):
    alt = PieceSpec(example27.k, frozenset({0, 9}), frozenset({0, 1, 9}))
    sol = restricted_lp(example27, alt)
    assert sol.is_optimal
    assert sol.objective >= 4.2652 - 5e-4


def test_restricted_solution_extends_to_feasible_point(example27):
    piece = PieceSpec(example27.k, frozenset({0, 1}), frozenset({0, 1, 9}))
    sol = restricted_lp(example27, piece)
    pt = lpec.LpecPoint.build(example27, float(sol.x[0]), sol.x[1:4],
                              sol.x[4:4 + example27.k])
    feas, gap = lpec.residuals(example27, pt)
    assert feas <= 1e-7 and gap <= 1e-7


def test_improve_reaches_paper_bound(example27):
    start = cvar.minimize_cvar(example27).x
    trace = improve(example27, start)
    assert trace.best_value == pytest.approx(4.2652, abs=5e-4)
    assert trace.start_value == pytest.approx(4.8613, abs=5e-4)
    # accepted refreshed values weakly decrease from the start value
    values = [trace.start_value] + [step[2] for step in trace.steps]
    assert all(a >= b - 1e-9 for a, b in zip(values, values[1:]))
    # lp values sandwich: m_nu >= m_{nu+1/2} >= m_{nu+1}
    for (_, lp_val, refreshed), prev in zip(trace.steps, values):
        assert prev >= lp_val - 1e-9 >= refreshed - 2e-9
    feas, gap = lpec.residuals(example27, trace.witness)
    assert feas <= 1e-7 and gap <= 1e-7


def test_improve_nondegenerate_start_stops():
    inst = Instance(n=1, k=2, beta=0.5, probs=[0.6, 0.4],
                    losses=[[2.0], [5.0]], polytope=simplex_polytope(1))
    validate(inst)
    trace = improve(inst, [1.0])
    assert trace.steps == []
    assert trace.best_value == trace.start_value


def test_single_scenario_piece():
    inst = Instance(n=2, k=1, beta=0.8, probs=[1.0], losses=[[2.0, 3.0]],
                    polytope=simplex_polytope(2))
    validate(inst)
    # the one survivable piece pins tau = 0 and the slack to zero
    piece = PieceSpec(1, frozenset(), frozenset({0}))
    sol = restricted_lp(inst, piece)
    assert sol.objective == pytest.approx(2.0, abs=1e-9)
    assert enumerate_pieces(inst) == pytest.approx(2.0, abs=1e-9)


def test_enumerate_guard(example27):
    with pytest.raises(TooLarge):
        enumerate_pieces(example27)


def _min_var_by_subsets(inst):
    """Independent oracle: smallest over probability-beta covers S of
    min_x max_{i in S} x.y^i, each inner problem one reference LP."""
    n, k = inst.n, inst.k
    poly = inst.polytope
    best = np.inf
    Aeq, beq = poly.eq
    Aub, bub = poly.ineq
    for size in range(1, k + 1):
        for S in itertools.combinations(range(k), size):
            if inst.probs[list(S)].sum() < inst.beta - 1e-12:
                continue
            c = np.zeros(n + 1)
            c[n] = 1.0
            rows = []
            rhs = []
            for i in S:
                row = np.zeros(n + 1)
                row[:n] = inst.losses[i]
                row[n] = -1.0
                rows.append(row)
                rhs.append(0.0)
            for r in range(Aub.shape[0]):
                row = np.zeros(n + 1)
                row[:n] = Aub[r]
                rows.append(row)
                rhs.append(bub[r])
            A_eq = None
            if Aeq.shape[0]:
                A_eq = np.hstack([Aeq, np.zeros((Aeq.shape[0], 1))])
            bounds = [(0, None)] * n + [(None, None)]
            res = linprog(c, A_ub=np.array(rows), b_ub=rhs, A_eq=A_eq,
                          b_eq=beq if Aeq.shape[0] else None,
                          bounds=bounds, method="highs")
            if res.status == 0:
                best = min(best, res.fun)
    return best


@pytest.mark.parametrize("seed", range(12))
def test_enumerate_matches_subset_oracle(seed):
    inst = make_instance(900 + seed, n=int(2 + seed % 2), k=int(2 + seed % 3))
    assert enumerate_pieces(inst) == pytest.approx(_min_var_by_subsets(inst),
                                                   abs=1e-7)


@pytest.mark.parametrize("seed", range(10))
def test_improve_never_beats_exact_optimum(seed):
    inst = make_instance(950 + seed, n=3, k=3)
    opt = enumerate_pieces(inst)
    rng = np.random.default_rng(seed)
    for _ in range(3):
        x = rng.dirichlet(np.ones(inst.n))
        if not inst.polytope.contains(x):
            continue
        assert improve(inst, x).best_value >= opt - 1e-9


def test_improve_from_vertices_reaches_optimum():
    # all starts stay above the exact optimum; at least one start (the
    # vertices plus the CVaR point) attains it
    for seed in range(6):
        inst = make_instance(3000 + seed, n=3, k=5, extra_row=False)
        opt = enumerate_pieces(inst)
        starts = [np.eye(inst.n)[j] for j in range(inst.n)]
        starts.append(cvar.minimize_cvar(inst).x)
        values = [improve(inst, s).best_value for s in starts]
        assert all(v >= opt - 1e-9 for v in values)
        assert min(values) <= opt + 1e-7
