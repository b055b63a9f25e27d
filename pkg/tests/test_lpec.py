import numpy as np
import pytest

from varmin import cvar, lpec, upper
from varmin.instances import Instance, simplex_polytope, validate
from varmin.lpec import (AmbiguousClassification, LpecPoint, classify,
                         min_var_exists_check, recover_multipliers, residuals)

from conftest import make_instance
from tests_util_pieces import piece_points as feasible_points


def test_residuals_at_certified_optimum(example27):
    start = cvar.minimize_cvar(example27).x
    witness = upper.improve(example27, start).witness
    feas, gap = residuals(example27, witness)
    assert feas <= 1e-7
    assert gap <= 1e-7
    assert witness.m == pytest.approx(4.2652, abs=5e-4)


def test_residuals_flag_bad_weights(example27):
    x = cvar.minimize_cvar(example27).x
    m = cvar.var_of(example27, x)
    pt = LpecPoint.build(example27, m, x)
    bad = LpecPoint(m=pt.m, x=pt.x, tau=pt.tau,
                    lam=np.full(example27.k, 0.5 / example27.k), s=pt.s)
    feas, _ = residuals(example27, bad)
    assert feas > 1e-3  # weights sum to 0.5, well off the required one


def test_tau_is_plus_part_on_feasible_points():
    inst = make_instance(41, n=2, k=3, extra_row=False)
    pts = feasible_points(inst)
    assert pts
    for pt in pts:
        losses = inst.scenario_losses(pt.x)
        assert np.max(np.abs(pt.tau - np.maximum(0.0, losses - pt.m))) <= 1e-7


def test_some_scenario_below_m():
    # every feasible point dominates at least one scenario loss
    for seed in (21, 22):
        inst = make_instance(850 + seed, n=2, k=3, extra_row=False)
        for pt in feasible_points(inst):
            losses = inst.scenario_losses(pt.x)
            assert pt.m >= losses.min() - 1e-9


def test_m_identity_and_quantile_sandwich():
    for seed in (11, 12, 13):
        inst = make_instance(800 + seed, n=2, k=3, extra_row=False)
        for pt in feasible_points(inst):
            losses = inst.scenario_losses(pt.x)
            caps = inst.caps
            # weighted-loss identity for the objective level
            m_id = float(pt.lam @ losses - caps @ pt.tau)
            assert m_id == pytest.approx(pt.m, abs=1e-7)
            above = float(inst.probs[losses > pt.m + 1e-9].sum())
            at_or_above = float(inst.probs[losses >= pt.m - 1e-9].sum())
            assert above <= 1.0 - inst.beta + 1e-9
            assert at_or_above >= 1.0 - inst.beta - 1e-9


def test_classify_paper_cvar_point(example27):
    x = cvar.minimize_cvar(example27).x
    m = cvar.var_of(example27, x)
    pt = LpecPoint.build(example27, m, x)
    cls = classify(example27, pt)
    # slack vanishes on scenarios {1, 2, 10} (0-based {0, 1, 9}); tau_1 > 0
    assert cls.alpha_tau == (0,)
    assert cls.alpha_lam == (0, 1, 9)
    assert cls.beta_tau == (1,)
    assert cls.beta_lam == ()
    assert set(cls.gamma_lam) == set(range(27)) - {0, 1, 9}


def test_classify_nondegenerate_point():
    inst = Instance(n=1, k=2, beta=0.5, probs=[0.6, 0.4],
                    losses=[[2.0], [5.0]], polytope=simplex_polytope(1))
    validate(inst)
    pt = LpecPoint.build(inst, 2.0, [1.0])
    cls = classify(inst, pt)
    assert cls.beta_tau == ()
    assert cls.beta_lam == ()
    assert cls.alpha_tau == (1,)
    assert cls.alpha_lam == (0, 1)


def test_classify_doubly_active_first_pair():
    inst = Instance(n=1, k=2, beta=0.5, probs=[0.5, 0.5],
                    losses=[[3.0], [3.0]], polytope=simplex_polytope(1))
    validate(inst)
    pt = LpecPoint.build(inst, 3.0, [1.0], tau=[0.0, 0.0], lam=[1.0, 0.0])
    cls = classify(inst, pt)
    assert 0 in cls.beta_tau  # tau_0 = 0 with the weight at its cap


def test_classify_ambiguous_band(example27):
    x = cvar.minimize_cvar(example27).x
    m = cvar.var_of(example27, x)
    pt = LpecPoint.build(example27, m, x)
    tau = pt.tau.copy()
    tau[5] = 1.5e-6  # inside (tol, 2 tol)
    nudged = LpecPoint(m=pt.m, x=pt.x, tau=tau, lam=pt.lam, s=pt.s)
    with pytest.raises(AmbiguousClassification):
        classify(example27, nudged, tol=1e-6)


def test_recovery_matches_reported_weights(example27):
    caps = example27.caps
    start = cvar.minimize_cvar(example27).x
    trace = upper.improve(example27, start)
    lam = trace.witness.lam
    # both binding scenarios at the common cap 10/27
    assert lam[0] == pytest.approx(10.0 / 27.0, abs=1e-7)
    assert lam[1] == pytest.approx(10.0 / 27.0, abs=1e-7)
    # the remaining mass splits over scenarios 3 and 10 (0-based 2 and 9);
    # 1 - 2*0.37037 = 0.25926, and ascending-index fill puts it all on 2
    assert lam[2] + lam[9] == pytest.approx(0.25926, abs=1e-5)
    assert lam[2] == pytest.approx(0.25926, abs=1e-5)
    assert np.all(lam <= caps + 1e-12)


def test_recovery_rejects_infeasible_mass():
    inst = make_instance(42, n=2, k=2)
    x = np.array([0.5, 0.5])
    losses = inst.scenario_losses(x)
    # m far above all losses: s > 0 everywhere, no index can carry mass
    with pytest.raises(ValueError):
        recover_multipliers(inst, float(losses.max() + 5.0), x,
                            np.zeros(inst.k))


def test_objective_floor(example27):
    floor = min_var_exists_check(example27)
    assert floor == pytest.approx(-5.566666666666667, abs=1e-9)
    assert floor <= 4.2652


def test_objective_floor_trivia():
    inst = Instance(n=1, k=1, beta=0.5, probs=[1.0], losses=[[2.5]],
                    polytope=simplex_polytope(1))
    validate(inst)
    assert min_var_exists_check(inst) == pytest.approx(2.5, abs=1e-9)

    nonneg = Instance(n=2, k=3, beta=0.5, probs=[0.3, 0.3, 0.4],
                      losses=[[1.0, 2.0], [0.5, 0.1], [3.0, 0.0]],
                      polytope=simplex_polytope(2))
    validate(nonneg)
    assert min_var_exists_check(nonneg) >= 0.0
