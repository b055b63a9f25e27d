import math

import numpy as np
import pytest

from varmin import instances
from varmin.instances import (BadProbabilities, Instance, ParseError, Polytope,
                              UnboundedPolytope, digest, dumps, example_instance,
                              load, loads, random_instance, save,
                              simplex_polytope, validate)


def test_example_scenario_rows(example27):
    assert np.array_equal(example27.losses[0], [5.0, 7.0, 2.0])
    assert np.array_equal(example27.losses[9], [0.0, 7.0, 2.0])
    assert np.array_equal(example27.losses[26], [-6.0, -5.0, -5.0])


def test_example_mapping_is_bijection(example27):
    rows = {tuple(r) for r in example27.losses}
    assert len(rows) == 27


def test_example_shape(example27):
    assert example27.n == 3 and example27.k == 27 and example27.beta == 0.9
    assert example27.probs.sum() == pytest.approx(1.0, abs=1e-12)
    assert example27.polytope.nonneg


def test_validate_records_abs_bound():
    inst = example_instance(0.9)
    report = validate(inst)
    assert report.ok
    # the simplex alone forces |x_j| <= 1; the return row only tightens it
    assert np.all(report.abs_bound <= 1.0 + 1e-9)
    assert np.all(report.abs_bound > 0.0)
    assert inst.polytope.abs_bound is report.abs_bound


def test_validate_declared_bound_checked():
    inst = example_instance(0.9)
    inst.polytope.abs_bound = np.array([1.0, 1.0, 1.0])
    report = validate(inst)
    assert report.ok  # (1,1,1) dominates every probed vertex

    inst2 = example_instance(0.9)
    inst2.polytope.abs_bound = np.array([1e-3, 1e-3, 1e-3])
    report2 = validate(inst2)
    assert not report2.ok and report2.problems


def test_bad_probabilities():
    inst = Instance(n=1, k=2, beta=0.5, probs=[0.5, 0.6],
                    losses=[[1.0], [2.0]], polytope=simplex_polytope(1))
    with pytest.raises(BadProbabilities):
        validate(inst)
    inst2 = Instance(n=1, k=2, beta=0.5, probs=[1.1, -0.1],
                     losses=[[1.0], [2.0]], polytope=simplex_polytope(1))
    with pytest.raises(BadProbabilities):
        validate(inst2)


def test_unbounded_polytope():
    poly = Polytope(eq=(np.zeros((0, 2)), np.zeros(0)),
                    ineq=(np.zeros((0, 2)), np.zeros(0)),
                    lower=np.zeros(2), upper=np.full(2, math.inf))
    inst = Instance(n=2, k=1, beta=0.5, probs=[1.0], losses=[[1.0, 1.0]],
                    polytope=poly)
    with pytest.raises(UnboundedPolytope):
        validate(inst)


def test_empty_polytope_reported():
    poly = Polytope(eq=(np.array([[1.0], [1.0]]), np.array([1.0, 2.0])),
                    ineq=(np.zeros((0, 1)), np.zeros(0)),
                    lower=np.zeros(1), upper=np.ones(1))
    inst = Instance(n=1, k=1, beta=0.5, probs=[1.0], losses=[[1.0]], polytope=poly)
    report = validate(inst)
    assert not report.ok
    assert report.problems == ["polytope is empty"]


def test_bad_beta_rejected():
    inst = Instance(n=1, k=1, beta=1.5, probs=[1.0], losses=[[1.0]],
                    polytope=simplex_polytope(1))
    with pytest.raises(ValueError):
        validate(inst)


def test_shape_mismatch_rejected():
    with pytest.raises(ValueError):
        Instance(n=2, k=2, beta=0.5, probs=[0.5, 0.5],
                 losses=[[1.0], [2.0]], polytope=simplex_polytope(2))


def test_round_trip_example(tmp_path):
    inst = example_instance(0.9)
    path = tmp_path / "inst.json"
    save(inst, path)
    again = load(path)
    assert again == inst
    assert dumps(again) == dumps(inst)


@pytest.mark.parametrize("seed", [0, 7, 13])
def test_round_trip_random(tmp_path, seed):
    inst = random_instance(seed, n=3, k=5)
    path = tmp_path / f"r{seed}.json"
    save(inst, path)
    assert load(path) == inst


def test_round_trip_after_validate(tmp_path):
    inst = example_instance(0.9)
    validate(inst)
    path = tmp_path / "v.json"
    save(inst, path)
    again = load(path)
    assert again == inst
    assert np.array_equal(again.polytope.abs_bound, inst.polytope.abs_bound)


def test_parse_missing_beta():
    text = dumps(example_instance(0.9)).replace('"beta": 0.9', '"bbeta": 0.9', 1)
    with pytest.raises(ParseError, match="beta"):
        loads(text)


def test_parse_k_mismatch():
    inst = example_instance(0.9)
    text = dumps(inst).replace('"k": 27', '"k": 3', 1)
    with pytest.raises(ParseError):
        loads(text)


def test_parse_not_json():
    with pytest.raises(ParseError):
        loads("{not json")


def test_random_instances_are_valid():
    for seed in range(30):
        inst = random_instance(seed)
        assert abs(inst.probs.sum() - 1.0) <= 1e-12
        assert inst.losses.shape == (inst.k, inst.n)
        assert validate(inst).abs_bound is not None


def test_digest_stable(example27):
    assert digest(example27) == digest(example_instance(0.9).__class__(
        example27.n, example27.k, example27.beta, example27.probs, example27.losses, example27.polytope))
    assert digest(example27) != digest(example_instance(0.8))
