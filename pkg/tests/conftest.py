import numpy as np
import pytest

from varmin import example_instance, random_instance, validate
from varmin.lp import LpModel, solve_lp


@pytest.fixture(scope="session", autouse=True)
def warmup_kernels():
    """Trigger kernel JIT before any timed test runs."""
    model = LpModel()
    x = model.add_var("x", 0.0, 1.0)
    model.add_row({x: 1.0}, ">=", 0.25)
    model.set_objective({x: 1.0})
    solve_lp(model)


@pytest.fixture(scope="session")
def example27():
    inst = example_instance(0.9)
    validate(inst)
    return inst


@pytest.fixture(scope="session")
def example27_beta08():
    inst = example_instance(0.8)
    validate(inst)
    return inst


@pytest.fixture()
def rng():
    return np.random.default_rng(20240917)


def make_instance(seed, n=3, k=4, beta=None, extra_row=None):
    inst = random_instance(seed, n=n, k=k, beta=beta, extra_row=extra_row)
    validate(inst)
    return inst


@pytest.fixture()
def small_instances():
    return [make_instance(100 + s, n=int(2 + s % 2), k=int(2 + s % 3))
            for s in range(12)]
