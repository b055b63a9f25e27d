"""Benchmark the simplex pivot kernels: numba against the numpy fallback.

Solves a batch of representative LPs (relaxation models and CVaR models
from random instances) with each backend and reports solves/sec. The two
backends must agree on every status and objective.

Run: python benchmarks/bench_lp.py [--instances 8] [--repeats 3]
"""

import argparse
import time

from varmin import cvar, instances, lower
from varmin import lp as lp_mod


def build_batch(count):
    models = []
    for seed in range(count):
        inst = instances.random_instance(seed, n=3, k=12, extra_row=False)
        instances.validate(inst)
        models.append(lower.z_relax_model(inst, "nonneg"))
        models.append(lower.hull_relax_model(inst, lower.hull_bounds(inst)))
        models.append(cvar._cvar_model(inst)[0])
    paper = instances.example_instance(0.9)
    instances.validate(paper)
    models.append(lower.z_relax_model(paper, "nonneg"))
    models.append(lower.hull_relax_model(paper, lower.hull_bounds(paper)))
    return models


def run_backend(name, models, repeats):
    lp_mod.use_backend(name)
    results = [lp_mod.solve_lp(m.copy()) for m in models]  # warm the JIT
    best = float("inf")
    for _ in range(repeats):
        start = time.perf_counter()
        for m in models:
            lp_mod.solve_lp(m.copy())
        best = min(best, time.perf_counter() - start)
    return results, best


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--instances", type=int, default=8)
    parser.add_argument("--repeats", type=int, default=3)
    args = parser.parse_args()

    models = build_batch(args.instances)
    sizes = [(m.n_rows, m.n_vars) for m in models]
    print(f"batch: {len(models)} LPs, rows x vars up to "
          f"{max(r for r, _ in sizes)} x {max(v for _, v in sizes)}")

    timings = {}
    outputs = {}
    for backend in ("numpy", "numba"):
        outputs[backend], timings[backend] = run_backend(backend, models,
                                                         args.repeats)
        rate = len(models) / timings[backend]
        print(f"{backend:>6}: {timings[backend]:.3f}s  ({rate:.1f} solves/sec)")

    worst = 0.0
    for a, b in zip(outputs["numpy"], outputs["numba"]):
        assert a.status == b.status, "backends disagree on status"
        if a.status == "optimal":
            worst = max(worst, abs(a.objective - b.objective))
    print(f"agreement: statuses identical, max objective gap {worst:.2e}")
    print(f"speedup: {timings['numpy'] / timings['numba']:.2f}x")


if __name__ == "__main__":
    main()
