"""Compare the compiled kernels with the numpy fallback.

Run with ``python benchmarks/bench_kernels.py``. Each kernel is timed on the
same inputs under both backends; the table lists the best-of-``repeat`` wall
time and the speed-up of the compiled path.
"""

import argparse
import time

import numpy as np

from bsval import _fallback
from bsval.linalg import haar_random_unitary
from bsval.model import Law, binomial_table, build_distribution, colex_to_lex, pattern_array, permutation_orders

try:
    from bsval import _kernels as compiled
except ImportError:  # pragma: no cover
    compiled = None


def best_time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        start = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - start)
    return best


def cases(steps):
    rng = np.random.default_rng(0)
    a = rng.standard_normal((12, 12)) + 1j * rng.standard_normal((12, 12))
    u = haar_random_unitary(16, seed=1)
    rows = np.arange(4, dtype=np.int64)
    pats = pattern_array(16, 4)
    perms, orders = permutation_orders(4)
    table = build_distribution(u, Law.partial(0.8), n=4)
    lex, binom = colex_to_lex(16, 4), binomial_table(16, 4)
    pick_occ = rng.integers(0, 4, steps)
    pick_emp = rng.integers(0, 12, steps)
    uniforms = rng.random(steps)

    def chain(mod):
        occ = np.arange(4, dtype=np.int64)
        emp = np.arange(4, 16, dtype=np.int64)
        out = np.empty(steps // 100, dtype=np.int64)
        mod.metropolis_chunk(table.probs, lex, binom, occ, emp, 0, pick_occ, pick_emp, uniforms,
                             0, 100, 0, out, 0)

    return {
        "ryser 12x12": lambda mod: mod.ryser_permanent(a),
        "batch permanents (16,4)": lambda mod: mod.batch_permanents(u, rows, pats),
        "interference terms (16,4)": lambda mod: mod.interference_terms(u, rows, pats, perms, orders),
        f"metropolis {steps:.0e} steps": chain,
    }


def main():
    parser = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    parser.add_argument("--repeat", type=int, default=3)
    parser.add_argument("--steps", type=int, default=1_000_000)
    args = parser.parse_args()
    if compiled is None:
        print("compiled extension not built; only the fallback can run")
    print(f"{'kernel':<30}{'python [s]':>12}{'cython [s]':>12}{'speed-up':>10}")
    for name, fn in cases(args.steps).items():
        tp = best_time(lambda: fn(_fallback), args.repeat)
        if compiled is None:
            print(f"{name:<30}{tp:>12.4f}{'-':>12}{'-':>10}")
            continue
        tc = best_time(lambda: fn(compiled), args.repeat)
        print(f"{name:<30}{tp:>12.4f}{tc:>12.4f}{tp / tc:>9.1f}x")


if __name__ == "__main__":
    main()
