"""Timing comparison of the compiled kernel core against the pure-Python twin.

Run from the repository root:

    python3 benchmarks/bench_kernels.py

Each kernel is timed on identical inputs; the table reports best-of-5 wall
time per call and the compiled speedup.  Outputs are also cross-checked for
bit-identity while we are at it, so a benchmark run doubles as a smoke test.
"""

import time

import numpy as np

from battrl import _pykernels

try:
    from battrl import _cykernels
except ImportError:
    _cykernels = None

ALPHA, BETA = 4.5e-3, 1.3
REPEATS = 5


def best_of(fn, *args):
    best = float("inf")
    result = None
    for _ in range(REPEATS):
        t0 = time.perf_counter()
        result = fn(*args)
        best = min(best, time.perf_counter() - t0)
    return best, result


def bench_case(name, pure_fn, fast_fn, args, check=lambda a, b: a == b):
    t_pure, r_pure = best_of(pure_fn, *args)
    if fast_fn is None:
        print(f"{name:<28} {t_pure * 1e3:>10.3f} ms {'--':>12} {'--':>9}")
        return
    t_fast, r_fast = best_of(fast_fn, *args)
    assert check(r_pure, r_fast), f"{name}: backend outputs differ"
    speedup = t_pure / t_fast if t_fast > 0 else float("inf")
    print(
        f"{name:<28} {t_pure * 1e3:>10.3f} ms {t_fast * 1e3:>10.3f} ms"
        f" {speedup:>8.1f}x"
    )


def advance_all(mod, walk):
    core = mod.TrackerCore(ALPHA, BETA, walk[0])
    return mod.advance_many(core, walk[1:])


def main():
    rng = np.random.default_rng(20260815)
    raw = rng.uniform(-0.05, 0.05, size=200_000)
    walk = _pykernels.clamped_walk(0.5, raw, 0.1, 1.0)
    tp_i = _pykernels.turning_points(walk)
    tp_v = walk[tp_i]

    cy = _cykernels
    print(f"kernel backend available: {'compiled' if cy else 'pure only'}")
    print(f"workload: clamped random walk, {len(walk):,} samples,"
          f" {len(tp_i):,} turning points\n")
    print(f"{'kernel':<28} {'pure':>13} {'compiled':>13} {'speedup':>9}")
    print("-" * 66)

    bench_case(
        "clamped_walk",
        _pykernels.clamped_walk, cy and cy.clamped_walk,
        (0.5, raw, 0.1, 1.0), check=np.array_equal,
    )
    bench_case(
        "tracker advance (online)",
        lambda w: advance_all(_pykernels, w),
        (lambda w: advance_all(cy, w)) if cy else None,
        (walk,),
    )
    bench_case(
        "turning_points",
        _pykernels.turning_points, cy and cy.turning_points,
        (walk,), check=np.array_equal,
    )
    bench_case(
        "decompose_tps",
        _pykernels.decompose_tps, cy and cy.decompose_tps,
        (tp_v, tp_i),
    )
    bench_case(
        "oracle_walk_cost",
        _pykernels.oracle_walk_cost, cy and cy.oracle_walk_cost,
        (walk, ALPHA, BETA),
    )


if __name__ == "__main__":
    main()
