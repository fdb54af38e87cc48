"""Time the numba kernels against their numpy fallbacks.

Run: python3 benchmarks/bench_kernels.py [--trials N] [--repeat R]

Both paths live in the same module, so no environment flag is needed here;
the results are checked for equality before anything is timed.
"""

from __future__ import annotations

import argparse
import time

import numpy as np

from hmacsim import _kernels


def best_of(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None) -> None:
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=1_000_000)
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args(argv)

    if not _kernels.USING_NUMBA:
        print("numba is disabled or missing; only the numpy path is available")
        return

    rng = np.random.default_rng(0)
    cases = []
    for n, s in ((5, 20), (10, 20), (20, 40)):
        placements = rng.integers(0, s, size=(args.trials, n))
        cases.append(
            (
                f"per-trial  N={n:<2} S={s:<2} x{args.trials}",
                lambda p=placements, s=s: _kernels.collided_per_trial(p, s),
                lambda p=placements, s=s: _kernels.collided_per_trial_numpy(p, s),
            )
        )
    for n, s in ((6, 6), (7, 8), (8, 8)):
        cases.append(
            (
                f"enumerate  N={n:<2} S={s:<2} ({s**n} placements)",
                lambda n=n, s=s: _kernels.enumerate_collided(n, s),
                lambda n=n, s=s: _kernels.enumerate_collided_numpy(n, s),
            )
        )

    print(f"{'case':<44}{'numba s':>10}{'numpy s':>10}{'speedup':>9}")
    for label, fast, slow in cases:
        a, b = fast(), slow()  # also compiles the jit path
        if not np.array_equal(np.asarray(a), np.asarray(b)):
            raise SystemExit(f"{label}: numba and numpy disagree")
        t_fast = best_of(fast, args.repeat)
        t_slow = best_of(slow, args.repeat)
        print(f"{label:<44}{t_fast:>10.4f}{t_slow:>10.4f}{t_slow / t_fast:>8.1f}x")


if __name__ == "__main__":
    main()
