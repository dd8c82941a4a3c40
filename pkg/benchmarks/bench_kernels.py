"""Time the compiled horizon loop against the pure-Python one.

    python benchmarks/bench_kernels.py [--reps 20] [--horizon 1000]

Both backends get identical inputs; the script also checks that their
outputs agree byte for byte.
"""
import argparse
import time

import numpy as np

from banditlab import kernel
from banditlab.core import ALGORITHM_CODES
from banditlab.env import Family, standard_draws
from banditlab.harness import UNIFORMS_PER_TURN

CASES = [
    ("epsilon_greedy", 0.01, 0.0, 10),
    ("softmax", 0.01, 0.0, 10),
    ("pursuit", 0.25, 0.0, 10),
    ("reinforcement_comparison", 0.1, 0.95, 10),
    ("ucb1", 0.0, 0.0, 10),
    ("ucb1_tuned", 0.0, 0.0, 10),
    ("softmax", 0.01, 0.0, 50),
]


def episodes(algo, p1, p2, k, horizon, reps):
    for r in range(reps):
        rng = np.random.default_rng(r)
        means = rng.random(k)
        a, b = standard_draws(Family.NORMAL, rng, horizon)
        u = rng.random(UNIFORMS_PER_TURN * horizon)
        yield (ALGORITHM_CODES[algo], p1, p2, means, Family.NORMAL.value, 0.1, a, b, u, 1.0, False)


def timed(run, inputs):
    start = time.perf_counter()
    out = [run(*args) for args in inputs]
    return time.perf_counter() - start, out


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--reps", type=int, default=20)
    ap.add_argument("--horizon", type=int, default=1000)
    args = ap.parse_args()
    if kernel.compiled_run_episode is None:
        raise SystemExit("compiled extension not available; build with "
                         "`pip install --no-build-isolation -e .`")
    print(f"{'algorithm':<26}{'K':>4}{'python ms/run':>15}{'cython ms/run':>15}"
          f"{'speedup':>9}  identical")
    for algo, p1, p2, k in CASES:
        inputs = list(episodes(algo, p1, p2, k, args.horizon, args.reps))
        t_py, out_py = timed(kernel.python_run_episode, inputs)
        t_c, out_c = timed(kernel.compiled_run_episode, inputs)
        same = all(x[0].tobytes() == y[0].tobytes() and np.array_equal(x[2], y[2])
                   for x, y in zip(out_py, out_c))
        n = len(inputs)
        print(f"{algo:<26}{k:>4}{1e3 * t_py / n:>15.2f}{1e3 * t_c / n:>15.3f}"
              f"{t_py / t_c:>8.0f}x  {'yes' if same else 'NO'}")


if __name__ == "__main__":
    main()
