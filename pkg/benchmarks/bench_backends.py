"""Time the compiled kernels against the numpy fallback.

    python benchmarks/bench_backends.py [--sizes 5x3 20x8 100x10] [--repeat 5]

For each MDP shape this runs entropy-regularized value iteration to 1e-10 and
an exact soft policy iteration, once per backend, and reports the best of
``--repeat`` wall-clock times plus the largest difference between the two
backends' value functions.
"""

import argparse
import time

import numpy as np

from softmdp import _backend, solvers
from softmdp.mdp import RegularizerSpec, random_mdp


def _best_time(fn, repeat):
    best, out = float("inf"), None
    for _ in range(repeat):
        t0 = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t0)
    return best, out


def run(sizes, repeat, gamma=0.95, eta=0.1):
    backends = [_backend.pure] + ([_backend.compiled] if _backend.compiled else [])
    rows = []
    for s, a in sizes:
        mdp = random_mdp(12345, s, a, gamma)
        reg = RegularizerSpec.entropy(eta)
        results = {}
        for kernels in backends:
            solvers.kernels = kernels
            vi_t, vi = _best_time(lambda: solvers.soft_value_iteration(mdp, reg), repeat)
            spi_t, _ = _best_time(lambda: solvers.soft_policy_iteration(mdp, reg), repeat)
            results[kernels.BACKEND] = (vi_t, spi_t, vi.fixed_point_v, vi.iterations)
        solvers.kernels = _backend.kernels
        rows.append((s, a, results))
    return rows


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--sizes", nargs="+", default=["5x3", "20x8", "60x10", "150x10"])
    p.add_argument("--repeat", type=int, default=3)
    args = p.parse_args(argv)
    sizes = [tuple(int(x) for x in spec.lower().split("x")) for spec in args.sizes]
    rows = run(sizes, args.repeat)
    print(f"{'S':>5} {'A':>3} {'vi iters':>8} {'vi py [ms]':>11} {'vi cy [ms]':>11} {'speedup':>8}"
          f" {'spi py [ms]':>12} {'spi cy [ms]':>12} {'max |dV|':>9}")
    for s, a, res in rows:
        py = res["python"]
        cy = res.get("cython")
        if cy is None:
            print(f"{s:>5} {a:>3} {py[3]:>8} {py[0] * 1e3:>11.2f} {'-':>11} {'-':>8}"
                  f" {py[1] * 1e3:>12.2f} {'-':>12} {'-':>9}")
            continue
        dv = float(np.abs(py[2] - cy[2]).max())
        print(f"{s:>5} {a:>3} {py[3]:>8} {py[0] * 1e3:>11.2f} {cy[0] * 1e3:>11.2f}"
              f" {py[0] / cy[0]:>7.1f}x {py[1] * 1e3:>12.2f} {cy[1] * 1e3:>12.2f} {dv:>9.1e}")


if __name__ == "__main__":
    main()
