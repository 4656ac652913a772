"""Compare the compiled and pure-Python kernels.

    python3 benchmarks/bench_kernels.py [--trials 2000] [--repeat 3]

Times a batch of multistart solves and a batch of Ricci evaluations on each
available backend, and checks that both backends return the same roots.
"""

import argparse
import timeit

import numpy as np

from flagein import available_backends, get_kernel


def bench_solve(kernel, n, X0, repeat):
    t = min(timeit.repeat(lambda: kernel.solve_batch(n, X0, 1e-10, 200), number=1, repeat=repeat))
    return t, kernel.solve_batch(n, X0, 1e-10, 200)


def bench_ricci(kernel, n, lams, repeat):
    def go():
        for lam in lams:
            kernel.ricci_vector(lam, n)

    return min(timeit.repeat(go, number=1, repeat=repeat))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--trials", type=int, default=2000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--ranks", type=int, nargs="+", default=[2, 3, 4])
    args = ap.parse_args(argv)

    backends = available_backends()
    print(f"backends: {', '.join(backends)}")
    print(f"{'n':>2} {'task':<14}" + "".join(f"{b:>14}" for b in backends) + f"{'speedup':>10}")
    for n in args.ranks:
        rng = np.random.default_rng(n)
        N = n * (n + 1) // 2
        X0 = 10.0 * (1.0 - rng.random((args.trials, N - 1)))
        lams = rng.uniform(0.1, 10, (args.trials, N))
        solve_t, ricci_t, results = {}, {}, {}
        for b in backends:
            k = get_kernel(b)
            solve_t[b], results[b] = bench_solve(k, n, X0, args.repeat)
            ricci_t[b] = bench_ricci(k, n, lams, args.repeat)
        for task, times in (("solve_batch", solve_t), ("ricci_vector", ricci_t)):
            cells = "".join(f"{times[b] * 1e3:>12.1f}ms" for b in backends)
            speed = f"{times['python'] / times['compiled']:>9.1f}x" if len(backends) == 2 else ""
            print(f"{n:>2} {task:<14}{cells}{speed}")
        if len(backends) == 2:
            (Xc, _, _, okc), (Xp, _, _, okp) = results["compiled"], results["python"]
            good = okc.astype(bool) & okp.astype(bool)
            diff = float(np.max(np.abs(Xc[good] - Xp[good]))) if good.any() else 0.0
            print(f"   converged {int(okc.sum())}/{args.trials} vs {int(okp.sum())}/{args.trials}, max root difference {diff:.1e}")


if __name__ == "__main__":
    main()
