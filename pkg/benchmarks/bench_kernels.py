"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 5]

Times the two raw kernels and a full rolling-window style MMW fit on both
backends for several sample sizes.
"""
import argparse
import time
from contextlib import contextmanager

import numpy as np

from mmwvar import _kernels_py, kernels
from mmwvar.mixture import EMConfig, MMWMixture, fit_em
from mmwvar.mweibull import WeibullParams

try:
    from mmwvar import _kernels as _compiled
except ImportError:
    _compiled = None


@contextmanager
def backend(impl):
    saved = kernels._impl
    kernels._impl = impl
    try:
        yield
    finally:
        kernels._impl = saved


def best_of(fn, repeat):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        times.append(time.perf_counter() - t0)
    return min(times)


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[250, 1000, 5000])
    args = ap.parse_args()
    if _compiled is None:
        print("compiled extension not built; only the fallback is available")
        return

    truth = MMWMixture((0.4, 0.6), (WeibullParams(4.0, 1.5), WeibullParams(12.0, 6.0)), 20.0)
    print(f"{'case':<28}{'n':>7}{'cython [ms]':>14}{'python [ms]':>14}{'speedup':>10}")
    for n in args.sizes:
        x = truth.sample(n, seed=n)
        y = 20.0 - x
        logy = np.log(y)
        w = np.random.default_rng(0).random(n)
        logw = np.log(np.array([0.4, 0.6]))
        scales, shapes = np.array([4.0, 12.0]), np.array([1.5, 6.0])
        cases = {
            "weibull_mstep x100": lambda impl: [impl.weibull_mstep(logy, w, 2.0, 0.05, 100.0, 1e-10) for _ in range(100)],
            "estep x100": lambda impl: [impl.estep(logy, logw, scales, shapes) for _ in range(100)],
        }
        for name, fn in cases.items():
            tc = best_of(lambda: fn(_compiled), args.repeat)
            tp = best_of(lambda: fn(_kernels_py), args.repeat)
            print(f"{name:<28}{n:>7}{tc * 1e3:>14.2f}{tp * 1e3:>14.2f}{tp / tc:>10.2f}")
        cfg = EMConfig(g=2, n_starts=1, seed=1)
        timings = []
        for impl in (_compiled, _kernels_py):
            with backend(impl):
                timings.append(best_of(lambda: fit_em(x, cfg), max(1, args.repeat // 2)))
        tc, tp = timings
        print(f"{'fit_em g=2':<28}{n:>7}{tc * 1e3:>14.2f}{tp * 1e3:>14.2f}{tp / tc:>10.2f}")


if __name__ == "__main__":
    main()
