"""Compare the compiled and pure-Python kernel backends.

Usage::

    python benchmarks/bench_kernels.py [--repeat 5] [--sizes 2 3 4 6]

Prints the median wall time per call for each kernel and backend, the
speedup, and the largest difference between the two backends' outputs.
"""
import argparse
import statistics
import time

import numpy as np

from iwaflat import _kernels_py

try:
    from iwaflat import _kernels as _compiled
except ImportError:  # extension not built
    _compiled = None


def _median_time(fn, repeat, inner):
    times = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        for _ in range(inner):
            out = fn()
        times.append((time.perf_counter() - t0) / inner)
    return statistics.median(times), out


def _sym(rng, n):
    X = rng.standard_normal((n, n))
    X = X + X.T
    return X - np.trace(X) / n * np.eye(n)


def cases(n, rng):
    g = rng.standard_normal((n, n))
    X0 = _sym(rng, n)
    X0 /= np.linalg.norm(X0)

    def gs(impl):
        return lambda: impl.gram_schmidt_nak(g)

    def field(impl):
        return lambda: impl.flow_field(X0)

    def dopri(impl):
        def run():
            X = np.array(X0, order="C")
            impl.dopri_advance(X, 0.0, 20.0, 1e-2, 1e-10, 1e-12, 1e-14, 10**6)
            return X
        return run

    return [("gram_schmidt_nak", gs, 2000), ("flow_field", field, 5000), ("dopri_advance t=0..20", dopri, 3)]


def _diff(a, b):
    if isinstance(a, tuple):
        return max(_diff(x, y) for x, y in zip(a, b))
    return float(np.max(np.abs(np.asarray(a) - np.asarray(b))))


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--sizes", type=int, nargs="+", default=[2, 3, 4, 6])
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args(argv)
    if _compiled is None:
        print("compiled extension not available; build it with `pip install -e . --no-build-isolation`")
        return 1
    rng = np.random.default_rng(args.seed)
    print(f"{'kernel':<24}{'n':>3}{'cython [us]':>14}{'python [us]':>14}{'speedup':>10}{'max diff':>11}")
    for n in args.sizes:
        for name, make, inner in cases(n, rng):
            inner_py = max(1, inner // 10) if "dopri" not in name else 1
            tc, oc = _median_time(make(_compiled), args.repeat, inner)
            tp, op = _median_time(make(_kernels_py), args.repeat, inner_py)
            print(f"{name:<24}{n:>3}{tc * 1e6:>14.1f}{tp * 1e6:>14.1f}{tp / tc:>10.1f}{_diff(oc, op):>11.1e}")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
