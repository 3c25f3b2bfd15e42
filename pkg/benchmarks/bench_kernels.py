"""Compiled vs pure-Python recurrence kernels.

    python benchmarks/bench_kernels.py [--states 10 40] [--steps 20000] [--repeat 3]

Prints wall time per call for each backend and checks the two agree.
"""
import argparse
import time

import numpy as np
from scipy.linalg import expm

from gramscale._kernels import _pykernels

try:
    from gramscale._kernels import _ckernels
except ImportError:
    _ckernels = None


def stable_system(n, p, rng):
    A = rng.standard_normal((n, n))
    A -= (np.abs(np.linalg.eigvals(A)).max() + 0.5) * np.eye(n)
    Ad = np.ascontiguousarray(expm(A * 0.01))
    bu = rng.standard_normal(n) * 0.01
    C = np.ascontiguousarray(rng.standard_normal((p, n)))
    return Ad, bu, C, np.zeros(p), np.ones(p)


def best_of(fn, repeat):
    best = np.inf
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        best = min(best, time.perf_counter() - t)
    return best, out


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--states", type=int, nargs="+", default=[4, 16, 64])
    ap.add_argument("--steps", type=int, default=20_000)
    ap.add_argument("--repeat", type=int, default=3)
    ap.add_argument("--seed", type=int, default=0)
    args = ap.parse_args()

    py, cy = _pykernels, _ckernels
    if cy is None:
        print("compiled backend not built; only the fallback is timed")
    rng = np.random.default_rng(args.seed)
    print(f"{'states':>6} {'kernel':>18} {'python [s]':>11} {'compiled [s]':>13} {'speedup':>8}")
    for n in args.states:
        Ad, bu, C, du, r = stable_system(n, 5, rng)
        x0 = np.zeros(n)
        cases = {
            "lti_scan": lambda k: k.lti_scan(Ad, bu, C, du, r, args.steps, 1e12),
            "lti_step_response": lambda k: k.lti_step_response(Ad, bu, C[0].copy(), 0.0, args.steps, x0),
        }
        for name, call in cases.items():
            tp, outp = best_of(lambda: call(py), args.repeat)
            if cy is None:
                print(f"{n:>6} {name:>18} {tp:>11.4f} {'-':>13} {'-':>8}")
                continue
            tc, outc = best_of(lambda: call(cy), args.repeat)
            a = np.asarray(outp[0] if isinstance(outp, tuple) else outp)
            b = np.asarray(outc[0] if isinstance(outc, tuple) else outc)
            assert np.allclose(a, b, rtol=1e-9, atol=1e-12), f"{name}: backends disagree"
            print(f"{n:>6} {name:>18} {tp:>11.4f} {tc:>13.4f} {tp / tc:>7.1f}x")


if __name__ == "__main__":
    main()
