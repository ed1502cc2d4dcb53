"""Compare the compiled and pure-Python polynomial kernels.

Run with ``python3 benchmarks/bench_kernels.py [--points P] [--repeat R]``.
"""

import argparse
import time

import numpy as np

from drlyap import _pykernels
from drlyap.bench import make_poly_system
from drlyap.synth import synth_baseline
from drlyap.uncertainty import PolyCandidate

try:
    from drlyap import _ckernels
except ImportError:  # extension not built
    _ckernels = None


def _time(fn, repeat):
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


def main(argv=None):
    p = argparse.ArgumentParser(description=__doc__)
    p.add_argument("--points", type=int, default=10000)
    p.add_argument("--repeat", type=int, default=5)
    args = p.parse_args(argv)

    system = make_poly_system(2)
    cand = PolyCandidate(synth_baseline(system).V)
    exps, coeffs = cand.lie_table(system)
    pts = np.random.default_rng(0).uniform(-2, 2, size=(args.points, 2))
    xi = np.array([6.0, 0.0])
    print(f"lie table: {exps.shape[0]} monomials x {coeffs.shape[1]} polynomials, {args.points} points")
    backends = [("python", _pykernels)] + ([("cython", _ckernels)] if _ckernels else [])
    ref = None
    for name, mod in backends:
        t_eval = _time(lambda: mod.poly_eval_batch(exps, coeffs, pts), args.repeat)
        t_stats = _time(lambda: mod.lie_stats(exps, coeffs, pts, xi), args.repeat)
        vals = mod.poly_eval_batch(exps, coeffs, pts)
        err = 0.0 if ref is None else float(np.max(np.abs(vals - ref)))
        ref = vals if ref is None else ref
        print(f"{name:>7}: poly_eval_batch {t_eval * 1e3:8.2f} ms   lie_stats {t_stats * 1e3:8.2f} ms   max diff {err:.2e}")
    if _ckernels is None:
        print("cython extension not built; run `pip install -e . --no-build-isolation`")


if __name__ == "__main__":
    main()
