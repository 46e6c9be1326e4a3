"""Compiled vs pure-Python kernel timings.

Usage::

    python3 benchmarks/bench_kernels.py [--repeat 20]

Prints the median wall time per call of each hot kernel for both backends and
the speed-up.  Results are informational; nothing is asserted.
"""
from __future__ import annotations

import argparse
import time

import numpy as np

from fastrons import _core
from fastrons.experiments import fp_initial_state


def _median_time(fn, repeat: int) -> float:
    fn()  # warm caches
    samples = []
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        samples.append(time.perf_counter() - t0)
    return float(np.median(samples))


def cases(rng):
    for d, r in [(1, 3), (2, 10), (8, 2), (8, 30)]:
        modes = np.ascontiguousarray(fp_initial_state(d, r).reshape(r, d + 2))
        modes = modes + 0.05 * rng.standard_normal(modes.shape)
        yield f"gaussian_metric d={d} r={r}", lambda b, m=modes: b.gaussian_metric(m)
        yield f"gaussian_rhs    d={d} r={r}", lambda b, m=modes: b.gaussian_rhs(m, 2.0, 0.25, 0.01)
    for N in (128, 1024):
        x = np.linspace(-10.0, 10.0, N, endpoint=False)
        modes = np.ascontiguousarray(rng.standard_normal((10, 4)))
        yield f"tanh_collocation N={N} r=10", lambda b, x=x, m=modes: b.tanh_collocation(x, m, 10.0)


def main(argv=None) -> int:
    p = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    p.add_argument("--repeat", type=int, default=20)
    ns = p.parse_args(argv)
    if "compiled" not in _core.BACKENDS:
        print("compiled extension not built; only the Python backend is available")
        return 1
    comp, py = _core.BACKENDS["compiled"], _core.BACKENDS["python"]
    rng = np.random.default_rng(0)
    print(f"{'kernel':<32} {'compiled':>12} {'python':>12} {'speed-up':>9}")
    for name, call in cases(rng):
        tc = _median_time(lambda: call(comp), ns.repeat)
        tp = _median_time(lambda: call(py), ns.repeat)
        print(f"{name:<32} {tc * 1e6:>10.1f}us {tp * 1e6:>10.1f}us {tp / tc:>8.1f}x")
    return 0


if __name__ == "__main__":
    raise SystemExit(main())
