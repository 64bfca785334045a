"""Compare the compiled kernels with the NumPy fallback.

    python3 benchmarks/bench_kernels.py [--repeat N]

Kernel timings call both backends in-process; the end-to-end sweep is timed in
a subprocess per backend since the backend is chosen at import.
"""
import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from spikepool import kernels

SWEEP = (
    "import time; from spikepool.heuristics import SweepConfig, evaluate_sweep; "
    "from spikepool.pooling import PoolMethod; t = time.perf_counter(); "
    "evaluate_sweep(SweepConfig(), PoolMethod.AVAM); print(time.perf_counter() - t)"
)


def bench_kernel(name, fn, repeat):
    return min(timeit.repeat(fn, number=1, repeat=repeat))


def sweep_time(pure: bool) -> float:
    env = dict(os.environ)
    if pure:
        env["SPIKEPOOL_PURE_PYTHON"] = "1"
    else:
        env.pop("SPIKEPOOL_PURE_PYTHON", None)
    out = subprocess.run([sys.executable, "-c", SWEEP], env=env, check=True, capture_output=True, text=True)
    return float(out.stdout.strip())


def main():
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    args = ap.parse_args()
    if kernels.BACKEND != "cython":
        sys.exit("compiled kernels are not built; reinstall with a C compiler and Cython available")

    rng = np.random.default_rng(0)
    rows = []
    for steps, units in [(300, 4), (300, 1024), (2000, 4096)]:
        x = rng.random((steps, units))
        drive = rng.uniform(0, 0.6, (steps, units))
        for label, call in [
            ("lowpass", lambda impl: kernels.lowpass(x, 0.8, 0.2, impl=impl)),
            ("integrate_fire", lambda impl: kernels.integrate_fire(drive, impl=impl)),
        ]:
            t_c = bench_kernel(label, lambda: call("cython"), args.repeat)
            t_py = bench_kernel(label, lambda: call("python"), args.repeat)
            assert np.array_equal(call("cython"), call("python"))
            rows.append((f"{label} {steps}x{units}", t_c, t_py))

    rows.append(("AVAM sweep, 256 groups", sweep_time(False), sweep_time(True)))
    print(f"{'case':32s} {'compiled':>12s} {'numpy':>12s} {'speedup':>8s}")
    for name, t_c, t_py in rows:
        print(f"{name:32s} {t_c * 1e3:10.2f}ms {t_py * 1e3:10.2f}ms {t_py / t_c:7.1f}x")


if __name__ == "__main__":
    main()
