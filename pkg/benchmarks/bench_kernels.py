"""Numba vs numpy timings for the pointwise geometry kernels and one solver step.

    python benchmarks/bench_kernels.py [--n 256 1024 4096] [--repeat 200]

The kernel rows call both implementations directly from ``kernels``.  The
solver rows re-import the package in a subprocess with DISPFLOW_NUMBA set,
since the backend is fixed at import time.
"""

import argparse
import os
import subprocess
import sys
import time

import numpy as np

from dispflow import kernels
from dispflow._accel import HAVE_NUMBA

STEP_SNIPPET = """
import time, numpy as np
from dispflow.fields import Grid
from dispflow.initial_data import make_initial_data
from dispflow.pde import FlowCoefficients
from dispflow.solver import SolverConfig, step
g = Grid({n}, 2 * np.pi)
u = make_initial_data("random-analytic", {{"seed": 1}}, g, "{target}")
cfg = SolverConfig(FlowCoefficients(1.0, 0.5), g, 1.0, dt=1e-6)
u = step(u, cfg)
t0 = time.perf_counter()
for _ in range({repeat}):
    u = step(u, cfg)
print((time.perf_counter() - t0) / {repeat})
"""


def _time(fn, args, repeat):
    fn(*args)
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat


def _cases(n, rng):
    def sphere(d):
        q = rng.normal(size=(n, d))
        q /= np.linalg.norm(q, axis=1)[:, None]
        return q

    q3, q7 = sphere(3), sphere(7)
    th, ph = rng.uniform(0, 2 * np.pi, size=(2, n))
    qt = np.stack([np.cos(th), np.sin(th), np.cos(ph), np.sin(ph)], axis=1) / np.sqrt(2)
    X3, X7, X4 = rng.normal(size=(n, 3)), rng.normal(size=(n, 7)), rng.normal(size=(n, 4))
    return [
        ("sphere_project", (1.01 * q7,)),
        ("sphere_tangent", (q7, X7)),
        ("sphere_sff", (q7, X7, X7)),
        ("cross3", (q3, X3)),
        ("cross7", (q7, X7)),
        ("torus_project", (1.01 * qt,)),
        ("torus_tangent", (qt, X4)),
        ("torus_J", (qt, X4)),
    ]


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--n", type=int, nargs="+", default=[256, 1024, 4096])
    ap.add_argument("--repeat", type=int, default=200)
    ap.add_argument("--step-repeat", type=int, default=20)
    args = ap.parse_args()
    if not HAVE_NUMBA:
        print("numba is not installed; only the numpy kernels can run")
        return

    rng = np.random.default_rng(0)
    print(f"{'kernel':<16}{'n':>7}{'numpy us':>12}{'numba us':>12}{'speedup':>9}")
    for n in args.n:
        for name, inputs in _cases(n, rng):
            t_np = _time(kernels.NUMPY_KERNELS[name], inputs, args.repeat)
            t_nb = _time(kernels.NUMBA_KERNELS[name], inputs, args.repeat)
            print(f"{name:<16}{n:>7}{t_np * 1e6:>12.1f}{t_nb * 1e6:>12.1f}{t_np / t_nb:>9.2f}")

    print()
    print(f"{'solver step':<16}{'n':>7}{'numpy ms':>12}{'numba ms':>12}{'speedup':>9}")
    for target in ("s2", "s6"):
        for n in (128, 512):
            out = {}
            for flag in ("0", "1"):
                env = dict(os.environ, DISPFLOW_NUMBA=flag)
                code = STEP_SNIPPET.format(n=n, target=target, repeat=args.step_repeat)
                res = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
                out[flag] = float(res.stdout.strip())
            print(f"{'step ' + target:<16}{n:>7}{out['0'] * 1e3:>12.2f}{out['1'] * 1e3:>12.2f}{out['0'] / out['1']:>9.2f}")


if __name__ == "__main__":
    main()
