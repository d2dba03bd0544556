"""Benchmark the compiled kernel core against the pure-NumPy fallback.

Run twice to compare:

    python benchmarks/bench_backends.py
    DMSOLITON_FORCE_PY=1 python benchmarks/bench_backends.py

or pass --both to fork a fallback subprocess and print the side-by-side table.
"""
import argparse
import os
import subprocess
import sys
import time

import numpy as np


def _time(fn, *args, repeat=200):
    fn(*args)  # warm up
    t0 = time.perf_counter()
    for _ in range(repeat):
        fn(*args)
    return (time.perf_counter() - t0) / repeat * 1e6  # microseconds


def run_micro():
    from dmsoliton.backend import BACKEND, kernels
    rng = np.random.default_rng(0)
    n, nj = 257, 54
    z = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    z2 = rng.standard_normal(n) + 1j * rng.standard_normal(n)
    u = rng.standard_normal((nj, n)) + 1j * rng.standard_normal((nj, n))
    w = rng.uniform(size=nj)
    coeffs = np.array([0.25])
    expos = np.array([4.0])
    rows = [
        ("l2_norm_sq (n=257)", _time(kernels.l2_norm_sq, z)),
        ("inner (n=257)", _time(kernels.inner, z, z2)),
        ("abs_pow_sum p=4", _time(kernels.abs_pow_sum, z, 4.0)),
        ("laplacian (n=257)", _time(kernels.laplacian, z)),
        ("forward_diff", _time(kernels.forward_diff, z)),
        ("nonlin_value_sum (54x257)", _time(kernels.nonlin_value_sum, u, w, coeffs, expos, repeat=50)),
        ("nonlin_apply_p (54x257)", _time(kernels.nonlin_apply_p, u, coeffs, expos, repeat=50)),
    ]
    return BACKEND, rows


def run_solve():
    from dmsoliton.energy import Problem, get_evaluator
    from dmsoliton.minimizer import SolveConfig, minimize
    from dmsoliton.profile import NonlinearitySpec, PiecewiseProfile, measure_from_profile
    mu = measure_from_profile(PiecewiseProfile.model_case(), 32)
    prob = Problem(1.0, mu, NonlinearitySpec.kerr(), 4.0)
    ev = get_evaluator(prob, 64)
    rng = np.random.default_rng(1)
    v = (rng.standard_normal(129) + 0j) * np.exp(-0.3 * np.abs(np.arange(-64, 65)))
    grad_us = _time(lambda: ev.value_and_grad(v), repeat=100)
    t0 = time.perf_counter()
    res = minimize(prob, SolveConfig(box_radius=48, restarts=1, seed=1))
    solve_s = time.perf_counter() - t0
    return grad_us, solve_s, res.energy


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--both", action="store_true",
                    help="also run the pure-Python fallback in a subprocess")
    ap.add_argument("--json", action="store_true")
    args = ap.parse_args()

    backend, rows = run_micro()
    grad_us, solve_s, energy = run_solve()
    print(f"backend: {backend}")
    for name, us in rows:
        print(f"  {name:30s} {us:10.2f} us")
    print(f"  {'value_and_grad (model case)':30s} {grad_us:10.2f} us")
    print(f"  {'full model solve':30s} {solve_s:10.3f} s   (E = {energy:.9f})")

    if args.both and os.environ.get("DMSOLITON_FORCE_PY") != "1":
        print()
        sys.stdout.flush()  # keep the two tables in order on block-buffered pipes
        env = dict(os.environ, DMSOLITON_FORCE_PY="1")
        subprocess.run([sys.executable, __file__], env=env, check=False)


if __name__ == "__main__":
    main()
