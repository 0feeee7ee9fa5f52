"""Time the numba and numpy kernel paths on identical inputs.

Usage: python3 benchmarks/bench_kernels.py [--repeat 5] [--scale 1.0] [--end-to-end] [--json out.json]

Each kernel is first called once per path (JIT warm-up) and checked for agreement,
then timed ``--repeat`` times; the best wall time is reported. ``--end-to-end``
also times a fit/sample/score workload in fresh interpreters, once per backend
(selected through SYNTHTEST_NO_NUMBA), after an untimed warm-up run.
"""

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from synthtest import kernels


def make_inputs(scale: float, seed: int = 0):
    rng = np.random.default_rng(seed)
    n = int(20000 * scale)
    d, t, sweeps = 8, 3, 25
    Z = rng.standard_normal((n, d))
    targets = np.array([0, 3, 5])
    coef = rng.normal(0, 0.1, (t, d))
    coef[np.arange(t), targets] = 0.0
    lo = np.full((n, t), -0.5)
    hi = np.full((n, t), 1.0)
    gibbs = (Z, targets, coef, np.full(t, 0.9), lo, hi, rng.random((sweeps, n, t)))

    m = int(4000 * scale)
    data = np.column_stack([rng.standard_normal((m, 3)), rng.integers(0, 4, (m, 2))]).astype(float)
    query = data[: m // 2]
    kde = (query, data, np.array([0, 1, 2]), np.full(3, 2.0), np.array([3, 4]),
           np.full(2, 0.7), np.full(2, 0.1))

    X = rng.standard_normal((int(3000 * scale), 6))
    Y = rng.standard_normal((int(3000 * scale), 6)) + 0.2
    return {
        "gibbs_truncnorm": lambda impl: impl["gibbs_truncnorm"](gibbs[0].copy(), *gibbs[1:]),
        "kde_mean": lambda impl: impl["kde_mean"](*kde),
        "rbf_sum": lambda impl: impl["rbf_sum"](X, Y, 0.1),
        "pairwise_dist": lambda impl: impl["pairwise_dist"](X),
    }


def best_time(fn, repeat: int) -> float:
    best = float("inf")
    for _ in range(repeat):
        t0 = time.perf_counter()
        fn()
        best = min(best, time.perf_counter() - t0)
    return best


WORKLOAD = """
import time
from synthtest import data, generator, groundtruth, kernels, quality, shifts
ds = groundtruth.simulate_ground_truth(groundtruth.GroundTruthSpec(), 8000, 0)
t0 = time.perf_counter()
gen = generator.fit_copula(ds, lam=0.01, seed=0)
sub = gen.sample_subgroup(data.category("group", "D"), 3000, 1)
syn = gen.sample(3000, 2)
quality.mmd_rbf(syn, ds)
shifts.rejection_sample(ds, shifts.MeanShift("age", 5.0), 3000, seed=3)
print(kernels.backend(), time.perf_counter() - t0)
"""


def end_to_end() -> dict:
    out = {}
    for flag in ("0", "1"):
        env = dict(os.environ, SYNTHTEST_NO_NUMBA=flag)
        subprocess.run([sys.executable, "-c", WORKLOAD], env=env, check=True, capture_output=True)
        res = subprocess.run([sys.executable, "-c", WORKLOAD], env=env, check=True,
                             capture_output=True, text=True)
        name, secs = res.stdout.split()[-2:]
        out[name] = float(secs)
    return out


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--scale", type=float, default=1.0, help="multiplies every problem size")
    ap.add_argument("--end-to-end", action="store_true", help="also time a full workload per backend")
    ap.add_argument("--json", help="also write the timings here")
    args = ap.parse_args(argv)

    paths = {"numpy": kernels.numpy_impl}
    if kernels.HAVE_NUMBA:
        paths["numba"] = kernels.numba_impl
    else:
        print("numba is not importable; timing the numpy path only")

    rows = []
    for name, call in make_inputs(args.scale).items():
        outs = {p: np.asarray(call(impl)) for p, impl in paths.items()}  # warm-up + agreement
        agree = all(np.allclose(o, outs["numpy"], rtol=1e-9, atol=1e-12) for o in outs.values())
        times = {p: best_time(lambda: call(impl), args.repeat) for p, impl in paths.items()}
        rows.append({"kernel": name, "agree": agree, **{f"{p}_s": t for p, t in times.items()}})

    print(f"{'kernel':<18}{'numpy [s]':>12}{'numba [s]':>12}{'speedup':>10}  agree")
    for r in rows:
        nb = r.get("numba_s")
        sp = f"{r['numpy_s'] / nb:9.1f}x" if nb else "        -"
        nbs = f"{nb:12.4f}" if nb else "           -"
        print(f"{r['kernel']:<18}{r['numpy_s']:12.4f}{nbs}{sp}  {r['agree']}")
    result = {"kernels": rows}
    if args.end_to_end:
        result["end_to_end"] = e2e = end_to_end()
        print("end-to-end workload: " + ", ".join(f"{k} {v:.2f} s" for k, v in e2e.items()))
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(result, fh, indent=2)


if __name__ == "__main__":
    main()
