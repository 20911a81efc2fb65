#!/usr/bin/env python3
"""Numba kernels against their numpy twins.

Times the truncated product and the last-coordinate root solve directly,
then a full transverse run in two subprocesses that differ only in
JETLAB_DISABLE_NUMBA.  Every pair is also checked for agreement.

    python benchmarks/bench_kernels.py [--repeat 5] [--json out.json] [--quick]
"""
from __future__ import annotations

import argparse
import json
import os
import subprocess
import sys
import time

import numpy as np

from jetlab import _kernels as K
from jetlab.polyjet.multiindex import basis
from jetlab.profiles import smoothstep_coeffs

E2E = r"""
import json, time
from jetlab.polyjet.expression import coords, plateau, VectorField
from jetlab.primitive import PrimitiveSection
from jetlab.localmodels import transverse_approximate
from jetlab._kernels import USE_NUMBA
x = coords(2)
v = VectorField([plateau(x[0], 0.3, 0.8) * plateau(x[1], 0.3, 0.8)])
sig = PrimitiveSection(v, [1, 0], 2)
transverse_approximate(sig, 1, 0.2, 0.02)  # warm-up (and JIT)
t = time.perf_counter()
res = transverse_approximate(sig, 1, %(eps)r, %(delta)r)
print(json.dumps({"numba": USE_NUMBA, "seconds": time.perf_counter() - t,
                  "perp_sup": res.measurements["perp_sup"],
                  "c0": res.measurements["c0_error_uprime"]}))
"""


def best_of(fn, repeat):
    times = []
    out = None
    for _ in range(repeat):
        t = time.perf_counter()
        out = fn()
        times.append(time.perf_counter() - t)
    return min(times), out


def bench_mul(m, r, batch, repeat, rng):
    b = basis(m, r)
    a = rng.standard_normal((b.size, batch))
    c = rng.standard_normal((b.size, batch))
    K.truncated_mul_numba(a, c, b.ti, b.tj, b.tk)  # compile outside the timing
    t_nb, x = best_of(lambda: K.truncated_mul_numba(a, c, b.ti, b.tj, b.tk), repeat)
    t_np, y = best_of(lambda: K.truncated_mul_numpy(a, c, b.rows_j, b.rows_k), repeat)
    return {"kernel": f"truncated_mul m={m} r={r} B={batch}", "numba_s": t_nb, "numpy_s": t_np,
            "max_abs_diff": float(np.max(np.abs(x - y)))}


def bench_solve(batch, repeat, rng):
    coeffs = np.asarray(smoothstep_coeffs(), dtype=np.float64)
    eps, delta = 0.1, 0.01
    x = np.column_stack([rng.uniform(-1, 1, batch), rng.uniform(-eps, eps, batch)])
    args = (x, 0.5 * eps, eps, delta, 1.0, coeffs, eps, 1 - eps / 2)
    K.solve_last_coordinate(*args, use_numba=True)
    t_nb, a = best_of(lambda: K.solve_last_coordinate(*args, use_numba=True), repeat)
    t_np, b = best_of(lambda: K.solve_last_coordinate(*args, use_numba=False), repeat)
    return {"kernel": f"solve_last_coordinate B={batch}", "numba_s": t_nb, "numpy_s": t_np,
            "max_abs_diff": float(np.max(np.abs(a - b)))}


def bench_end_to_end(eps, delta):
    out = {}
    for label, flag in (("numba", "0"), ("numpy", "1")):
        env = dict(os.environ, JETLAB_DISABLE_NUMBA=flag)
        proc = subprocess.run([sys.executable, "-c", E2E % {"eps": eps, "delta": delta}],
                              env=env, capture_output=True, text=True, check=True)
        out[label] = json.loads(proc.stdout.strip().splitlines()[-1])
    return {"kernel": f"transverse_approximate eps={eps} delta={delta}",
            "numba_s": out["numba"]["seconds"], "numpy_s": out["numpy"]["seconds"],
            "max_abs_diff": max(abs(out["numba"][k] - out["numpy"][k]) for k in ("perp_sup", "c0"))}


def main(argv=None):
    ap = argparse.ArgumentParser(description=__doc__.splitlines()[0])
    ap.add_argument("--repeat", type=int, default=5)
    ap.add_argument("--json", help="also write the rows here")
    ap.add_argument("--quick", action="store_true", help="small sizes, no end-to-end run")
    args = ap.parse_args(argv)
    if not K.HAVE_NUMBA:
        sys.exit("numba is not installed; nothing to compare")
    rng = np.random.default_rng(0)
    batch = 2000 if args.quick else 40000
    rows = [bench_mul(m, r, batch, args.repeat, rng) for m, r in ((2, 3), (2, 6), (4, 4))]
    rows.append(bench_solve(batch * 5, args.repeat, rng))
    if not args.quick:
        rows.append(bench_end_to_end(0.1, 0.005))
    print(f"{'kernel':<48} {'numba s':>10} {'numpy s':>10} {'speedup':>8} {'max diff':>10}")
    for row in rows:
        row["speedup"] = row["numpy_s"] / row["numba_s"]
        print(f"{row['kernel']:<48} {row['numba_s']:>10.4f} {row['numpy_s']:>10.4f} "
              f"{row['speedup']:>8.2f} {row['max_abs_diff']:>10.2e}")
    if args.json:
        with open(args.json, "w") as fh:
            json.dump(rows, fh, indent=2)
    return rows


if __name__ == "__main__":
    main()
