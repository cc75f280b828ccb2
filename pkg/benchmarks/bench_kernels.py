"""Compare the compiled kernels with the numpy fallback.

    python benchmarks/bench_kernels.py [--repeat 20]

Prints the median time per call for each kernel and backend, and the
end-to-end time of Algorithm M on fBm with each backend.
"""

import argparse
import os
import subprocess
import sys
import timeit

import numpy as np

from rbsim import kernels

CASES = {
    # early stop: the first row already exceeds
    "first_exceedance/hit-first": lambda k, r: (k.first_exceedance, (r["rows"], r["low"])),
    "first_exceedance/no-hit": lambda k, r: (k.first_exceedance, (r["rows"], r["high"])),
    "max_plus_update": lambda k, r: (k.max_plus_update, (r["acc"].copy(), r["rows"], r["shifts"])),
    "midpoint_refine": lambda k, r: (k.midpoint_refine, (r["vals"], r["offs"])),
}

E2E = """
import time
from rbsim import RandomStream, build_fbm_sampler, kernels
from rbsim.walk import renewal_model
from rbsim.maxstable import algorithm_m, select_parameters
m = build_fbm_sampler(0.75, {d}); r = renewal_model(gamma=0.5)
c = select_parameters(m, r, 0.1, stream=RandomStream(1, 99))
t = time.perf_counter()
for i in range({reps}):
    algorithm_m(m, r, c, RandomStream(1, i))
print(kernels.BACKEND, (time.perf_counter() - t) / {reps})
"""


def data(rng):
    rows = rng.standard_normal((512, 1000))
    return {
        "rows": rows,
        "low": np.full(512, -10.0),
        "high": np.full(512, 10.0),
        "acc": np.full(1000, -np.inf),
        "shifts": -np.log(np.arange(1, 513.0)),
        "vals": rng.standard_normal((64, 1025)),
        "offs": rng.standard_normal((64, 1024)),
    }


def main():
    ap = argparse.ArgumentParser()
    ap.add_argument("--repeat", type=int, default=20)
    ap.add_argument("--d", type=int, default=1000)
    ap.add_argument("--reps", type=int, default=20)
    args = ap.parse_args()
    r = data(np.random.default_rng(0))
    backends = kernels.available()
    print(f"{'kernel':32s}" + "".join(f"{b:>14s}" for b in backends) + "   (median us/call)")
    for name, make in CASES.items():
        cells = []
        for b in backends:
            fn, a = make(kernels.implementation(b), r)
            t = timeit.repeat(lambda: fn(*a), number=50, repeat=args.repeat)
            cells.append(1e6 * float(np.median(t)) / 50)
        print(f"{name:32s}" + "".join(f"{c:14.1f}" for c in cells))
    print(f"\nAlgorithm M, fBm H=0.75 d={args.d}, s/rep:")
    for b in backends:
        env = dict(os.environ, RBSIM_PURE_PYTHON="1" if b == "python" else "0")
        code = E2E.format(d=args.d, reps=args.reps)
        out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True)
        print("  " + (out.stdout.strip() or out.stderr.strip().splitlines()[-1]))


if __name__ == "__main__":
    main()
