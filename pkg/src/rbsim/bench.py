"""Cost benchmark of the exact sampler on fractional Brownian motion.

For every (d, H) the parameters are chosen once from a pilot run (not
counted), then each replication gets its own stream and reports wall time,
Gaussian vectors drawn and the three random indices.
"""

import csv
import math

import numpy as np

from .fields import build_fbm_sampler
from .maxstable import ParameterChoice, algorithm_m, select_parameters
from .rng import RandomStream
from .walk import renewal_model

__all__ = ["BENCH_COLUMNS", "mean_ci", "bench_point", "cmd_bench", "write_csv"]

BENCH_COLUMNS = ["d", "H", "mean_time", "ci_time", "mean_draws", "ci_draws",
                 "mean_N", "mean_NX", "mean_NA", "mean_Na"]


def mean_ci(x):
    """Mean and 95% half-width 1.96 SD / sqrt(n)."""
    x = np.asarray(x, dtype=float)
    if x.size < 2:
        return float(x.mean()), float("nan")
    return float(x.mean()), float(1.96 * x.std(ddof=1) / math.sqrt(x.size))


def bench_point(d, hurst, reps, seed=0, delta=0.1, gamma=0.5, a=None, C=None, mode=None):
    model = build_fbm_sampler(hurst, int(d))
    renewal = renewal_model(gamma=gamma)
    if a is not None:
        kind = mode or ("a-equals-1-random-C" if a == 1.0 else "fixed-C-solve-a")
        choice = ParameterChoice(float(a), 0.0 if C is None else float(C), gamma, delta, kind)
    else:
        pilot = RandomStream(seed, 10**6 + int(d))
        choice = select_parameters(model, renewal, delta, stream=pilot,
                                   C=0.0 if C is None else float(C))
    runs = [algorithm_m(model, renewal, choice, RandomStream(seed, i)) for i in range(int(reps))]
    t, t_ci = mean_ci([r.wall_time for r in runs])
    g, g_ci = mean_ci([r.gaussian_draws for r in runs])
    return {
        "d": int(d), "H": float(hurst), "mean_time": t, "ci_time": t_ci,
        "mean_draws": g, "ci_draws": g_ci,
        "mean_N": float(np.mean([r.N for r in runs])),
        "mean_NX": float(np.mean([r.N_X for r in runs])),
        "mean_NA": float(np.mean([r.N_A for r in runs])),
        "mean_Na": float(np.mean([r.N_a for r in runs])),
    }


def cmd_bench(ds, hursts, reps=200, seed=0, **kw):
    return [bench_point(d, h, reps, seed, **kw) for h in hursts for d in ds]


def write_csv(rows, path):
    with open(path, "w", newline="") as fh:
        w = csv.DictWriter(fh, fieldnames=BENCH_COLUMNS)
        w.writeheader()
        for r in rows:
            w.writerow({k: r[k] for k in BENCH_COLUMNS})
