"""Brute-force Brown-Resnick sample: max over the first n Poisson points.

M(t) = max_{k <= n} -log Gamma_k + W_k(t) - t / 2 for a Brownian motion W,
with Gamma_k the arrival times of a unit-rate Poisson process. Terms beyond
n contribute with probability of order exp(-(log n)^2 / 2).
"""

import numpy as np


def brown_resnick_brute(locations, reps, n_points=10**5, seed=0, batch=50):
    t = np.asarray(locations, dtype=float)
    dt = np.diff(np.concatenate([[0.0], t]))
    rng = np.random.default_rng(seed)
    out = np.empty((reps, t.size))
    for lo in range(0, reps, batch):
        b = min(batch, reps - lo)
        log_g = -np.log(np.cumsum(rng.exponential(size=(b, n_points)), axis=1))
        w = np.zeros((b, n_points))
        for j, step in enumerate(dt):
            w += np.sqrt(step) * rng.standard_normal((b, n_points))
            out[lo:lo + b, j] = (log_g + w).max(axis=1) - t[j] / 2
    return out
