"""Law of the first record time T_n for a model with independent coordinates.

For X = (s_1 Z_1, ..., s_d Z_d) the events {max X_k > a log(n+k) + C} are
independent across k with probabilities p_k = 1 - prod_i Phi(b_k / s_i), so
the truncated-horizon law of T_n is P(T = k) = p_k prod_{j<k} (1 - p_j).
"""

import numpy as np
from scipy import special


def record_time_pmf(sigmas, a, C, n, horizon=10**5):
    k = np.arange(1, horizon + 1, dtype=float)
    b = a * np.log(n + k) + C
    log_below = sum(special.log_ndtr(b / s) for s in sigmas)
    p = -np.expm1(log_below)
    survive = np.concatenate([[0.0], np.cumsum(log_below)[:-1]])
    return p * np.exp(survive)


def sample_record_times(pmf, size, rng):
    """Draws from pmf conditioned on T <= horizon."""
    c = np.cumsum(pmf)
    return 1 + np.searchsorted(c / c[-1], rng.random(size), side="right")
