"""Standard normal kernel.

Tail probabilities and their inverses are evaluated on the log scale so that
record boundaries far out in the tail (large n, large d) stay finite. The
special functions come from :mod:`scipy.special`.
"""

import numpy as np
from scipy import special

__all__ = [
    "std_normal_pdf",
    "std_normal_cdf",
    "std_normal_sf",
    "std_normal_log_sf",
    "std_normal_log_cdf",
    "std_normal_tail_inv",
    "sample_truncated_normal_above",
    "sample_abs_normal_above",
    "sample_abs_normal_below",
    "prob_abs_normal_below",
]

_LOG_SQRT_2PI = 0.5 * np.log(2.0 * np.pi)
# largest double below one; keeps log1p(-u) finite
_U_MAX = 1.0 - 2.0**-53


def std_normal_pdf(x):
    """Density phi(x)."""
    x = np.asarray(x, dtype=float)
    return np.exp(-0.5 * x * x - _LOG_SQRT_2PI)


def std_normal_cdf(x):
    """Phi(x). Saturates at 0 and 1 in the far tails."""
    return special.ndtr(x)


def std_normal_sf(x):
    """Upper tail Phibar(x) = 1 - Phi(x), accurate for large x."""
    return special.ndtr(np.negative(x))


def std_normal_log_sf(x):
    """log Phibar(x), finite for any finite x."""
    return special.log_ndtr(np.negative(x))


def std_normal_log_cdf(x):
    return special.log_ndtr(x)


def std_normal_tail_inv(p=None, *, log_p=None):
    """Inverse of the upper tail: returns x with Phibar(x) = p.

    Pass ``log_p`` instead of ``p`` when p may underflow (p < 1e-300).
    """
    if (p is None) == (log_p is None):
        raise ValueError("give exactly one of p or log_p")
    if log_p is not None:
        lp = np.asarray(log_p, dtype=float)
        if np.any(~(lp < 0.0)):
            raise ValueError("log_p must be negative")
        out = -special.ndtri_exp(lp)
    else:
        pp = np.asarray(p, dtype=float)
        if np.any(~((pp > 0.0) & (pp < 1.0))):
            raise ValueError("p must lie in (0, 1)")
        out = -special.ndtri(pp)
    return out if np.ndim(out) else float(out)


def sample_truncated_normal_above(sigma, threshold, u):
    """Draw from N(0, sigma^2) conditioned on exceeding ``threshold``.

    Inverse-CDF on the upper tail: Phibar(x/sigma) = (1-u) Phibar(threshold/sigma).
    Monotone in u, equal to ``threshold`` at u = 0.
    """
    sigma = np.asarray(sigma, dtype=float)
    if np.any(sigma <= 0.0):
        raise ValueError("sigma must be positive")
    thr = np.asarray(threshold, dtype=float)
    uu = np.minimum(np.asarray(u, dtype=float), _U_MAX)
    target = np.log1p(-uu) + std_normal_log_sf(thr / sigma)
    with np.errstate(over="ignore"):
        x = -special.ndtri_exp(np.minimum(target, -1e-300)) * sigma
    # rounding must never put the draw below the boundary
    x = np.where(uu > 0.0, np.maximum(x, np.nextafter(thr, np.inf)), thr)
    return x if np.ndim(x) else float(x)


def sample_abs_normal_above(c, u):
    """|Z| conditioned on |Z| > c, by inversion (c >= 0)."""
    c = np.asarray(c, dtype=float)
    uu = np.minimum(np.asarray(u, dtype=float), _U_MAX)
    target = np.log1p(-uu) + std_normal_log_sf(c)
    x = -special.ndtri_exp(np.minimum(target, -1e-300))
    return np.maximum(x, c)


def sample_abs_normal_below(c, u):
    """|Z| conditioned on |Z| <= c, by inversion (c >= 0)."""
    c = np.asarray(c, dtype=float)
    half_mass = 0.5 - std_normal_sf(c)
    x = special.ndtri(0.5 + np.asarray(u, dtype=float) * half_mass)
    return np.clip(x, 0.0, c)


def prob_abs_normal_below(c):
    """P(|Z| <= c) = 1 - 2 Phibar(c)."""
    return 1.0 - 2.0 * std_normal_sf(c)
