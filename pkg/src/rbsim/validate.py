"""Goodness-of-fit checks for the samplers.

Brown-Resnick fields with mu = -sigma^2/2 have standard Gumbel marginals,
and for Brownian X the pair (M(s), M(t)) is Huesler-Reiss, so
``max(M(0.5), M(1)) - log(2 Phi(sqrt(0.5)/2))`` is standard Gumbel as well.
"""

import math
from dataclasses import asdict, dataclass, field

import numpy as np
from scipy import stats

from . import normal
from .fields import build_bm_sampler
from .maxstable import algorithm_m, select_parameters
from .rng import RandomStream
from .tes import algorithm_tes
from .walk import renewal_model

__all__ = [
    "ValidationReport",
    "gumbel_cdf",
    "BIVARIATE_SHIFT",
    "ks_statistic",
    "ks_critical",
    "two_sample_ks",
    "qq_pairs",
    "brown_resnick_sampler",
    "exact_samples",
    "tes_samples",
    "marginal_test",
    "bivariate_test",
    "tes_dyadic_test",
    "run_validation",
]

BIVARIATE_SHIFT = math.log(2.0 * normal.std_normal_cdf(math.sqrt(0.5) / 2.0))
KS_COEF_5PCT = 1.358


@dataclass
class ValidationReport:
    name: str
    n: int
    statistic: float
    critical: float
    passed: bool
    attempts: int = 1
    qq: list = field(default_factory=list, repr=False)
    detail: dict = field(default_factory=dict)

    def to_dict(self):
        return asdict(self)


def gumbel_cdf(x):
    return np.exp(-np.exp(-np.asarray(x, dtype=float)))


def ks_statistic(sample, cdf):
    """One-sample two-sided Kolmogorov-Smirnov distance; ``sample`` must be sorted."""
    x = np.asarray(sample, dtype=float)
    if x.ndim != 1 or x.size < 10:
        raise ValueError("need a 1-d sample of size >= 10")
    if np.any(np.diff(x) < 0.0):
        raise ValueError("sample must be sorted")
    n = x.size
    F = np.asarray(cdf(x), dtype=float)
    i = np.arange(1, n + 1)
    return float(max(np.max(i / n - F), np.max(F - (i - 1) / n)))


def ks_critical(n, m=None):
    """5% critical value, one-sample or (with m) two-sample, asymptotic form."""
    if m is None:
        return KS_COEF_5PCT / math.sqrt(n)
    return KS_COEF_5PCT * math.sqrt((n + m) / (n * m))


def two_sample_ks(x, y):
    return float(stats.ks_2samp(x, y).statistic)


def qq_pairs(sample, points=99):
    """(Gumbel quantile, empirical quantile) at probabilities k/(points+1)."""
    p = np.arange(1, points + 1) / (points + 1)
    theo = -np.log(-np.log(p))
    emp = np.quantile(np.asarray(sample, dtype=float), p)
    return [[float(a), float(b)] for a, b in zip(theo, emp)]


def brown_resnick_sampler(locations, stream, delta=0.1, gamma=0.5):
    """Brownian model at ``locations`` with Poisson arrivals and auto-selected a."""
    model = build_bm_sampler(np.asarray(locations, dtype=float))
    renewal = renewal_model(gamma=gamma)
    choice = select_parameters(model, renewal, delta, stream=stream.spawn())
    return model, renewal, choice


def exact_samples(locations, n, stream, delta=0.1):
    model, renewal, choice = brown_resnick_sampler(locations, stream, delta)
    return np.array([algorithm_m(model, renewal, choice, stream).values for _ in range(int(n))])


def tes_samples(points, n, stream, delta=0.1, config=None):
    pts = np.asarray(points, dtype=float)
    return np.array([algorithm_tes(delta, stream, config).eval(pts) for _ in range(int(n))])


def _one_sample(name, x, attempts, detail=None):
    x = np.sort(x)
    stat = ks_statistic(x, gumbel_cdf)
    crit = ks_critical(x.size)
    return ValidationReport(name, int(x.size), stat, crit, stat < crit, attempts, qq_pairs(x),
                            detail or {})


def _with_retry(run, stream, retry):
    rep = run(stream, 1)
    if rep.passed or not retry:
        return rep
    return run(stream.spawn(), 2)


def marginal_test(n, stream, retry=True):
    """KS of M(1) against the standard Gumbel law."""
    def run(s, k):
        x = exact_samples([0.5, 1.0], n, s)[:, 1]
        return _one_sample("gumbel-marginal-M(1)", x, k)
    return _with_retry(run, stream, retry)


def bivariate_test(n, stream, retry=True):
    """KS of max(M(0.5), M(1)) - log(2 Phi(sqrt(0.5)/2)) against the standard Gumbel law."""
    def run(s, k):
        v = exact_samples([0.5, 1.0], n, s)
        return _one_sample("huesler-reiss-max", v.max(axis=1) - BIVARIATE_SHIFT, k,
                           {"shift": BIVARIATE_SHIFT})
    return _with_retry(run, stream, retry)


def tes_dyadic_test(n, stream, delta=0.1, level=5, threshold=0.03, retry=False):
    """Two-sample KS between TES and the exact sampler at the points j / 2^level."""
    pts = np.arange(2**level + 1) / 2**level

    def run(s, k):
        a = tes_samples(pts, n, s, delta)
        b = exact_samples(pts, n, s, delta)
        d = np.array([two_sample_ks(a[:, j], b[:, j]) for j in range(pts.size)])
        worst = int(np.argmax(d))
        return ValidationReport(
            "tes-vs-exact-dyadic", int(n), float(d[worst]), float(threshold),
            bool(np.all(d < threshold)), k, qq_pairs(a[:, -1]),
            {"points": pts.tolist(), "statistics": d.tolist(), "worst_point": float(pts[worst]),
             "asymptotic_5pct": ks_critical(n, n)},
        )
    return _with_retry(run, stream, retry)


def run_validation(n=10**4, seed=0, n_tes=5000, retry=True):
    """The three checks with independent streams derived from ``seed``."""
    return [
        marginal_test(n, RandomStream(seed, 1), retry),
        bivariate_test(n, RandomStream(seed, 2), retry),
        tes_dyadic_test(n_tes, RandomStream(seed, 3), retry=retry),
    ]
