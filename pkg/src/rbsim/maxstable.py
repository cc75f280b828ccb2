"""Exact sampling of M(t) = sup_n {-log A_n + X_n(t) + mu(t)}.

Three random indices bound the terms that can reach the supremum:

* N_A, the last n with A_n <= gamma n (renewal walk),
* N_X, the last record of the Gaussian maxima over a log n + C,
* N_a, the first n from which gamma n >= A_1 n^a exp(C - min X_1).

Past N = max(N_A, N_X, N_a) every term is below -log A_1 + X_1(t), so the
supremum is a maximum over the first N terms.
"""

import math
import time
from dataclasses import dataclass, field

import numpy as np
from scipy import optimize, special

from . import kernels, normal
from .records import RecordParams, algorithm_x, choose_n0, extend_x, smallest_true
from .walk import algorithm_s, extend_walk

__all__ = [
    "ParameterChoice",
    "MaxStableSample",
    "compute_n_a",
    "random_c",
    "select_parameters",
    "balance_gamma",
    "algorithm_m",
    "gaussian_draw_count",
]

FIXED_C = "fixed-C-solve-a"
RANDOM_C = "a-equals-1-random-C"


@dataclass
class ParameterChoice:
    a: float
    C: float
    gamma: float
    delta: float
    mode: str = FIXED_C
    pilot_size: int = 0
    _params: RecordParams = field(default=None, repr=False, compare=False)

    def __post_init__(self):
        if not 0.0 < self.a <= 1.0:
            raise ValueError("a must lie in (0, 1]")
        if self.mode not in (FIXED_C, RANDOM_C):
            raise ValueError(f"unknown mode {self.mode!r}")
        if self.mode == RANDOM_C and self.a != 1.0:
            raise ValueError("random-C mode needs a = 1")

    def record_params(self, model):
        p = self._params
        if p is None or p.sigma_bar != model.sigma_bar:
            p = RecordParams.build(model.d, self.delta, self.a, self.C, model.sigma_bar)
            self._params = p
        return p


@dataclass
class MaxStableSample:
    values: np.ndarray
    N: int
    N_A: int
    N_X: int
    N_a: int
    gaussian_draws: int
    walk_steps: int
    wall_time: float
    a: float
    C: float
    gamma: float
    delta: float
    n0: int
    records: int
    draws_x: int = 0
    draws_extension: int = 0
    extended_values: np.ndarray = None


def compute_n_a(A1, Xmin1, a, C, gamma):
    """Smallest n >= 1 with n gamma >= A1 n^a exp(C - Xmin1)."""
    if A1 <= 0.0 or gamma <= 0.0:
        raise ValueError("A1 and gamma must be positive")
    log_ratio = math.log(A1) + C - Xmin1 - math.log(gamma)
    if a >= 1.0:
        if log_ratio > 1e-12:
            raise ValueError("a = 1 needs C <= min X_1 + log(gamma / A_1)")
        return 1
    if log_ratio <= 0.0:
        return 1
    log_n = log_ratio / (1.0 - a)
    if log_n > math.log(2.0**62):
        raise OverflowError(f"N_a = exp({log_n:.1f}) is out of range")

    def ok(n):
        return (1.0 - a) * math.log(n) >= log_ratio

    return smallest_true(ok, max(1, math.ceil(math.exp(log_n))))


def random_c(A1, Xmin1, gamma):
    """C making the N_a condition hold from n = 1 when a = 1."""
    return Xmin1 + math.log(gamma / A1)


def _log_n0_curve(a, C, d, delta, sigma_bar):
    """log of the real root y of d r(y) = delta."""
    s = sigma_bar / a
    log_sf = math.log(delta / d) + C / a - math.log(s) - 0.5 * s * s
    if log_sf >= 0.0:
        return -math.inf
    return s * normal.std_normal_tail_inv(log_p=log_sf) + s * s - C / a


def _pilot(model, renewal, size, stream):
    A1 = renewal.step_law.sample(stream, size)
    xmin = np.array([model.sample_block(stream, 1, count=False)[0].min() for _ in range(size)])
    return np.asarray(A1, dtype=float), xmin


def select_parameters(model, renewal, delta, pilot_size=200, stream=None, C=0.0, grid=400,
                      compare_modes=True):
    """Record boundary for the sampler, chosen from a pilot run.

    With C fixed, n0 falls and the mean of N_a grows as a increases; the
    fixed-C candidate is the largest a where the two meet. Its pilot cost
    mean(max(n0, N_a)) is then compared with the random-C cost mean(n0(C_i)),
    and the cheaper mode wins. N_a grows like a power 1/(1-a) of A_1 e^{-min X_1},
    so the pilot underestimates the fixed-C cost; ties go to random C.
    """
    gamma = renewal.gamma
    A1, xmin = _pilot(model, renewal, int(pilot_size), stream)
    log_ratio = np.log(A1) + C - xmin - math.log(gamma)
    log_m = math.log(len(A1))
    random_choice = ParameterChoice(1.0, 0.0, gamma, float(delta), RANDOM_C, int(pilot_size))

    def f(a):
        lhs = _log_n0_curve(a, C, model.d, delta, model.sigma_bar)
        rhs = special.logsumexp(np.maximum(log_ratio, 0.0) / (1.0 - a)) - log_m
        return lhs - rhs

    a_grid = np.linspace(0.02, 0.995, grid)
    vals = np.array([f(a) for a in a_grid])
    cross = np.flatnonzero((vals[:-1] > 0.0) & (vals[1:] <= 0.0))
    if not cross.size:
        return random_choice
    i = cross[-1]
    a = optimize.brentq(f, a_grid[i], a_grid[i + 1], xtol=1e-10)
    n0 = choose_n0(model.d, delta, a, C, model.sigma_bar)
    fixed_choice = ParameterChoice(float(a), float(C), gamma, float(delta), FIXED_C, int(pilot_size))
    if not compare_modes:
        return fixed_choice
    n_a = np.exp(np.minimum(np.maximum(log_ratio, 0.0) / (1.0 - a), 700.0))
    fixed_cost = float(np.mean(np.maximum(n0, n_a)))
    random_cost = float(np.mean([choose_n0(model.d, delta, 1.0, random_c(x, m, gamma), model.sigma_bar)
                                 for x, m in zip(A1, xmin)]))
    return fixed_choice if fixed_cost < random_cost else random_choice


def balance_gamma(model, step_law, delta, stream, fractions=(0.2, 0.35, 0.5, 0.65, 0.8),
                  pilot_size=200, walk_reps=200):
    """gamma (as a fraction of E[tau]) whose mean N_A and mean N_a are closest."""
    from .walk import renewal_model

    best = None
    for frac in fractions:
        renewal = renewal_model(step_law, frac * step_law.mean)
        choice = select_parameters(model, renewal, delta, pilot_size, stream)
        n_a_mean = np.mean([algorithm_s(renewal, 1, stream).n_s for _ in range(walk_reps)])
        A1, xmin = _pilot(model, renewal, pilot_size, stream)
        if choice.mode == RANDOM_C:
            n_na = 1.0
        else:
            n_na = np.mean([compute_n_a(x, m, choice.a, choice.C, renewal.gamma) for x, m in zip(A1, xmin)])
        gap = abs(math.log(max(n_a_mean, 1.0)) - math.log(n_na))
        if best is None or gap < best[0]:
            best = (gap, renewal, choice)
    return best[1], best[2]


def algorithm_m(model, renewal, choice, stream, extra=0):
    """One exact sample of M at the model locations.

    ``extra`` > 0 also extends both sequences by that many conditional terms
    and stores the maximum over 1..N+extra in ``extended_values``; it must equal
    ``values``.
    """
    t0 = time.perf_counter()
    model.draw_counter = 0
    path = algorithm_s(renewal, 1, stream)
    n_A = path.n_s
    A1 = float(renewal.recover_arrivals(path.taus[:1], stream)[0])
    first = model.sample_block(stream, 1)[0]
    xmin = float(first.min())
    if choice.mode == RANDOM_C:
        C = random_c(A1, xmin, renewal.gamma)
        params = RecordParams.build(model.d, choice.delta, 1.0, C, model.sigma_bar)
    else:
        C = choice.C
        params = choice.record_params(model)
    xrun = algorithm_x(model, params, 0, stream, first=first)
    draws_x = model.draw_counter
    n_a = compute_n_a(A1, xmin, params.a, C, renewal.gamma)
    N = max(n_A, xrun.n_x, n_a)
    total = N + int(extra)

    path = extend_walk(renewal, path, total - len(path), stream)
    extend_x(model, params, xrun, total - xrun.length, stream)
    draws_ext = model.draw_counter - draws_x
    taus = np.concatenate([[A1], renewal.recover_arrivals(path.taus[1:total], stream)])
    log_A = np.log(np.cumsum(taus))

    acc = np.full(model.d, -np.inf)
    acc_ext = np.full(model.d, -np.inf) if extra else None
    for n, rows in xrun.iter_chunks(model):
        if n > total:
            break
        rows = rows[: total - n + 1]
        k = rows.shape[0]
        shifts = -log_A[n - 1:n - 1 + k]
        inside = max(0, min(k, N - n + 1))
        kernels.max_plus_update(acc, rows[:inside], shifts[:inside])
        if extra:
            kernels.max_plus_update(acc_ext, rows, shifts)
    values = acc + model.mu
    wall = time.perf_counter() - t0
    return MaxStableSample(
        values=values, N=N, N_A=n_A, N_X=xrun.n_x, N_a=n_a,
        gaussian_draws=model.draw_counter, walk_steps=len(path), wall_time=wall,
        a=params.a, C=C, gamma=renewal.gamma, delta=params.delta, n0=params.n0,
        records=xrun.records, draws_x=draws_x, draws_extension=draws_ext,
        extended_values=None if acc_ext is None else acc_ext + model.mu,
    )


def gaussian_draw_count(sample):
    """Nominal Gaussian vectors drawn for the sample (pilot runs excluded)."""
    return int(sample.gaussian_draws)
