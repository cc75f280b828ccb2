"""Renewal arrivals A_n and the last passage time of S_n = gamma*n - A_n.

The walk has steps ``gamma - tau``. Upcrossings of level 0 are proposed under
the exponentially tilted law (Cramer root theta) and accepted with probability
``exp(-theta (S_end - x))``, which makes the last passage time samplable
jointly with the path.

Exponential steps are tilted in closed form (rate 1 + theta). General step
laws are truncated at r and floored onto the grid ``k/mesh_delta``; the walk
runs on the floored steps and true arrivals are recovered afterwards by
sampling tau given its floor cell, which can only increase A_n.
"""

from dataclasses import dataclass, field

import numpy as np
from scipy import integrate, optimize, special

__all__ = [
    "StepLaw",
    "RenewalModel",
    "StepCapError",
    "StepBudget",
    "WalkPath",
    "cramer_root",
    "regularize",
    "renewal_model",
    "sample_downcrossing",
    "sample_upcrossing",
    "sample_without_record_s",
    "algorithm_s",
    "extend_walk",
]


class StepCapError(RuntimeError):
    """Raised when a replication exceeds its step budget."""


class StepBudget:
    def __init__(self, cap=10**8):
        self.cap = int(cap)
        self.used = 0

    def spend(self, k):
        self.used += int(k)
        if self.used > self.cap:
            raise StepCapError(f"walk exceeded {self.cap} steps")


@dataclass(frozen=True)
class StepLaw:
    """Law of the inter-arrival time tau > 0."""

    kind: str
    rate: float = 1.0
    value: float = 0.0
    ppf: object = None
    cdf: object = None
    table: tuple = None
    mean_value: float = None

    @classmethod
    def exponential(cls, rate=1.0):
        if rate <= 0:
            raise ValueError("rate must be positive")
        return cls("exponential", rate=float(rate))

    @classmethod
    def deterministic(cls, value):
        if value <= 0:
            raise ValueError("deterministic step must be positive")
        return cls("deterministic", value=float(value))

    @classmethod
    def general(cls, ppf, cdf, mean=None):
        return cls("general", ppf=ppf, cdf=cdf, mean_value=mean)

    @classmethod
    def from_table(cls, probs, quantiles):
        """Piecewise-linear quantile function through (probs[i], quantiles[i])."""
        p = np.asarray(probs, dtype=float)
        q = np.asarray(quantiles, dtype=float)
        if p[0] != 0.0 or p[-1] != 1.0 or np.any(np.diff(p) <= 0) or np.any(np.diff(q) <= 0):
            raise ValueError("table needs probs from 0 to 1 and increasing quantiles")
        if q[0] < 0.0:
            raise ValueError("steps must be non-negative")
        mean = float(np.sum(np.diff(p) * 0.5 * (q[1:] + q[:-1])))
        return cls(
            "general",
            ppf=lambda u: np.interp(u, p, q),
            cdf=lambda x: np.interp(x, q, p, left=0.0, right=1.0),
            table=(tuple(p), tuple(q)),
            mean_value=mean,
        )

    @classmethod
    def from_config(cls, cfg):
        kind = cfg.get("type", "exponential")
        if kind == "exponential":
            return cls.exponential(cfg.get("rate", 1.0))
        if kind == "deterministic":
            return cls.deterministic(cfg["value"])
        if kind == "general":
            table = np.asarray(cfg["quantile_table"], dtype=float)
            return cls.from_table(table[:, 0], table[:, 1])
        raise ValueError(f"unknown step law {kind!r}")

    @property
    def mean(self):
        if self.kind == "exponential":
            return 1.0 / self.rate
        if self.kind == "deterministic":
            return self.value
        if self.mean_value is None:
            return integrate.quad(self.ppf, 0.0, 1.0, limit=200)[0]
        return self.mean_value

    def quantile(self, u):
        u = np.asarray(u, dtype=float)
        if self.kind == "exponential":
            return -np.log1p(-u) / self.rate
        if self.kind == "deterministic":
            return np.full_like(u, self.value)
        return self.ppf(u)

    def distribution(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "exponential":
            return -np.expm1(-self.rate * np.maximum(x, 0.0))
        if self.kind == "deterministic":
            return (x >= self.value).astype(float)
        return self.cdf(x)

    def truncated_mean(self, r):
        """E[min(tau, r)]."""
        if self.kind == "exponential":
            return -np.expm1(-self.rate * r) / self.rate
        if self.kind == "deterministic":
            return min(self.value, r)
        return integrate.quad(lambda x: 1.0 - self.cdf(x), 0.0, r, limit=200)[0]

    def sample(self, stream, size):
        if self.kind == "exponential":
            return stream.exponential(self.rate, size)
        if self.kind == "deterministic":
            return np.full(size, self.value)
        return self.ppf(stream.uniform(size))


@dataclass
class RenewalModel:
    step_law: StepLaw
    gamma: float
    theta: float = None
    truncation_r: float = None
    mesh_delta: float = None
    max_steps: int = 10**8
    # floored law for general steps: support, pmf, and cumulative weights
    support: np.ndarray = field(default=None, repr=False)
    pmf: np.ndarray = field(default=None, repr=False)
    _cum: np.ndarray = field(default=None, repr=False)
    _cum_tilted: np.ndarray = field(default=None, repr=False)

    @property
    def mean_step(self):
        return self.step_law.mean

    @property
    def bypass(self):
        """True when the walk can never move up, so no tilting is needed."""
        return self.theta is None

    def nominal_taus(self, stream, k):
        if self.support is None:
            return self.step_law.sample(stream, k)
        idx = np.searchsorted(self._cum, stream.uniform(k) * self._cum[-1], side="right")
        return self.support[np.minimum(idx, self.support.size - 1)]

    def tilted_taus(self, stream, k):
        if self.step_law.kind == "exponential" and self.support is None:
            return stream.exponential(self.step_law.rate + self.theta, k)
        c = self._cum_tilted
        idx = np.searchsorted(c, stream.uniform(k) * c[-1], side="right")
        return self.support[np.minimum(idx, self.support.size - 1)]

    def recover_arrivals(self, taus, stream):
        """Replace floored steps by draws of tau given their floor cell."""
        taus = np.asarray(taus, dtype=float)
        if self.support is None:
            return taus.copy()
        h = 1.0 / self.mesh_delta
        k = np.rint(taus / h).astype(np.int64)
        top = int(round(self.truncation_r * self.mesh_delta))
        lo = self.step_law.distribution(k * h)
        hi = np.where(k < top, self.step_law.distribution((k + 1) * h), 1.0)
        u = lo + stream.uniform(taus.size) * (hi - lo)
        out = self.step_law.quantile(u)
        # cell edges guard against interpolation round-off
        upper = np.where(k < top, (k + 1) * h, np.inf)
        return np.clip(out, k * h, upper)

    def log_mgf_step(self, theta):
        """log E[exp(theta (gamma - tau))] for the law the walk runs on."""
        if self.support is None:
            if self.step_law.kind == "exponential":
                lam = self.step_law.rate
                return theta * self.gamma + np.log(lam / (lam + theta))
            return theta * (self.gamma - self.step_law.value)
        return theta * self.gamma + special.logsumexp(np.log(self.pmf) - theta * self.support)


def _root(fun):
    lo, hi = 1e-12, 1.0
    while fun(hi) <= 0.0:
        hi *= 2.0
        if hi > 1e8:
            raise ValueError("no Cramer root found")
    return optimize.brentq(fun, lo, hi, xtol=1e-14, rtol=4 * np.finfo(float).eps, maxiter=500)


def cramer_root(model):
    """Positive theta with E[exp(theta (gamma - tau))] = 1."""
    if model.gamma >= model.mean_step:
        raise ValueError("need gamma < E[tau] for a negative drift")
    if model.step_law.kind == "deterministic":
        return None
    return _root(model.log_mgf_step)


def _tilted_cum(model):
    w = np.log(model.pmf) - model.theta * model.support
    return np.cumsum(np.exp(w - w.max()))


def regularize(step_law, gamma, truncation_r=None, mesh_delta=None, max_steps=10**8):
    """Truncate at r and floor onto a grid of spacing 1/mesh_delta.

    r and the mesh are chosen (unless given) so that the floored mean still
    exceeds gamma.
    """
    mean = step_law.mean
    if not 0.0 < gamma < mean:
        raise ValueError("need 0 < gamma < E[tau]")

    trunc_mean = step_law.truncated_mean

    r = truncation_r
    if r is None:
        r = float(step_law.quantile(0.999))
        r = max(r, 2.0 * gamma)
        while trunc_mean(r) <= gamma:
            r *= 2.0
            if r > 1e12:
                raise ValueError("no truncation level reaches the mean condition")
    elif trunc_mean(r) <= gamma:
        raise ValueError("truncation_r too small: E[min(tau, r)] <= gamma")

    def floored(cells):
        h = r / cells
        grid = np.arange(cells + 1) * h
        cdf = step_law.distribution(grid)
        pmf = np.append(np.diff(cdf), 1.0 - cdf[-1])
        return grid, pmf

    if mesh_delta is None:
        cells = 64
        while True:
            grid, pmf = floored(cells)
            if np.dot(grid, pmf) > gamma:
                break
            cells *= 2
            if cells > 2**24:
                raise ValueError("mesh refinement failed")
    else:
        cells = int(round(r * mesh_delta))
        grid, pmf = floored(cells)
        if np.dot(grid, pmf) <= gamma:
            raise ValueError("mesh too coarse: floored mean <= gamma")
    keep = pmf > 0.0
    model = RenewalModel(
        step_law, float(gamma), truncation_r=float(r), mesh_delta=cells / r,
        max_steps=max_steps, support=grid, pmf=pmf,
    )
    # only cells with mass can be drawn; zero cells are dropped from the walk law
    model.support, model.pmf = grid[keep], pmf[keep]
    model.mesh_delta = cells / r
    model._cum = np.cumsum(model.pmf)
    if np.any(model.support < gamma):
        model.theta = _root(model.log_mgf_step)
        model._cum_tilted = _tilted_cum(model)
    return model


def renewal_model(step_law=None, gamma=None, max_steps=10**8, **kw):
    """Build the walk model; gamma defaults to E[tau]/2."""
    step_law = StepLaw.exponential() if step_law is None else step_law
    if gamma is None:
        gamma = 0.5 * step_law.mean
    if step_law.kind == "general":
        return regularize(step_law, gamma, max_steps=max_steps, **kw)
    model = RenewalModel(step_law, float(gamma), max_steps=max_steps)
    model.theta = cramer_root(model)
    return model


# -- walk pieces ---------------------------------------------------------------------
def _budget(model, budget):
    return StepBudget(model.max_steps) if budget is None else budget


def _down_taus(model, x, stream, budget):
    parts, s, chunk = [], x, 4
    while True:
        t = model.nominal_taus(stream, chunk)
        path = s + np.cumsum(model.gamma - t)
        hit = np.flatnonzero(path < 0.0)
        if hit.size:
            i = hit[0] + 1
            budget.spend(i)
            parts.append(t[:i])
            return np.concatenate(parts), path[i - 1]
        budget.spend(chunk)
        parts.append(t)
        s = path[-1]
        chunk = min(2 * chunk, 4096)


def _up_taus(model, x, stream, budget):
    parts, s, chunk = [], x, 8
    while True:
        t = model.tilted_taus(stream, chunk)
        path = s + np.cumsum(model.gamma - t)
        hit = np.flatnonzero(path >= 0.0)
        if hit.size:
            i = hit[0] + 1
            budget.spend(i)
            parts.append(t[:i])
            end = path[i - 1]
            if stream.uniform() <= np.exp(-model.theta * (end - x)):
                return np.concatenate(parts), end
            return None
        budget.spend(chunk)
        parts.append(t)
        s = path[-1]
        chunk = min(2 * chunk, 4096)


def _no_record_taus(model, x, ell, stream, budget):
    while True:
        t = model.nominal_taus(stream, ell)
        budget.spend(ell)
        path = x + np.cumsum(model.gamma - t)
        if path.max() < 0.0 and (model.bypass or _up_taus(model, path[-1], stream, budget) is None):
            return t


def sample_downcrossing(model, x, stream, budget=None):
    """Nominal steps from x >= 0 until the first negative value; returns S values."""
    if x < 0:
        raise ValueError("start must be non-negative")
    t, _ = _down_taus(model, x, stream, _budget(model, budget))
    return x + np.cumsum(model.gamma - t)


def sample_upcrossing(model, x, stream, budget=None):
    """Upcrossing segment from x < 0 given it happens, or None ('degenerate')."""
    if x >= 0:
        raise ValueError("start must be negative")
    if model.bypass:
        return None
    out = _up_taus(model, x, stream, _budget(model, budget))
    if out is None:
        return None
    return x + np.cumsum(model.gamma - out[0])


def sample_without_record_s(model, x, ell, stream, budget=None):
    """ell values of the walk from x < 0 conditioned never to return to [0, inf)."""
    if x >= 0:
        raise ValueError("start must be negative")
    t = _no_record_taus(model, x, int(ell), stream, _budget(model, budget))
    return x + np.cumsum(model.gamma - t)


@dataclass
class WalkPath:
    """Steps tau_1..tau_k of the (possibly floored) walk plus the last passage index."""

    taus: np.ndarray
    n_s: int
    gamma: float

    @property
    def values(self):
        return np.concatenate([[0.0], np.cumsum(self.gamma - self.taus)])

    def __len__(self):
        return int(self.taus.size)


def algorithm_s(model, ell, stream, budget=None):
    """Exact joint sample of the path and its last passage index N_S.

    The returned path holds at least N_S + ell steps and S_n < 0 for n > N_S.
    """
    budget = _budget(model, budget)
    if model.bypass:
        t, _ = _down_taus(model, 0.0, stream, budget)
        path = WalkPath(t, int(t.size) - 1, model.gamma)
    else:
        parts, s = [], 0.0
        while True:
            t, s = _down_taus(model, s, stream, budget)
            parts.append(t)
            up = _up_taus(model, s, stream, budget)
            if up is None:
                break
            parts.append(up[0])
            s = up[1]
        taus = np.concatenate(parts)
        path = WalkPath(taus, int(taus.size), model.gamma)
    need = path.n_s + int(ell) - len(path)
    return extend_walk(model, path, need, stream, budget) if need > 0 else path


def extend_walk(model, path, ell, stream, budget=None):
    """Append ell steps drawn given no further visit to [0, inf)."""
    if ell <= 0:
        return path
    budget = _budget(model, budget)
    if model.bypass:
        extra = model.nominal_taus(stream, ell)
        budget.spend(ell)
    else:
        s = float(path.values[-1])
        extra = _no_record_taus(model, s, int(ell), stream, budget)
    return WalkPath(np.concatenate([path.taus, extra]), path.n_s, path.gamma)
