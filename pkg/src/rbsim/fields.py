"""Exact finite-dimensional samplers for Gaussian fields.

Backends
--------
fbm-circulant
    Fractional Brownian motion on ``t_i = i*horizon/d`` via circulant
    embedding of the increment sequence, then cumulative sums.
bm-grid
    Brownian motion at arbitrary increasing locations in [0, inf).
brownian-sheet-grid
    Brownian sheet on the regular grid ``{i/d1} x {j/d2}``, axes included.
dense-cholesky
    Any covariance matrix; used as an oracle in tests.

All models share ``sample_block`` (k iid draws at once), ``cov_column`` for
the regression weights of the conditional sampler, and a draw counter.
"""

from collections import OrderedDict
from dataclasses import dataclass

import numpy as np
from scipy import special

from . import normal

__all__ = [
    "GaussianFieldModel",
    "FieldVector",
    "fbm_increment_autocov",
    "build_fbm_sampler",
    "build_bm_sampler",
    "build_brownian_sheet_sampler",
    "build_dense_sampler",
    "model_from_config",
    "sample",
    "conditioned_sample",
    "rn_derivative_nominal_over_conditional",
    "check_holder_increments",
]

BACKENDS = ("fbm-circulant", "bm-grid", "brownian-sheet-grid", "dense-cholesky")


@dataclass(frozen=True)
class FieldVector:
    values: np.ndarray
    max_value: float
    min_value: float

    @classmethod
    def of(cls, values):
        values = np.asarray(values, dtype=float)
        return cls(values, float(values.max()), float(values.min()))


def fbm_increment_autocov(k, hurst):
    """Autocovariance of unit-step fractional Gaussian noise at lag k."""
    k = np.abs(np.asarray(k, dtype=float))
    h2 = 2.0 * hurst
    return 0.5 * (np.abs(k + 1.0) ** h2 + np.abs(k - 1.0) ** h2 - 2.0 * k**h2)


class GaussianFieldModel:
    """A centered Gaussian vector with a fast exact sampler.

    Immutable after construction apart from ``draw_counter`` and the tail cache.
    """

    def __init__(self, backend, locations, sigma, sigma_bar, mu, **spec):
        if backend not in BACKENDS:
            raise ValueError(f"unknown backend {backend!r}")
        self.backend = backend
        self.locations = np.asarray(locations, dtype=float)
        self.sigma = np.asarray(sigma, dtype=float)
        self.d = int(self.sigma.size)
        if np.all(self.sigma <= 0.0):
            raise ValueError("degenerate model: every coordinate has zero variance")
        if sigma_bar < self.sigma.max() * (1.0 - 1e-12):
            raise ValueError("sigma_bar must bound every marginal standard deviation")
        self.sigma_bar = float(sigma_bar)
        self.mu = np.asarray(mu, dtype=float)
        if self.mu.shape != (self.d,):
            raise ValueError("mu must have one entry per location")
        self.spec = spec
        self.draw_counter = 0
        self._tail_cache = OrderedDict()
        self._setup()

    # -- backend specific pieces -------------------------------------------------
    def _setup(self):
        if self.backend == "fbm-circulant":
            d, hurst = self.d, self.spec["hurst"]
            lags = np.concatenate([np.arange(d + 1), np.arange(d - 1, 0, -1)])
            row = fbm_increment_autocov(lags, hurst)
            eig = np.fft.fft(row).real
            if eig.min() < -1e-8 * eig.max():
                raise ValueError("circulant embedding failed: negative eigenvalue")
            m = row.size
            self._root_eig = np.sqrt(np.clip(eig, 0.0, None) / m)
            self._step_scale = (self.spec["horizon"] / d) ** hurst
        elif self.backend == "bm-grid":
            t = self.locations
            self._incr_sd = np.sqrt(np.diff(np.concatenate([[0.0], t])))
        elif self.backend == "brownian-sheet-grid":
            d1, d2 = self.spec["d1"], self.spec["d2"]
            self._cell_sd = np.sqrt(1.0 / (d1 * d2))
        else:
            cov = self.spec["cov"]
            w, v = np.linalg.eigh(cov)
            if w.min() < -1e-10 * max(np.trace(cov), 1e-300):
                raise ValueError("covariance matrix is not positive semidefinite")
            try:
                self._chol = np.linalg.cholesky(cov)
            except np.linalg.LinAlgError:
                self._chol = v * np.sqrt(np.clip(w, 0.0, None))

    def cov(self, i, j):
        return float(self.cov_column(j)[i])

    def cov_column(self, j):
        """Vector of Cov(X(t_i), X(t_j)) over i."""
        if self.backend == "fbm-circulant":
            h2 = 2.0 * self.spec["hurst"]
            t = self.locations
            return 0.5 * (t**h2 + t[j] ** h2 - np.abs(t - t[j]) ** h2)
        if self.backend == "bm-grid":
            return np.minimum(self.locations, self.locations[j])
        if self.backend == "brownian-sheet-grid":
            s, t = self.locations[:, 0], self.locations[:, 1]
            return np.minimum(s, s[j]) * np.minimum(t, t[j])
        return self.spec["cov"][:, j]

    def covariance_matrix(self):
        return np.column_stack([self.cov_column(j) for j in range(self.d)])

    def sample_block(self, stream, k, count=True):
        """k iid draws as a (k, d) array; counts k draws unless ``count`` is false."""
        k = int(k)
        if count:
            self.draw_counter += k
        if k == 0:
            return np.empty((0, self.d))
        if self.backend == "fbm-circulant":
            # one complex FFT yields two independent real vectors
            pairs = (k + 1) // 2
            m = self._root_eig.size
            z = stream.normal((pairs, 2, m))
            w = np.fft.fft((z[:, 0] + 1j * z[:, 1]) * self._root_eig, axis=1)[:, : self.d]
            incr = np.empty((2 * pairs, self.d))
            incr[0::2] = w.real
            incr[1::2] = w.imag
            return np.cumsum(incr[:k], axis=1) * self._step_scale
        if self.backend == "bm-grid":
            return np.cumsum(stream.normal((k, self.d)) * self._incr_sd, axis=1)
        if self.backend == "brownian-sheet-grid":
            d1, d2 = self.spec["d1"], self.spec["d2"]
            out = np.zeros((k, d1 + 1, d2 + 1))
            cells = stream.normal((k, d1, d2)) * self._cell_sd
            out[:, 1:, 1:] = np.cumsum(np.cumsum(cells, axis=1), axis=2)
            return out.reshape(k, self.d)
        return stream.normal((k, self.d)) @ self._chol.T

    # -- tails for the conditional measure -------------------------------------
    def log_tails(self, boundary):
        """(log P(X(t_i) > boundary) per i, log of their sum); cached by boundary."""
        key = float(boundary)
        hit = self._tail_cache.get(key)
        if hit is not None:
            self._tail_cache.move_to_end(key)
            return hit
        with np.errstate(divide="ignore", invalid="ignore"):
            z = key / self.sigma
            lt = normal.std_normal_log_sf(z)
        zero = self.sigma <= 0.0
        if np.any(zero):
            lt = np.where(zero, 0.0 if key < 0.0 else -np.inf, lt)
        total = float(special.logsumexp(lt))
        hit = (lt, total)
        self._tail_cache[key] = hit
        if len(self._tail_cache) > 256:
            self._tail_cache.popitem(last=False)
        return hit


# -- builders --------------------------------------------------------------------
def _resolve_mu(mu, sigma):
    if mu is None or (isinstance(mu, str) and mu == "zero"):
        return np.zeros_like(sigma)
    if isinstance(mu, str):
        if mu != "brown-resnick":
            raise ValueError(f"unknown drift {mu!r}")
        return -0.5 * sigma**2
    return np.asarray(mu, dtype=float)


def build_fbm_sampler(hurst, d, horizon=1.0, mu="brown-resnick"):
    if not 0.0 < hurst < 1.0:
        raise ValueError("hurst must lie in (0, 1)")
    if d < 1 or horizon <= 0.0:
        raise ValueError("need d >= 1 and horizon > 0")
    t = np.arange(1, d + 1) * (horizon / d)
    sigma = t**hurst
    return GaussianFieldModel(
        "fbm-circulant", t, sigma, horizon**hurst, _resolve_mu(mu, sigma),
        hurst=float(hurst), horizon=float(horizon),
    )


def build_bm_sampler(locations=None, d=None, horizon=1.0, mu="brown-resnick"):
    """Brownian motion at increasing locations (default ``i*horizon/d``)."""
    if locations is None:
        if d is None:
            raise ValueError("give locations or d")
        locations = np.arange(1, d + 1) * (horizon / d)
    t = np.asarray(locations, dtype=float)
    if t.ndim != 1 or np.any(t < 0.0) or np.any(np.diff(t) <= 0.0):
        raise ValueError("locations must be non-negative and strictly increasing")
    sigma = np.sqrt(t)
    return GaussianFieldModel("bm-grid", t, sigma, float(np.sqrt(t[-1])), _resolve_mu(mu, sigma))


def build_brownian_sheet_sampler(d1, d2, mu="brown-resnick"):
    """Brownian sheet on the (d1+1) x (d2+1) grid of [0,1]^2, row-major in s."""
    if d1 < 1 or d2 < 1:
        raise ValueError("need d1, d2 >= 1")
    s, t = np.meshgrid(np.arange(d1 + 1) / d1, np.arange(d2 + 1) / d2, indexing="ij")
    loc = np.column_stack([s.ravel(), t.ravel()])
    sigma = np.sqrt(loc[:, 0] * loc[:, 1])
    return GaussianFieldModel(
        "brownian-sheet-grid", loc, sigma, 1.0, _resolve_mu(mu, sigma), d1=int(d1), d2=int(d2)
    )


def build_dense_sampler(cov, locations=None, mu="zero", sigma_bar=None):
    cov = np.asarray(cov, dtype=float)
    if cov.ndim != 2 or cov.shape[0] != cov.shape[1] or not np.allclose(cov, cov.T):
        raise ValueError("cov must be a symmetric square matrix")
    sigma = np.sqrt(np.clip(np.diag(cov), 0.0, None))
    if locations is None:
        locations = np.arange(1, cov.shape[0] + 1, dtype=float)
    sb = float(sigma.max()) if sigma_bar is None else float(sigma_bar)
    return GaussianFieldModel("dense-cholesky", locations, sigma, sb, _resolve_mu(mu, sigma), cov=cov)


def model_from_config(config):
    """Build a model from ``{backend, hurst?, d, horizon?, mu}``."""
    backend = config.get("backend", "fbm-circulant")
    mu = config.get("mu", "brown-resnick")
    if backend == "fbm-circulant":
        return build_fbm_sampler(config["hurst"], int(config["d"]), config.get("horizon", 1.0), mu)
    if backend == "bm-grid":
        if "locations" in config:
            return build_bm_sampler(config["locations"], mu=mu)
        return build_bm_sampler(d=int(config["d"]), horizon=config.get("horizon", 1.0), mu=mu)
    if backend == "brownian-sheet-grid":
        d1 = int(config.get("d1", config.get("d")))
        d2 = int(config.get("d2", d1))
        return build_brownian_sheet_sampler(d1, d2, mu)
    if backend == "dense-cholesky":
        return build_dense_sampler(config["cov"], config.get("locations"), mu)
    raise ValueError(f"unknown backend {backend!r}")


# -- operations ------------------------------------------------------------------
def sample(model, stream):
    return FieldVector.of(model.sample_block(stream, 1)[0])


def conditioned_sample(model, a, C, n, stream):
    """Draw from the proposal P^(n) that forces some coordinate above a log n + C.

    Returns ``(FieldVector, nu)`` where ``nu`` is the forced coordinate.
    """
    boundary = a * np.log(n) + C
    values, nu = _conditioned_values(model, boundary, stream)
    return FieldVector.of(values), nu


def _conditioned_values(model, boundary, stream):
    log_tails, log_total = model.log_tails(boundary)
    if not np.isfinite(log_total):
        raise FloatingPointError("boundary beyond the support of every coordinate")
    cum = np.cumsum(np.exp(log_tails - log_total))
    nu = int(np.searchsorted(cum, stream.uniform() * cum[-1], side="right"))
    nu = min(nu, model.d - 1)
    s = model.sigma[nu]
    if s <= 0.0:
        # only reachable for a negative boundary; the constraint is void
        return model.sample_block(stream, 1)[0], nu
    x_nu = normal.sample_truncated_normal_above(s, boundary, stream.uniform())
    y = model.sample_block(stream, 1)[0]
    w = model.cov_column(nu) / (s * s)
    out = y + w * (x_nu - y[nu])
    out[nu] = x_nu
    return out, nu


def rn_derivative_nominal_over_conditional(model, x, n, a, C):
    """dP/dP^(n) at x: sum of coordinate tails over the number of exceedances."""
    values = x.values if isinstance(x, FieldVector) else np.asarray(x, dtype=float)
    boundary = a * np.log(n) + C
    count = int(np.count_nonzero(values > boundary))
    if count == 0:
        raise ValueError("no coordinate exceeds the boundary")
    _, log_total = model.log_tails(boundary)
    return float(np.exp(log_total)) / count


def check_holder_increments(model, c, beta, n_pairs=200, rng=None):
    """Advisory check of Var(X(s)-X(t)) <= c |s-t|^beta on random location pairs."""
    rng = np.random.default_rng(0) if rng is None else rng
    i = rng.integers(0, model.d, n_pairs)
    j = rng.integers(0, model.d, n_pairs)
    ok = True
    worst = 0.0
    loc = model.locations.reshape(model.d, -1)
    for a_, b_ in zip(i, j):
        if a_ == b_:
            continue
        col = model.cov_column(b_)
        var = model.sigma[a_] ** 2 + model.sigma[b_] ** 2 - 2.0 * col[a_]
        dist = float(np.linalg.norm(loc[a_] - loc[b_]))
        ratio = var / (c * dist**beta)
        worst = max(worst, ratio)
        ok &= ratio <= 1.0 + 1e-9
    return bool(ok), worst
