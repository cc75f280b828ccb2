"""Tolerance-enforced simulation of Brown-Resnick fields on [0, 1].

Each X_n is Brownian motion in its Schauder expansion
``X_n(t) = sum_m lambda_m Z_{m,n} Lambda_m(t)``. The output M_delta is a
maximum of N piecewise-linear functions with ``sup_t |M - M_delta| <= delta``
almost surely.

The construction splits every X_n at a dyadic level J:

* the coarse part (levels below J) is the vector of X_n at the nodes
  i / 2^J; its maxima are controlled by Gaussian record breaking with the
  boundary ``a_x log n + c_x``;
* the fine part (levels J and up) is controlled by records of the
  coefficients, ``|Z_{m,n}| > a(m) + a(n)``, sampled with SampleRecordsZ.

Fine coefficients are never stored. Each is a deterministic function of a
per-path key, of (m, n), and of its conditional law (above or below the
record threshold), so any part of the series can be generated on demand.
Evaluating M_delta at a point costs O(N log K).

The literal one-level scheme (records over all coefficients) is also
provided through ``sample_records_z``, ``xi0``, ``xi1`` and ``compute_N_xi``.
"""

import json
import math
from dataclasses import dataclass, field

import numpy as np
from scipy import special

from . import kernels, normal
from .fields import _conditioned_values, build_bm_sampler
from .records import RecordParams, algorithm_x, extend_x, smallest_true
from .walk import algorithm_s, extend_walk, renewal_model

__all__ = [
    "theta_index",
    "eta_inverse",
    "WaveletBasis",
    "brownian_basis",
    "basis_eval",
    "coefficient",
    "TesParams",
    "gaussian_tes_constants",
    "sample_records_z",
    "xi0",
    "xi1",
    "xi1_sharp",
    "truncation_error_bound",
    "compute_N_xi",
    "TesConfig",
    "TesRepresentation",
    "algorithm_tes",
    "eval_rep",
    "sup_over",
    "integral",
]

_LOG2E = math.log2(math.e)


# -- index order ---------------------------------------------------------------------
def theta_index(m, n):
    """Position of (m, n) in the order by m + n, then by m."""
    m = np.asarray(m, dtype=np.int64)
    n = np.asarray(n, dtype=np.int64)
    if np.any(m < 0) or np.any(n < 1):
        raise ValueError("need m >= 0 and n >= 1")
    s = m + n
    out = s * (s - 1) // 2 + m + 1
    return int(out) if out.ndim == 0 else out


def eta_inverse(theta):
    """(m, n) with theta_index(m, n) = theta."""
    theta = int(theta)
    if theta < 1:
        raise ValueError("theta must be >= 1")
    s = (1 + math.isqrt(8 * (theta - 1) + 1)) // 2
    m = theta - 1 - s * (s - 1) // 2
    return m, s - m


# -- basis ---------------------------------------------------------------------------
@dataclass(frozen=True)
class WaveletBasis:
    """Lambda_0(t) = t and dyadic hats Lambda_{2^j+k}(t) = Lambda_1(2^j t - k)."""

    alpha: float = 0.5
    lambda0: float = 1.0
    lambda_prime: float = 0.5

    def coefficient(self, m):
        m = int(m)
        if m == 0:
            return self.lambda0
        j = m.bit_length() - 1
        return self.lambda_prime * 2.0 ** (-self.alpha * j)

    def eval(self, m, t):
        t = np.asarray(t, dtype=float)
        inside = (t >= 0.0) & (t <= 1.0)
        if m == 0:
            out = np.where(inside, t, 0.0)
        else:
            j = int(m).bit_length() - 1
            x = 2.0**j * t - (m - 2**j)
            out = np.where(inside & (x >= 0.0) & (x <= 1.0), 1.0 - np.abs(2.0 * x - 1.0), 0.0)
        return out if out.ndim else float(out)


def brownian_basis():
    # unit-peak hats: the midpoint of a bridge over length 2^-j has sd 2^(-j/2) / 2
    return WaveletBasis(0.5, 1.0, 0.5)


def basis_eval(basis, m, t):
    return basis.eval(m, t)


def coefficient(basis, m):
    return basis.coefficient(m)


# -- record constants ----------------------------------------------------------------
@dataclass(frozen=True)
class TesParams:
    """a(n) = rho log(n+1)^b and the tail bound Gamma for the coefficient records.

    ``offset`` shifts the coefficient index: pair (m, n) stands for
    coefficient m + offset of row n.
    """

    rho: float = 4.5
    b: float = 0.5
    theta0: int = 3
    gamma: float = 0.5
    offset: int = 0

    def a(self, n):
        n = np.asarray(n, dtype=float)
        out = self.rho * np.log1p(n) ** self.b
        return out if out.ndim else float(out)

    def ell(self, r):
        return math.ceil(math.sqrt(2.0 * r + 0.25) - 0.5)

    def Gamma(self, r):
        e = 0.5 * self.rho**2
        base = self.ell(r) - 1 + self.offset
        if base <= 0:
            return math.inf
        return base ** (2.0 - e) / (e - 2.0)

    def threshold(self, theta):
        m, n = eta_inverse(theta)
        return self.a(m + self.offset) + self.a(n)

    def log_record_prob(self, theta):
        """log P(|Z| > a(m) + a(n)) for the pair at position theta."""
        return math.log(2.0) + float(normal.std_normal_log_sf(self.threshold(theta)))


def gaussian_tes_constants(rho=4.5, b=0.5, offset=0, gamma=0.5, theta0=None):
    """Constants for Gaussian coefficients with H = phi.

    theta0 defaults to the first position where a(m) + a(n) >= 2 sqrt(2 pi),
    beyond which P(|Z| > a(m) + a(n)) <= phi(a(m)) phi(a(n)).
    """
    if b != 0.5:
        raise ValueError("only b = 1/2 is supported for Gaussian coefficients")
    if rho <= 4.0:
        raise ValueError("rho must exceed 4")
    p = TesParams(float(rho), float(b), 0, float(gamma), int(offset))
    level = 2.0 * math.sqrt(2.0 * math.pi)
    if theta0 is None:
        theta0 = 1
        while p.threshold(theta0) < level:
            theta0 += 1
    else:
        for th in range(int(theta0) + 1, int(theta0) + 200):
            if p.threshold(th) < level:
                raise ValueError("tail comparison fails beyond the given theta0")
    p = TesParams(float(rho), float(b), int(theta0), float(gamma), int(offset))
    if not p.Gamma(p.theta0 + 1) < 1.0:
        raise ValueError("Gamma must be below 1 beyond theta0")
    return p


def sample_records_z(params, stream, max_iter=10**8):
    """Positions theta > theta0 where |Z_{m,n}| exceeds a(m) + a(n).

    Runs the (u, d, V) loop on complements: ubar = 1 - u, dbar = 1 - d and
    W = 1 - V, which keeps full precision when the record probabilities are
    tiny.
    """
    G = params.theta0
    out = []
    iters = 0
    while True:
        ubar, dbar, log_u = 0.0, 1.0, 0.0
        W = stream.uniform()
        while ubar < W < dbar:
            G += 1
            iters += 1
            if iters > max_iter:
                raise RuntimeError(f"SampleRecordsZ exceeded {max_iter} iterations at G = {G}")
            dbar = min(dbar, ubar + params.Gamma(G) * (1.0 - ubar))
            log_u += math.log1p(-math.exp(params.log_record_prob(G)))
            ubar = -math.expm1(log_u)
        if W <= ubar:
            out.append(G)
        else:
            return out


# -- truncation bounds ---------------------------------------------------------------
def _floor_log2(r):
    r = int(r)
    if r < 1:
        raise ValueError("r must be >= 1")
    return r.bit_length() - 1


def xi0(r, basis):
    """Bound on sup_t sum_{m >= r} lambda_m |Lambda_m(t)|."""
    s = 2.0 ** (-basis.alpha)
    return basis.lambda_prime / (1.0 - s) * s ** _floor_log2(r)


def xi1(r, basis, rho):
    """Bound on sup_t sum_{m >= r} lambda_m a(m) |Lambda_m(t)| in closed form."""
    s = 2.0 ** (-basis.alpha)
    return rho / _LOG2E * (_floor_log2(r) + s / (1.0 - s) + 2.0) * xi0(r, basis)


_XI1_CACHE = {}


def xi1_sharp(r, basis, rho, b=0.5):
    """Level-by-level version of xi1: sum_j lambda' 2^(-alpha j) rho ((j+1) log 2)^b."""
    j0 = _floor_log2(r)
    key = (j0, basis, rho, b)
    if key not in _XI1_CACHE:
        total, j = 0.0, j0
        while True:
            term = basis.lambda_prime * 2.0 ** (-basis.alpha * j) * rho * ((j + 1) * math.log(2.0)) ** b
            total += term
            if term < 1e-18 * total:
                break
            j += 1
        _XI1_CACHE[key] = total
    return _XI1_CACHE[key]


def truncation_error_bound(k, n, basis, params, n_x=None, sharp=False):
    """xi1(k) + xi0(k) a(n): bound on sup_t |X_n(t) - X_n(t; k)| once k >= N_X."""
    if n_x is not None and k < n_x:
        raise ValueError("the bound needs k >= N_X")
    x1 = xi1_sharp(k, basis, params.rho, params.b) if sharp else xi1(k, basis, params.rho)
    return x1 + xi0(k, basis) * params.a(n)


def _last_violation(p, q, r, params, cap):
    """Smallest n with p log n' - q a(n') + r >= 0 for every n' >= n.

    For p > 0 and b < 1 the left side eventually increases in log n. Raises
    when that n exceeds ``cap``; the message carries log n.
    """
    def D(y):
        return p * y - q * params.rho * np.log1p(np.exp(np.minimum(y, 700.0))) ** params.b + r

    y = np.linspace(0.0, math.log(cap), 20001)
    bad = np.flatnonzero(D(y) < 0.0)
    if bad.size == 0:
        return 1
    if bad[-1] == y.size - 1:
        big = np.linspace(math.log(cap), 1e5, 200001)
        tail = np.flatnonzero(D(big) < 0.0)
        log_n = big[tail[-1] + 1] if tail[-1] + 1 < big.size else math.inf
        raise OverflowError(f"N_xi = exp({log_n:.1f}) exceeds the cap {cap:.0e}")
    lo = max(1, math.floor(math.exp(y[bad[-1]])))

    def ok(n):
        return n > lo and D(math.log(n)) >= 0.0

    n = smallest_true(ok, math.ceil(math.exp(y[bad[-1] + 1])))
    window = np.log(np.arange(n, n + 1000, dtype=float))
    if np.any(D(window) < 0.0):
        raise ArithmeticError("N_xi window check failed")
    return n


def compute_N_xi(A1, inf_X1, N_X, params, basis, cap=1e12):
    """Smallest n from which the one-level dominance inequality holds for good.

    With a(n) = rho sqrt(log(n+1)) and the xi bounds above, the inequality
    ``(a(0) lambda_0 + xi1(1)) + (lambda_0 + xi0(1)) a(n) - log(n gamma)
    <= inf_t X_1(t; N_X) - log A_1 - xi1(N_X) - xi0(N_X) a(n)`` needs
    log n of several hundred, so this raises for any practical cap.
    """
    k = max(int(N_X), 1)
    q = basis.lambda0 + xi0(1, basis) + xi0(k, basis)
    r = (inf_X1 - math.log(A1) - xi1(k, basis, params.rho) - params.a(0) * basis.lambda0
         - xi1(1, basis, params.rho) + math.log(params.gamma))
    return _last_violation(1.0, q, r, params, cap)


# -- counter-based coefficients ------------------------------------------------------
_GOLDEN = np.uint64(0x9E3779B97F4A7C15)
_M1 = np.uint64(0xBF58476D1CE4E5B9)
_M2 = np.uint64(0x94D049BB133111EB)
_M3 = np.uint64(0xD1B54A32D192ED03)


def _mix(z):
    z = (z ^ (z >> np.uint64(30))) * _M1
    z = (z ^ (z >> np.uint64(27))) * _M2
    return z ^ (z >> np.uint64(31))


def _hash_uniform(key, n, m):
    """Uniform(0, 1) keyed by (key, n, m): SplitMix64 finalizer on the counter."""
    with np.errstate(over="ignore"):
        k = np.uint64(key)
        row = _mix(k + np.asarray(n, dtype=np.uint64) * _GOLDEN)
        z = _mix(row ^ (np.asarray(m, dtype=np.uint64) * _M3 + _GOLDEN))
    return ((z >> np.uint64(11)).astype(float) + 0.5) * 2.0**-53


def _inner_z(c, u):
    """Z given |Z| <= c, by inversion of one uniform."""
    lo = special.ndtr(-c)
    return special.ndtri(lo + u * (1.0 - 2.0 * lo))


def _outer_z(c, u):
    """Z given |Z| > c; the sign comes from u < 1/2."""
    neg = u < 0.5
    v = np.where(neg, 2.0 * u, 2.0 * u - 1.0)
    x = normal.sample_truncated_normal_above(1.0, c, v)
    return np.where(neg, -x, x)


# -- hybrid algorithm ----------------------------------------------------------------
@dataclass(frozen=True)
class TesConfig:
    """Split level J, the coarse record boundary a_x log n + c_x, and the lower-bound refinement.

    The first ``refine_rows`` rows are drawn in full and their series is
    expanded ``refine_depth`` levels past J to bound inf_t M from below.
    """

    level: int = 10
    a_x: float = 0.2
    c_x: float = 4.5
    delta_x: float = 0.5
    rho: float = 4.5
    gamma: float = 0.5
    mu: str = "brown-resnick"
    refine_rows: int = 8
    refine_depth: int = 4


@dataclass
class TesRepresentation:
    key: int
    level: int
    K: int
    delta: float
    N: int
    N_A: int
    N_X: int
    N_xi: int
    N_fine: int
    records: list
    log_A: np.ndarray
    rows: np.ndarray
    nodes: np.ndarray
    active: np.ndarray
    lower: float
    rho: float = 4.5
    gamma: float = 0.5
    mu: str = "brown-resnick"
    basis: WaveletBasis = field(default_factory=brownian_basis)
    draws: int = 0

    @property
    def cells(self):
        return 2**self.level

    @property
    def K_delta(self):
        return self.K

    def params(self):
        return TesParams(self.rho, 0.5, 0, self.gamma, 0)

    def with_delta(self, delta):
        """The same draw truncated for another tolerance."""
        out = TesRepresentation(**{f: getattr(self, f) for f in self.__dataclass_fields__})
        out.delta = float(delta)
        out.K = _k_delta(delta, self.N, self.level, self.records, self.basis, self.rho)
        return out

    def coefficients(self, n, m):
        """Z_{m,n} for fine indices m >= 2^level (vectorized over m)."""
        m = np.asarray(m, dtype=np.int64)
        if np.any(m < self.cells):
            raise ValueError("coarse coefficients are not stored per index")
        p = self.params()
        c = p.a(m) + p.a(n)
        u = _hash_uniform(self.key, n, m)
        z = _inner_z(c, u)
        hit = [mm for (mm, nn) in self.records if nn == n]
        if hit:
            sel = np.isin(m, hit)
            z = np.where(sel, _outer_z(c, u), z)
        return z

    def mu_of(self, t):
        t = np.asarray(t, dtype=float)
        return -0.5 * t if self.mu == "brown-resnick" else np.zeros_like(t)

    def row_values(self, i, t):
        """X_n(t; K) for stored row i at points t (dyadic descent)."""
        n = int(self.rows[i])
        t = np.asarray(t, dtype=float)
        grid = np.linspace(0.0, 1.0, self.cells + 1)
        out = np.interp(t, grid, self.nodes[i])
        top = _floor_log2(self.K)
        lp, al = self.basis.lambda_prime, self.basis.alpha
        for j in range(self.level, top + 1):
            scale = 2.0**j
            k = np.minimum(np.floor(t * scale), scale - 1).astype(np.int64)
            m = (1 << j) + k
            use = m <= self.K
            if not np.any(use):
                continue
            x = t * scale - k
            hat = 1.0 - np.abs(2.0 * x - 1.0)
            z = self.coefficients(n, np.where(use, m, 1 << j))
            out = out + np.where(use, lp * 2.0 ** (-al * j) * z * hat, 0.0)
        return out

    def row_grid(self, i, cells, depth):
        """X_n(t; K) on the grid of spacing 2^-(level+depth) over the given coarse cells.

        Returns an array of shape (len(cells), 2^depth + 1).
        """
        n = int(self.rows[i])
        cells = np.asarray(cells, dtype=np.int64)
        vals = np.stack([self.nodes[i][cells], self.nodes[i][cells + 1]], axis=1)
        lp, al = self.basis.lambda_prime, self.basis.alpha
        for d in range(depth):
            j = self.level + d
            per = 1 << d
            m = (1 << j) + cells[:, None] * per + np.arange(per)[None, :]
            z = np.where(m <= self.K, self.coefficients(n, m.ravel()).reshape(m.shape), 0.0)
            vals = kernels.midpoint_refine(vals, lp * 2.0 ** (-al * j) * z)
        return vals

    # -- queries -----------------------------------------------------------------
    def eval(self, t):
        return eval_rep(self, t)

    def sup(self, lo=0.0, hi=1.0):
        return sup_over(self, (lo, hi))

    def integral(self, lo=0.0, hi=1.0):
        return integral(self, (lo, hi))

    def to_json(self):
        return json.dumps({
            "key": str(self.key), "level": self.level, "K": self.K, "delta": self.delta,
            "N": self.N, "N_A": self.N_A, "N_X": self.N_X, "N_xi": self.N_xi,
            "N_fine": self.N_fine, "records": [list(r) for r in self.records],
            "log_A": self.log_A.tolist(), "rows": self.rows.tolist(),
            "nodes": self.nodes.tolist(),
            "active": [np.flatnonzero(a).tolist() for a in self.active],
            "lower": self.lower, "rho": self.rho, "gamma": self.gamma, "mu": self.mu,
            "basis": [self.basis.alpha, self.basis.lambda0, self.basis.lambda_prime],
            "draws": self.draws,
        })

    @classmethod
    def from_json(cls, text):
        d = json.loads(text)
        cells = 2 ** d["level"]
        active = np.zeros((len(d["rows"]), cells), dtype=bool)
        for i, idx in enumerate(d["active"]):
            active[i, idx] = True
        return cls(
            key=int(d["key"]), level=d["level"], K=d["K"], delta=d["delta"], N=d["N"],
            N_A=d["N_A"], N_X=d["N_X"], N_xi=d["N_xi"], N_fine=d["N_fine"],
            records=[tuple(r) for r in d["records"]], log_A=np.array(d["log_A"]),
            rows=np.array(d["rows"], dtype=np.int64),
            nodes=np.array(d["nodes"], dtype=float).reshape(len(d["rows"]), cells + 1),
            active=active, lower=d["lower"], rho=d["rho"], gamma=d["gamma"], mu=d["mu"],
            basis=WaveletBasis(*d["basis"]), draws=d.get("draws", 0),
        )


def _k_delta(delta, N, level, records, basis, rho):
    """Smallest K >= max(2^level, record indices) with xi1*(K) + xi0(K) a(N) <= delta."""
    p = TesParams(rho, 0.5, 0, 0.5, 0)
    lower = max([2**level] + [m for m, _ in records])
    aN = p.a(N)
    j = _floor_log2(lower)
    while xi1_sharp(2**j, basis, rho) + xi0(2**j, basis) * aN > delta:
        j += 1
    return max(lower, 2**j)


def _fine_bound(level, n, basis, rho):
    p = TesParams(rho, 0.5, 0, 0.5, 0)
    r = 2**level
    return xi1_sharp(r, basis, rho) + xi0(r, basis) * p.a(n)


def _cell_bounds(nodes, log_A, bound):
    """Per-cell lower and upper bounds of -log A_n + X_n(t) for a block of rows."""
    lo = np.minimum(nodes[:, :-1], nodes[:, 1:])
    hi = np.maximum(nodes[:, :-1], nodes[:, 1:])
    shift = -log_A[:, None]
    return lo + shift - bound[:, None], hi + shift + bound[:, None]


def _refined_lower(probe, n, nodes, log_A_n, depth):
    """Per-cell lower bound of -log A_n + X_n(t) from the series truncated at 2^(J+depth).

    Returns None when the row has a fine record at or beyond the truncation.
    """
    top = 2 ** (probe.level + depth)
    if any(nn == n and mm >= top for mm, nn in probe.records):
        return None
    probe.rows = np.array([n], dtype=np.int64)
    probe.nodes = nodes[None, :]
    probe.K = top - 1
    vals = probe.row_grid(0, np.arange(probe.cells), depth)
    tail = _fine_bound(probe.level + depth, n, probe.basis, probe.rho)
    return vals.min(axis=1) - log_A_n - tail


def _sparse_rows(model, xp, start, stop, u, forced, stream):
    """Rows start..stop given no record, drawn only where the maximum may reach u.

    Row n has the law of X given max_i X(t_i) <= b_n. Its indicator of
    {max >= u_n} is drawn by thinning: a coin with the bound d Phibar(u_n),
    then the union-bound tail q_n, then a draw from the conditioned law that
    is kept with probability one over its exceedance count. Rows failing
    max <= b_n are redrawn. Returns {n: values} for the rows that were drawn.
    """
    out = {}
    if stop < start:
        return out
    n = np.arange(start, stop + 1)
    b = xp.boundary(n)
    u = np.asarray(u, dtype=float)
    log_qbar = math.log(model.d) + normal.std_normal_log_sf(np.maximum(u, 0.0))
    coins = stream.uniform(n.size)
    todo = (u < b) & ((u <= 0.0) | (log_qbar >= 0.0) | (np.log(coins) < log_qbar))
    todo |= np.isin(n, list(forced))
    for i in np.flatnonzero(todo):
        row = int(n[i])
        ui = -math.inf if row in forced else float(u[i])
        if ui <= 0.0 or log_qbar[i] >= 0.0:
            out_row = _direct_row(model, b[i], ui, stream)
        else:
            out_row = _thinned_row(model, b[i], ui, coins[i] * math.exp(log_qbar[i]), stream)
        if out_row is not None:
            out[row] = out_row
    return out


def _direct_row(model, b, u, stream):
    while True:
        x = model.sample_block(stream, 1)[0]
        top = x.max()
        if top <= b:
            return x if top >= u else None


def _thinned_row(model, b, u, first_coin, stream):
    log_q = model.log_tails(u)[1]
    if log_q >= 0.0:
        return _direct_row(model, b, u, stream)
    coin = first_coin
    while True:
        if math.log(coin) >= log_q:
            return None
        y, _ = _conditioned_values(model, u, stream)
        if stream.uniform() * np.count_nonzero(y > u) > 1.0:
            return None
        if y.max() <= b:
            return y
        coin = stream.uniform()


def algorithm_tes(delta, stream, config=None, basis=None):
    """Build M_delta for Brownian Brown-Resnick on [0, 1].

    Steps: fine coefficient records, arrivals with their last passage N_A,
    coarse records with N_X, a lower bound L of inf_t M(t) from the first
    rows, the index N_xi past which no term can reach L, then the rows up to
    N that may reach L on some coarse cell, and K_delta.
    """
    cfg = TesConfig() if config is None else config
    basis = brownian_basis() if basis is None else basis
    if not 0.0 < delta:
        raise ValueError("delta must be positive")
    J = int(cfg.level)
    cells = 2**J
    key = int(stream.generator.integers(0, 2**63))

    # fine records over (m - 2^J, n); C1 holds from the first pair on
    fine = gaussian_tes_constants(cfg.rho, 0.5, offset=cells, gamma=cfg.gamma, theta0=0)
    records = []
    for th in sample_records_z(fine, stream):
        mm, nn = eta_inverse(th)
        records.append((mm + cells, nn))
    n_fine = max([n for _, n in records], default=0)
    record_rows = {n for _, n in records}

    renewal = renewal_model(gamma=cfg.gamma)
    path = algorithm_s(renewal, 1, stream)
    model = build_bm_sampler(d=cells, mu="zero")
    model.draw_counter = 0
    xp = RecordParams.build(cells, cfg.delta_x, cfg.a_x, cfg.c_x, model.sigma_bar)
    xrun = algorithm_x(model, xp, 0, stream)
    extend_x(model, xp, xrun, cfg.refine_rows - xrun.length, stream)
    dense = np.concatenate([np.zeros((xrun.length, 1)), xrun.values(model)], axis=1)
    n_dense = dense.shape[0]

    def arrivals(count):
        nonlocal path
        path = extend_walk(renewal, path, count - len(path), stream)
        return np.log(np.cumsum(path.taus[:count]))

    log_A = arrivals(max(n_dense, len(path)))
    idx = np.arange(1, n_dense + 1)
    bound = _fine_bound(J, idx, basis, cfg.rho)
    lo, _ = _cell_bounds(dense, log_A[:n_dense], bound)
    lo[np.isin(idx, list(record_rows))] = -np.inf
    L_cells = lo.max(axis=0)
    probe = TesRepresentation(
        key=key, level=J, K=cells, delta=float(delta), N=0, N_A=0, N_X=0, N_xi=0,
        N_fine=0, records=records, log_A=log_A, rows=idx, nodes=dense,
        active=np.ones((1, cells), dtype=bool), lower=0.0, rho=cfg.rho, basis=basis,
    )
    for i in range(min(cfg.refine_rows, n_dense)):
        ref = _refined_lower(probe, i + 1, dense[i], log_A[i], cfg.refine_depth)
        if ref is not None:
            L_cells = np.maximum(L_cells, ref)
    L = float(L_cells.min())

    p = TesParams(cfg.rho, 0.5, 0, cfg.gamma, 0)
    r = L + math.log(cfg.gamma) - cfg.c_x - xi1_sharp(cells, basis, cfg.rho)
    n_xi = _last_violation(1.0 - cfg.a_x, xi0(cells, basis), r, p, 1e12)
    N = max(path.n_s, xrun.n_x, n_fine, n_xi, n_dense)
    log_A = arrivals(max(N, len(path)))[:N]

    # beyond the dense rows a row matters only if max X_n >= L + log A_n - B_n
    tail_idx = np.arange(n_dense + 1, N + 1)
    u = L + log_A[n_dense:] - _fine_bound(J, tail_idx, basis, cfg.rho)
    sparse = _sparse_rows(model, xp, n_dense + 1, N, u, record_rows, stream)
    if sparse:
        keys = sorted(sparse)
        idx = np.concatenate([idx, keys])
        dense = np.concatenate([dense, np.concatenate(
            [np.zeros((len(keys), 1)), np.stack([sparse[k] for k in keys])], axis=1)])

    bound = _fine_bound(J, idx, basis, cfg.rho)
    _, hi = _cell_bounds(dense, log_A[idx - 1], bound)
    act = hi >= L_cells[None, :]
    act[np.isin(idx, list(record_rows))] = True
    sel = act.any(axis=1)
    K = _k_delta(delta, N, J, records, basis, cfg.rho)
    return TesRepresentation(
        key=key, level=J, K=K, delta=float(delta), N=N, N_A=path.n_s, N_X=xrun.n_x,
        N_xi=n_xi, N_fine=n_fine, records=records, log_A=log_A[idx[sel] - 1],
        rows=idx[sel], nodes=dense[sel], active=act[sel], lower=L, rho=cfg.rho,
        gamma=cfg.gamma, mu=cfg.mu, basis=basis, draws=model.draw_counter,
    )


# -- queries -------------------------------------------------------------------------
def _cell_of(rep, t):
    return np.minimum(np.floor(t * rep.cells), rep.cells - 1).astype(np.int64)


def eval_rep(rep, t):
    """M_delta at points t in [0, 1]."""
    t = np.atleast_1d(np.asarray(t, dtype=float))
    if np.any((t < 0.0) | (t > 1.0)):
        raise ValueError("t must lie in [0, 1]")
    cell = _cell_of(rep, t)
    out = np.full(t.shape, -np.inf)
    for i in range(rep.rows.size):
        mask = rep.active[i, cell]
        if np.any(mask):
            v = rep.row_values(i, t[mask]) - rep.log_A[i]
            out[mask] = np.maximum(out[mask], v)
    return out + rep.mu_of(t)


def _depth(rep):
    """Grid refinement below the coarse level on which M_delta is linear."""
    return _floor_log2(rep.K) + 1 - rep.level


def _cell_chunks(rep, lo, hi):
    """Grid times and values (rows, cells, points) over chunks of coarse cells.

    Rows inactive on a cell hold -inf there.
    """
    if not 0.0 <= lo < hi <= 1.0:
        raise ValueError("need 0 <= lo < hi <= 1")
    first = int(_cell_of(rep, np.array([lo]))[0])
    last = int(_cell_of(rep, np.array([hi]))[0])
    depth = _depth(rep)
    per = 2**depth
    step = max(1, 2**18 // (per * max(rep.rows.size, 1)))
    for start in range(first, last + 1, step):
        cells = np.arange(start, min(last + 1, start + step))
        vals = np.full((rep.rows.size, cells.size, per + 1), -np.inf)
        for i in range(rep.rows.size):
            act = rep.active[i, cells]
            if np.any(act):
                vals[i, act] = rep.row_grid(i, cells[act], depth) - rep.log_A[i]
        t = (cells[:, None] + np.arange(per + 1)[None, :] / per) / rep.cells
        yield t, vals


def sup_over(rep, interval=(0.0, 1.0)):
    """Exact supremum of M_delta on [lo, hi]: the maximum over breakpoints and ends."""
    lo, hi = map(float, interval)
    best = float(eval_rep(rep, [lo, hi]).max())
    for t, vals in _cell_chunks(rep, lo, hi):
        m = vals.max(axis=0) + rep.mu_of(t)
        inside = (t >= lo) & (t <= hi)
        if np.any(inside):
            best = max(best, float(m[inside].max()))
    return best


def _envelope_integral(x0, x1, y0, y1):
    """Integral over [x0, x1] of the max of lines through (x0, y0[i]) and (x1, y1[i])."""
    ok = np.isfinite(y0) & np.isfinite(y1)
    y0, y1 = y0[ok], y1[ok]
    pts = [0.0, 1.0]
    for i in range(y0.size):
        for j in range(i + 1, y0.size):
            den = (y0[i] - y0[j]) - (y1[i] - y1[j])
            if den != 0.0:
                s = (y0[i] - y0[j]) / den
                if 0.0 < s < 1.0:
                    pts.append(s)
    s = np.unique(pts)
    env = (y0[:, None] * (1.0 - s) + y1[:, None] * s).max(axis=0)
    return float((x1 - x0) * np.sum(0.5 * (env[1:] + env[:-1]) * np.diff(s)))


def integral(rep, interval=(0.0, 1.0)):
    """Exact integral of M_delta over [lo, hi].

    On each grid interval every row is linear. Where one row is the largest
    at both ends it dominates the whole interval; elsewhere the upper
    envelope is built from the pairwise crossings.
    """
    lo, hi = map(float, interval)
    total = 0.0
    for t, vals in _cell_chunks(rep, lo, hi):
        t0, t1 = t[:, :-1].ravel(), t[:, 1:].ravel()
        y0 = vals[:, :, :-1].reshape(vals.shape[0], -1)
        y1 = vals[:, :, 1:].reshape(vals.shape[0], -1)
        x0, x1 = np.maximum(t0, lo), np.minimum(t1, hi)
        use = x1 > x0
        t0, t1, x0, x1, y0, y1 = t0[use], t1[use], x0[use], x1[use], y0[:, use], y1[:, use]
        w0, w1 = (x0 - t0) / (t1 - t0), (x1 - t0) / (t1 - t0)
        with np.errstate(invalid="ignore"):
            z0 = np.where(np.isfinite(y0), y0 + (y1 - y0) * w0, -np.inf)
            z1 = np.where(np.isfinite(y0), y0 + (y1 - y0) * w1, -np.inf)
        top0, top1 = z0.max(axis=0), z1.max(axis=0)
        total += float(np.sum(0.5 * (top0 + top1) * (x1 - x0)))
        for k in np.flatnonzero(z0.argmax(axis=0) != z1.argmax(axis=0)):
            chord = 0.5 * (top0[k] + top1[k]) * (x1[k] - x0[k])
            total += _envelope_integral(x0[k], x1[k], z0[:, k], z1[:, k]) - chord
    if rep.mu == "brown-resnick":
        total -= 0.25 * (hi * hi - lo * lo)
    return total
