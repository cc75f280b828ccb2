"""Record-breaking for maxima of iid Gaussian vectors.

For a sequence X_1, X_2, ... of iid copies of a Gaussian vector, the last
index N_X with ``max_i X_n(t_i) > a log n + C`` is finite. This module
samples the sequence jointly with N_X:

* the first ``n0`` vectors are drawn from the nominal law,
* each later record is proposed at distance K ~ g_{n0} with the record
  vector drawn from a tilted measure and accepted by a likelihood ratio,
* after the last record, vectors are drawn given they stay below the
  boundary.

Vectors are kept as blocks. A block is either stored or described by a
child seed, so long runs of nominal vectors are regenerated on demand
instead of being held in memory.
"""

import math
from dataclasses import dataclass, field

import numpy as np

from . import kernels, normal
from .fields import FieldVector, _conditioned_values
from .rng import RandomStream

__all__ = [
    "RecordParams",
    "RecordSegment",
    "XRun",
    "log_r_of",
    "r_of",
    "choose_n0",
    "smallest_true",
    "g_pmf",
    "log_g_pmf",
    "sample_K",
    "check_dominance",
    "sample_single_record",
    "sample_without_record_x",
    "algorithm_x",
]

_LOG_SQRT_2PI = 0.5 * math.log(2.0 * math.pi)
_N0_MAX = 2**63 - 1
# rows per generated chunk aim at this many doubles
_CHUNK_CELLS = 2**17


@dataclass(frozen=True)
class RecordParams:
    """Boundary ``a log n + C`` and the start index n0 of the record search."""

    a: float
    C: float
    delta: float
    n0: int
    sigma_bar: float

    @classmethod
    def build(cls, d, delta, a, C, sigma_bar):
        n0 = choose_n0(d, delta, a, C, sigma_bar)
        return cls(float(a), float(C), float(delta), int(n0), float(sigma_bar))

    def boundary(self, n):
        return self.a * np.log(n) + self.C


def _check_a(a):
    if not 0.0 < a <= 1.0:
        raise ValueError("a must lie in (0, 1]")


def log_r_of(y, a, C, sigma_bar):
    """log of r(y), the integral of phi((a log x + C)/sigma_bar) over [y, inf)."""
    s = sigma_bar / a
    y = np.asarray(y, dtype=float)
    z = (a * np.log(y) + C) / sigma_bar - s
    return -C / a + math.log(s) + 0.5 * s * s + normal.std_normal_log_sf(z)


def r_of(y, params):
    return np.exp(log_r_of(y, params.a, params.C, params.sigma_bar))


def choose_n0(d, delta, a, C, sigma_bar):
    """Smallest n0 with d r(n0) <= delta and a log n0 + C >= sigma_bar."""
    _check_a(a)
    if not 0.0 < delta < 1.0:
        raise ValueError("delta must lie in (0, 1)")
    if d < 1 or sigma_bar <= 0.0:
        raise ValueError("need d >= 1 and sigma_bar > 0")
    s = sigma_bar / a
    log_target = math.log(delta / d)

    def ok(n):
        return (a * math.log(n) + C >= sigma_bar
                and float(log_r_of(n, a, C, sigma_bar)) <= log_target)

    # solve d r(y) = delta on the log scale
    log_sf = log_target + C / a - math.log(s) - 0.5 * s * s
    logs = [(sigma_bar - C) / a, 0.0]
    if log_sf < 0.0:
        z = normal.std_normal_tail_inv(log_p=log_sf)
        logs.append((sigma_bar * (z + s) - C) / a)
    log_n = max(logs)
    if log_n > math.log(_N0_MAX) - 1.0:
        raise OverflowError(f"n0 = exp({log_n:.1f}) exceeds the 64-bit range")
    return smallest_true(ok, max(1, math.ceil(math.exp(log_n))))


def smallest_true(ok, guess):
    """Smallest integer n >= 1 with ok(n), for a predicate monotone in n.

    ``guess`` is a closed-form estimate; the answer is bracketed around it by
    doubling and then located by bisection.
    """
    lo, hi = guess - 1, guess
    step = 1
    while not ok(hi):
        lo, hi = hi, hi + step
        step *= 2
    step = 1
    while lo >= 1 and ok(lo):
        hi, lo = lo, max(0, lo - step)
        step *= 2
    # invariant: ok(hi), and lo < 1 or not ok(lo)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if mid >= 1 and ok(mid):
            hi = mid
        else:
            lo = mid
    return hi


def _log_phi(z):
    return -0.5 * z * z - _LOG_SQRT_2PI


def log_g_pmf(k, params):
    """log g_{n0}(k) for k >= 1."""
    a, C, sb, n0 = params.a, params.C, params.sigma_bar, params.n0
    k = np.asarray(k, dtype=float)
    if np.any(k < 1):
        raise ValueError("k must be >= 1")
    lr0 = log_r_of(n0, a, C, sb)
    lo = log_r_of(n0 + k - 1.0, a, C, sb)
    hi = log_r_of(n0 + k, a, C, sb)
    with np.errstate(divide="ignore", invalid="ignore"):
        exact = lo + np.log(-np.expm1(hi - lo)) - lr0
    # far out the difference of r loses digits; Simpson on the integrand instead
    y = n0 + k - 1.0
    f = [_log_phi((a * np.log(y + h) + C) / sb) for h in (0.0, 0.5, 1.0)]
    simpson = np.logaddexp(np.logaddexp(f[0], f[2]), f[1] + math.log(4.0)) - math.log(6.0) - lr0
    out = np.where(k < 1e6, exact, simpson)
    return out if out.ndim else float(out)


def g_pmf(k, params):
    return np.exp(log_g_pmf(k, params))


def sample_K(params, stream):
    """Draw K from g_{n0} by inversion of its tail r(n0 + k - 1)/r(n0)."""
    a, C, sb, n0 = params.a, params.C, params.sigma_bar, params.n0
    s = sb / a
    w0 = (a * math.log(n0) + C) / sb - s
    u = stream.uniform()
    log_p = math.log(u) + float(normal.std_normal_log_sf(w0))
    z = normal.std_normal_tail_inv(log_p=min(log_p, -1e-300))
    log_y = s * s - C / a + s * z
    if log_y > 43.0:
        # beyond int64 territory; returned as float, callers reject it cheaply
        return math.exp(log_y) - n0 if log_y < 700 else math.inf
    return max(1, math.ceil(math.exp(log_y) - n0))


def check_dominance(model, params, kmax=1000):
    """True when sum_i P(X(t_i) > a log(n0+k) + C) <= g_{n0}(k) for k <= kmax."""
    k = np.arange(1, kmax + 1, dtype=float)
    b = params.a * np.log(params.n0 + k) + params.C
    lg = log_g_pmf(k, params)
    # d * Phibar(b / sigma_bar) bounds the sum; only fall back to the exact sum if needed
    crude = math.log(model.d) + normal.std_normal_log_sf(b / params.sigma_bar)
    bad = crude > lg
    if not np.any(bad):
        return True
    for bi, lgi in zip(b[bad], lg[bad]):
        if model.log_tails(bi)[1] > lgi + 1e-12:
            return False
    return True


# -- vector blocks ---------------------------------------------------------------------
def _chunk_rows(d):
    return max(1, min(512, _CHUNK_CELLS // max(d, 1)))


@dataclass
class ArrayBlock:
    values: np.ndarray

    @property
    def count(self):
        return self.values.shape[0]

    def chunks(self, model):
        yield self.values


@dataclass
class SeedBlock:
    """``count`` nominal vectors generated from a child seed in fixed chunks."""

    seed_sequence: object
    count: int
    chunk: int
    counted: bool = False

    def chunks(self, model):
        stream = RandomStream.replay(self.seed_sequence)
        left = self.count
        while left > 0:
            k = min(self.chunk, left)
            # regeneration of an already counted block is free in the draw tally
            yield model.sample_block(stream, k, count=not self.counted)
            left -= k
        self.counted = True


def _new_seed_block(model, stream, count, commit=False):
    """Reserve a child seed for ``count`` vectors.

    With ``commit`` the vectors are counted as drawn now, even though they are
    generated later when first read.
    """
    (child,) = stream.seed_sequence.spawn(1)
    if commit:
        model.draw_counter += int(count)
    return SeedBlock(child, int(count), _chunk_rows(model.d), counted=commit)


def _check_block(model, block, n_start, params):
    """Generate the block, stopping at the first row above its boundary."""
    n = n_start
    ok = True
    stream = RandomStream.replay(block.seed_sequence)
    left = block.count
    while left > 0:
        k = min(block.chunk, left)
        rows = model.sample_block(stream, k)
        bound = params.a * np.log(np.arange(n, n + k, dtype=float)) + params.C
        if kernels.first_exceedance(rows, bound) >= 0:
            ok = False
            break
        n += k
        left -= k
    block.counted = True
    return ok


@dataclass
class RecordSegment:
    """Vectors X_{n+1}..X_{n+K} ending at a record."""

    blocks: list
    K: int

    def values(self, model):
        return np.concatenate([c for b in self.blocks for c in b.chunks(model)], axis=0)


@dataclass
class XRun:
    """Output of the record search: blocks covering X_1..X_{N_X + ell}."""

    blocks: list
    n_x: int
    length: int
    records: int
    first: FieldVector
    record_indices: list = field(default_factory=list)

    def iter_chunks(self, model):
        """Yield (first index, rows) over the whole sequence in order."""
        n = 1
        for b in self.blocks:
            for rows in b.chunks(model):
                yield n, rows
                n += rows.shape[0]

    def values(self, model):
        return np.concatenate([rows for _, rows in self.iter_chunks(model)], axis=0)


# -- record pieces -----------------------------------------------------------------------
def sample_single_record(model, params, n, stream):
    """Vectors up to the first record after n, or None when there is none.

    The cheap parts of the acceptance test run first: the likelihood ratio is
    bounded by the tail sum, so most proposals are rejected before any vector
    is drawn, and the K-1 nominal vectors are only drawn when the record
    vector itself is accepted.
    """
    if n < params.n0:
        raise ValueError("n must be at least n0")
    K = sample_K(params, stream)
    log_u = math.log(stream.uniform())
    if not math.isfinite(K):
        return None
    b = params.a * math.log(n + K) + params.C
    _, log_total = model.log_tails(b)
    log_gk = float(log_g_pmf(K, params))
    if log_u + log_gk > log_total:
        return None
    if K > 2**53:
        raise OverflowError("record distance beyond exact integer range")
    K = int(K)
    x_k, _ = _conditioned_values(model, b, stream)
    count = int(np.count_nonzero(x_k > b))
    if log_u + log_gk > log_total - math.log(count):
        return None
    blocks = []
    if K > 1:
        prefix = _new_seed_block(model, stream, K - 1)
        if not _check_block(model, prefix, n + 1, params):
            return None
        blocks.append(prefix)
    blocks.append(ArrayBlock(x_k[None, :]))
    return RecordSegment(blocks, K)


def _without_record_block(model, params, n, ell, stream):
    attempts = 0
    while True:
        attempts += 1
        block = _new_seed_block(model, stream, ell)
        if _check_block(model, block, n + 1, params):
            return block, attempts


def sample_without_record_x(model, params, n, ell, stream, return_attempts=False):
    """ell vectors X_{n+1}..X_{n+ell} given none exceeds a log(n+k) + C."""
    if ell < 1:
        raise ValueError("ell must be >= 1")
    block, attempts = _without_record_block(model, params, n, ell, stream)
    values = np.concatenate(list(block.chunks(model)), axis=0)
    return (values, attempts) if return_attempts else values


_DOMINANCE_OK = {}


def _verify_dominance(model, params):
    key = (id(model), params)
    if key not in _DOMINANCE_OK:
        if len(_DOMINANCE_OK) > 1024:
            _DOMINANCE_OK.clear()
        _DOMINANCE_OK[key] = check_dominance(model, params)
    if not _DOMINANCE_OK[key]:
        raise RuntimeError("g_{n0} does not dominate the tail sum; n0 is invalid")


def algorithm_x(model, params, ell, stream, first=None, verify=True):
    """Sample X_1..X_{N_X+ell} jointly with N_X.

    ``first`` may supply X_1 when it was drawn earlier (for instance to fix C
    from its minimum). Nominal runs are stored as seed blocks; use
    ``XRun.values`` or ``XRun.iter_chunks`` to read them.
    """
    if verify:
        _verify_dominance(model, params)
    if first is None:
        first = model.sample_block(stream, 1)[0]
    first = np.asarray(first, dtype=float)
    blocks = [ArrayBlock(first[None, :])]
    if params.n0 > 1:
        blocks.append(_new_seed_block(model, stream, params.n0 - 1, commit=True))
    eta, records, where = params.n0, 0, []
    while True:
        seg = sample_single_record(model, params, eta, stream)
        if seg is None:
            break
        blocks.extend(seg.blocks)
        eta += seg.K
        records += 1
        where.append(eta)
    n_x = eta
    if ell > 0:
        block, _ = _without_record_block(model, params, eta, ell, stream)
        blocks.append(block)
    return XRun(blocks, n_x, n_x + max(int(ell), 0), records, FieldVector.of(first), where)


def extend_x(model, params, run, ell, stream):
    """Append ell vectors beyond the end of ``run`` given no further record."""
    if ell <= 0:
        return run
    block, _ = _without_record_block(model, params, run.length, ell, stream)
    run.blocks.append(block)
    run.length += int(ell)
    return run
