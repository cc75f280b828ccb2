import math

import numpy as np
import pytest

from rbsim import RandomStream
from rbsim.walk import (
    StepLaw,
    StepCapError,
    algorithm_s,
    cramer_root,
    extend_walk,
    regularize,
    renewal_model,
    sample_downcrossing,
    sample_upcrossing,
    sample_without_record_s,
)
from conftest import ks2
from oracles.walk_oracle import last_passage_oracle, upcrossing_oracle


@pytest.fixture(scope="module")
def poisson():
    return renewal_model(gamma=0.5)


@pytest.fixture(scope="module")
def up_oracle():
    return upcrossing_oracle(-1.0, 120000, seed=1)


def test_cramer_root(poisson, frozen):
    assert cramer_root(poisson) == pytest.approx(frozen["cramer_root_exp1_gamma05"], abs=1e-10)
    th = poisson.theta
    assert math.exp(th * 0.5) / (1 + th) == pytest.approx(1.0, abs=1e-10)
    near = renewal_model(gamma=0.99)
    assert near.theta < 0.05
    assert near.theta == pytest.approx(frozen["cramer_root_exp1_gamma099"], rel=1e-8)


def test_tilted_drift_positive(poisson, frozen):
    t = poisson.tilted_taus(RandomStream(1), 10**5)
    drift = 0.5 - t
    assert drift.mean() > 0
    assert abs(drift.mean() - frozen["tilted_mean_step"]) < 3 * drift.std() / math.sqrt(t.size)


def test_no_root_when_gamma_too_large():
    with pytest.raises(ValueError):
        renewal_model(gamma=1.2)


def test_downcrossing(poisson):
    s = RandomStream(2)
    lens = []
    for _ in range(4000):
        v = sample_downcrossing(poisson, 0.0, s)
        assert v[-1] < 0 and np.all(v[:-1] >= 0)
        lens.append(v.size)
    rng = np.random.default_rng(3)
    ref = []
    for _ in range(4000):
        x, k = 0.0, 0
        while True:
            k += 1
            x += 0.5 - rng.exponential()
            if x < 0:
                break
        ref.append(k)
    se = math.sqrt(np.var(lens) / 4000 + np.var(ref) / 4000)
    assert abs(np.mean(lens) - np.mean(ref)) < 3 * se


def test_upcrossing_probability_and_length(poisson, up_oracle):
    hit, ref_len = up_oracle
    s = RandomStream(4)
    runs = [sample_upcrossing(poisson, -1.0, s) for _ in range(40000)]
    acc = np.array([r is not None for r in runs])
    p, q = acc.mean(), hit.mean()
    se = math.sqrt(p * (1 - p) / acc.size + q * (1 - q) / hit.size)
    assert abs(p - q) < 3 * se
    assert p <= math.exp(poisson.theta * -1.0) + 3 * se
    assert all(r[-1] >= 0 and np.all(r[:-1] < 0) for r in runs if r is not None)
    lens = [r.size for r in runs if r is not None]
    while len(lens) < 5000:
        r = sample_upcrossing(poisson, -1.0, s)
        if r is not None:
            lens.append(r.size)
    assert ref_len.size >= 5000
    assert ks2(np.array(lens[:5000]), ref_len[:5000]) < 0.03


def test_without_record(poisson):
    s = RandomStream(5)
    x = np.array([sample_without_record_s(poisson, -1.0, 1, s)[0] for _ in range(10**4)])
    assert np.all(x < 0)
    # oracle: one step from -1, kept when the truncated-horizon path never returns
    rng = np.random.default_rng(6)
    ref = []
    while len(ref) < 10**4:
        y = -1.0 + 0.5 - rng.exponential()
        if y >= 0:
            continue
        hit, _ = upcrossing_oracle(y, 1, seed=int(rng.integers(2**31)))
        if not hit[0]:
            ref.append(y)
    assert ks2(x, np.array(ref)) < 0.03


def test_algorithm_s_post_and_first_steps(poisson):
    s = RandomStream(7)
    first, ns = [], []
    for _ in range(10**4):
        p = algorithm_s(poisson, 3, s)
        v = p.values
        assert np.all(v[p.n_s:] < 0)
        assert len(p) >= p.n_s + 3
        first.append(v[1])
        ns.append(p.n_s)
    ref = 0.5 - np.random.default_rng(8).exponential(size=10**4)
    assert ks2(np.array(first), ref) < 0.02
    ns = np.array(ns)
    assert ns.std() / math.sqrt(ns.size) < 0.05 * ns.mean()


def test_algorithm_s_vs_last_passage_oracle(poisson):
    n = 10**4
    last, f5 = last_passage_oracle(n, seed=9)
    s = RandomStream(10)
    ours_ns, ours5 = [], []
    for _ in range(n):
        p = algorithm_s(poisson, 5, s)
        ours_ns.append(p.n_s)
        ours5.append(p.values[1:6])
    ours_ns = np.minimum(np.array(ours_ns) - 1, 20)
    ref_ns = np.minimum(last, 20)
    ours5, f5 = np.array(ours5), f5
    # coarse partition: (N_S - 1 capped at 20) x sign pattern of S_1, S_5 quantized
    def cells(ns, v):
        return ns * 16 + (v[:, 0] >= 0) * 8 + np.clip(np.floor(v[:, 4] + 3), 0, 7).astype(int)
    a = np.bincount(cells(ours_ns, ours5), minlength=21 * 16) / n
    b = np.bincount(cells(ref_ns, f5), minlength=21 * 16) / n
    assert 0.5 * np.abs(a - b).sum() < 0.05


def test_extend_walk_stays_negative(poisson):
    s = RandomStream(11)
    p = algorithm_s(poisson, 0, s)
    q = extend_walk(poisson, p, 500, s)
    assert len(q) == len(p) + 500 and np.all(q.values[q.n_s:] < 0)


def test_regularize_general_law(frozen):
    law = StepLaw.exponential()
    assert law.truncated_mean(5.0) == pytest.approx(frozen["exp_trunc_mean_r5"], abs=1e-10)
    gen = StepLaw.general(lambda u: -np.log1p(-u), lambda x: 1 - np.exp(-np.maximum(x, 0)), mean=1.0)
    m = regularize(gen, 0.5, truncation_r=5.0)
    assert np.dot(m.support, m.pmf) > 0.5
    s = RandomStream(12)
    p = algorithm_s(m, 2000, s)
    assert np.all(p.values[p.n_s:] < 0)
    taus = m.recover_arrivals(p.taus, s)
    assert np.all(taus >= p.taus - 1e-12)
    ref = np.random.default_rng(13).exponential(size=taus.size)
    assert ks2(taus, ref) < 0.04


def test_deterministic_steps_bypass():
    m = renewal_model(StepLaw.deterministic(1.0), gamma=0.5)
    p = algorithm_s(m, 5, RandomStream(14))
    assert p.n_s == 0 and np.allclose(p.taus, 1.0)


def test_step_cap():
    m = renewal_model(gamma=0.5, max_steps=3)
    with pytest.raises(StepCapError):
        for i in range(1000):
            algorithm_s(m, 10, RandomStream(15, i))
