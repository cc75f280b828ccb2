import numpy as np
import pytest

from rbsim import RandomStream, build_bm_sampler, build_brownian_sheet_sampler, build_dense_sampler, build_fbm_sampler
from rbsim.fields import (
    FieldVector,
    check_holder_increments,
    conditioned_sample,
    fbm_increment_autocov,
    model_from_config,
    rn_derivative_nominal_over_conditional,
    sample,
)
from rbsim import normal
from conftest import ks2


def test_increment_autocov(frozen):
    g = fbm_increment_autocov(np.arange(5), 0.5)
    assert g[0] == 1.0 and np.allclose(g[1:], 0.0)
    assert fbm_increment_autocov(1, 0.75) == pytest.approx(frozen["fbm_gamma1_H075"], abs=1e-12)


def test_fbm_half_is_scaled_random_walk():
    m = build_fbm_sampler(0.5, 16)
    x = m.sample_block(RandomStream(1), 4000)
    inc = np.diff(np.concatenate([np.zeros((4000, 1)), x], axis=1), axis=1)
    c = np.cov(inc.T) * 16
    assert np.allclose(np.diag(c), 1.0, atol=0.1)
    assert np.max(np.abs(c - np.diag(np.diag(c)))) < 0.1


@pytest.mark.parametrize("H", [0.25, 0.5, 0.75, 0.9])
def test_fbm_variance_at_one(H):
    m = build_fbm_sampler(H, 64)
    x = m.sample_block(RandomStream(2), 10**4)[:, -1]
    assert abs(x.var() - 1.0) < 0.05


def test_fbm_covariance_small_d():
    m = build_fbm_sampler(0.75, 8)
    n = 20000
    x = m.sample_block(RandomStream(3), n)
    emp = x.T @ x / n
    cov = m.covariance_matrix()
    se = np.sqrt((cov**2 + np.outer(np.diag(cov), np.diag(cov))) / n)
    assert np.all(np.abs(emp - cov) <= 5 * se)


def test_model_invariants():
    for m in [build_fbm_sampler(0.3, 50), build_bm_sampler(d=20), build_brownian_sheet_sampler(4, 5)]:
        assert m.sigma_bar >= m.sigma.max()
        c = m.covariance_matrix()
        assert np.allclose(c, c.T)
        assert np.allclose(np.diag(c), m.sigma**2, atol=1e-12)
        assert np.linalg.eigvalsh(c).min() >= -1e-10 * np.trace(c)
        assert np.allclose(m.mu, -0.5 * m.sigma**2)


def test_brownian_sheet():
    m = build_brownian_sheet_sampler(4, 4)
    x = m.sample_block(RandomStream(4), 10**4)
    loc = m.locations
    assert np.all(x[:, loc[:, 0] == 0] == 0)
    i11 = np.flatnonzero((loc[:, 0] == 1) & (loc[:, 1] == 1))[0]
    ih = np.flatnonzero((loc[:, 0] == 0.5) & (loc[:, 1] == 0.5))[0]
    assert abs(x[:, i11].var() - 1.0) < 0.05
    assert abs(np.cov(x[:, ih], x[:, i11])[0, 1] - 0.25) < 0.03


def test_sample_counts_and_centering():
    m = build_bm_sampler(d=8)
    s = RandomStream(5)
    fv = sample(m, s)
    assert isinstance(fv, FieldVector) and m.draw_counter == 1
    assert fv.min_value <= fv.values.min() and fv.values.max() <= fv.max_value
    x = m.sample_block(s, 10**4)
    assert m.draw_counter == 1 + 10**4
    assert np.all(np.abs(x.mean(axis=0)) <= 3 * m.sigma / 100)


def test_dense_oracle_agrees_with_fbm():
    f = build_fbm_sampler(0.7, 6)
    o = build_dense_sampler(f.covariance_matrix())
    a = f.sample_block(RandomStream(6), 8000)
    b = o.sample_block(RandomStream(7), 8000)
    w = np.linspace(1, 2, 6)
    assert ks2(a @ w, b @ w) < 0.03
    assert ks2(a.max(axis=1), b.max(axis=1)) < 0.03


def test_conditioned_sample_exceeds_and_counts():
    m = build_fbm_sampler(0.75, 50)
    s = RandomStream(8)
    for n in [1, 10, 1000]:
        before = m.draw_counter
        fv, nu = conditioned_sample(m, 0.5, 1.0, n, s)
        assert fv.values[nu] > 0.5 * np.log(n) + 1.0
        assert m.draw_counter == before + 1


def test_conditioned_sample_d1_is_truncated_normal():
    m = build_dense_sampler(np.array([[2.0]]))
    s = RandomStream(9)
    x = np.array([conditioned_sample(m, 1.0, 0.5, 3, s)[0].values[0] for _ in range(10**4)])
    thr = np.log(3) + 0.5
    rng = np.random.default_rng(10)
    z = rng.standard_normal(10**6) * np.sqrt(2.0)
    assert ks2(x, z[z > thr][:10**4]) < 0.02


def test_conditioned_sample_nu_uniform_for_equal_sigma():
    from scipy import stats

    m = build_dense_sampler(0.5 * np.eye(5) + 0.5)
    s = RandomStream(11)
    nus = [conditioned_sample(m, 1.0, 0.0, 2, s)[1] for _ in range(10**4)]
    assert stats.chisquare(np.bincount(nus, minlength=5)).pvalue > 0.01


def test_rn_derivative():
    m = build_dense_sampler(np.array([[1.0]]))
    b = 0.5 * np.log(4) + 0.2
    assert rn_derivative_nominal_over_conditional(m, np.array([5.0]), 4, 0.5, 0.2) == pytest.approx(
        normal.std_normal_sf(b))
    m = build_bm_sampler(d=4)
    tails = np.exp(m.log_tails(b)[1])
    assert rn_derivative_nominal_over_conditional(m, np.full(4, 9.0), 4, 0.5, 0.2) == pytest.approx(tails / 4)
    assert rn_derivative_nominal_over_conditional(m, np.array([9.0, 0, 0, 0]), 4, 0.5, 0.2) <= tails
    with pytest.raises(ValueError):
        rn_derivative_nominal_over_conditional(m, np.zeros(4), 4, 0.5, 0.2)


def test_change_of_measure_identity_d2():
    # E^(n)[h(X) dP/dP^(n)] = E[h(X) 1(max > b)]
    m = build_dense_sampler(np.array([[1.0, 0.6], [0.6, 1.0]]))
    a, C, n = 1.0, 0.0, 3
    b = np.log(n)
    s = RandomStream(12)
    lhs = []
    for _ in range(20000):
        fv, _ = conditioned_sample(m, a, C, n, s)
        lhs.append(fv.values.sum() * rn_derivative_nominal_over_conditional(m, fv, n, a, C))
    x = m.sample_block(RandomStream(13), 200000)
    rhs = x.sum(axis=1) * (x.max(axis=1) > b)
    se = np.sqrt(np.var(lhs) / len(lhs) + rhs.var() / rhs.size)
    assert abs(np.mean(lhs) - rhs.mean()) < 4 * se


def test_holder_check_and_config():
    ok, worst = check_holder_increments(build_fbm_sampler(0.75, 100), 1.0, 1.5)
    assert ok and worst <= 1.0 + 1e-9
    m = model_from_config({"backend": "fbm-circulant", "hurst": 0.6, "d": 10})
    assert m.d == 10 and m.sigma_bar == 1.0
    with pytest.raises(ValueError):
        model_from_config({"backend": "nope", "d": 3})
    with pytest.raises(ValueError):
        build_fbm_sampler(1.2, 10)
