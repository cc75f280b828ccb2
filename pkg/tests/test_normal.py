import numpy as np
import pytest

from rbsim import normal
from rbsim import RandomStream
from conftest import ks2


def test_cdf_values(frozen):
    assert normal.std_normal_cdf(0.0) == 0.5
    assert abs(normal.std_normal_cdf(1.0) - frozen["Phi_1"]) < 1e-6


def test_cdf_sf_identity_grid():
    x = np.linspace(-8, 8, 4001)
    assert np.max(np.abs(normal.std_normal_cdf(x) + normal.std_normal_sf(x) - 1.0)) <= 1e-14
    assert np.all(np.diff(normal.std_normal_cdf(x)) >= 0.0)
    assert np.allclose(normal.std_normal_cdf(-x), 1.0 - normal.std_normal_cdf(x), atol=1e-15)


def test_log_sf_far_tail_relative_error():
    import mpmath as mp

    mp.mp.dps = 50
    x = [8.0, 9.5, 12.0, 20.0, 37.0, 100.0]
    ref = np.array([float(mp.log(mp.erfc(mp.mpf(v) / mp.sqrt(2)) / 2)) for v in x])
    got = normal.std_normal_log_sf(np.array(x))
    # relative error of the tail itself, not of its log
    assert np.max(np.abs(np.expm1(got - ref))) <= 1e-10


def test_tail_inverse(frozen):
    assert normal.std_normal_tail_inv(0.5) == pytest.approx(0.0, abs=1e-15)
    assert normal.std_normal_tail_inv(normal.std_normal_sf(2.7)) == pytest.approx(2.7, abs=1e-9)
    assert normal.std_normal_tail_inv(log_p=-700.0) == pytest.approx(frozen["tail_inv_logp_minus700"], abs=1e-6)


def test_tail_inverse_roundtrip_to_37():
    x = np.linspace(-5, 37, 2000)
    back = np.array([normal.std_normal_tail_inv(log_p=float(normal.std_normal_log_sf(v))) for v in x])
    assert np.max(np.abs(back - x)) <= 1e-8


def test_tail_inverse_relative_error():
    for p in [1e-3, 1e-30, 1e-200, 0.3, 0.9]:
        assert normal.std_normal_sf(normal.std_normal_tail_inv(p)) == pytest.approx(p, rel=1e-10)


@pytest.mark.parametrize("p", [0.0, 1.0, -0.1, 2.0])
def test_tail_inverse_domain(p):
    with pytest.raises(ValueError):
        normal.std_normal_tail_inv(p)


def test_truncated_normal_boundary_and_monotone():
    assert normal.sample_truncated_normal_above(1.0, 2.0, 0.0) == pytest.approx(2.0)
    u = np.linspace(1e-9, 1 - 1e-12, 1000)
    v = normal.sample_truncated_normal_above(1.3, 0.7, u)
    assert np.all(np.diff(v) > 0) and np.all(v > 0.7)
    assert np.isfinite(normal.sample_truncated_normal_above(1.0, 2.0, 1.0))


def test_truncated_normal_law_vs_rejection():
    s = RandomStream(5)
    u = s.uniform(10**4)
    x = normal.sample_truncated_normal_above(1.0, 1.5, u)
    rng = np.random.default_rng(6)
    ref = []
    while len(ref) < 10**4:
        z = rng.standard_normal(10**5)
        ref.extend(z[z > 1.5].tolist())
    assert ks2(x, np.array(ref[:10**4])) < 0.02
