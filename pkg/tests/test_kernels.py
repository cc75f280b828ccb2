import os
import subprocess
import sys

import numpy as np
import pytest

from rbsim import kernels

BACKENDS = kernels.available()


def _cases(rng):
    for n, d in [(0, 5), (1, 1), (7, 3), (50, 1000), (200, 17)]:
        yield rng.standard_normal((n, d)), rng.uniform(1.0, 4.0, n)


@pytest.mark.parametrize("name", BACKENDS)
def test_first_exceedance_matches_reference(name):
    impl = kernels.implementation(name)
    rng = np.random.default_rng(0)
    for rows, b in _cases(rng):
        hits = np.flatnonzero(rows.max(axis=1, initial=-np.inf) > b) if rows.size else []
        expect = int(hits[0]) if len(hits) else -1
        assert impl.first_exceedance(rows, b) == expect
    rows = np.zeros((3, 4))
    assert impl.first_exceedance(rows, np.zeros(3)) == -1  # ties are not exceedances
    rows[2, 3] = 1e-300
    assert impl.first_exceedance(rows, np.zeros(3)) == 2


@pytest.mark.parametrize("name", BACKENDS)
def test_max_plus_update_matches_reference(name):
    impl = kernels.implementation(name)
    rng = np.random.default_rng(1)
    for rows, s in _cases(rng):
        acc = np.full(rows.shape[1], -np.inf)
        out = impl.max_plus_update(acc, rows, s)
        assert out is acc
        if rows.shape[0]:
            assert np.array_equal(acc, (rows + s[:, None]).max(axis=0))
        else:
            assert np.all(acc == -np.inf)


@pytest.mark.parametrize("name", BACKENDS)
def test_midpoint_refine_matches_reference(name):
    impl = kernels.implementation(name)
    rng = np.random.default_rng(2)
    v = rng.standard_normal((4, 9))
    c = rng.standard_normal((4, 8))
    out = impl.midpoint_refine(v, c)
    assert out.shape == (4, 17)
    assert np.array_equal(out[:, ::2], v)
    assert np.allclose(out[:, 1::2], 0.5 * (v[:, :-1] + v[:, 1:]) + c, rtol=0, atol=1e-15)


def test_backends_agree():
    if len(BACKENDS) < 2:
        pytest.skip("compiled extension not built")
    py, cy = kernels.implementation("python"), kernels.implementation("cython")
    rng = np.random.default_rng(3)
    rows = rng.standard_normal((300, 64))
    s = rng.standard_normal(300)
    a1, a2 = np.full(64, -np.inf), np.full(64, -np.inf)
    assert np.array_equal(py.max_plus_update(a1, rows, s), cy.max_plus_update(a2, rows, s))
    b = np.full(300, 2.5)
    assert py.first_exceedance(rows, b) == cy.first_exceedance(rows, b)
    c = rng.standard_normal((300, 63))
    assert np.array_equal(py.midpoint_refine(rows, c), cy.midpoint_refine(rows, c))


def test_unknown_backend():
    with pytest.raises(ValueError):
        kernels.implementation("fortran")


def test_env_var_forces_fallback():
    code = "from rbsim import kernels; print(kernels.BACKEND)"
    env = dict(os.environ, RBSIM_PURE_PYTHON="1")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == "python"
    env.pop("RBSIM_PURE_PYTHON")
    out = subprocess.run([sys.executable, "-c", code], env=env, capture_output=True, text=True, check=True)
    assert out.stdout.strip() == ("cython" if "cython" in BACKENDS else "python")


def test_same_sample_under_both_backends():
    code = ("import numpy as np\n"
            "from rbsim import RandomStream, build_fbm_sampler\n"
            "from rbsim.maxstable import ParameterChoice, algorithm_m\n"
            "from rbsim.walk import renewal_model\n"
            "m = build_fbm_sampler(0.75, 200)\n"
            "s = algorithm_m(m, renewal_model(gamma=0.5), ParameterChoice(0.7, 0.0, 0.5, 0.1), RandomStream(5))\n"
            "print(s.values.tobytes().hex())\n")
    outs = []
    for flag in ("1", "0"):
        env = dict(os.environ, RBSIM_PURE_PYTHON=flag)
        outs.append(subprocess.run([sys.executable, "-c", code], env=env, capture_output=True,
                                   text=True, check=True).stdout)
    assert outs[0] == outs[1]
