"""Independent derivation of the frozen reference constants.

Uses mpmath only (quadrature, bisection, closed forms); nothing here imports
rbsim. Run it to regenerate ``frozen.json``:

    python tests/oracles/derive_constants.py
"""

import json
import os

import mpmath as mp

mp.mp.dps = 40


def phi(x):
    return mp.exp(-x * x / 2) / mp.sqrt(2 * mp.pi)


def Phi(x):
    return mp.ncdf(x)


def log_sf(x):
    return mp.log(mp.erfc(x / mp.sqrt(2)) / 2)


def bisect(f, lo, hi, tol=mp.mpf("1e-30")):
    flo = f(lo)
    while hi - lo > tol:
        mid = (lo + hi) / 2
        fm = f(mid)
        if (fm > 0) == (flo > 0):
            lo, flo = mid, fm
        else:
            hi = mid
    return (lo + hi) / 2


def r_quad(y, a=1, C=0, sb=1):
    # int_y^inf phi((a log x + C)/sb) dx, substituting x = e^s
    return mp.quad(lambda s: phi((a * s + C) / sb) * mp.exp(s), [mp.log(y), mp.log(y) + 20, mp.inf])


def main():
    out = {}
    out["Phi_1"] = float(Phi(1))
    out["tail_inv_logp_minus700"] = float(bisect(lambda x: log_sf(x) + 700, mp.mpf(30), mp.mpf(40)))
    out["fbm_gamma1_H075"] = float((mp.mpf(2) ** 1.5 - 2) / 2)
    out["cramer_root_exp1_gamma05"] = float(bisect(lambda t: mp.exp(t / 2) - 1 - t, mp.mpf("0.5"), mp.mpf(10)))
    out["r_y1_a1_C0"] = float(r_quad(1))
    # n0 for d=1000, delta=0.1, a=1, C=0: real root of d r(y) = delta
    y = bisect(lambda y: 1000 * r_quad(y) - mp.mpf("0.1"), mp.mpf(2), mp.mpf(10**4), tol=mp.mpf("1e-12"))
    out["n0_root_d1000"] = float(y)
    out["n0_d1000"] = int(mp.ceil(y))
    n0 = 127
    out["g1_n0_127"] = float(mp.quad(lambda s: phi(mp.log(s)), [n0, n0 + 1]) / r_quad(n0))
    out["bivariate_shift"] = float(mp.log(2 * Phi(mp.sqrt(0.5) / 2)))
    out["gumbel_cdf_0"] = float(mp.exp(-1))
    out["exp_trunc_mean_r5"] = float(1 - mp.exp(-5))
    # theta at gamma = 0.99 for exp(1): root of e^{0.99 t} = 1 + t
    out["cramer_root_exp1_gamma099"] = float(bisect(lambda t: mp.exp(mp.mpf("0.99") * t) - 1 - t,
                                                    mp.mpf("1e-6"), mp.mpf(1)))
    # tilted mean step under rate 1 + theta: gamma - 1/(1+theta)
    th = mp.mpf(out["cramer_root_exp1_gamma05"])
    out["tilted_mean_step"] = float(mp.mpf("0.5") - 1 / (1 + th))
    # Brownian Schauder expansion: variance at t = 1/2 from levels < 2^12 with lambda' = 1/2
    # Lambda_0(t) = t contributes t^2; level j contributes (1/2 2^{-j/2})^2 hat^2 at the one active index
    t = mp.mpf("0.5")
    v = t * t
    for j in range(12):
        k = int(mp.floor(t * 2**j))
        x = t * 2**j - k
        hat = 1 - abs(2 * x - 1)
        v += (mp.mpf("0.5") * mp.mpf(2) ** (-mp.mpf(j) / 2) * hat) ** 2
    out["schauder_var_half_L12"] = float(v)
    path = os.path.join(os.path.dirname(os.path.abspath(__file__)), "frozen.json")
    with open(path, "w") as fh:
        json.dump(out, fh, indent=2, sort_keys=True)
        fh.write("\n")
    print(json.dumps(out, indent=2, sort_keys=True))


if __name__ == "__main__":
    main()
