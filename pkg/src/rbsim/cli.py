"""rbsim command line.

    rbsim --command sample --backend fbm-circulant --hurst 0.75 --d 1000 --reps 10 --out m.csv
    rbsim --command tes --delta 0.1 --reps 5 --out tes.json --format json
    rbsim --command validate --reps 10000 --out report.json
    rbsim --command bench --d 1000,3000 --hurst 0.75 --reps 200 --out bench.csv

Exit status: 0 on success, 2 on invalid arguments or a failed validation,
1 on any other error.
"""

import argparse
import csv
import json
import logging
import sys

import numpy as np

from . import bench as bench_mod
from .fields import model_from_config
from .maxstable import FIXED_C, RANDOM_C, ParameterChoice, algorithm_m, select_parameters
from .rng import RandomStream
from .tes import algorithm_tes
from .validate import run_validation
from .walk import renewal_model

log = logging.getLogger("rbsim")

EXIT_OK, EXIT_ERROR, EXIT_INVALID = 0, 1, 2


class ConfigError(ValueError):
    pass


def _floats(text):
    return [float(x) for x in str(text).split(",") if x.strip()]


def build_parser():
    p = argparse.ArgumentParser(prog="rbsim", description="Exact and tolerance-enforced simulation of max-stable fields.")
    p.add_argument("--command", required=True, choices=["sample", "tes", "validate", "bench"])
    p.add_argument("--backend", default="fbm-circulant", choices=["fbm-circulant", "bm-grid", "brownian-sheet-grid"])
    p.add_argument("--hurst", default="0.75", help="Hurst index; a comma list for bench")
    p.add_argument("--d", default="1000", help="number of locations; a comma list for bench")
    p.add_argument("--delta", type=float, default=0.1)
    p.add_argument("--gamma", type=float, default=0.5)
    p.add_argument("--a", type=float, default=None)
    p.add_argument("--C", type=float, default=None)
    p.add_argument("--auto-params", action="store_true", help="choose a from a pilot run (default when --a is absent)")
    p.add_argument("--random-c", action="store_true", help="a = 1 with a replication-dependent C")
    p.add_argument("--reps", type=int, default=None)
    p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", default=None)
    p.add_argument("--format", default="csv", choices=["csv", "json"])
    p.add_argument("--grid", type=int, default=2**10, help="tes: evaluate on grid+1 points")
    p.add_argument("-v", "--verbose", action="store_true")
    return p


def check_config(args):
    ds = _floats(args.d)
    hs = _floats(args.hurst)
    if not ds or any(d < 1 or d != int(d) for d in ds):
        raise ConfigError("--d must be positive integers")
    if not hs or any(not 0.0 < h < 1.0 for h in hs):
        raise ConfigError("--hurst must lie in (0, 1)")
    if not 0.0 < args.delta < 1.0:
        raise ConfigError("--delta must lie in (0, 1)")
    if args.gamma <= 0.0 or args.gamma >= 1.0:
        raise ConfigError("--gamma must lie in (0, E[tau]) = (0, 1)")
    if args.reps is not None and args.reps < 1:
        raise ConfigError("--reps must be >= 1")
    if args.a is not None and not 0.0 < args.a <= 1.0:
        raise ConfigError("--a must lie in (0, 1]")
    if args.a is not None and args.auto_params:
        raise ConfigError("--a and --auto-params exclude each other")
    if args.seed < 0:
        raise ConfigError("--seed must be >= 0")
    if args.command in ("sample", "tes", "bench") and not args.out:
        raise ConfigError(f"--out is required for {args.command}")
    return [int(d) for d in ds], hs


def _choice(args, model, renewal, stream):
    if args.random_c:
        return ParameterChoice(1.0, 0.0, args.gamma, args.delta, RANDOM_C)
    if args.a is not None:
        mode = RANDOM_C if args.a == 1.0 and args.C is None else FIXED_C
        return ParameterChoice(args.a, args.C or 0.0, args.gamma, args.delta, mode)
    return select_parameters(model, renewal, args.delta, stream=stream,
                             C=0.0 if args.C is None else args.C)


def _open(path):
    try:
        return open(path, "w", newline="")
    except OSError as exc:
        raise OSError(f"cannot write {path}: {exc.strerror}") from exc


def cmd_sample(args, d, hurst):
    model = model_from_config({"backend": args.backend, "hurst": hurst, "d": d})
    renewal = renewal_model(gamma=args.gamma)
    choice = _choice(args, model, renewal, RandomStream(args.seed, 10**6))
    reps = args.reps or 1
    runs = [algorithm_m(model, renewal, choice, RandomStream(args.seed, i)) for i in range(reps)]
    diag = ["N", "N_A", "N_X", "N_a", "gaussian_draws", "records", "a", "C", "n0"]
    with _open(args.out) as fh:
        if args.format == "json":
            json.dump({
                "locations": np.asarray(model.locations).tolist(),
                "runs": [dict({k: _plain(getattr(r, k)) for k in diag}, values=r.values.tolist())
                         for r in runs],
            }, fh)
        else:
            w = csv.writer(fh)
            w.writerow(["rep"] + diag + [f"M{i}" for i in range(model.d)])
            for i, r in enumerate(runs):
                w.writerow([i] + [_plain(getattr(r, k)) for k in diag] + [repr(float(v)) for v in r.values])
    return EXIT_OK


def _plain(v):
    return v.item() if isinstance(v, np.generic) else v


def cmd_tes(args):
    reps = args.reps or 1
    grid = np.linspace(0.0, 1.0, args.grid + 1)
    diag = ["N", "N_A", "N_X", "N_xi", "K", "draws"]
    out = []
    for i in range(reps):
        rep = algorithm_tes(args.delta, RandomStream(args.seed, i))
        out.append((rep, rep.eval(grid)))
    with _open(args.out) as fh:
        if args.format == "json":
            json.dump({
                "grid": grid.tolist(),
                "runs": [{**{k: int(getattr(r, k)) for k in diag}, "values": v.tolist(),
                          "sup": r.sup(), "integral": r.integral(),
                          "representation": json.loads(r.to_json())} for r, v in out],
            }, fh)
        else:
            w = csv.writer(fh)
            w.writerow(["rep"] + diag + ["sup", "integral"] + [f"M{j}" for j in range(grid.size)])
            for i, (r, v) in enumerate(out):
                w.writerow([i] + [int(getattr(r, k)) for k in diag] + [repr(r.sup()), repr(r.integral())]
                           + [repr(float(x)) for x in v])
    return EXIT_OK


def cmd_validate(args):
    n = args.reps or 10**4
    reports = run_validation(n=n, seed=args.seed, n_tes=min(n, 5000))
    for r in reports:
        log.warning("%-22s n=%d stat=%.4f crit=%.4f attempts=%d %s", r.name, r.n, r.statistic,
                    r.critical, r.attempts, "PASS" if r.passed else "FAIL")
    if args.out:
        with _open(args.out) as fh:
            if args.format == "json":
                json.dump([r.to_dict() for r in reports], fh)
            else:
                w = csv.writer(fh)
                w.writerow(["test", "n", "statistic", "critical", "passed", "attempts"])
                for r in reports:
                    w.writerow([r.name, r.n, repr(r.statistic), repr(r.critical), r.passed, r.attempts])
    return EXIT_OK if all(r.passed for r in reports) else EXIT_INVALID


def cmd_bench(args, ds, hs):
    rows = bench_mod.cmd_bench(ds, hs, reps=args.reps or 200, seed=args.seed, delta=args.delta,
                               gamma=args.gamma, a=1.0 if args.random_c else args.a, C=args.C)
    if args.format == "json":
        with _open(args.out) as fh:
            json.dump(rows, fh)
    else:
        try:
            bench_mod.write_csv(rows, args.out)
        except OSError as exc:
            raise OSError(f"cannot write {args.out}: {exc.strerror}") from exc
    return EXIT_OK


def main(argv=None):
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return EXIT_OK if exc.code == 0 else EXIT_INVALID
    logging.basicConfig(level=logging.INFO if args.verbose else logging.WARNING,
                        format="%(levelname)s %(message)s")
    try:
        ds, hs = check_config(args)
        if args.command == "sample":
            return cmd_sample(args, ds[0], hs[0])
        if args.command == "tes":
            return cmd_tes(args)
        if args.command == "validate":
            return cmd_validate(args)
        return cmd_bench(args, ds, hs)
    except ConfigError as exc:
        log.error("%s", exc)
        return EXIT_INVALID
    except Exception as exc:  # reported, not re-raised: the exit code carries it
        log.error("%s: %s", type(exc).__name__, exc)
        return EXIT_ERROR


if __name__ == "__main__":
    sys.exit(main())
