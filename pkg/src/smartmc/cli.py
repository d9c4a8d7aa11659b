"""Command-line entry point: ``smartmc <command> [options]``.

Every command writes machine-readable output only to the files it is given;
diagnostics go to stderr.  Exit codes: 0 success, 1 usage error, 2 data
error, 3 numerical error.
"""

from __future__ import annotations

import argparse
import csv
import json
import math
import os
import sys
import time

import numpy as np

from . import benchmarks
from .data_io import (
    SimConfig,
    guess_continuous,
    load_dataset,
    load_fit,
    read_covariates_csv,
    read_events_csv,
    reduce_events,
    save_fit,
    simulate_dataset,
    standardize_covariates,
    write_covariates_csv,
    write_sequences_csv,
)
from .errors import DataError, NumericalError, ParseError, SmartMCError
from .model import Dataset, bootstrap_se, fit, odds_ratios
from .mscor import MscorConfig, optimize
from .sphere import SphereShape, random_point

EXIT_OK, EXIT_USAGE, EXIT_DATA, EXIT_NUMERICAL = 0, 1, 2, 3

# Benchmark defaults: tiny tau1/phi let the search reach the 1e-16 range on
# these functions, and a small sparsity threshold lets coordinates snap to the
# exact zeros of the anchored optimum.
BENCHMARK_CONFIG = MscorConfig(tau1=1e-16, phi=1e-12, lambda_=1e-3)


class UsageError(Exception):
    pass


class _Parser(argparse.ArgumentParser):
    def error(self, message):
        self.print_usage(sys.stderr)
        raise UsageError(f"{self.prog}: error: {message}")


def _default_threads() -> int:
    env = os.environ.get("SMARTMC_THREADS")
    if env:
        try:
            n = int(env)
        except ValueError:
            raise UsageError(f"SMARTMC_THREADS must be an integer, got {env!r}") from None
        if n < 1:
            raise UsageError("SMARTMC_THREADS must be positive")
        return n
    return os.cpu_count() or 1


def _read_json(path):
    try:
        with open(path) as fh:
            return json.load(fh)
    except json.JSONDecodeError as exc:
        raise ParseError(exc.msg, path, exc.lineno, exc.colno) from None


def _write_json(path, obj):
    with open(path, "w") as fh:
        json.dump(obj, fh, indent=1)
        fh.write("\n")


def _mscor_config(args, base: MscorConfig | None = None) -> MscorConfig:
    config = base if base is not None else MscorConfig()
    if getattr(args, "mscor", None):
        d = base.to_dict() if base is not None else {}
        d.update(_read_json(args.mscor))
        config = MscorConfig.from_dict(d)
    changes = {}
    if getattr(args, "threads", None) is not None:
        changes["threads"] = args.threads
    if getattr(args, "seed", None) is not None:
        changes["seed"] = args.seed
    return config.replace(**changes) if changes else config


def _load_training_data(args):
    data = load_dataset(args.sequences, args.covariates)
    # Identity records keep the covariate names available to predict/odds.
    standardization = [{"name": n, "continuous": False, "mean": 0.0, "sd": 1.0}
                       for n in data.covariate_names]
    if args.standardize:
        continuous = guess_continuous(data.covariates)
        X, standardization = standardize_covariates(data.covariates, continuous, data.covariate_names)
        data = Dataset(data.n_states, data.sequences, X, data.subject_ids,
                       data.covariate_names, data.state_labels)
    return data, standardization


# ---------------------------------------------------------------------------
# commands
# ---------------------------------------------------------------------------

def cmd_simulate(args):
    config = SimConfig.from_dict(_read_json(args.config)) if args.config else SimConfig()
    if args.seed is not None:
        config = SimConfig(**{**config.__dict__, "seed": args.seed})
    sim = simulate_dataset(config)
    d = sim.dataset
    write_sequences_csv(args.out_seq, d.subject_ids, d.sequences)
    write_covariates_csv(args.out_cov, d.subject_ids, d.covariate_names, d.covariates)
    if args.out_truth:
        _write_json(args.out_truth, {
            "n_states": d.n_states,
            "coefficients": {f"{u},{v}": vec.tolist() for (u, v), vec in sim.truth.items()},
            "support": sim.support.astype(int).tolist(),
            "config": config.__dict__,
        })


def cmd_reduce(args):
    by_subject = read_events_csv(args.events)
    seqs, labels = reduce_events(by_subject, args.window_days)
    ids = sorted(seqs)
    write_sequences_csv(args.out, ids, [seqs[s] for s in ids])
    if args.out_labels:
        _write_json(args.out_labels, {"state_labels": labels})


def cmd_fit(args):
    data, standardization = _load_training_data(args)
    config = _mscor_config(args)
    result = fit(data, args.tol, config, n_starts=args.starts, standardization=standardization)
    save_fit(result, args.out)
    print(f"log-likelihood {result.log_likelihood:.6f} after {result.optimizer.runs} runs "
          f"({result.terminated_by})", file=sys.stderr)


def cmd_predict(args):
    result = load_fit(args.fit)
    ids, names, X_raw = read_covariates_csv(args.covariates)
    X = result.standardize(X_raw)
    n_cov = result.coefficients.n_coef - 1
    if result.coefficients.vectors and X.shape[1] != n_cov:
        raise DataError(f"fit expects {n_cov} covariates, file has {X.shape[1]}")
    P = result.transition_matrices(X)
    inactive = [int(u) for u in np.nonzero(~result.empirical.active_rows)[0]]
    _write_json(args.out, {
        "state_labels": result.state_labels,
        "inactive_rows": inactive,
        "matrices": {sid: P[k].tolist() for k, sid in enumerate(ids)},
    })


def _profile_vector(profile, result):
    cov = profile.get("covariates", profile) if isinstance(profile, dict) else profile
    names = [c["name"] for c in result.standardization] if result.standardization else None
    if isinstance(cov, dict):
        if names is None:
            raise DataError("a named covariate profile needs a fit with recorded covariate names")
        missing = [n for n in names if n not in cov]
        if missing:
            raise DataError(f"profile lacks covariates {missing}")
        x = [float(cov[n]) for n in names]
    else:
        x = [float(v) for v in cov]
    return result.standardize(np.array(x))[0]


def cmd_odds(args):
    result = load_fit(args.fit)
    profile = _read_json(args.profile)
    x = _profile_vector(profile, result)
    N = result.n_states
    to_states = profile.get("to", list(range(1, N + 1))) if isinstance(profile, dict) else list(range(1, N + 1))
    values = odds_ratios(result, x, args.from_state, to_states, odds=args.odds)
    labels = result.state_labels or [str(v) for v in range(1, N + 1)]
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["from_state", "to_state", "to_label", "odds_ratio"])
        for v, r in zip(to_states, values):
            w.writerow([args.from_state, int(v), labels[int(v) - 1], repr(r)])


def cmd_bootstrap(args):
    data, _ = _load_training_data(args)
    config = _mscor_config(args)
    res = bootstrap_se(data, args.tol, config.replace(threads=1), args.n_boot, args.seed,
                       workers=config.threads)
    _write_json(args.out, {
        "n_boot": args.n_boot,
        "n_used": res.n_used,
        "n_failed": res.n_failed,
        "se": {f"{u},{v}": se.tolist() for (u, v), se in sorted(res.se.items())},
    })
    if res.n_failed:
        print(f"{res.n_failed} of {args.n_boot} replicates excluded", file=sys.stderr)


def run_benchmark(name, n_blocks, dim, repeats, seed=0, config=None):
    """Final objective values and wall-clock times over seeded random starts."""
    config = BENCHMARK_CONFIG if config is None else config
    shape = SphereShape.uniform(n_blocks, dim)
    fn = benchmarks.BenchmarkFunction(name, shape)
    rng = np.random.default_rng(seed)
    values, times, runs = [], [], []
    for _ in range(repeats):
        init = random_point(shape, rng)
        t0 = time.perf_counter()
        res = optimize(fn, init, config)
        times.append(time.perf_counter() - t0)
        values.append(res.objective_value)
        runs.append(res.runs_completed)
    return values, times, runs


def cmd_benchmark(args):
    config = _mscor_config(args, BENCHMARK_CONFIG)
    if args.time_budget is not None:
        config = config.replace(time_budget_seconds=args.time_budget)
    values, times, _ = run_benchmark(args.function, args.blocks, args.dim, args.repeats,
                                     args.seed, config)
    v = np.array(values)
    se = float(v.std(ddof=1) / math.sqrt(v.size)) if v.size > 1 else 0.0
    with open(args.out, "w", newline="") as fh:
        w = csv.writer(fh, lineterminator="\n")
        w.writerow(["function", "blocks", "dim", "repeats", "min_value", "se", "mean_time"])
        w.writerow([args.function, args.blocks, args.dim, args.repeats,
                    repr(float(v.min())), repr(se), f"{float(np.mean(times)):.3f}"])


# ---------------------------------------------------------------------------
# argument parsing
# ---------------------------------------------------------------------------

def _positive_int(text):
    try:
        n = int(text)
    except ValueError:
        raise argparse.ArgumentTypeError(f"not an integer: {text!r}") from None
    if n < 1:
        raise argparse.ArgumentTypeError(f"must be positive: {n}")
    return n


def build_parser() -> argparse.ArgumentParser:
    p = _Parser(prog="smartmc", description="Covariate-dependent Markov chain fitting.")
    sub = p.add_subparsers(dest="command", required=True, parser_class=_Parser)

    s = sub.add_parser("simulate", help="generate a synthetic dataset")
    s.add_argument("--config", help="SimConfig JSON (defaults used when omitted)")
    s.add_argument("--seed", type=int)
    s.add_argument("--out-seq", required=True)
    s.add_argument("--out-cov", required=True)
    s.add_argument("--out-truth")
    s.set_defaults(func=cmd_simulate)

    s = sub.add_parser("reduce", help="turn dated events into reduced state sequences")
    s.add_argument("--events", required=True)
    s.add_argument("--window-days", type=_positive_int, default=91)
    s.add_argument("--out", required=True)
    s.add_argument("--out-labels", help="JSON file receiving the label order (state k = labels[k-1])")
    s.set_defaults(func=cmd_reduce)

    def data_args(s):
        s.add_argument("--sequences", required=True)
        s.add_argument("--covariates", required=True)
        s.add_argument("--tol", type=int, required=True)
        s.add_argument("--mscor", help="MSCOR config JSON")
        s.add_argument("--threads", type=_positive_int)
        s.add_argument("--standardize", action="store_true",
                       help="standardize columns with more than two distinct values")

    s = sub.add_parser("fit", help="fit coefficients by maximum likelihood")
    data_args(s)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--starts", type=_positive_int, default=1)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_fit)

    s = sub.add_parser("predict", help="per-subject transition matrices")
    s.add_argument("--fit", required=True)
    s.add_argument("--covariates", required=True)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_predict)

    s = sub.add_parser("odds", help="transition-vs-stay ratios for a covariate profile")
    s.add_argument("--fit", required=True)
    s.add_argument("--from", dest="from_state", type=int, required=True)
    s.add_argument("--profile", required=True)
    s.add_argument("--odds", action="store_true", help="ratio of p/(1-p) odds instead of probabilities")
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_odds)

    s = sub.add_parser("bootstrap", help="bootstrap standard errors")
    data_args(s)
    s.add_argument("--n-boot", type=int, required=True)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_bootstrap)

    s = sub.add_parser("benchmark", help="MSCOR on an anchored test function")
    s.add_argument("--function", required=True, choices=sorted(benchmarks.FUNCTIONS))
    s.add_argument("--blocks", type=_positive_int, required=True)
    s.add_argument("--dim", type=int, required=True)
    s.add_argument("--repeats", type=_positive_int, default=10)
    s.add_argument("--time-budget", type=float, help="seconds per repeat")
    s.add_argument("--mscor", help="MSCOR config JSON overriding the benchmark defaults")
    s.add_argument("--threads", type=_positive_int)
    s.add_argument("--seed", type=int, default=0)
    s.add_argument("--out", required=True)
    s.set_defaults(func=cmd_benchmark)
    return p


def main(argv=None) -> int:
    parser = build_parser()
    try:
        args = parser.parse_args(argv)
        if getattr(args, "threads", "absent") is None:
            args.threads = _default_threads()
        args.func(args)
    except UsageError as exc:
        print(exc, file=sys.stderr)
        return EXIT_USAGE
    except SystemExit as exc:  # --help
        return EXIT_OK if not exc.code else EXIT_USAGE
    except NumericalError as exc:
        print(f"numerical error: {exc}", file=sys.stderr)
        return EXIT_NUMERICAL
    except (DataError, OSError, SmartMCError) as exc:
        print(f"data error: {exc}", file=sys.stderr)
        return EXIT_DATA
    except (ValueError, TypeError) as exc:
        print(f"usage error: {exc}", file=sys.stderr)
        return EXIT_USAGE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
