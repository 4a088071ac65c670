"""Command-line entry point: ``lcmatch {simulate,match,balance,estimate}``.

Every command writes CSV output plus ``<output>.manifest.json`` recording
the argument vector, seed, package version and SHA-256 digests of inputs
and outputs.

Exit codes: 0 success, 2 usage, 3 data error, 4 infeasible matching.
"""
from __future__ import annotations

import argparse
import hashlib
import json
import os
import sys
from datetime import datetime, timezone

from . import __version__
from .balance import balance_report, love_plot_frame, write_love_svg
from .distance import CaliperSpec, pooled_covariance, read_calipers
from .errors import InfeasibleAssignment, LCMatchError
from .estimation import estimate_log_or, write_effect_table
from .matching import METHODS, GeneticConfig, MatchResult, run_method
from .simulation import (DISTRIBUTIONS, PREVALENCES, SIM_METHODS, MethodOptions, Scenario,
                         run_scenario, write_results)
from .study import KINDS, load_csv

EXIT_USAGE, EXIT_DATA, EXIT_INFEASIBLE = 2, 3, 4


class DataError(Exception):
    pass


def sha256(path) -> str:
    h = hashlib.sha256()
    with open(path, "rb") as fh:
        for block in iter(lambda: fh.read(1 << 20), b""):
            h.update(block)
    return h.hexdigest()


def manifest_path(path) -> str:
    return f"{os.fspath(path)}.manifest.json"


def write_manifest(out, command, argv, args, inputs, outputs, started, **extra):
    record = {
        "command": command,
        "argv": list(argv),
        "args": {k: v for k, v in sorted(vars(args).items()) if k != "func"},
        "seed": getattr(args, "seed", None),
        "version": __version__,
        "inputs": {os.fspath(p): sha256(p) for p in inputs},
        "outputs": {os.fspath(p): sha256(p) for p in outputs},
        "started": started,
        "finished": datetime.now(timezone.utc).isoformat(),
    }
    record.update(extra)
    with open(manifest_path(out), "w", encoding="utf-8", newline="\n") as fh:
        json.dump(record, fh, indent=2, sort_keys=True)
        fh.write("\n")


def _csv_list(text):
    return [t.strip() for t in text.split(",") if t.strip()]


def _kind_overrides(items):
    out = {}
    for item in items or []:
        name, _, kind = item.partition("=")
        if kind not in KINDS:
            raise argparse.ArgumentTypeError(f"--kind {item!r}: expected name=continuous|dichotomous")
        out[name] = kind
    return out


def _add_common(p, seed=True):
    if seed:
        p.add_argument("--seed", type=int, default=0)
    p.add_argument("--out", required=True, help="output CSV path")
    p.add_argument("--threads", type=int, default=1)


def _add_cohort(p, outcome_required=False):
    p.add_argument("--input", required=True, help="cohort CSV with a header row")
    p.add_argument("--treatment", default="treatment", help="0/1 treatment column")
    p.add_argument("--outcome", default=None, required=outcome_required,
                   help="0/1 outcome column")
    p.add_argument("--covariates", type=_csv_list, default=None,
                   help="comma-separated covariate columns (default: all other columns)")
    p.add_argument("--exclude", type=_csv_list, default=[],
                   help="columns to leave out when --covariates is not given")
    p.add_argument("--kind", action="append", metavar="NAME=KIND",
                   help="override auto-detected covariate kind")


def _load(args):
    import pandas as pd
    covs = args.covariates
    if covs is None:
        header = list(pd.read_csv(args.input, nrows=0).columns)
        skip = {args.treatment, args.outcome, *args.exclude}
        covs = [c for c in header if c not in skip]
    return load_csv(args.input, args.treatment, args.outcome, covs, _kind_overrides(args.kind))


def _now():
    return datetime.now(timezone.utc).isoformat()


# --------------------------------------------------------------------------

def cmd_simulate(args, argv):
    started = _now()
    dists = [args.dist] if args.dist else []
    prevs = [args.prevalence] if args.prevalence is not None else []
    if args.grid:
        dists, prevs = list(DISTRIBUTIONS), list(PREVALENCES)
    if not dists or not prevs:
        raise argparse.ArgumentTypeError("give --dist and --prevalence, or --grid")
    options = MethodOptions(lc_sd_fraction=args.lc_sd_fraction,
                            lc_binary_width=args.lc_binary_width,
                            full_ratio=args.ratio,
                            genetic=GeneticConfig(args.pop_size, args.generations, seed=args.seed))
    results = []
    for d in dists:
        for p in prevs:
            sc = Scenario(d, p, n=args.n, tau=args.tau, baseline_incidence=args.incidence)
            results.append(run_scenario(sc, args.methods, args.reps, args.seed, args.threads,
                                        options, args.calibration_n))
    write_results(results, args.out)
    failed = sum(sum(r.failures.values()) for r in results)
    print(f"{len(results)} scenario(s), {len(args.methods)} method(s), "
          f"{args.reps} reps; {failed} failed replication(s) -> {args.out}")
    write_manifest(args.out, "simulate", argv, args, [], [args.out], started)
    return 0


def cmd_match(args, argv):
    started = _now()
    study = _load(args)
    calipers = None
    if args.method == "lc":
        if args.calipers:
            calipers = CaliperSpec.for_study(study, read_calipers(args.calipers))
        else:
            calipers = CaliperSpec.default_for_study(study, args.lc_sd_fraction,
                                                     args.lc_binary_width)
    ctx = None if args.method == "lc" else pooled_covariance(study, args.ridge)
    genetic = GeneticConfig(args.pop_size, args.generations, seed=args.seed, threads=args.threads)
    match = run_method(args.method, study, ctx=ctx, calipers=calipers, genetic=genetic,
                       max_ratio=args.ratio, multiplier=args.caliper_mult)
    match.to_csv(args.out)
    print(f"{args.method}: {match.n_clusters} clusters, {match.matched_treated().size} treated and "
          f"{match.matched_controls().size} controls matched; discarded "
          f"{len(match.discarded_treated)} treated, {len(match.discarded_controls)} controls")
    inputs = [args.input] + ([args.calipers] if args.calipers else [])
    write_manifest(args.out, "match", argv, args, inputs, [args.out], started,
                   method=args.method, cohort_digest=sha256(args.input))
    return 0


def _read_match(path, study, cohort_digest):
    label = None
    mpath = manifest_path(path)
    if os.path.exists(mpath):
        with open(mpath, encoding="utf-8") as fh:
            man = json.load(fh)
        if man.get("cohort_digest") not in (None, cohort_digest):
            raise DataError(f"{path} was produced from a different cohort than the input")
        label = man.get("method")
    try:
        match = MatchResult.from_csv(path, label)
    except (ValueError, KeyError) as exc:
        raise DataError(f"{path}: {exc}") from exc
    members = [(i, "treated") for c in match.clusters for i in c.treated]
    members += [(j, "control") for c in match.clusters for j in c.controls]
    members += [(i, "treated") for i in match.discarded_treated]
    members += [(j, "control") for j in match.discarded_controls]
    for idx, role in members:
        if not 0 <= idx < study.n or study.treatment[idx] != (role == "treated"):
            raise DataError(f"{path}: subject {idx} does not match the cohort as {role}")
    return match


def cmd_balance(args, argv):
    started = _now()
    study = _load(args)
    digest = sha256(args.input)
    matches = [_read_match(p, study, digest) for p in args.matches]
    frame = love_plot_frame(study, matches)
    frame.to_csv(args.out, index=False, lineterminator="\n")
    outputs = [args.out]
    if args.svg:
        write_love_svg(frame, args.svg, args.threshold)
        outputs.append(args.svg)
    base = balance_report(study, None, args.threshold)
    print(f"unmatched: {base.n_over_unmatched} of {study.n_covariates} covariates "
          f"with |d| > {args.threshold}")
    for m in matches:
        rep = balance_report(study, m, args.threshold)
        print(f"{m.method}: {rep.n_over_matched} of {study.n_covariates} covariates "
              f"with |d| > {args.threshold}")
    write_manifest(args.out, "balance", argv, args, [args.input, *args.matches], outputs, started)
    return 0


def cmd_estimate(args, argv):
    started = _now()
    study = _load(args)
    digest = sha256(args.input)
    estimates = [estimate_log_or(study)]
    for p in args.matches:
        estimates.append(estimate_log_or(study, _read_match(p, study, digest)))
    write_effect_table(estimates, args.out)
    for e in estimates:
        print(f"{e.method}: OR {e.odds_ratio:.3f} [{e.ci_low:.3f}, {e.ci_high:.3f}]")
    write_manifest(args.out, "estimate", argv, args, [args.input, *args.matches], [args.out],
                   started)
    return 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="lcmatch", description=__doc__.splitlines()[0])
    parser.add_argument("--version", action="version", version=__version__)
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("simulate", help="Monte Carlo comparison of matching methods")
    p.add_argument("--dist", choices=DISTRIBUTIONS)
    p.add_argument("--prevalence", type=float)
    p.add_argument("--grid", action="store_true", help="all 24 distribution x prevalence cells")
    p.add_argument("--n", type=int, default=5000)
    p.add_argument("--reps", type=int, default=1000)
    p.add_argument("--methods", type=_csv_list, default=["unmatched", "lc"])
    p.add_argument("--tau", type=float, default=0.5)
    p.add_argument("--incidence", type=float, default=0.10)
    p.add_argument("--calibration-n", type=int, default=1_000_000)
    p.add_argument("--lc-sd-fraction", type=float, default=0.4)
    p.add_argument("--lc-binary-width", type=float, default=0.5)
    p.add_argument("--ratio", type=int, default=3)
    p.add_argument("--pop-size", type=int, default=16)
    p.add_argument("--generations", type=int, default=10)
    _add_common(p)
    p.set_defaults(func=cmd_simulate)

    p = sub.add_parser("match", help="match a cohort and write clusters")
    _add_cohort(p)
    p.add_argument("--method", required=True, choices=METHODS)
    p.add_argument("--calipers", help="name = width file for lc")
    p.add_argument("--lc-sd-fraction", type=float, default=0.4)
    p.add_argument("--lc-binary-width", type=float, default=0.5)
    p.add_argument("--ratio", type=int, default=3)
    p.add_argument("--caliper-mult", type=float, default=0.2)
    p.add_argument("--pop-size", type=int, default=16)
    p.add_argument("--generations", type=int, default=10)
    p.add_argument("--ridge", type=float, default=1e-8)
    _add_common(p)
    p.set_defaults(func=cmd_match)

    p = sub.add_parser("balance", help="standardized differences (Love-plot table)")
    _add_cohort(p)
    p.add_argument("--matches", nargs="*", default=[])
    p.add_argument("--threshold", type=float, default=0.1)
    p.add_argument("--svg", help="also write an SVG dot plot here")
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_balance)

    p = sub.add_parser("estimate", help="odds ratios with 95% CI per match file")
    _add_cohort(p)
    p.add_argument("--matches", nargs="*", default=[])
    _add_common(p, seed=False)
    p.set_defaults(func=cmd_estimate)
    return parser


def main(argv=None) -> int:
    argv = sys.argv[1:] if argv is None else list(argv)
    parser = build_parser()
    args = parser.parse_args(argv)
    if getattr(args, "methods", None) is not None and args.command == "simulate":
        bad = set(args.methods) - set(SIM_METHODS)
        if bad:
            parser.error(f"unknown methods {sorted(bad)}; choose from {', '.join(SIM_METHODS)}")
    try:
        return args.func(args, argv)
    except argparse.ArgumentTypeError as exc:
        parser.error(str(exc))
    except InfeasibleAssignment as exc:
        print(f"error: InfeasibleAssignment: {exc}", file=sys.stderr)
        return EXIT_INFEASIBLE
    except (DataError, LCMatchError, ValueError, OSError) as exc:
        print(f"error: {type(exc).__name__}: {exc}", file=sys.stderr)
        return EXIT_DATA


if __name__ == "__main__":
    sys.exit(main())
