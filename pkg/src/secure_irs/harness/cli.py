"""Command-line entry point ``secure-irs``.

Verbs:
  run FILE          run the experiment described by a YAML file
  sweep             run a scenario with sweep axes given on the command line
  validate          check the core invariants on random instances
  dump-problem      print one assembled cone program

Exit codes: 0 success, 1 configuration error, 2 a trial or check hard-failed.
"""
from __future__ import annotations

import argparse
import os
import sys
from typing import List, Optional

import numpy as np

from .config import PRESETS, SCENARIOS, ConfigError, build_spec, load_spec, parse_axis
from .experiment import (
    emit_csv,
    emit_summary,
    emit_timings,
    emit_traces,
    hard_failures,
    run_experiment,
    summarize,
)

EXIT_OK, EXIT_CONFIG, EXIT_FAILED = 0, 1, 2


def _common(p: argparse.ArgumentParser):
    p.add_argument("--seed", type=int, default=None, help="base seed (default from config)")
    p.add_argument("--trials", type=int, default=None, help="trials per sweep point")
    p.add_argument("--out", default=None, help="output directory")
    p.add_argument("--scenario", choices=SCENARIOS, default=None)
    p.add_argument("--preset", choices=sorted(PRESETS), default=None)
    p.add_argument("--quiet", action="store_true", help="no per-trial progress lines")


def _parser() -> argparse.ArgumentParser:
    ap = argparse.ArgumentParser(prog="secure-irs", description=__doc__.split("\n\n")[0])
    sub = ap.add_subparsers(dest="verb", required=True)
    p = sub.add_parser("run", help="run an experiment file")
    p.add_argument("config", help="YAML experiment file")
    _common(p)
    p = sub.add_parser("sweep", help="run a scenario with command-line sweep axes")
    p.add_argument("--axis", action="append", default=[],
                   help="sweep axis, e.g. --axis b=1,2,3,none (repeatable)")
    p.add_argument("--gammas-db", default=None, help="comma list of QoS targets (power_min)")
    _common(p)
    p = sub.add_parser("validate", help="invariant checks on random instances")
    p.add_argument("--instances", type=int, default=5)
    _common(p)
    p = sub.add_parser("dump-problem", help="print one assembled cone program")
    p.add_argument("--step", choices=("w", "v"), default="w")
    p.add_argument("--formulation", choices=("soc", "lmi"), default="soc")
    _common(p)
    return ap


def _write(spec, records, quiet):
    os.makedirs(spec.out, exist_ok=True)
    emit_csv(records, os.path.join(spec.out, "trials.csv"))
    emit_traces(records, os.path.join(spec.out, "traces.csv"))
    emit_timings(records, os.path.join(spec.out, "timings.csv"))
    summary = summarize(records)
    emit_summary(summary, os.path.join(spec.out, "summary.csv"))
    if not quiet:
        for key, row in summary.items():
            print(f"{key}: median min-SR {row['median_min_sr_bps']:.4f} bps/Hz, "
                  f"median SSR {row['median_ssr_bps']:.4f}, median Jain {row['median_jain']:.3f}")
        print(f"wrote {spec.out}/trials.csv, traces.csv, summary.csv, timings.csv")


def _execute(spec, quiet) -> int:
    progress = None if quiet else (lambda msg: print(msg, flush=True))
    records = run_experiment(spec, progress)
    _write(spec, records, quiet)
    return EXIT_FAILED if hard_failures(records) else EXIT_OK


def _overrides(args):
    return dict(seed=args.seed, trials=args.trials, out=args.out, scenario=args.scenario)


def cmd_run(args) -> int:
    spec = load_spec(args.config, args.preset, **_overrides(args))
    return _execute(spec, args.quiet)


def cmd_sweep(args) -> int:
    sweep = dict(parse_axis(a) for a in args.axis) if args.axis else None
    over = _overrides(args)
    if sweep is not None:
        over["sweep"] = sweep
    if args.gammas_db:
        try:
            over["gammas_db"] = [float(g) for g in args.gammas_db.split(",")]
        except ValueError as exc:
            raise ConfigError(f"bad --gammas-db: {exc}") from exc
    spec = build_spec(None, args.preset, **over)
    return _execute(spec, args.quiet)


def cmd_validate(args) -> int:
    from .validate import run_checks
    results = run_checks(instances=args.instances, seed=args.seed or 0)
    failed = 0
    for name, ok, detail in results:
        print(f"{'PASS' if ok else 'FAIL'} {name}: {detail}")
        failed += not ok
    return EXIT_FAILED if failed else EXIT_OK


def cmd_dump(args) -> int:
    from ..channel import generate_channels
    from ..conic import dump_problem
    from ..robust.solvers import _initial, build_secrecy_model

    spec = build_spec(None, args.preset, **_overrides(args))
    config = spec.system_config(spec.points()[0], spec.seed)
    rng = np.random.default_rng(spec.seed)
    channels = generate_channels(config, rng)
    bf, phase = _initial(config, channels, rng)
    mode = "ssr" if spec.scenario.startswith("ssr") else "maxmin"
    mdl = build_secrecy_model(channels, bf, phase, config.P_T, mode, args.step,
                              list(range(channels.K)), penalty=spec.robust_params().o_init,
                              formulation=args.formulation)
    problem = mdl.build()
    text = problem.listing() + "\n" + dump_problem(problem)
    if args.out:
        os.makedirs(args.out, exist_ok=True)
        path = os.path.join(args.out, f"problem_{args.step}.txt")
        with open(path, "w", encoding="utf-8") as fh:
            fh.write(text)
        print(f"wrote {path}")
    else:
        sys.stdout.write(text)
    return EXIT_OK


def main(argv: Optional[List[str]] = None) -> int:
    args = _parser().parse_args(argv)
    handler = {"run": cmd_run, "sweep": cmd_sweep, "validate": cmd_validate,
               "dump-problem": cmd_dump}[args.verb]
    try:
        return handler(args)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG


if __name__ == "__main__":
    sys.exit(main())
