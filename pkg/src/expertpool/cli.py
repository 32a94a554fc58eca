"""Command-line entry point.

Subcommands:
  run          run an experiment described by a JSON config file
  demo-lb      play the adaptive matching-penny game against a learner
  dump-stream  materialize an oblivious stream as a CSV loss file
  check        re-verify invariants on a run (alias for run with checks forced on)

The process exits nonzero iff any invariant or assertion fails.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

from .bench import (
    ExperimentConfig,
    dump_stream,
    run_experiment,
    run_lowerbound_demo,
    summarize,
)
from .streams import StreamParams, make_oracle


def _load_config(path: str) -> ExperimentConfig:
    with open(path) as fh:
        return ExperimentConfig.from_dict(json.load(fh))


def _cmd_run(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    if args.output is not None:
        config.output = args.output
    if args.checks is not None:
        config.checks = args.checks
    results = run_experiment(config)
    failed = False
    for r in results:
        line = (f"seed {r.seed}: loss={r.cumulative_loss:.4f} "
                f"best={r.best_total:.4f} regret={r.regret:.4f} "
                f"peak_words={r.peak_words}")
        print(line)
        for v in r.violations:
            failed = True
            print(f"  VIOLATION: {v}")
    print(json.dumps(summarize(results), indent=2))
    return 1 if failed else 0


def _cmd_demo_lb(args: argparse.Namespace) -> int:
    with open(args.config) as fh:
        spec = json.load(fh)
    results = run_lowerbound_demo(
        n=spec["n"],
        epsilon_prime=spec["eps-prime"],
        rounds=spec.get("rounds", 2000),
        learner_spec=spec.get("learner", {"kind": "mwu-full-memory"}),
        seeds=spec.get("seeds", [0]),
    )
    failed = False
    for r in results:
        th = r.thresholds
        print(f"seed {r.seed}: support={r.support} "
              f"avg_raw_loss={r.avg_raw_loss:.4f} "
              f"minmax={th['minmax']:.4f} approx={th['approx']:.4f} "
              f"uncovered={th['uncovered']:.4f}")
        if not r.avg_raw_loss >= 0.0:
            failed = True
            print("  VIOLATION: negative average loss")
    return 1 if failed else 0


def _cmd_dump_stream(args: argparse.Namespace) -> int:
    with open(args.config) as fh:
        spec = json.load(fh)
    out = args.output or spec.get("output")
    if out is None:
        print("error: no output path (use --output or the 'output' key)",
              file=sys.stderr)
        return 1
    params = StreamParams(spec["n"], spec["T"], seed=spec.get("seed", 0))
    oracle = make_oracle(params, spec["stream"])
    if oracle.mode == "adaptive-game":
        print("cannot dump an adaptive stream", file=sys.stderr)
        return 1
    dump_stream(oracle, Path(out))
    print(f"wrote {params.T} days x {params.n} experts to {out}")
    return 0


def _cmd_check(args: argparse.Namespace) -> int:
    config = _load_config(args.config)
    config.checks = "paranoid" if args.paranoid else "epoch"
    results = run_experiment(config)
    total = sum(len(r.violations) for r in results)
    for r in results:
        for v in r.violations:
            print(f"seed {r.seed} VIOLATION: {v}")
    print(f"{len(results)} trial(s), {total} violation(s)")
    return 1 if total else 0


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="expertpool",
        description="memory-bounded expert-prediction experiments",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run an experiment from a JSON config")
    p_run.add_argument("config", help="path to the experiment JSON")
    p_run.add_argument("--output", help="directory for per-seed CSV traces")
    p_run.add_argument("--checks", choices=["off", "epoch", "paranoid"])
    p_run.set_defaults(func=_cmd_run)

    p_demo = sub.add_parser("demo-lb", help="adaptive-game demonstration")
    p_demo.add_argument("config",
                        help="JSON with n, eps-prime, rounds, learner, seeds")
    p_demo.set_defaults(func=_cmd_demo_lb)

    p_dump = sub.add_parser("dump-stream", help="write a stream to CSV")
    p_dump.add_argument("config", help="JSON with n, T, seed and a stream descriptor")
    p_dump.add_argument("--output", help="destination CSV (default: 'output' key)")
    p_dump.set_defaults(func=_cmd_dump_stream)

    p_check = sub.add_parser("check", help="run with invariant checks forced on")
    p_check.add_argument("config", help="path to the experiment JSON")
    p_check.add_argument("--paranoid", action="store_true",
                         help="check after every day, not just epoch boundaries")
    p_check.set_defaults(func=_cmd_check)

    return parser


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except (ValueError, FileNotFoundError, KeyError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
