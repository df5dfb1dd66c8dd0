"""Command-line entry point: ``force-rl run|coverage|validate``.

Exit codes: 0 success, 1 runtime failure, 2 configuration error. The
``FORCE_RL_OUT`` environment variable overrides the output directory when
``--out`` is not given.
"""

import argparse
import os
import sys

from force_rl import coverage
from force_rl.errors import ConfigError, ForceRLError
from force_rl.experiments import load_config, run_experiment

EXIT_OK, EXIT_RUNTIME, EXIT_CONFIG = 0, 1, 2


def _out_dir(args, default):
    return args.out or os.environ.get("FORCE_RL_OUT") or default


def build_parser():
    parser = argparse.ArgumentParser(prog="force-rl", description="FORCE experiments and coverage suites")
    parser.add_argument("--jobs", type=int, default=1, help="parallel cells")
    parser.add_argument("--seed-offset", type=int, default=0, help="added to every seed")
    parser.add_argument("--out", default=None, help="output directory")
    sub = parser.add_subparsers(dest="command", required=True)

    p_run = sub.add_parser("run", help="run every cell of a config")
    p_run.add_argument("config")

    p_val = sub.add_parser("validate", help="check a config without running it")
    p_val.add_argument("config")

    p_cov = sub.add_parser("coverage", help="run one coverage suite")
    p_cov.add_argument("suite", choices=("catoni", "selfnorm", "elliptic"))
    p_cov.add_argument("--trials", type=int, default=None)
    p_cov.add_argument("--T", type=int, default=None)
    p_cov.add_argument("--delta", type=float, default=0.05)
    p_cov.add_argument("--d", type=int, default=3)
    p_cov.add_argument("--noise", type=float, default=0.1)
    p_cov.add_argument("--d-T-constant", type=float, default=1.0)
    p_cov.add_argument("--distributions", default="normal,lognormal,student3")
    return parser


def _coverage(args):
    out = _out_dir(args, "out")
    os.makedirs(out, exist_ok=True)
    seed = args.seed_offset
    if args.suite == "catoni":
        rows = coverage.catoni_coverage_suite(args.trials or 2000, args.T or 200,
                                              tuple(args.distributions.split(",")), args.delta, seed)
        path = os.path.join(out, "catoni_coverage.csv")
        coverage.write_rows(rows, coverage.CATONI_HEADER, path)
        ok = True
    elif args.suite == "selfnorm":
        rows = coverage.selfnorm_coverage_suite(args.trials or 500, args.T or 500, args.d, args.noise,
                                                args.delta, args.d_T_constant, seed=seed)
        path = os.path.join(out, "selfnorm_coverage.csv")
        coverage.write_rows(rows, coverage.SELFNORM_HEADER, path)
        ok = True
    else:
        rows = coverage.elliptic_suite(args.trials or 200, seed=seed)
        path = os.path.join(out, "elliptic.csv")
        coverage.write_rows(rows, coverage.ELLIPTIC_HEADER, path)
        ok = all(r["holds"] for r in rows)
    print(path)
    return EXIT_OK if ok else EXIT_RUNTIME


def main(argv=None):
    args = build_parser().parse_args(argv)
    if args.jobs < 1:
        print("error: --jobs must be at least 1", file=sys.stderr)
        return EXIT_CONFIG
    try:
        if args.command == "coverage":
            return _coverage(args)
        cfg = load_config(args.config)
        if args.command == "validate":
            print(f"{args.config}: ok ({len(cfg.environments)} environments, {len(cfg.agents)} agents, "
                  f"{len(cfg.seeds)} seeds)")
            return EXIT_OK
        rows = run_experiment(cfg, out_dir=_out_dir(args, cfg.output_dir), jobs=args.jobs,
                              seed_offset=args.seed_offset)
    except ConfigError as exc:
        print(f"config error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (ForceRLError, OSError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_RUNTIME
    failed = [r for r in rows if r["status"] != "ok"]
    for r in failed:
        print(f"cell {r['cell']} failed: {r['message']}", file=sys.stderr)
    return EXIT_RUNTIME if failed else EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
