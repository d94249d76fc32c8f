"""Command-line interface: validate configs, run experiments, recompute reports.

Exit codes: 0 success, 2 config parse error, 3 config validation error,
4 output I/O failure.
"""

from __future__ import annotations

import argparse
import json
import os
import sys
from pathlib import Path

from .harness import (
    ConfigParseError,
    ConfigValidationError,
    load_config,
    parse_seed,
    run_experiment,
    summarize_terminal_rows,
    write_reports,
)

EXIT_OK = 0
EXIT_PARSE = 2
EXIT_VALIDATION = 3
EXIT_IO = 4


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="procsim",
        description="Discrete-event procurement simulator and policy-comparison harness",
    )
    sub = parser.add_subparsers(dest="command", required=True)

    p_validate = sub.add_parser("validate", help="parse and validate a config file")
    p_validate.add_argument("config", help="config path or the preset name 'paper-s5'")

    p_run = sub.add_parser("run", help="run the Monte Carlo experiment")
    p_run.add_argument("config", help="config path or the preset name 'paper-s5'")
    p_run.add_argument("--replications", "-M", type=int, default=None)
    p_run.add_argument(
        "--seed", default=None, help="master seed, decimal or hex (e.g. 0x1f)"
    )
    p_run.add_argument(
        "--out", default=None, help="output directory (default: $PROCSIM_OUT or config)"
    )
    p_run.add_argument(
        "--policies", default=None, help="comma-separated subset of policies to run"
    )
    p_run.add_argument(
        "--event-log", action="store_true", help="write per-run event logs (JSONL)"
    )
    p_run.add_argument("--jobs", type=int, default=1, help="parallel worker processes")

    p_report = sub.add_parser(
        "report", help="recompute summary statistics from a results directory"
    )
    p_report.add_argument("dir", help="directory containing terminal.csv")
    return parser


def _cmd_validate(args) -> int:
    load_config(args.config)
    print(f"configuration OK: {args.config}")
    return EXIT_OK


def _cmd_run(args) -> int:
    config = load_config(args.config)
    if args.seed is not None:
        config.seed = parse_seed(args.seed)
        config.raw["seed"] = config.seed
    if args.replications is not None:
        if args.replications < 1:
            raise ConfigValidationError(["--replications must be >= 1"])
        config.replications = args.replications
        config.raw["replications"] = args.replications
    policies = None
    if args.policies:
        policies = [name.strip() for name in args.policies.split(",") if name.strip()]
    out_dir = args.out or os.environ.get("PROCSIM_OUT") or config.output_dir

    bundle = run_experiment(
        config, policies=policies, jobs=max(1, args.jobs), event_log=args.event_log
    )
    try:
        written = write_reports(bundle, out_dir)
    except OSError as exc:
        print(f"error: cannot write reports: {exc}", file=sys.stderr)
        return EXIT_IO

    stats = bundle.statistics()
    print(f"ran {bundle.replications} replication(s) x {len(bundle.policies)} policies")
    for policy in bundle.policies:
        s = stats[policy]
        print(
            f"  {policy:<16} mean={s['mean']:<12.4f} median={s['median']:<12.4f} "
            f"iqr={s['iqr']:.4f}"
        )
    for path in written[:3]:
        print(f"wrote {path}")
    return EXIT_OK


def _cmd_report(args) -> int:
    terminal = Path(args.dir) / "terminal.csv"
    if not terminal.exists():
        print(f"error: {terminal} not found", file=sys.stderr)
        return EXIT_IO
    try:
        stats = summarize_terminal_rows(terminal)
    except (OSError, ValueError, KeyError) as exc:
        print(f"error: cannot read {terminal}: {exc}", file=sys.stderr)
        return EXIT_IO
    for policy, s in stats.items():
        print(
            f"  {policy:<16} mean={s['mean']:<12.4f} median={s['median']:<12.4f} "
            f"iqr={s['iqr']:.4f}"
        )
    summary_path = Path(args.dir) / "summary.json"
    if summary_path.exists():
        try:
            summary = json.loads(summary_path.read_text(encoding="utf-8"))
            summary["statistics"] = stats
            with summary_path.open("w", encoding="utf-8", newline="") as fh:
                json.dump(summary, fh, indent=2)
                fh.write("\n")
            print(f"updated {summary_path}")
        except (OSError, json.JSONDecodeError) as exc:
            print(f"error: cannot update {summary_path}: {exc}", file=sys.stderr)
            return EXIT_IO
    return EXIT_OK


def main(argv=None) -> int:
    args = _build_parser().parse_args(argv)
    try:
        if args.command == "validate":
            return _cmd_validate(args)
        if args.command == "run":
            return _cmd_run(args)
        if args.command == "report":
            return _cmd_report(args)
    except ConfigValidationError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_VALIDATION
    except ConfigParseError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_PARSE
    return EXIT_OK


if __name__ == "__main__":
    sys.exit(main())
