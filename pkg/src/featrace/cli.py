"""Command-line entry point.

    featrace analyze    --config cfg [--new DIR]
    featrace select     --config cfg --old DIR --new DIR [--patch F] [--git REPO]
    featrace prioritize --config cfg --old DIR --new DIR [--seed N]
    featrace eval       --config cfg --old DIR --new DIR [...more pairs] --logs F

Exit codes: 0 clean, 1 analysis degraded (warnings present), 2 fatal
configuration or I/O error.  FEATRACE_JOBS caps file-scan parallelism.
"""

from __future__ import annotations

import argparse
import logging
import sys
from typing import List, Optional

from . import evaluation, pipeline
from .config import ConfigError, load_config
from .snapshots import load_git_snapshot, load_snapshot

log = logging.getLogger(__name__)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="featrace",
        description="Feature-oriented regression test selection and "
                    "prioritization for preprocessor-configured C/C++ code.")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p: argparse.ArgumentParser, pairs: bool = False) -> None:
        p.add_argument("--config", required=True, help="key:value config file")
        p.add_argument("--old", action="append", default=[],
                       help="old snapshot directory or git revision" +
                            (" (repeatable for eval pairs)" if pairs else ""))
        p.add_argument("--new", action="append", default=[],
                       help="new snapshot directory or git revision" +
                            (" (repeatable for eval pairs)" if pairs else ""))
        p.add_argument("--git", help="git repository; --old/--new become revisions")
        p.add_argument("--patch", help="unified diff consumed instead of internal diffing")
        p.add_argument("--logs", help="JSON-lines CI log file")
        p.add_argument("--seed", type=int, help="seed for the random tiebreak")
        p.add_argument("--out", default="featrace-out", help="report directory")
        p.add_argument("-v", "--verbose", action="store_true")

    common(sub.add_parser("analyze", help="feature + traceability reports for one snapshot"))
    common(sub.add_parser("select", help="full pipeline for one snapshot pair"))
    common(sub.add_parser("prioritize", help="full pipeline with ranking forced on"))
    common(sub.add_parser("eval", help="compare approaches over snapshot pairs"), pairs=True)
    return parser


def _single(values: List[str], flag: str) -> Optional[str]:
    if len(values) > 1:
        raise ConfigError(f"{flag} given {len(values)} times; this command takes one")
    return values[0] if values else None


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s")
    try:
        return _dispatch(args)
    except ConfigError as exc:
        print(f"featrace: config error: {exc}", file=sys.stderr)
        return 2
    except (OSError, ValueError) as exc:
        print(f"featrace: {exc}", file=sys.stderr)
        return 2


def _dispatch(args) -> int:
    config = load_config(args.config)
    for msg in config.warnings:
        log.warning("config: %s", msg)

    if args.command == "eval":
        return _run_eval(args, config)

    old = _single(args.old, "--old")
    new = _single(args.new, "--new")

    if args.command == "analyze":
        source = new or config.system_path
        if source is None:
            raise ConfigError("analyze needs --new or a system_path in the config")
        snapshot = (load_git_snapshot(args.git, source) if args.git
                    else load_snapshot(source))
        result = pipeline.analyze_only(config, snapshot, args.out)
        _print_summary(result.summary)
        return result.summary.exit_code

    old_snap, new_snap, hunks = pipeline.resolve_snapshots(
        config, old, new, git_repo=args.git, patch_path=args.patch)
    prioritization = True if args.command == "prioritize" else None
    result = pipeline.run_pipeline(config, old_snap, new_snap, args.out,
                                   hunks=hunks, prioritization=prioritization,
                                   seed=args.seed)
    _print_summary(result.summary)
    return result.summary.exit_code


def _run_eval(args, config) -> int:
    if not args.old or len(args.old) != len(args.new):
        raise ConfigError("eval needs matching --old/--new pairs")
    pairs = []
    for old, new in zip(args.old, args.new):
        if args.git:
            pairs.append((load_git_snapshot(args.git, old), load_git_snapshot(args.git, new)))
        else:
            pairs.append((load_snapshot(old), load_snapshot(new)))
    logs = evaluation.load_commit_logs(args.logs) if args.logs else {}
    rows = pipeline.eval_command(config, pairs, logs, args.out, seed=args.seed)
    print(f"featrace eval: {len(rows)} metric rows -> {args.out}/metrics.csv")
    return 0


def _print_summary(summary) -> None:
    counts = summary.counts
    print(f"featrace: {summary.old_label} -> {summary.new_label}: "
          f"{counts.get('code_files', 0)} code files, "
          f"{counts.get('features', 0)} features, "
          f"{counts.get('tests', 0)} tests, "
          f"{counts.get('changed_features', 0)} changed features, "
          f"{counts.get('selected', 0)} selected")
    for step, seconds in summary.timings.items():
        print(f"  {step}: {seconds:.3f}s")
    if summary.warnings:
        print(f"featrace: {len(summary.warnings)} warning(s); exit code 1", file=sys.stderr)


if __name__ == "__main__":
    sys.exit(main())
