"""Command-line report tool.

Subcommands::

    w1-perfsan report LOG [--symbols MAP] [--rules a,b] [--top N] ...
    w1-perfsan dump LOG [--symbols MAP]
    w1-perfsan histogram LOG [--kind KIND] [--csv PATH]
    w1-perfsan selftest [--buffer-bytes N] [--keep-log PATH]

Exit status: 0 on success, 1 when ``--fail-on-findings`` is set and there
are findings (or the selftest fails), 2 when the log or symbol map cannot be
read.

The selftest takes its buffer size from W1_BUFFER_BYTES and keeps the corpus
log at W1_LOG_PATH unless the matching flags are given.
"""

from __future__ import annotations

import argparse
import logging
import os
import sys
import tempfile
from collections.abc import Sequence
from pathlib import Path

from pydantic import ValidationError

from w1.perfsan.config import ENV_LOG_PATH, RuleConfig
from w1.perfsan.corpus import run_selftest
from w1.perfsan.enums import HistogramKind, RuleId
from w1.perfsan.errors import PerfsanError, UnknownTraceError
from w1.perfsan.report import (
    emit_csv,
    findings_to_json,
    histogram,
    render_findings,
    render_histogram,
)
from w1.perfsan.rules import run_all
from w1.perfsan.symbols import SymbolMap, load_symbol_map, symbolize_frame
from w1.perfsan.tracedb import TraceDb, format_timeline, load, reconstruct_instances

logger = logging.getLogger(__name__)

EXIT_OK = 0
EXIT_FINDINGS = 1
EXIT_BAD_INPUT = 2


def _threshold_flag(name: str) -> str:
    return "--" + name.replace("_", "-")


def _add_threshold_flags(parser: argparse.ArgumentParser) -> None:
    group = parser.add_argument_group("rule thresholds")
    for name, info in RuleConfig.model_fields.items():
        group.add_argument(
            _threshold_flag(name),
            dest=name,
            type=int,
            default=None,
            metavar="N",
            help=f"{name.replace('_', ' ')} (default {info.default})",
        )


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="w1-perfsan",
        description="Analyze container event logs for performance anti-patterns.",
    )
    parser.add_argument(
        "-v", "--verbose", action="store_true", help="debug diagnostics on stderr"
    )
    sub = parser.add_subparsers(dest="command", required=True)

    report = sub.add_parser("report", help="print severity-sorted findings")
    report.add_argument("log", type=Path)
    report.add_argument("--symbols", type=Path, help="symbol-map file")
    report.add_argument("--rules", help="comma-separated rule ids (default: all)")
    report.add_argument(
        "--top", type=int, default=20, help="findings to print (default 20)"
    )
    report.add_argument("--min-severity", type=int, default=1, metavar="N")
    report.add_argument("--json", action="store_true", help="print findings as JSON")
    report.add_argument(
        "--fail-on-findings",
        action="store_true",
        help="exit 1 when anything is reported",
    )
    _add_threshold_flags(report)
    report.set_defaults(handler=cmd_report)

    dump = sub.add_parser("dump", help="list every instance timeline")
    dump.add_argument("log", type=Path)
    dump.add_argument(
        "--symbols", type=Path, help="append the innermost symbolicated frame"
    )
    dump.set_defaults(handler=cmd_dump)

    hist = sub.add_parser("histogram", help="print histogram summaries")
    hist.add_argument("log", type=Path)
    hist.add_argument(
        "--kind", choices=[k.value for k in HistogramKind], help="default: all"
    )
    hist.add_argument(
        "--csv", type=Path, help="write bucket,class,count rows (needs --kind)"
    )
    hist.set_defaults(handler=cmd_histogram)

    selftest = sub.add_parser("selftest", help="run the built-in anti-pattern corpus")
    selftest.add_argument("--buffer-bytes", type=int, default=None, metavar="N")
    selftest.add_argument(
        "--keep-log",
        type=Path,
        help="keep the combined corpus log here (default: $W1_LOG_PATH)",
    )
    selftest.set_defaults(handler=cmd_selftest)
    return parser


def _load_inputs(args: argparse.Namespace) -> tuple[TraceDb, SymbolMap | None]:
    db = load(args.log)
    symbols = load_symbol_map(args.symbols) if getattr(args, "symbols", None) else None
    return db, symbols


def _rule_config(args: argparse.Namespace) -> RuleConfig:
    overrides = {
        name: getattr(args, name)
        for name in RuleConfig.model_fields
        if getattr(args, name, None) is not None
    }
    return RuleConfig.model_validate(overrides)


def cmd_report(args: argparse.Namespace) -> int:
    try:
        config = _rule_config(args)
        rule_ids = (
            [RuleId(r.strip()) for r in args.rules.split(",")] if args.rules else None
        )
    except (ValidationError, ValueError) as exc:
        logger.error("invalid report options: %s", exc)
        return EXIT_BAD_INPUT
    db, symbols = _load_inputs(args)

    findings = [
        f
        for f in run_all(reconstruct_instances(db), config, rule_ids)
        if f.severity >= args.min_severity
    ]
    if args.json:
        sys.stdout.write(findings_to_json(findings[: args.top]) + "\n")
    else:
        sys.stdout.write(render_findings(findings, db, symbols, args.top))
    logger.info("%d findings from %d events", len(findings), len(db.events))
    if findings and args.fail_on_findings:
        return EXIT_FINDINGS
    return EXIT_OK


def _innermost(db: TraceDb, trace_id: int, symbols: SymbolMap) -> str:
    try:
        frames = db.resolve_trace(trace_id)
    except UnknownTraceError:
        return f"<unknown trace {trace_id}>"
    return symbolize_frame(frames[0], symbols, db.segments) if frames else "<no frames>"


def cmd_dump(args: argparse.Namespace) -> int:
    db, symbols = _load_inputs(args)
    out: list[str] = []
    for timeline in reconstruct_instances(db):
        lines = format_timeline(timeline)
        if symbols is not None:
            lines[1:] = [
                f"{line}  {_innermost(db, event.trace_id, symbols)}"
                for line, event in zip(lines[1:], timeline.events, strict=True)
            ]
        out.extend(lines)
    if out:
        sys.stdout.write("\n".join(out) + "\n")
    return EXIT_OK


def cmd_histogram(args: argparse.Namespace) -> int:
    if args.csv is not None and args.kind is None:
        logger.error("--csv needs --kind")
        return EXIT_BAD_INPUT
    db = load(args.log)
    timelines = reconstruct_instances(db)
    kinds = [HistogramKind(args.kind)] if args.kind else list(HistogramKind)
    rendered = []
    for kind in kinds:
        hist = histogram(timelines, kind)
        rendered.append(render_histogram(hist))
        if args.csv is not None:
            emit_csv(hist, args.csv)
    sys.stdout.write("\n".join(rendered))
    return EXIT_OK


def cmd_selftest(args: argparse.Namespace) -> int:
    keep_log = args.keep_log
    if keep_log is None and (env_path := os.environ.get(ENV_LOG_PATH)):
        keep_log = Path(env_path)
    with tempfile.TemporaryDirectory(prefix="w1-perfsan-") as tmp:
        report = run_selftest(
            Path(tmp),
            buffer_capacity=args.buffer_bytes,
            corpus_log=keep_log,
        )
    sys.stdout.write(report.render())
    return EXIT_OK if report.passed else EXIT_FINDINGS


def main(argv: Sequence[str] | None = None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    logging.basicConfig(
        level=logging.DEBUG if args.verbose else logging.WARNING,
        format="%(levelname)s %(name)s: %(message)s",
        stream=sys.stderr,
    )
    try:
        return args.handler(args)
    except (OSError, PerfsanError, ValidationError) as exc:
        logger.error("%s", exc)
        return EXIT_BAD_INPUT


if __name__ == "__main__":
    sys.exit(main())
