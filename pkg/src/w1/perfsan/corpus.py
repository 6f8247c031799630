"""Synthetic anti-pattern programs for the selftest.

Every catalog rule has a positive program that must trigger it and a
matched negative program, the corrected version of the same code, that must
not. Programs run in-process against the real shims and logger; the log is
then decoded and analyzed like any other.

Runs use a `SteppingClock` and a frame provider anchored at the runner, so
the same corpus yields identical findings regardless of buffer size or of
who called the runner.
"""

from __future__ import annotations

import logging
import os
import sys
from collections.abc import Callable, Iterable, Sequence
from dataclasses import dataclass, field
from pathlib import Path

from w1.perfsan.clock import SteppingClock
from w1.perfsan.config import ENV_BUFFER_BYTES, LoggerConfig, RuleConfig
from w1.perfsan.enums import RuleId
from w1.perfsan.errors import PerfsanError
from w1.perfsan.frames import PythonFrameProvider
from w1.perfsan.logger import EventLogger
from w1.perfsan.rules import Finding, run_all
from w1.perfsan.shims import (
    GrowableArray,
    HashedMap,
    OrderedMap,
    SharedHandle,
    TextBuffer,
)
from w1.perfsan.tracedb import TraceDb, load, reconstruct_instances

logger = logging.getLogger(__name__)

CLOCK_STEP = 10
MIN_CORPUS_EVENTS = 10_000
MIN_COMPACT_RATIO = 0.9


@dataclass(frozen=True, slots=True)
class ProgramContext:
    """What a corpus program gets to work with."""

    logger: EventLogger
    clock: SteppingClock


@dataclass(frozen=True, slots=True)
class CorpusProgram:
    rule: RuleId
    positive: bool
    run: Callable[[ProgramContext], None]

    @property
    def name(self) -> str:
        return f"{self.rule} {'positive' if self.positive else 'negative'}"


PROGRAMS: list[CorpusProgram] = []


ProgramFn = Callable[[ProgramContext], None]


def _program(rule: RuleId, *, positive: bool) -> Callable[[ProgramFn], ProgramFn]:
    def register(fn: ProgramFn) -> ProgramFn:
        PROGRAMS.append(CorpusProgram(rule=rule, positive=positive, run=fn))
        return fn

    return register


def get_program(rule: str, *, positive: bool) -> CorpusProgram:
    rule_id = RuleId(rule)
    for program in PROGRAMS:
        if program.rule is rule_id and program.positive is positive:
            return program
    raise KeyError(f"no {'positive' if positive else 'negative'} program for {rule}")


def positive_programs() -> list[CorpusProgram]:
    return [p for p in PROGRAMS if p.positive]


# ---------------------------------------------------------------------------
# Programs
# ---------------------------------------------------------------------------


@dataclass
class _Point:
    x: int
    y: int


@_program(RuleId.SHORT_LIFETIME, positive=True)
def temporary_buffers_in_loop(ctx: ProgramContext) -> None:
    for i in range(50):
        with GrowableArray(logger=ctx.logger) as scratch:
            for j in range(8):
                scratch.push_back(i * j)


@_program(RuleId.SHORT_LIFETIME, positive=False)
def long_lived_buffer(ctx: ProgramContext) -> None:
    with GrowableArray(logger=ctx.logger) as values:
        for j in range(20):
            values.push_back(j)
        ctx.clock.advance(5_000)


@_program(RuleId.GROWTH_REALLOC, positive=True)
def grow_without_reserve(ctx: ProgramContext) -> None:
    for _ in range(100):
        with GrowableArray(logger=ctx.logger) as values:
            for j in range(100):
                values.push_back(j)


@_program(RuleId.GROWTH_REALLOC, positive=False)
def grow_after_reserve(ctx: ProgramContext) -> None:
    for _ in range(100):
        with GrowableArray(logger=ctx.logger) as values:
            values.reserve(100)
            for j in range(100):
                values.push_back(j)


@_program(RuleId.DATA_SHIFT, positive=True)
def prepend_repeatedly(ctx: ProgramContext) -> None:
    with GrowableArray(logger=ctx.logger) as values:
        for j in range(200):
            values.insert(0, j)


@_program(RuleId.DATA_SHIFT, positive=False)
def insert_at_end(ctx: ProgramContext) -> None:
    with GrowableArray(logger=ctx.logger) as values:
        for j in range(200):
            values.insert(len(values), j)


@_program(RuleId.PUSH_BACK_COPY, positive=True)
def push_copies(ctx: ProgramContext) -> None:
    with GrowableArray(capacity=32, logger=ctx.logger) as points:
        for i in range(20):
            point = _Point(i, i)
            points.push_back(_Point(point.x, point.y), was_copied=True)


@_program(RuleId.PUSH_BACK_COPY, positive=False)
def emplace_in_place(ctx: ProgramContext) -> None:
    with GrowableArray(capacity=32, logger=ctx.logger) as points:
        for i in range(20):
            points.emplace_back(_Point, i, i)


@_program(RuleId.SHRINK_TO_FIT, positive=True)
def over_reserved(ctx: ProgramContext) -> None:
    with GrowableArray(logger=ctx.logger) as values:
        values.reserve(1024)
        for j in range(10):
            values.push_back(j)


@_program(RuleId.SHRINK_TO_FIT, positive=False)
def over_reserved_then_shrunk(ctx: ProgramContext) -> None:
    with GrowableArray(logger=ctx.logger) as values:
        values.reserve(1024)
        for j in range(10):
            values.push_back(j)
        values.shrink_to_fit()


def _checksum(values: GrowableArray[int]) -> int:
    return sum(values.to_list())


@_program(RuleId.VALUE_COPY, positive=True)
def pass_by_value(ctx: ProgramContext) -> None:
    with GrowableArray(range(50), logger=ctx.logger) as values:
        for _ in range(5):
            with values.copy() as argument:
                _checksum(argument)


@_program(RuleId.VALUE_COPY, positive=False)
def pass_by_reference(ctx: ProgramContext) -> None:
    with GrowableArray(range(50), logger=ctx.logger) as values:
        for _ in range(5):
            _checksum(values)
        with values.take() as moved:
            _checksum(moved)


@_program(RuleId.SMALL_VECTOR, positive=True)
def always_small(ctx: ProgramContext) -> None:
    for i in range(100):
        with GrowableArray(logger=ctx.logger) as pair:
            for j in range(4):
                pair.push_back(i + j)


@_program(RuleId.SMALL_VECTOR, positive=False)
def sometimes_large(ctx: ProgramContext) -> None:
    for i in range(10):
        with GrowableArray(logger=ctx.logger) as values:
            for j in range(4 if i % 2 else 64):
                values.push_back(j)


@_program(RuleId.UNIQUE_SHARED, positive=True)
def never_shared(ctx: ProgramContext) -> None:
    for i in range(20):
        handle = SharedHandle(_Point(i, i), logger=ctx.logger)
        handle.get()
        handle.release()


@_program(RuleId.UNIQUE_SHARED, positive=False)
def shared_once(ctx: ProgramContext) -> None:
    for i in range(20):
        handle = SharedHandle(_Point(i, i), logger=ctx.logger)
        other = handle.copy()
        other.get()
        other.release()
        handle.release()


@_program(RuleId.DUPLICATE_STRING, positive=True)
def same_string_everywhere(ctx: ProgramContext) -> None:
    for _ in range(150):
        with TextBuffer("the same configuration value", logger=ctx.logger) as text:
            len(text)


@_program(RuleId.DUPLICATE_STRING, positive=False)
def distinct_strings(ctx: ProgramContext) -> None:
    for i in range(150):
        with TextBuffer(f"configuration value number {i}", logger=ctx.logger) as text:
            len(text)


@_program(RuleId.UNORDERED_MAP, positive=True)
def ordered_map_only_looked_up(ctx: ProgramContext) -> None:
    with OrderedMap(logger=ctx.logger) as table:
        for i in range(20):
            table[i] = i * i
        for i in range(20):
            table.get(i)


@_program(RuleId.UNORDERED_MAP, positive=False)
def ordered_map_traversed(ctx: ProgramContext) -> None:
    with OrderedMap(logger=ctx.logger) as table:
        for i in range(20):
            table[i] = i * i
        for i in range(20):
            table.get(i)
        for key in table:
            table.get(key)


@_program(RuleId.DOUBLE_LOOKUP, positive=True)
def check_then_fetch(ctx: ProgramContext) -> None:
    total = 0
    with HashedMap(logger=ctx.logger) as table:
        for i in range(50):
            if i not in table:
                table[i] = i
        for i in range(50):
            if i in table:
                total += table[i]


@_program(RuleId.DOUBLE_LOOKUP, positive=False)
def fetch_once(ctx: ProgramContext) -> None:
    total = 0
    with HashedMap(logger=ctx.logger) as table:
        for i in range(50):
            table[i] = i
        for i in range(50):
            value = table.find(i)
            if value is not None:
                total += value


@_program(RuleId.UNUSED_INSTANCE, positive=True)
def constructed_and_dropped(ctx: ProgramContext) -> None:
    for _ in range(10):
        with GrowableArray(logger=ctx.logger):
            pass


@_program(RuleId.UNUSED_INSTANCE, positive=False)
def constructed_and_used(ctx: ProgramContext) -> None:
    for i in range(10):
        with GrowableArray(logger=ctx.logger) as values:
            values.push_back(i)


def _fan_out(ctx: ProgramContext, copies: int) -> None:
    handle = SharedHandle(_Point(0, 0), logger=ctx.logger)
    owners = [handle.copy() for _ in range(copies)]
    for owner in owners:
        owner.release()
    handle.release()


@_program(RuleId.HIGH_REFCOUNT, positive=True)
def widely_shared(ctx: ProgramContext) -> None:
    _fan_out(ctx, 150)


@_program(RuleId.HIGH_REFCOUNT, positive=False)
def narrowly_shared(ctx: ProgramContext) -> None:
    _fan_out(ctx, 10)


# ---------------------------------------------------------------------------
# Runner
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class CorpusRun:
    """Decoded result of running programs into one log.

    Attributes:
        db: The decoded log
        findings: All findings, in report order
        compact_events: Compact event commands counted by the logger
        regular_events: Regular event commands counted by the logger
        buffer_capacity: Logger buffer size the programs ran with
    """

    db: TraceDb
    findings: tuple[Finding, ...]
    compact_events: int
    regular_events: int
    buffer_capacity: int

    def fired(self, rule: str) -> list[Finding]:
        return [f for f in self.findings if f.rule == rule]


def run_programs(
    programs: Iterable[CorpusProgram],
    output_path: Path,
    *,
    buffer_capacity: int | None = None,
    rule_config: RuleConfig | None = None,
) -> CorpusRun:
    """Run ``programs`` in order into one log and analyze it.

    Without an explicit ``buffer_capacity`` the buffer size comes from
    W1_BUFFER_BYTES, falling back to the logger default.

    Raises:
        PerfsanError: The logger failed while the programs ran.
    """
    clock = SteppingClock(step=CLOCK_STEP)
    settings: dict[str, object] = {"output_path": output_path, "clock": clock}
    if buffer_capacity is not None:
        config = LoggerConfig.model_validate(
            {**settings, "buffer_capacity": buffer_capacity}
        )
    else:
        # output_path always wins over W1_LOG_PATH
        env = {k: v for k, v in os.environ.items() if k == ENV_BUFFER_BYTES}
        config = LoggerConfig.from_env(env, **settings)
    provider = PythonFrameProvider(max_depth=config.max_depth, anchor=sys._getframe())
    event_logger = EventLogger(config, provider)
    context = ProgramContext(logger=event_logger, clock=clock)

    for program in programs:
        logger.debug("running %s", program.name)
        program.run(context)
    event_logger.flush()
    if event_logger.failed:
        raise PerfsanError(f"event logger failed: {event_logger.last_error}")

    db = load(output_path)
    findings = run_all(reconstruct_instances(db), rule_config)
    return CorpusRun(
        db=db,
        findings=tuple(findings),
        compact_events=event_logger.compact_events,
        regular_events=event_logger.regular_events,
        buffer_capacity=config.buffer_capacity,
    )


@dataclass(frozen=True, slots=True)
class SelftestCheck:
    name: str
    passed: bool
    detail: str = ""


@dataclass(frozen=True)
class SelftestReport:
    checks: tuple[SelftestCheck, ...]
    corpus: CorpusRun
    failures: tuple[SelftestCheck, ...] = field(init=False)

    def __post_init__(self) -> None:
        failures = tuple(c for c in self.checks if not c.passed)
        object.__setattr__(self, "failures", failures)

    @property
    def passed(self) -> bool:
        return not self.failures

    def render(self) -> str:
        lines = [
            f"{'PASS' if check.passed else 'FAIL'}  {check.name}"
            + (f"  ({check.detail})" if check.detail else "")
            for check in self.checks
        ]
        lines.append(
            f"{len(self.checks) - len(self.failures)}/{len(self.checks)} checks passed"
        )
        return "\n".join(lines) + "\n"


def run_selftest(
    workdir: Path,
    *,
    buffer_capacity: int | None = None,
    corpus_log: Path | None = None,
    rules: Sequence[RuleId] | None = None,
) -> SelftestReport:
    """Run the matched program pairs and the combined corpus.

    Each program runs into its own log under ``workdir``: positives must
    fire their rule, negatives must not. All positives then run into one
    corpus log (``corpus_log`` if given) that must fire every rule and be
    mostly compact events.
    """
    selected = list(rules) if rules is not None else list(RuleId)
    checks: list[SelftestCheck] = []

    for rule in selected:
        for positive in (True, False):
            program = get_program(rule, positive=positive)
            log_path = workdir / f"{rule}-{'pos' if positive else 'neg'}.w1log"
            run = run_programs([program], log_path, buffer_capacity=buffer_capacity)
            hits = len(run.fired(rule))
            ok = hits >= 1 if positive else hits == 0
            checks.append(SelftestCheck(program.name, ok, f"{hits} findings"))

    corpus_path = corpus_log or workdir / "corpus.w1log"
    corpus = run_programs(
        [p for p in positive_programs() if p.rule in selected],
        corpus_path,
        buffer_capacity=buffer_capacity,
    )
    missing = [str(r) for r in selected if not corpus.fired(r)]
    checks.append(
        SelftestCheck(
            "corpus fires every rule",
            not missing,
            f"missing: {', '.join(missing)}"
            if missing
            else f"{len(corpus.findings)} findings",
        )
    )
    if rules is None:
        events = len(corpus.db.events)
        ratio = corpus.db.compact_ratio
        checks.append(
            SelftestCheck(
                "corpus compact ratio",
                events >= MIN_CORPUS_EVENTS and ratio >= MIN_COMPACT_RATIO,
                f"{events} events, {ratio:.1%} compact",
            )
        )
    report = SelftestReport(checks=tuple(checks), corpus=corpus)
    logger.info(
        "selftest: %d/%d checks passed",
        len(checks) - len(report.failures),
        len(checks),
    )
    return report
