"""Text rendering of findings and histogram summaries.

Everything here is pure: the same inputs render byte-identical output.
"""

from __future__ import annotations

import csv
import logging
from collections import Counter
from collections.abc import Iterable, Sequence
from pathlib import Path

from pydantic import BaseModel, ConfigDict, Field, TypeAdapter

from w1.perfsan.enums import HistogramKind, ShimClass
from w1.perfsan.errors import UnknownHistogramKindError, UnknownTraceError
from w1.perfsan.rules import CATALOG, Finding
from w1.perfsan.symbols import SymbolMap, symbolize
from w1.perfsan.tracedb import InstanceTimeline, TraceDb, reconstruct_instances

logger = logging.getLogger(__name__)

NO_ISSUES = "No issues detected."
CSV_HEADER = ("bucket", "class", "count")
BAR_WIDTH = 40

_AXES: dict[HistogramKind, tuple[str, str]] = {
    HistogramKind.SIZE: ("size at destruction", "elements"),
    HistogramKind.LIFETIME: ("floor(log2(lifetime))", "ticks"),
    HistogramKind.REFCOUNT: ("max reference count", "references"),
    HistogramKind.STRING_DUP: ("instances sharing one string content", "instances"),
}


# ---------------------------------------------------------------------------
# Findings
# ---------------------------------------------------------------------------


def _trace_lines(
    db: TraceDb,
    trace_id: int,
    symbol_map: SymbolMap | None,
) -> list[str]:
    try:
        frames = db.resolve_trace(trace_id)
    except UnknownTraceError:
        return [f"   <unknown trace {trace_id}>"]
    if not frames:
        return ["   <no frames>"]
    rendered = symbolize(frames, symbol_map, db.segments)
    return [
        f"   {i}) {frame:#x} {text}"
        for i, (frame, text) in enumerate(zip(frames, rendered, strict=True))
    ]


def render_findings(
    findings: Sequence[Finding],
    db: TraceDb,
    symbol_map: SymbolMap | None = None,
    top_n: int | None = 20,
) -> str:
    """Render findings as two-line headlines followed by sample traces.

    Findings are printed in the given order (run_all's severity order).
    Each sample trace is a numbered frame list, innermost frame first.
    """
    if not findings:
        return NO_ISSUES + "\n"
    shown = findings if top_n is None else findings[:top_n]
    blocks: list[str] = []
    for finding in shown:
        lines = list(CATALOG[finding.rule].headline(finding))
        for n, trace_id in enumerate(finding.samples):
            if n:
                lines.append("   --")
            lines.extend(_trace_lines(db, trace_id, symbol_map))
        blocks.append("\n".join(lines))
    omitted = len(findings) - len(shown)
    if omitted:
        blocks.append(f"({omitted} more findings not shown)")
    return "\n\n".join(blocks) + "\n"


def findings_to_json(findings: Sequence[Finding]) -> str:
    """JSON array of findings for downstream tooling."""
    adapter = TypeAdapter(list[Finding])
    return adapter.dump_json(list(findings), indent=2).decode("utf-8")


# ---------------------------------------------------------------------------
# Histograms
# ---------------------------------------------------------------------------


class HistogramRow(BaseModel):
    """Count of timelines of one class in one bucket."""

    model_config = ConfigDict(frozen=True)

    index: int = Field(ge=0)
    label: str
    class_name: str
    count: int = Field(ge=1)


class Histogram(BaseModel):
    """Bucketed timeline counts for one histogram family.

    Attributes:
        kind: Histogram family
        axis: What the buckets measure
        unit: Unit of the bucketed quantity
        rows: Rows sorted by bucket index, then class name
    """

    model_config = ConfigDict(frozen=True)

    kind: HistogramKind
    axis: str
    unit: str
    rows: tuple[HistogramRow, ...] = ()

    @property
    def total(self) -> int:
        return sum(row.count for row in self.rows)

    def counts(self) -> dict[str, int]:
        """Bucket label -> count, summed over classes."""
        totals: dict[str, int] = {}
        for row in self.rows:
            totals[row.label] = totals.get(row.label, 0) + row.count
        return totals


def pow2_bucket(value: int) -> tuple[int, str]:
    """Power-of-two bucket of a non-negative value.

    Examples:
        >>> pow2_bucket(0)
        (0, '0')
        >>> pow2_bucket(1)
        (1, '1')
        >>> pow2_bucket(10)
        (5, '(8,16]')
    """
    if value <= 0:
        return 0, "0"
    if value == 1:
        return 1, "1"
    k = (value - 1).bit_length()
    return k + 1, f"({1 << (k - 1)},{1 << k}]"


def log2_bucket(ticks: int) -> int:
    """floor(log2(ticks)), with durations of 0 and 1 in bucket 0.

    Examples:
        >>> log2_bucket(1024)
        10
        >>> log2_bucket(0)
        0
    """
    return 0 if ticks <= 1 else ticks.bit_length() - 1


_Sample = tuple[int, str, str]


def _destructed(timelines: Iterable[InstanceTimeline]) -> Iterable[InstanceTimeline]:
    return (t for t in timelines if not t.anomalous and t.dtor is not None)


def _size_samples(timelines: Sequence[InstanceTimeline]) -> Iterable[_Sample]:
    containers = {str(c) for c in ShimClass if c.is_container}
    for t in _destructed(timelines):
        if t.class_name in containers:
            assert t.dtor is not None
            yield (*pow2_bucket(t.dtor.a), t.class_name)


def _lifetime_samples(timelines: Sequence[InstanceTimeline]) -> Iterable[_Sample]:
    for t in timelines:
        if t.anomalous or t.lifetime is None:
            continue
        bucket = log2_bucket(t.lifetime)
        yield bucket, str(bucket), t.class_name


def _refcount_samples(timelines: Sequence[InstanceTimeline]) -> Iterable[_Sample]:
    for t in timelines:
        if t.anomalous or t.class_name != ShimClass.SHARED_PTR:
            continue
        yield (*pow2_bucket(t.max_refcount), t.class_name)


def _string_dup_samples(timelines: Sequence[InstanceTimeline]) -> Iterable[_Sample]:
    strings = [
        t
        for t in _destructed(timelines)
        if t.class_name == ShimClass.STRING and t.dtor is not None and t.dtor.a > 0
    ]
    repeats = Counter(t.dtor.c for t in strings if t.dtor is not None)
    for t in strings:
        assert t.dtor is not None
        count = repeats[t.dtor.c]
        yield count, str(count), t.class_name


_SAMPLERS = {
    HistogramKind.SIZE: _size_samples,
    HistogramKind.LIFETIME: _lifetime_samples,
    HistogramKind.REFCOUNT: _refcount_samples,
    HistogramKind.STRING_DUP: _string_dup_samples,
}


def histogram(
    source: TraceDb | Sequence[InstanceTimeline],
    kind: str,
) -> Histogram:
    """Bucket the eligible timelines of ``source``.

    Eligible timelines per kind: size, destructed containers (size at
    destruction); lifetime, timelines with both construction and
    destruction; refcount, shared handles; string-dup, destructed non-empty
    strings, each counted in the bucket of its content's repetition count.

    Raises:
        UnknownHistogramKindError: ``kind`` is not a histogram family.
    """
    try:
        family = HistogramKind(kind)
    except ValueError:
        raise UnknownHistogramKindError(f"unknown histogram kind {kind!r}") from None
    timelines = reconstruct_instances(source) if isinstance(source, TraceDb) else source

    tally: Counter[tuple[int, str, str]] = Counter(_SAMPLERS[family](timelines))
    rows = tuple(
        HistogramRow(index=index, label=label, class_name=class_name, count=count)
        for (index, label, class_name), count in sorted(
            tally.items(), key=lambda item: (item[0][0], item[0][2])
        )
    )
    axis, unit = _AXES[family]
    logger.debug(
        "%s histogram: %d rows, %d timelines", family, len(rows), tally.total()
    )
    return Histogram(kind=family, axis=axis, unit=unit, rows=rows)


def render_histogram(hist: Histogram) -> str:
    """Text bar chart, one line per (bucket, class)."""
    lines = [f"{hist.kind} histogram: {hist.axis} ({hist.unit})"]
    if not hist.rows:
        lines.append("(no eligible instances)")
        return "\n".join(lines) + "\n"
    label_width = max(len("bucket"), *(len(r.label) for r in hist.rows))
    class_width = max(len("class"), *(len(r.class_name) for r in hist.rows))
    count_width = max(len("count"), *(len(str(r.count)) for r in hist.rows))
    peak = max(r.count for r in hist.rows)
    lines.append(
        f"{'bucket':<{label_width}}  {'class':<{class_width}}  "
        f"{'count':>{count_width}}"
    )
    for row in hist.rows:
        bar = "#" * max(1, round(BAR_WIDTH * row.count / peak))
        lines.append(
            f"{row.label:<{label_width}}  {row.class_name:<{class_width}}  "
            f"{row.count:>{count_width}}  {bar}"
        )
    lines.append(f"total: {hist.total}")
    return "\n".join(lines) + "\n"


def emit_csv(hist: Histogram, path: Path) -> None:
    """Write ``bucket,class,count`` rows.

    Raises:
        OSError: The file cannot be written.
    """
    with path.open("w", newline="", encoding="utf-8") as fh:
        writer = csv.writer(fh)
        writer.writerow(CSV_HEADER)
        for row in hist.rows:
            writer.writerow((row.label, row.class_name, row.count))
    logger.info("wrote %d %s histogram rows to %s", len(hist.rows), hist.kind, path)

