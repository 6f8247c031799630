"""Analysis-ready view of a decoded log.

`build` replays the command stream into string, trie and code-segment
tables plus the list of method events. `reconstruct_instances` then groups
events by (class, instance address) and splits each group into epochs at
destructors, because addresses are reused by later instances.
"""

from __future__ import annotations

import logging
from collections import Counter
from collections.abc import Iterable, Mapping, Sequence
from dataclasses import dataclass, field
from functools import cached_property
from pathlib import Path
from types import MappingProxyType

from w1.perfsan.enums import ShimClass, ShimMethod
from w1.perfsan.errors import UnknownTraceError
from w1.perfsan.trie import StackTrie
from w1.perfsan.wirefmt import (
    CompactEvent,
    LogCommand,
    LogHeader,
    RegisterCodeSegment,
    RegisterString,
    RegisterTraceNode,
    RegularEvent,
    decode_stream,
)

logger = logging.getLogger(__name__)

_SIZED_METHODS = frozenset(
    {
        ShimMethod.CTOR,
        ShimMethod.COPY_CTOR,
        ShimMethod.MOVE_CTOR,
        ShimMethod.PUSH_BACK,
        ShimMethod.EMPLACE_BACK,
        ShimMethod.INSERT,
        ShimMethod.APPEND,
        ShimMethod.DTOR,
    }
)

_MAP_KEYED_NAMES = frozenset({ShimMethod.SUBSCRIPT, ShimMethod.INSERT})
_MAP_SIZED_NAMES = _MAP_KEYED_NAMES | {
    ShimMethod.CTOR,
    ShimMethod.COPY_CTOR,
    ShimMethod.MOVE_CTOR,
    ShimMethod.DTOR,
}


@dataclass(frozen=True, slots=True)
class MethodEvent:
    """One decoded method event with its names resolved.

    Attributes:
        seq: Position among the stream's events (stream order)
        compact: True if it was encoded as a CompactEvent
    """

    seq: int
    class_sid: int
    method_sid: int
    class_name: str
    method_name: str
    trace_id: int
    timestamp: int
    instance: int
    a: int
    b: int
    c: int
    compact: bool = False

    @property
    def payload(self) -> tuple[int, int, int]:
        return (self.a, self.b, self.c)


@dataclass(frozen=True, slots=True)
class CodeSegment:
    """Loaded code region ``[base, base + length)``."""

    name: str
    base: int
    length: int

    def __contains__(self, address: object) -> bool:
        if not isinstance(address, int):
            return False
        return self.base <= address < self.base + self.length


@dataclass(frozen=True, slots=True)
class BuildWarning:
    """A command that could not be applied and was dropped.

    Attributes:
        index: Position of the command in the input sequence
        message: What was wrong with it
    """

    index: int
    message: str


@dataclass(frozen=True)
class TraceDb:
    """Decoded log tables. Treat as immutable once built."""

    tick_rate: int
    strings: Mapping[int, str]
    trie: StackTrie
    segments: tuple[CodeSegment, ...]
    events: tuple[MethodEvent, ...]
    warnings: tuple[BuildWarning, ...] = ()

    @property
    def compact_events(self) -> int:
        return sum(1 for event in self.events if event.compact)

    @property
    def compact_ratio(self) -> float:
        """Share of event commands that were compact."""
        return self.compact_events / len(self.events) if self.events else 0.0

    def resolve_trace(self, trace_id: int) -> list[int]:
        return resolve_trace(self, trace_id)

    def in_segments(self, frame: int) -> bool:
        return any(frame in segment for segment in self.segments)

    def ticks_to_seconds(self, ticks: int) -> float:
        return ticks / self.tick_rate


def build(header: LogHeader, commands: Iterable[LogCommand]) -> TraceDb:
    """Replay decoded commands into a `TraceDb`.

    Dangling references never abort the build: the offending command is
    dropped and reported as a `BuildWarning` (and logged).
    """
    strings: dict[int, str] = {}
    trie = StackTrie()
    segments: list[CodeSegment] = []
    events: list[MethodEvent] = []
    warnings: list[BuildWarning] = []

    def warn(index: int, message: str) -> None:
        logger.warning("dropping command %d: %s", index, message)
        warnings.append(BuildWarning(index=index, message=message))

    for index, cmd in enumerate(commands):
        match cmd:
            case RegisterString():
                strings[cmd.string_id] = cmd.text
            case RegisterTraceNode():
                if cmd.node_id in trie:
                    warn(index, f"trace node {cmd.node_id} registered twice")
                elif cmd.parent_id not in trie:
                    warn(
                        index,
                        f"trace node {cmd.node_id} has unknown parent {cmd.parent_id}",
                    )
                else:
                    trie.add_node(cmd.node_id, cmd.parent_id, cmd.frame)
            case RegisterCodeSegment():
                name = strings.get(cmd.name_sid)
                if name is None:
                    warn(index, f"code segment names unknown string id {cmd.name_sid}")
                else:
                    segments.append(
                        CodeSegment(name=name, base=cmd.base, length=cmd.length)
                    )
            case RegularEvent() | CompactEvent():
                class_name = strings.get(cmd.class_sid)
                method_name = strings.get(cmd.method_sid)
                if class_name is None or method_name is None:
                    warn(index, "event references an unknown string id")
                elif cmd.trace_id not in trie:
                    warn(index, f"event references unknown trace id {cmd.trace_id}")
                else:
                    events.append(
                        MethodEvent(
                            seq=len(events),
                            class_sid=cmd.class_sid,
                            method_sid=cmd.method_sid,
                            class_name=class_name,
                            method_name=method_name,
                            trace_id=cmd.trace_id,
                            timestamp=cmd.timestamp,
                            instance=cmd.instance,
                            a=cmd.a,
                            b=cmd.b,
                            c=cmd.c,
                            compact=isinstance(cmd, CompactEvent),
                        )
                    )

    return TraceDb(
        tick_rate=header.tick_rate,
        strings=MappingProxyType(strings),
        trie=trie,
        segments=tuple(segments),
        events=tuple(events),
        warnings=tuple(warnings),
    )


def load(path: Path) -> TraceDb:
    """Read, decode and build a log file.

    Raises:
        OSError: The file cannot be read.
        WireFormatError: The file is not a valid log.
    """
    header, commands = decode_stream(path.read_bytes())
    db = build(header, commands)
    logger.debug(
        "loaded %s: %d events, %d trace nodes, %d strings",
        path,
        len(db.events),
        len(db.trie),
        len(db.strings),
    )
    return db


def resolve_trace(db: TraceDb, trace_id: int) -> list[int]:
    """Frames of ``trace_id``, innermost first.

    Raises:
        UnknownTraceError: The id is not in the db's trie.
    """
    if trace_id not in db.trie:
        raise UnknownTraceError(trace_id)
    return db.trie.resolve(trace_id)


# ---------------------------------------------------------------------------
# Instance timelines
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class InstanceTimeline:
    """Events of one object epoch.

    Attributes:
        address: Instance address shared by every event
        epoch: 0-based lifetime ordinal at this (class, address)
        class_name: Logged class name
        events: Events in stream order; a ``dtor``, if any, is last
        anomalous: A ``dtor`` seen with no earlier event at the address
    """

    address: int
    epoch: int
    class_name: str
    events: tuple[MethodEvent, ...]
    anomalous: bool = False
    _counts: Counter[str] = field(
        default_factory=Counter, init=False, repr=False, compare=False
    )

    @property
    def shim_class(self) -> ShimClass | None:
        try:
            return ShimClass(self.class_name)
        except ValueError:
            return None

    @property
    def first(self) -> MethodEvent:
        return self.events[0]

    @property
    def site(self) -> int:
        """Trace id of the construction (or first) event."""
        return self.first.trace_id

    @property
    def has_ctor(self) -> bool:
        return self.first.method_name in _CONSTRUCTION_NAMES

    @property
    def ctor_ts(self) -> int | None:
        return self.first.timestamp if self.has_ctor else None

    @property
    def dtor(self) -> MethodEvent | None:
        last = self.events[-1]
        return last if last.method_name == ShimMethod.DTOR else None

    @property
    def dtor_ts(self) -> int | None:
        dtor = self.dtor
        return dtor.timestamp if dtor is not None else None

    @property
    def alive(self) -> bool:
        """Never destructed within the log (leaked or still alive at exit)."""
        return self.dtor is None

    @property
    def completed(self) -> bool:
        return self.has_ctor and self.dtor is not None

    @property
    def lifetime(self) -> int | None:
        if self.ctor_ts is None or self.dtor_ts is None:
            return None
        return self.dtor_ts - self.ctor_ts

    @property
    def methods(self) -> tuple[str, ...]:
        return tuple(event.method_name for event in self.events)

    def count(self, method: str) -> int:
        if not self._counts:
            self._counts.update(event.method_name for event in self.events)
        return self._counts[method]

    def of(self, method: str) -> list[MethodEvent]:
        return [event for event in self.events if event.method_name == method]

    @cached_property
    def max_size(self) -> int:
        shim = self.shim_class
        if shim is not None and shim.is_map:
            # map lookups carry the key hash in a and the size in b
            sizes = (
                e.b if e.method_name in _MAP_KEYED_NAMES else e.a
                for e in self.events
                if e.method_name in _MAP_SIZED_NAMES
            )
            return max(sizes, default=0)
        return max(
            (e.a for e in self.events if e.method_name in _SIZED_METHODS),
            default=0,
        )

    @cached_property
    def max_capacity(self) -> int:
        capacities = [
            e.a if e.method_name in _ALLOCATION_NAMES else e.b
            for e in self.events
            if e.method_name in _SIZED_METHODS or e.method_name in _ALLOCATION_NAMES
        ]
        return max(capacities, default=0)

    @property
    def realloc_count(self) -> int:
        return self.count(ShimMethod.REALLOC)

    @property
    def allocation_count(self) -> int:
        """Buffer allocations: growing reserves plus every realloc and shrink."""
        return sum(
            1
            for e in self.events
            if e.method_name == ShimMethod.REALLOC
            or (e.method_name == ShimMethod.RESERVE and e.a > e.b)
            or (e.method_name == ShimMethod.SHRINK_TO_FIT and e.a != e.b)
        )

    @property
    def heap_allocated(self) -> bool:
        """Owned heap memory at some point of its life."""
        shim = self.shim_class
        if shim is ShimClass.SHARED_PTR:
            return True
        if shim is not None and shim.is_map:
            return self.max_size > 0
        threshold = shim.inline_threshold if shim is not None else 0
        return self.max_capacity > threshold or self.realloc_count > 0

    @cached_property
    def max_refcount(self) -> int:
        return max((e.a for e in self.events), default=0)


_CONSTRUCTION_NAMES = frozenset(
    {ShimMethod.CTOR, ShimMethod.COPY_CTOR, ShimMethod.MOVE_CTOR}
)
_ALLOCATION_NAMES = frozenset(
    {ShimMethod.REALLOC, ShimMethod.RESERVE, ShimMethod.SHRINK_TO_FIT}
)


def reconstruct_instances(
    db: TraceDb | Sequence[MethodEvent],
) -> list[InstanceTimeline]:
    """Group events into per-instance epochs.

    Events are keyed by (class name, address) in stream order. A ``dtor``
    closes the current epoch; the next event at that key opens a new one.
    Epochs still open at the end of the log are returned as alive. Timelines
    are ordered by their first event.
    """
    events = db.events if isinstance(db, TraceDb) else db
    open_epochs: dict[tuple[str, int], list[MethodEvent]] = {}
    epoch_counter: dict[tuple[str, int], int] = {}
    done: list[InstanceTimeline] = []

    def close(key: tuple[str, int], bucket: list[MethodEvent], anomalous: bool) -> None:
        epoch = epoch_counter.get(key, 0)
        epoch_counter[key] = epoch + 1
        done.append(
            InstanceTimeline(
                address=key[1],
                epoch=epoch,
                class_name=key[0],
                events=tuple(bucket),
                anomalous=anomalous,
            )
        )

    for event in events:
        key = (event.class_name, event.instance)
        bucket = open_epochs.get(key)
        if event.method_name == ShimMethod.DTOR:
            if bucket is None:
                logger.debug("dtor without construction at %#x", event.instance)
                close(key, [event], anomalous=True)
            else:
                bucket.append(event)
                close(key, open_epochs.pop(key), anomalous=False)
        elif bucket is None:
            open_epochs[key] = [event]
        else:
            bucket.append(event)

    for key, bucket in open_epochs.items():
        close(key, bucket, anomalous=False)

    done.sort(key=lambda timeline: timeline.first.seq)
    return done


def format_event(
    event: MethodEvent, name_width: int = 0, payload_width: int = 0
) -> str:
    """Render ``class::method  [a, b, c]  loc[0x..]``."""
    name = f"{event.class_name}::{event.method_name}"
    payload = f"[{event.a}, {event.b}, {event.c}]"
    return f"{name:<{name_width}}  {payload:<{payload_width}}  loc[{event.trace_id:#x}]"


def format_timeline(timeline: InstanceTimeline) -> list[str]:
    """Per-instance listing, one line per event, columns aligned."""
    names = [f"{e.class_name}::{e.method_name}" for e in timeline.events]
    payloads = [f"[{e.a}, {e.b}, {e.c}]" for e in timeline.events]
    name_width = max(map(len, names), default=0)
    payload_width = max(map(len, payloads), default=0)
    lines = [f"Instance {timeline.address:#x}:"]
    lines.extend(format_event(e, name_width, payload_width) for e in timeline.events)
    return lines
