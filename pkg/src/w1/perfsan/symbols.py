"""Symbolication of frame identifiers.

A symbol map is a text file of half-open address ranges::

    # comment
    0x1000 0x1040 foo|a.cpp:10

A frame resolves to the range that contains it, never to the nearest one,
so frames nobody described stay visibly unresolved.
"""

from __future__ import annotations

import bisect
import re
from collections.abc import Iterable, Sequence
from dataclasses import dataclass
from pathlib import Path

from w1.perfsan.errors import SymbolMapError
from w1.perfsan.tracedb import CodeSegment

_LINE_PATTERN = re.compile(
    r"^(?P<start>(?:0[xX])?[0-9a-fA-F]+)\s+(?P<end>(?:0[xX])?[0-9a-fA-F]+)\s+"
    r"(?P<function>[^|]+)\|(?P<file>.+):(?P<line>\d+)$"
)


@dataclass(frozen=True, slots=True)
class SymbolRange:
    """Addresses ``[start, end)`` belonging to one source location."""

    start: int
    end: int
    function: str
    file: str
    line: int

    def __post_init__(self) -> None:
        if self.start < 0:
            raise ValueError("start must be >= 0")
        if self.end <= self.start:
            raise ValueError("end must be greater than start")

    @property
    def location(self) -> str:
        return f"{self.function} ({self.file}:{self.line})"


class SymbolMap:
    """Sorted, non-overlapping symbol ranges.

    Examples:
        >>> m = SymbolMap([SymbolRange(0x1000, 0x1040, "foo", "a.cpp", 10)])
        >>> m.lookup(0x1020).location
        'foo (a.cpp:10)'
        >>> m.lookup(0x1040) is None
        True
    """

    def __init__(self, ranges: Iterable[SymbolRange] = ()) -> None:
        self._ranges = sorted(ranges, key=lambda r: r.start)
        for prev, cur in zip(self._ranges, self._ranges[1:], strict=False):
            if cur.start < prev.end:
                raise SymbolMapError(
                    f"range {cur.start:#x}-{cur.end:#x} ({cur.function}) overlaps "
                    f"{prev.start:#x}-{prev.end:#x} ({prev.function})"
                )
        self._starts = [r.start for r in self._ranges]

    def __len__(self) -> int:
        return len(self._ranges)

    @property
    def ranges(self) -> tuple[SymbolRange, ...]:
        return tuple(self._ranges)

    def lookup(self, frame: int) -> SymbolRange | None:
        index = bisect.bisect_right(self._starts, frame) - 1
        if index < 0:
            return None
        candidate = self._ranges[index]
        return candidate if frame < candidate.end else None


def parse_symbol_map(text: str) -> SymbolMap:
    """Parse symbol-map text.

    Raises:
        SymbolMapError: A line is malformed or two ranges overlap.
    """
    ranges: list[tuple[int, SymbolRange]] = []
    for line_number, raw in enumerate(text.splitlines(), start=1):
        line = raw.strip()
        if not line or line.startswith("#"):
            continue
        match = _LINE_PATTERN.match(line)
        if match is None:
            raise SymbolMapError(f"malformed entry {line!r}", line_number)
        try:
            entry = SymbolRange(
                start=int(match["start"], 16),
                end=int(match["end"], 16),
                function=match["function"].strip(),
                file=match["file"],
                line=int(match["line"]),
            )
        except ValueError as exc:
            raise SymbolMapError(str(exc), line_number) from exc
        ranges.append((line_number, entry))

    ranges.sort(key=lambda item: item[1].start)
    for (_, prev), (line_number, cur) in zip(ranges, ranges[1:], strict=False):
        if cur.start < prev.end:
            raise SymbolMapError(
                f"{cur.function} at {cur.start:#x}-{cur.end:#x} overlaps "
                f"{prev.function} at {prev.start:#x}-{prev.end:#x}",
                line_number,
            )
    return SymbolMap(entry for _, entry in ranges)


def load_symbol_map(path: Path) -> SymbolMap:
    """Read and parse a symbol-map file.

    Raises:
        OSError: The file cannot be read.
        SymbolMapError: The content is malformed.
    """
    return parse_symbol_map(path.read_text(encoding="utf-8"))


def symbolize_frame(
    frame: int,
    symbol_map: SymbolMap | None,
    segments: Sequence[CodeSegment] = (),
) -> str:
    """Render one frame.

    Examples:
        >>> symbolize_frame(0x2000, SymbolMap())
        '<unknown 0x2000>'
    """
    entry = symbol_map.lookup(frame) if symbol_map is not None else None
    text = entry.location if entry is not None else f"<unknown {frame:#x}>"
    if segments and not any(frame in segment for segment in segments):
        text += " [foreign]"
    return text


def symbolize(
    frames: Sequence[int],
    symbol_map: SymbolMap | None,
    segments: Sequence[CodeSegment] = (),
) -> list[str]:
    """Render frames as ``function (file:line)`` or ``<unknown 0x...>``.

    With registered code segments, frames outside all of them get a
    `` [foreign]`` tag.
    """
    return [symbolize_frame(frame, symbol_map, segments) for frame in frames]
