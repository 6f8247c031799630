"""Call-stack capture for the event logger.

A frame provider returns the current stack as 64-bit frame identifiers,
outermost first. `PythonFrameProvider` derives identifiers from live
interpreter frames: the identity of the frame's code object plus its
instruction offset. All ids of one function therefore fall inside one
contiguous range, which `export_symbol_map` writes out for symbolication.
"""

from __future__ import annotations

import sys
import threading
from collections.abc import Iterable, Sequence
from pathlib import Path
from types import CodeType, FrameType
from typing import Protocol, runtime_checkable

_PACKAGE_DIR = Path(__file__).resolve().parent
_INTERNAL_FILES = frozenset(
    str(_PACKAGE_DIR / name) for name in ("frames.py", "logger.py", "shims.py")
)


@runtime_checkable
class FrameProvider(Protocol):
    """Source of call stacks."""

    def capture(self) -> list[int]:
        """Current stack, outermost frame first."""
        ...


class StaticFrameProvider:
    """Returns exactly the injected frames. Used by tests and synthetic runs."""

    def __init__(self, frames: Sequence[int] = (0x1000,)) -> None:
        self.frames = list(frames)

    def capture(self) -> list[int]:
        return list(self.frames)


class PythonFrameProvider:
    """Captures interpreter frames of the calling thread.

    Frames that belong to the instrumentation itself are skipped so the
    innermost captured frame is the user's call site. When ``anchor`` is
    given, capture stops at that frame (exclusive), making traces independent
    of whatever called the anchored code.

    Code objects seen are kept alive so their identities stay unique.
    """

    def __init__(self, max_depth: int = 64, anchor: FrameType | None = None) -> None:
        if max_depth <= 0:
            raise ValueError("max_depth must be > 0")
        self.max_depth = max_depth
        self.anchor = anchor
        self._codes: dict[int, CodeType] = {}
        self._lock = threading.Lock()

    def capture(self) -> list[int]:
        frame: FrameType | None = sys._getframe(1)
        stack: list[int] = []
        seen: list[CodeType] = []
        while frame is not None and frame is not self.anchor:
            code = frame.f_code
            if code.co_filename not in _INTERNAL_FILES:
                seen.append(code)
                stack.append(id(code) + max(frame.f_lasti, 0))
            frame = frame.f_back
        with self._lock:
            for code in seen:
                self._codes.setdefault(id(code), code)
        stack.reverse()
        # Deep stacks lose their innermost frames.
        return stack[: self.max_depth]

    @property
    def code_objects(self) -> list[CodeType]:
        with self._lock:
            return list(self._codes.values())

    def symbol_lines(self) -> list[str]:
        """Symbol-map lines covering every code object seen so far."""
        return list(_symbol_lines(self.code_objects))

    def export_symbol_map(self, path: Path) -> int:
        """Write the symbol map file; returns the number of ranges written."""
        lines = self.symbol_lines()
        header = "# w1-perfsan symbol map: <start> <end> <function>|<file>:<line>\n"
        body = "".join(f"{line}\n" for line in lines)
        path.write_text(header + body, encoding="utf-8")
        return len(lines)


def _symbol_lines(codes: Iterable[CodeType]) -> Iterable[str]:
    for code in sorted(codes, key=id):
        base = id(code)
        name = getattr(code, "co_qualname", code.co_name)
        for start, end, line in code.co_lines():
            if line is None or end <= start:
                continue
            yield f"{base + start:#x} {base + end:#x} {name}|{code.co_filename}:{line}"
