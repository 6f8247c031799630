"""Runtime event sink for the instrumented containers.

`EventLogger` interns class and method names, keeps the stack-trace trie,
stamps every event with a timestamp and a trace id, and buffers the encoded
commands until they are appended to the log file.

All threads share one logger and one stream. Interning, trie updates and
buffer appends happen under a single lock so the decoded stream is always a
valid interleaving. Flushing swaps the buffer out under that lock and writes
outside it.

Instrumentation must never change program behavior: `log_event` does not
raise. Failures are reported through `logging` and latched in `failed`.
"""

from __future__ import annotations

import atexit
import logging
import threading
from collections.abc import Sequence
from types import TracebackType
from typing import Self

from w1.perfsan.config import LoggerConfig
from w1.perfsan.errors import IdSpaceExhaustedError
from w1.perfsan.frames import FrameProvider, PythonFrameProvider
from w1.perfsan.trie import MAX_NODE_ID, StackTrie
from w1.perfsan.wirefmt import (
    MAX_STRING_BYTES,
    ROOT_NODE_ID,
    STRING_ID_BITS,
    CompactEvent,
    LogCommand,
    LogHeader,
    RegisterCodeSegment,
    RegisterString,
    RegularEvent,
    encode_command,
    make_event,
    words_to_bytes,
)

logger = logging.getLogger(__name__)

MAX_STRING_ID = (1 << STRING_ID_BITS) - 1
_U32 = (1 << 32) - 1
_U64 = (1 << 64) - 1


def saturate32(value: int) -> int:
    """Clamp a payload into the unsigned 32-bit range."""
    return 0 if value < 0 else min(value, _U32)


class EventLogger:
    """Buffered writer of the binary event log.

    Attributes:
        config: Buffer size, output path, max depth and clock
        frame_provider: Call-stack source
        failed: True once any logging or write failure happened
        last_error: The most recent failure, if any
        compact_events: Number of compact event commands emitted
        regular_events: Number of regular event commands emitted
        bytes_written: Bytes appended to the log file, header included
    """

    def __init__(
        self,
        config: LoggerConfig | None = None,
        frame_provider: FrameProvider | None = None,
        *,
        max_string_id: int = MAX_STRING_ID,
        max_node_id: int = MAX_NODE_ID,
    ) -> None:
        self.config = config or LoggerConfig()
        self.clock = self.config.clock
        self.frame_provider = frame_provider or PythonFrameProvider(
            max_depth=self.config.max_depth
        )
        self.header = LogHeader(tick_rate=self.clock.tick_rate)
        self.max_string_id = max_string_id

        self._lock = threading.Lock()
        self._write_lock = threading.Lock()
        self._strings: dict[str, int] = {}
        self._trie = StackTrie(max_node_id=max_node_id)
        self._buffer = bytearray()
        self._prev_ts = 0
        self._header_written = False

        self.failed = False
        self.last_error: BaseException | None = None
        self.compact_events = 0
        self.regular_events = 0
        self.bytes_written = 0

    # -- context manager -------------------------------------------------

    def __enter__(self) -> Self:
        return self

    def __exit__(
        self,
        exc_type: type[BaseException] | None,
        exc: BaseException | None,
        tb: TracebackType | None,
    ) -> None:
        self.flush()

    # -- state -----------------------------------------------------------

    @property
    def strings(self) -> dict[int, str]:
        """Interned strings, id -> text."""
        with self._lock:
            return {sid: text for text, sid in self._strings.items()}

    @property
    def trie(self) -> dict[int, tuple[int, int]]:
        """Trie nodes, node_id -> (parent_id, frame)."""
        with self._lock:
            return self._trie.nodes

    @property
    def event_count(self) -> int:
        return self.compact_events + self.regular_events

    @property
    def compact_ratio(self) -> float:
        """Share of event commands written in compact form."""
        total = self.event_count
        return self.compact_events / total if total else 0.0

    @property
    def buffered_bytes(self) -> int:
        with self._lock:
            return len(self._buffer)

    # -- operations ------------------------------------------------------

    def intern_string(self, text: str) -> int:
        """Return the id of ``text``, registering it on first use.

        Raises:
            ValueError: ``text`` is empty or longer than 2^24-1 UTF-8 bytes.
            IdSpaceExhaustedError: All 20-bit string ids are taken.
        """
        with self._lock:
            return self._intern(text)

    def record_trace(self, frames: Sequence[int]) -> int:
        """Return the trace id of ``frames`` (outermost first).

        Emits one RegisterTraceNode per node the trie did not have yet.

        Raises:
            ValueError: ``frames`` is empty or deeper than max_depth.
            IdSpaceExhaustedError: The 24-bit node id space is used up.
        """
        if len(frames) > self.config.max_depth:
            raise ValueError(
                f"trace depth {len(frames)} exceeds max_depth {self.config.max_depth}"
            )
        with self._lock:
            return self._record(frames)

    def log_event(
        self,
        class_name: str,
        method_name: str,
        instance: int,
        a: int = 0,
        b: int = 0,
        c: int = 0,
    ) -> None:
        """Record one method event. Never raises."""
        try:
            frames = self.frame_provider.capture()[: self.config.max_depth]
            with self._lock:
                class_sid = self._intern(class_name)
                method_sid = self._intern(method_name)
                trace_id = self._record(frames) if frames else ROOT_NODE_ID
                timestamp = max(self.clock.now(), self._prev_ts)
                event = make_event(
                    class_sid,
                    method_sid,
                    trace_id,
                    timestamp,
                    instance & _U64,
                    saturate32(a),
                    saturate32(b),
                    saturate32(c),
                    prev_ts=self._prev_ts,
                )
                self._emit(event)
        except Exception as exc:
            self._fail(exc, f"dropping {class_name}::{method_name} event")

    def register_code_segment(self, name: str, base: int, length: int) -> None:
        """Record a loaded code region for offline symbolication.

        Raises:
            ValueError: ``length`` is not positive or the range leaves 64 bits.
        """
        if length <= 0:
            raise ValueError("code segment length must be > 0")
        if base < 0 or base + length - 1 > _U64:
            raise ValueError("code segment must lie inside the 64-bit address space")
        with self._lock:
            name_sid = self._intern(name)
            self._emit(RegisterCodeSegment(name_sid=name_sid, base=base, length=length))

    def flush(self) -> int:
        """Append the buffered commands to the log file.

        The header is written on the first flush, which also truncates any
        previous file at ``output_path``.

        Returns:
            Number of buffered bytes written, not counting the header. Write
            failures are recorded in `failed` and return 0.
        """
        self._lock.acquire()
        try:
            data = bytes(self._buffer)
            self._buffer.clear()
            self._write_lock.acquire()
        finally:
            self._lock.release()
        try:
            return self._write(data)
        finally:
            self._write_lock.release()

    def close(self) -> None:
        self.flush()

    # -- internals (call with _lock held) --------------------------------

    def _intern(self, text: str) -> int:
        sid = self._strings.get(text)
        if sid is not None:
            return sid
        if not text:
            raise ValueError("cannot intern an empty string")
        if len(text.encode("utf-8")) > MAX_STRING_BYTES:
            raise ValueError("string longer than 2^24-1 bytes")
        sid = len(self._strings) + 1
        if sid > self.max_string_id:
            raise IdSpaceExhaustedError("string id space exhausted")
        self._emit(RegisterString(string_id=sid, text=text))
        self._strings[text] = sid
        return sid

    def _record(self, frames: Sequence[int]) -> int:
        leaf, created = self._trie.insert(frames)
        for node in created:
            self._emit(node)
        return leaf

    def _emit(self, cmd: LogCommand) -> None:
        data = words_to_bytes(encode_command(cmd, self._prev_ts))
        if isinstance(cmd, CompactEvent):
            self.compact_events += 1
            self._prev_ts = cmd.timestamp
        elif isinstance(cmd, RegularEvent):
            self.regular_events += 1
            self._prev_ts = cmd.timestamp
        if self._buffer and len(self._buffer) + len(data) > self.config.buffer_capacity:
            pending = bytes(self._buffer)
            self._buffer.clear()
            with self._write_lock:
                self._write(pending)
        self._buffer += data

    def _write(self, data: bytes) -> int:
        try:
            if not self._header_written:
                with self.config.output_path.open("wb") as fh:
                    fh.write(self.header.to_bytes())
                self._header_written = True
                self.bytes_written += len(self.header.to_bytes())
            if data:
                with self.config.output_path.open("ab") as fh:
                    fh.write(data)
                self.bytes_written += len(data)
            logger.debug("flushed %d bytes to %s", len(data), self.config.output_path)
            return len(data)
        except OSError as exc:
            self._fail(exc, f"cannot write {self.config.output_path}")
            return 0

    def _fail(self, exc: BaseException, context: str) -> None:
        if not self.failed:
            logger.warning("w1-perfsan logger failure: %s: %s", context, exc)
        else:
            logger.debug("w1-perfsan logger failure: %s: %s", context, exc)
        self.failed = True
        self.last_error = exc


# ---------------------------------------------------------------------------
# Process-wide logger
# ---------------------------------------------------------------------------

_active: EventLogger | None = None
_active_lock = threading.Lock()


def install(
    config: LoggerConfig | None = None,
    frame_provider: FrameProvider | None = None,
) -> EventLogger:
    """Create the process-wide logger used by shims by default.

    Without a config, settings come from W1_LOG_PATH / W1_BUFFER_BYTES. The
    logger is flushed at interpreter exit.
    """
    global _active
    new = EventLogger(config or LoggerConfig.from_env(), frame_provider)
    with _active_lock:
        previous, _active = _active, new
    if previous is not None:
        previous.flush()
        atexit.unregister(previous.flush)
    atexit.register(new.flush)
    logger.info("w1-perfsan logging to %s", new.config.output_path)
    return new


def uninstall() -> None:
    """Flush and detach the process-wide logger."""
    global _active
    with _active_lock:
        previous, _active = _active, None
    if previous is not None:
        previous.flush()
        atexit.unregister(previous.flush)


def active_logger() -> EventLogger | None:
    return _active
