"""Binary log format: commands, bit-exact encoding and stream decoding.

A log file is a 16-byte header (8 magic bytes and a little-endian 64-bit
tick rate) followed by a stream of little-endian 64-bit words. Each command
starts with a word whose low 4 bits are its `Opcode`.

Layouts (``«`` is a left shift inside one word):

- RegisterString: ``op | id«4 | len«24``, then ``ceil(len/8)`` words of
  zero-padded UTF-8.
- RegisterTraceNode: ``op | node«4 | parent«28 | leaf«52``; ``frame``.
- RegisterCodeSegment: ``op | name«4``; ``base``; ``length``.
- RegularEvent: ``op | class«4 | method«20``; ``trace | a«32``;
  ``b | c«32``; ``timestamp``; ``instance``.
- CompactEvent: ``op | class«4 | method«16 | trace«28 | a«52``;
  ``delta | b«28 | c«46``; ``instance``.

Compact timestamps are deltas against the previous *event* command
(registrations do not move the baseline), seeded with 0.
"""

from __future__ import annotations

import struct
from collections.abc import Iterable, Iterator, Sequence
from dataclasses import dataclass

from w1.perfsan.enums import Opcode
from w1.perfsan.errors import (
    BadMagicError,
    FieldOverflowError,
    TruncatedCommandError,
    UnknownOpcodeError,
    UnregisteredReferenceError,
    WireFormatError,
)

MAGIC = b"W1LOGv1\x00"
HEADER_SIZE = 16
WORD_SIZE = 8

MAX_STRING_BYTES = (1 << 24) - 1
STRING_ID_BITS = 20
NODE_ID_BITS = 24
ROOT_NODE_ID = 0

COMPACT_EVENT_WORDS = 3
REGULAR_EVENT_WORDS = 5

# (class, method, trace, ts_delta, a, b, c) widths of the compact form.
_COMPACT_BITS = (12, 12, 24, 28, 12, 18, 18)

_U64 = (1 << 64) - 1


def _mask(bits: int) -> int:
    return (1 << bits) - 1


def _check_width(field: str, value: int, bits: int) -> None:
    if value < 0 or value >> bits:
        raise FieldOverflowError(field, value, bits)


# ---------------------------------------------------------------------------
# Header and commands
# ---------------------------------------------------------------------------


@dataclass(frozen=True, slots=True)
class LogHeader:
    """File header.

    Attributes:
        tick_rate: Timestamp ticks per second (> 0)
        magic: Always ``MAGIC``
    """

    tick_rate: int
    magic: bytes = MAGIC

    def __post_init__(self) -> None:
        if self.magic != MAGIC:
            raise BadMagicError(f"bad magic {self.magic!r}")
        if not 0 < self.tick_rate <= _U64:
            raise ValueError("tick_rate must be > 0 and fit in 64 bits")

    def to_bytes(self) -> bytes:
        return self.magic + struct.pack("<Q", self.tick_rate)

    @classmethod
    def from_bytes(cls, data: bytes) -> LogHeader:
        if data[: len(MAGIC)] != MAGIC:
            raise BadMagicError(f"bad magic {bytes(data[: len(MAGIC)])!r}")
        if len(data) < HEADER_SIZE:
            raise TruncatedCommandError("stream shorter than the header")
        (tick_rate,) = struct.unpack_from("<Q", data, len(MAGIC))
        if tick_rate == 0:
            raise WireFormatError("header tick_rate must be > 0")
        return cls(tick_rate=tick_rate)


@dataclass(frozen=True, slots=True)
class RegisterString:
    """Bind ``string_id`` to ``text``."""

    string_id: int
    text: str

    @property
    def payload(self) -> bytes:
        return self.text.encode("utf-8")


@dataclass(frozen=True, slots=True)
class RegisterTraceNode:
    """Add trie node ``node_id`` under ``parent_id`` for one frame."""

    node_id: int
    parent_id: int
    is_leaf: bool
    frame: int


@dataclass(frozen=True, slots=True)
class RegisterCodeSegment:
    """Describe a code region ``[base, base + length)`` named by a string id."""

    name_sid: int
    base: int
    length: int


@dataclass(frozen=True, slots=True)
class RegularEvent:
    """Full-width method event with an absolute timestamp."""

    class_sid: int
    method_sid: int
    trace_id: int
    timestamp: int
    instance: int
    a: int
    b: int
    c: int


@dataclass(frozen=True, slots=True)
class CompactEvent:
    """Reduced-width method event.

    ``timestamp`` is absolute; the wire form stores it as a delta against the
    previous event, computed by `encode_command`.
    """

    class_sid: int
    method_sid: int
    trace_id: int
    timestamp: int
    instance: int
    a: int
    b: int
    c: int


EventCommand = RegularEvent | CompactEvent
LogCommand = (
    RegisterString
    | RegisterTraceNode
    | RegisterCodeSegment
    | RegularEvent
    | CompactEvent
)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


def compact_eligible(
    class_sid: int,
    method_sid: int,
    trace_id: int,
    ts_delta: int,
    a: int,
    b: int,
    c: int,
) -> bool:
    """Return True when every field fits the compact event widths.

    Examples:
        >>> compact_eligible(0, 0, 0, 0, 0, 0, 0)
        True
        >>> compact_eligible(0, 0, 0, 0, 1 << 12, 0, 0)
        False
    """
    values = (class_sid, method_sid, trace_id, ts_delta, a, b, c)
    return all(
        0 <= v < (1 << bits)
        for v, bits in zip(values, _COMPACT_BITS, strict=True)
    )


def make_event(
    class_sid: int,
    method_sid: int,
    trace_id: int,
    timestamp: int,
    instance: int,
    a: int,
    b: int,
    c: int,
    prev_ts: int,
) -> EventCommand:
    """Build the smallest event command able to carry these fields."""
    fields = (class_sid, method_sid, trace_id, timestamp, instance, a, b, c)
    if compact_eligible(class_sid, method_sid, trace_id, timestamp - prev_ts, a, b, c):
        return CompactEvent(*fields)
    return RegularEvent(*fields)


def encode_command(cmd: LogCommand, prev_ts: int = 0) -> list[int]:
    """Encode one command into 64-bit words.

    Args:
        cmd: Command to encode
        prev_ts: Absolute timestamp of the previous event command; only
            used for `CompactEvent`

    Returns:
        The command's words, least significant bit first within each word.

    Raises:
        FieldOverflowError: A field does not fit its width; the error names it.
    """
    match cmd:
        case CompactEvent():
            return _encode_compact(cmd, prev_ts)
        case RegularEvent():
            return _encode_regular(cmd)
        case RegisterString():
            return _encode_string(cmd)
        case RegisterTraceNode():
            return _encode_trace_node(cmd)
        case RegisterCodeSegment():
            return _encode_code_segment(cmd)
    raise TypeError(f"not a log command: {cmd!r}")


def _encode_compact(cmd: CompactEvent, prev_ts: int) -> list[int]:
    ts_delta = cmd.timestamp - prev_ts
    fields = (
        ("class_sid", cmd.class_sid),
        ("method_sid", cmd.method_sid),
        ("trace_id", cmd.trace_id),
        ("ts_delta", ts_delta),
        ("a", cmd.a),
        ("b", cmd.b),
        ("c", cmd.c),
    )
    for (name, value), bits in zip(fields, _COMPACT_BITS, strict=True):
        _check_width(name, value, bits)
    _check_width("instance", cmd.instance, 64)
    word0 = (
        Opcode.COMPACT_EVENT
        | cmd.class_sid << 4
        | cmd.method_sid << 16
        | cmd.trace_id << 28
        | cmd.a << 52
    )
    word1 = ts_delta | cmd.b << 28 | cmd.c << 46
    return [word0, word1, cmd.instance]


def _encode_regular(cmd: RegularEvent) -> list[int]:
    _check_width("class_sid", cmd.class_sid, 16)
    _check_width("method_sid", cmd.method_sid, 16)
    _check_width("trace_id", cmd.trace_id, 32)
    _check_width("timestamp", cmd.timestamp, 64)
    _check_width("instance", cmd.instance, 64)
    for name in ("a", "b", "c"):
        _check_width(name, getattr(cmd, name), 32)
    word0 = Opcode.REGULAR_EVENT | cmd.class_sid << 4 | cmd.method_sid << 20
    return [
        word0,
        cmd.trace_id | cmd.a << 32,
        cmd.b | cmd.c << 32,
        cmd.timestamp,
        cmd.instance,
    ]


def _encode_string(cmd: RegisterString) -> list[int]:
    _check_width("string_id", cmd.string_id, STRING_ID_BITS)
    payload = cmd.payload
    _check_width("text", len(payload), 24)
    words = [Opcode.REGISTER_STRING | cmd.string_id << 4 | len(payload) << 24]
    padded = payload + b"\x00" * (-len(payload) % WORD_SIZE)
    words.extend(struct.unpack(f"<{len(padded) // WORD_SIZE}Q", padded))
    return words


def _encode_trace_node(cmd: RegisterTraceNode) -> list[int]:
    _check_width("node_id", cmd.node_id, NODE_ID_BITS)
    _check_width("parent_id", cmd.parent_id, NODE_ID_BITS)
    _check_width("frame", cmd.frame, 64)
    if cmd.node_id == ROOT_NODE_ID:
        raise WireFormatError("node_id 0 is the reserved trie root")
    word0 = (
        Opcode.REGISTER_TRACE_NODE
        | cmd.node_id << 4
        | cmd.parent_id << 28
        | int(cmd.is_leaf) << 52
    )
    return [word0, cmd.frame]


def _encode_code_segment(cmd: RegisterCodeSegment) -> list[int]:
    _check_width("name_sid", cmd.name_sid, STRING_ID_BITS)
    _check_width("base", cmd.base, 64)
    _check_width("length", cmd.length, 64)
    return [Opcode.REGISTER_CODE_SEGMENT | cmd.name_sid << 4, cmd.base, cmd.length]


def words_to_bytes(words: Sequence[int]) -> bytes:
    """Pack words as little-endian unsigned 64-bit integers."""
    return struct.pack(f"<{len(words)}Q", *words)


def encode_stream(header: LogHeader, commands: Iterable[LogCommand]) -> bytes:
    """Encode a header and a command sequence into a complete log image."""
    out = bytearray(header.to_bytes())
    prev_ts = 0
    for cmd in commands:
        out += words_to_bytes(encode_command(cmd, prev_ts))
        if isinstance(cmd, (RegularEvent, CompactEvent)):
            prev_ts = cmd.timestamp
    return bytes(out)


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


class _StreamDecoder:
    """Sequential decoder enforcing registration-before-use."""

    def __init__(self, words: Sequence[int]) -> None:
        self.words = words
        self.pos = 0
        self.prev_ts = 0
        self.strings: set[int] = set()
        self.nodes: set[int] = {ROOT_NODE_ID}

    def take(self, count: int, start: int) -> Sequence[int]:
        end = self.pos + count
        if end > len(self.words):
            raise TruncatedCommandError("command runs past end of stream", start)
        chunk = self.words[self.pos : end]
        self.pos = end
        return chunk

    def require_string(self, sid: int, field: str, offset: int) -> None:
        if sid not in self.strings:
            raise UnregisteredReferenceError(
                f"{field} references unregistered string id {sid}", offset
            )

    def require_node(self, node_id: int, field: str, offset: int) -> None:
        if node_id not in self.nodes:
            raise UnregisteredReferenceError(
                f"{field} references unregistered trace node {node_id}", offset
            )

    def __iter__(self) -> Iterator[LogCommand]:
        while self.pos < len(self.words):
            start = self.pos
            (word0,) = self.take(1, start)
            opcode = word0 & 0xF
            match opcode:
                case Opcode.REGISTER_STRING:
                    yield self.register_string(word0, start)
                case Opcode.REGISTER_TRACE_NODE:
                    yield self.register_trace_node(word0, start)
                case Opcode.REGISTER_CODE_SEGMENT:
                    yield self.register_code_segment(word0, start)
                case Opcode.REGULAR_EVENT:
                    yield self.regular_event(word0, start)
                case Opcode.COMPACT_EVENT:
                    yield self.compact_event(word0, start)
                case _:
                    raise UnknownOpcodeError(opcode, start)

    def register_string(self, word0: int, start: int) -> RegisterString:
        if word0 >> 48:
            raise WireFormatError("reserved bits set in string header", start)
        string_id = (word0 >> 4) & _mask(STRING_ID_BITS)
        length = (word0 >> 24) & _mask(24)
        n_words = -(-length // WORD_SIZE)
        raw = words_to_bytes(self.take(n_words, start))[:length]
        try:
            text = raw.decode("utf-8")
        except UnicodeDecodeError as exc:
            message = f"string {string_id} is not valid UTF-8"
            raise WireFormatError(message, start) from exc
        self.strings.add(string_id)
        return RegisterString(string_id, text)

    def register_trace_node(self, word0: int, start: int) -> RegisterTraceNode:
        if word0 >> 53:
            raise WireFormatError("reserved bits set in trace node", start)
        node_id = (word0 >> 4) & _mask(NODE_ID_BITS)
        parent_id = (word0 >> 28) & _mask(NODE_ID_BITS)
        is_leaf = bool((word0 >> 52) & 1)
        (frame,) = self.take(1, start)
        if node_id == ROOT_NODE_ID:
            raise WireFormatError("node_id 0 is the reserved trie root", start)
        if node_id in self.nodes:
            raise WireFormatError(f"trace node {node_id} registered twice", start)
        self.require_node(parent_id, "parent_id", start)
        self.nodes.add(node_id)
        return RegisterTraceNode(node_id, parent_id, is_leaf, frame)

    def register_code_segment(self, word0: int, start: int) -> RegisterCodeSegment:
        if word0 >> (4 + STRING_ID_BITS):
            raise WireFormatError("reserved bits set in code segment", start)
        name_sid = word0 >> 4
        base, length = self.take(2, start)
        self.require_string(name_sid, "name_sid", start)
        return RegisterCodeSegment(name_sid, base, length)

    def regular_event(self, word0: int, start: int) -> RegularEvent:
        if word0 >> 36:
            raise WireFormatError("reserved bits set in regular event", start)
        class_sid = (word0 >> 4) & 0xFFFF
        method_sid = (word0 >> 20) & 0xFFFF
        w1, w2, timestamp, instance = self.take(4, start)
        event = RegularEvent(
            class_sid=class_sid,
            method_sid=method_sid,
            trace_id=w1 & 0xFFFFFFFF,
            timestamp=timestamp,
            instance=instance,
            a=w1 >> 32,
            b=w2 & 0xFFFFFFFF,
            c=w2 >> 32,
        )
        self.check_event(event, start)
        self.prev_ts = timestamp
        return event

    def compact_event(self, word0: int, start: int) -> CompactEvent:
        w1, instance = self.take(2, start)
        timestamp = self.prev_ts + (w1 & _mask(28))
        if timestamp > _U64:
            raise WireFormatError("timestamp overflows 64 bits", start)
        event = CompactEvent(
            class_sid=(word0 >> 4) & _mask(12),
            method_sid=(word0 >> 16) & _mask(12),
            trace_id=(word0 >> 28) & _mask(24),
            timestamp=timestamp,
            instance=instance,
            a=word0 >> 52,
            b=(w1 >> 28) & _mask(18),
            c=w1 >> 46,
        )
        self.check_event(event, start)
        self.prev_ts = timestamp
        return event

    def check_event(self, event: EventCommand, start: int) -> None:
        self.require_string(event.class_sid, "class_sid", start)
        self.require_string(event.method_sid, "method_sid", start)
        self.require_node(event.trace_id, "trace_id", start)


def decode_stream(data: bytes) -> tuple[LogHeader, list[LogCommand]]:
    """Decode a complete log image.

    Compact event timestamps are rematerialized as absolute ticks.

    Raises:
        BadMagicError: The header magic does not match.
        TruncatedCommandError: The stream ends inside a command or the body is
            not a whole number of words.
        UnknownOpcodeError: A command word has an opcode outside 1..5.
        UnregisteredReferenceError: An id is used before being registered.
        WireFormatError: Any other structural violation.
    """
    data = bytes(data)
    header = LogHeader.from_bytes(data)
    body = len(data) - HEADER_SIZE
    n_words, rest = divmod(body, WORD_SIZE)
    if rest:
        raise TruncatedCommandError(
            "stream body is not a whole number of words", n_words
        )
    words = struct.unpack_from(f"<{n_words}Q", data, HEADER_SIZE)
    return header, list(_StreamDecoder(words))


def decode_prefix(
    data: bytes,
) -> tuple[LogHeader, list[LogCommand], WireFormatError | None]:
    """Decode as many whole commands as possible.

    Used on logs that are still being written: returns every command decoded
    before the first error together with that error (or None).
    """
    data = bytes(data)
    header = LogHeader.from_bytes(data)
    n_words = (len(data) - HEADER_SIZE) // WORD_SIZE
    words = struct.unpack_from(f"<{n_words}Q", data, HEADER_SIZE)
    commands: list[LogCommand] = []
    try:
        for cmd in _StreamDecoder(words):
            commands.append(cmd)
    except WireFormatError as exc:
        return header, commands, exc
    return header, commands, None
