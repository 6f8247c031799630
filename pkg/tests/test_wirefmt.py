"""Tests for the binary log format."""

import struct

import pytest
from hypothesis import HealthCheck, given, settings
from hypothesis import strategies as st

from w1.perfsan.enums import Opcode
from w1.perfsan.errors import (
    BadMagicError,
    FieldOverflowError,
    TruncatedCommandError,
    UnknownOpcodeError,
    UnregisteredReferenceError,
    WireFormatError,
)
from w1.perfsan.wirefmt import (
    COMPACT_EVENT_WORDS,
    HEADER_SIZE,
    MAGIC,
    REGULAR_EVENT_WORDS,
    CompactEvent,
    LogCommand,
    LogHeader,
    RegisterCodeSegment,
    RegisterString,
    RegisterTraceNode,
    RegularEvent,
    compact_eligible,
    decode_prefix,
    decode_stream,
    encode_command,
    encode_stream,
    make_event,
    words_to_bytes,
)

U32 = (1 << 32) - 1
U64 = (1 << 64) - 1


def _preamble() -> list[LogCommand]:
    return [
        RegisterString(1, "vector"),
        RegisterString(2, "push_back"),
        RegisterTraceNode(1, 0, True, 0x1000),
    ]


# ---------------------------------------------------------------------------
# Header
# ---------------------------------------------------------------------------


class TestLogHeader:
    """Header encoding and validation."""

    def test_to_bytes_layout(self) -> None:
        data = LogHeader(tick_rate=1_000_000_000).to_bytes()
        assert len(data) == HEADER_SIZE
        assert data[:8] == b"W1LOGv1\x00"
        assert struct.unpack("<Q", data[8:]) == (1_000_000_000,)

    def test_from_bytes_roundtrip(self) -> None:
        header = LogHeader(tick_rate=42)
        assert LogHeader.from_bytes(header.to_bytes()) == header

    def test_bad_magic_rejected(self) -> None:
        with pytest.raises(BadMagicError):
            LogHeader.from_bytes(b"NOTALOG\x00" + struct.pack("<Q", 1))

    def test_zero_tick_rate_rejected(self) -> None:
        with pytest.raises(WireFormatError):
            LogHeader.from_bytes(MAGIC + struct.pack("<Q", 0))

    def test_short_header_rejected(self) -> None:
        with pytest.raises(TruncatedCommandError):
            LogHeader.from_bytes(MAGIC + b"\x01")

    def test_constructor_rejects_zero_rate(self) -> None:
        with pytest.raises(ValueError, match="tick_rate"):
            LogHeader(tick_rate=0)


# ---------------------------------------------------------------------------
# Encoding
# ---------------------------------------------------------------------------


class TestEncodeCommand:
    """Bit-exact layouts."""

    def test_compact_event_layout(self) -> None:
        cmd = CompactEvent(
            class_sid=1,
            method_sid=2,
            trace_id=7,
            timestamp=100,
            instance=0x1000,
            a=3,
            b=0,
            c=0,
        )
        words = encode_command(cmd, prev_ts=0)
        assert words == [5 | 1 << 4 | 2 << 16 | 7 << 28 | 3 << 52, 100, 0x1000]

    def test_compact_delta_is_relative_to_prev_ts(self) -> None:
        cmd = CompactEvent(1, 2, 7, 1_250, 0x1000, 0, 5, 9)
        words = encode_command(cmd, prev_ts=1_000)
        assert words[1] == 250 | 5 << 28 | 9 << 46

    def test_register_string_pads_to_one_word(self) -> None:
        words = encode_command(RegisterString(1, "vector"))
        assert len(words) == 2
        assert words[0] == Opcode.REGISTER_STRING | 1 << 4 | 6 << 24
        assert words_to_bytes(words[1:]) == b"vector\x00\x00"

    def test_register_string_exact_multiple_has_no_padding_word(self) -> None:
        words = encode_command(RegisterString(3, "12345678"))
        assert len(words) == 2

    def test_register_trace_node_layout(self) -> None:
        words = encode_command(RegisterTraceNode(5, 2, True, 0xDEADBEEF))
        assert words == [2 | 5 << 4 | 2 << 28 | 1 << 52, 0xDEADBEEF]

    def test_register_code_segment_layout(self) -> None:
        words = encode_command(RegisterCodeSegment(4, 0x400000, 0x1000))
        assert words == [3 | 4 << 4, 0x400000, 0x1000]

    def test_regular_event_layout(self) -> None:
        cmd = RegularEvent(9, 10, 11, 123_456, 0xABC, U32, 2, 3)
        words = encode_command(cmd)
        assert len(words) == REGULAR_EVENT_WORDS
        assert words == [
            4 | 9 << 4 | 10 << 20,
            11 | U32 << 32,
            2 | 3 << 32,
            123_456,
            0xABC,
        ]

    def test_compact_event_is_three_words(self) -> None:
        assert len(encode_command(CompactEvent(1, 1, 0, 0, 0, 0, 0, 0))) == (
            COMPACT_EVENT_WORDS
        )

    @pytest.mark.parametrize(
        ("field", "kwargs"),
        [
            ("a", {"a": 1 << 12}),
            ("b", {"b": 1 << 18}),
            ("c", {"c": 1 << 18}),
            ("class_sid", {"class_sid": 1 << 12}),
            ("trace_id", {"trace_id": 1 << 24}),
        ],
    )
    def test_compact_overflow_names_field(self, field: str, kwargs: dict) -> None:
        values = {
            "class_sid": 1,
            "method_sid": 1,
            "trace_id": 0,
            "timestamp": 0,
            "instance": 0,
            "a": 0,
            "b": 0,
            "c": 0,
        }
        values.update(kwargs)
        with pytest.raises(FieldOverflowError) as excinfo:
            encode_command(CompactEvent(**values))
        assert excinfo.value.field == field

    def test_compact_delta_overflow(self) -> None:
        with pytest.raises(FieldOverflowError) as excinfo:
            encode_command(CompactEvent(1, 1, 0, 1 << 28, 0, 0, 0, 0), prev_ts=0)
        assert excinfo.value.field == "ts_delta"

    def test_regular_payload_overflow(self) -> None:
        with pytest.raises(FieldOverflowError, match="'b'"):
            encode_command(RegularEvent(1, 1, 0, 0, 0, 0, 1 << 32, 0))

    def test_root_node_cannot_be_registered(self) -> None:
        with pytest.raises(WireFormatError):
            encode_command(RegisterTraceNode(0, 0, True, 1))


class TestCompactEligibility:
    """Choosing between compact and regular events."""

    def test_small_fields_are_eligible(self) -> None:
        assert compact_eligible(1, 2, 7, 100, 3, 0, 0)

    @pytest.mark.parametrize(
        "fields",
        [
            (1 << 12, 0, 0, 0, 0, 0, 0),
            (0, 1 << 12, 0, 0, 0, 0, 0),
            (0, 0, 1 << 24, 0, 0, 0, 0),
            (0, 0, 0, 1 << 28, 0, 0, 0),
            (0, 0, 0, 0, 1 << 12, 0, 0),
            (0, 0, 0, 0, 0, 1 << 18, 0),
            (0, 0, 0, 0, 0, 0, 1 << 18),
        ],
    )
    def test_any_wide_field_disqualifies(self, fields: tuple[int, ...]) -> None:
        assert not compact_eligible(*fields)

    def test_make_event_picks_compact(self) -> None:
        event = make_event(1, 2, 3, 110, 0x10, 1, 2, 3, prev_ts=100)
        assert isinstance(event, CompactEvent)

    def test_make_event_falls_back_to_regular(self) -> None:
        event = make_event(1, 2, 3, 110, 0x10, 5000, 2, 3, prev_ts=100)
        assert isinstance(event, RegularEvent)
        assert event.a == 5000


# ---------------------------------------------------------------------------
# Decoding
# ---------------------------------------------------------------------------


def _image(*words: int, tick_rate: int = 1000) -> bytes:
    return LogHeader(tick_rate).to_bytes() + words_to_bytes(list(words))


class TestDecodeStream:
    """Stream decoding and its error paths."""

    def test_empty_body(self) -> None:
        header, commands = decode_stream(LogHeader(7).to_bytes())
        assert header.tick_rate == 7
        assert commands == []

    def test_compact_timestamps_rematerialized(self) -> None:
        commands = [
            *_preamble(),
            CompactEvent(1, 2, 1, 100, 0x10, 0, 0, 0),
            RegisterString(3, "realloc"),
            CompactEvent(1, 3, 1, 150, 0x10, 0, 0, 0),
            RegularEvent(1, 2, 1, 10_000_000_000, 0x10, 0, 0, 0),
            CompactEvent(1, 2, 1, 10_000_000_005, 0x10, 0, 0, 0),
        ]
        _, decoded = decode_stream(encode_stream(LogHeader(1000), commands))
        stamps = [c.timestamp for c in decoded if hasattr(c, "timestamp")]
        assert stamps == [100, 150, 10_000_000_000, 10_000_000_005]

    def test_unknown_opcode(self) -> None:
        with pytest.raises(UnknownOpcodeError) as excinfo:
            decode_stream(_image(6))
        assert excinfo.value.opcode == 6
        assert excinfo.value.offset == 0

    def test_truncated_command(self) -> None:
        with pytest.raises(TruncatedCommandError):
            decode_stream(_image(Opcode.COMPACT_EVENT | 1 << 4))

    def test_partial_word(self) -> None:
        with pytest.raises(TruncatedCommandError):
            decode_stream(LogHeader(1).to_bytes() + b"\x01\x02\x03")

    def test_unregistered_string(self) -> None:
        with pytest.raises(UnregisteredReferenceError, match="class_sid"):
            decode_stream(
                encode_stream(LogHeader(1), [CompactEvent(1, 1, 0, 0, 0, 0, 0, 0)])
            )

    def test_unregistered_parent(self) -> None:
        with pytest.raises(UnregisteredReferenceError, match="parent_id"):
            decode_stream(
                encode_stream(LogHeader(1), [RegisterTraceNode(2, 1, True, 5)])
            )

    def test_unregistered_trace(self) -> None:
        commands = [RegisterString(1, "vector"), CompactEvent(1, 1, 9, 0, 0, 0, 0, 0)]
        with pytest.raises(UnregisteredReferenceError, match="trace_id"):
            decode_stream(encode_stream(LogHeader(1), commands))

    def test_duplicate_node(self) -> None:
        commands = [
            RegisterTraceNode(1, 0, False, 5),
            RegisterTraceNode(1, 0, True, 6),
        ]
        with pytest.raises(WireFormatError, match="twice"):
            decode_stream(encode_stream(LogHeader(1), commands))

    def test_reserved_bits_in_regular_event(self) -> None:
        data = encode_stream(LogHeader(1), _preamble())
        bad = Opcode.REGULAR_EVENT | 1 << 4 | 2 << 20 | 1 << 40
        with pytest.raises(WireFormatError, match="reserved"):
            decode_stream(data + words_to_bytes([bad, 1, 0, 0, 0]))

    def test_decode_prefix_keeps_good_commands(self) -> None:
        data = encode_stream(LogHeader(1), _preamble()) + words_to_bytes([15])
        header, commands, error = decode_prefix(data)
        assert header.tick_rate == 1
        assert commands == _preamble()
        assert isinstance(error, UnknownOpcodeError)

    def test_decode_prefix_clean_stream(self) -> None:
        data = encode_stream(LogHeader(1), _preamble())
        _, commands, error = decode_prefix(data)
        assert len(commands) == 3
        assert error is None


# ---------------------------------------------------------------------------
# Property-based
# ---------------------------------------------------------------------------

_payload = st.one_of(st.integers(0, 4095), st.integers(0, U32))


@st.composite
def command_sequences(draw: st.DrawFn) -> list[LogCommand]:
    """Valid command streams: registrations first, then events and segments."""
    texts = draw(st.lists(st.text(max_size=24), min_size=1, max_size=6))
    commands: list[LogCommand] = [
        RegisterString(i + 1, text) for i, text in enumerate(texts)
    ]
    string_ids = st.integers(1, len(texts))

    n_nodes = draw(st.integers(0, 8))
    for node_id in range(1, n_nodes + 1):
        parent = draw(st.integers(0, node_id - 1))
        frame = draw(st.integers(0, U64))
        leaf = draw(st.booleans())
        commands.append(RegisterTraceNode(node_id, parent, leaf, frame))

    prev_ts = 0
    for _ in range(draw(st.integers(0, 20))):
        if draw(st.integers(0, 9)) == 0:
            commands.append(
                RegisterCodeSegment(
                    draw(string_ids),
                    draw(st.integers(0, U64)),
                    draw(st.integers(1, U64)),
                )
            )
            continue
        delta = draw(st.one_of(st.integers(0, 1000), st.integers(0, 1 << 30)))
        timestamp = prev_ts + delta
        event = make_event(
            draw(string_ids),
            draw(string_ids),
            draw(st.integers(0, n_nodes)),
            timestamp,
            draw(st.integers(0, U64)),
            draw(_payload),
            draw(_payload),
            draw(_payload),
            prev_ts=prev_ts,
        )
        commands.append(event)
        prev_ts = timestamp
    return commands


class TestWirePropertyBased:
    """Roundtrip and fuzzing properties."""

    @settings(
        max_examples=10_000,
        deadline=None,
        suppress_health_check=[HealthCheck.too_slow],
    )
    @given(commands=command_sequences(), tick_rate=st.integers(1, U64))
    def test_roundtrip_is_byte_exact(
        self, commands: list[LogCommand], tick_rate: int
    ) -> None:
        """Property: encode then decode returns the same commands and bytes."""
        data = encode_stream(LogHeader(tick_rate), commands)
        header, decoded = decode_stream(data)
        assert header.tick_rate == tick_rate
        assert decoded == commands
        assert encode_stream(header, decoded) == data

    @settings(max_examples=2_000, deadline=None)
    @given(body=st.binary(max_size=512), tick_rate=st.integers(0, U64))
    def test_decoder_never_crashes(self, body: bytes, tick_rate: int) -> None:
        """Property: arbitrary bodies decode or raise WireFormatError."""
        data = MAGIC + struct.pack("<Q", tick_rate) + body
        try:
            decode_stream(data)
        except WireFormatError:
            pass
        if tick_rate:
            _, _, error = decode_prefix(data)
            assert error is None or isinstance(error, WireFormatError)

    @settings(max_examples=500, deadline=None)
    @given(data=st.binary(max_size=64))
    def test_random_images_never_crash(self, data: bytes) -> None:
        """Property: images with arbitrary headers fail cleanly."""
        try:
            decode_stream(data)
        except WireFormatError:
            pass
