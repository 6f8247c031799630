"""Exception hierarchy for w1-perfsan.

Every error raised by the package derives from `PerfsanError`. Errors that
describe invalid input values also derive from the matching builtin
(`ValueError`, `KeyError`) so callers can catch them generically.
"""


class PerfsanError(Exception):
    """Base class for all w1-perfsan errors."""


class WireFormatError(PerfsanError, ValueError):
    """A log stream or command violates the binary format.

    Attributes:
        offset: Word offset (after the header) where the problem was found,
            or None when the error is not tied to a stream position.
    """

    def __init__(self, message: str, offset: int | None = None) -> None:
        if offset is not None:
            message = f"{message} (at word {offset})"
        super().__init__(message)
        self.offset = offset


class BadMagicError(WireFormatError):
    """Stream does not start with the expected magic bytes."""


class UnknownOpcodeError(WireFormatError):
    """Command word carries an opcode outside 1..5."""

    def __init__(self, opcode: int, offset: int) -> None:
        super().__init__(f"unknown opcode {opcode}", offset)
        self.opcode = opcode


class TruncatedCommandError(WireFormatError):
    """Stream ends in the middle of a command."""


class UnregisteredReferenceError(WireFormatError):
    """Command references a string or trie node that was never registered."""


class FieldOverflowError(WireFormatError):
    """A command field does not fit its declared bit width.

    Attributes:
        field: Name of the offending field.
    """

    def __init__(self, field: str, value: int, bits: int) -> None:
        super().__init__(f"field {field!r}={value} does not fit in {bits} bits")
        self.field = field
        self.value = value
        self.bits = bits


class IdSpaceExhaustedError(PerfsanError):
    """No more string or trie-node ids are available."""


class UnknownTraceError(PerfsanError, KeyError):
    """Trace id is not present in the rebuilt trie."""

    def __init__(self, trace_id: int) -> None:
        super().__init__(f"unknown trace id {trace_id}")
        self.trace_id = trace_id

    def __str__(self) -> str:
        return str(self.args[0])


class UnknownRuleError(PerfsanError, KeyError):
    """Rule id is not part of the catalog."""

    def __init__(self, rule_id: str) -> None:
        super().__init__(f"unknown rule id {rule_id!r}")
        self.rule_id = rule_id

    def __str__(self) -> str:
        return str(self.args[0])


class UnknownHistogramKindError(PerfsanError, ValueError):
    """Histogram kind is not one of size, lifetime, refcount, string-dup."""


class SymbolMapError(PerfsanError, ValueError):
    """Symbol-map file is malformed.

    Attributes:
        line_number: 1-based line of the offending entry, if known.
    """

    def __init__(self, message: str, line_number: int | None = None) -> None:
        if line_number is not None:
            message = f"line {line_number}: {message}"
        super().__init__(message)
        self.line_number = line_number
