"""
w1-perfsan: performance sanitizer for container usage.

Instrumented containers log their method calls into a compact binary trace;
the offline report tool rebuilds per-instance timelines, runs the
anti-pattern catalog and renders severity-sorted findings and histograms.
"""

from w1.perfsan.clock import Clock, ManualClock, MonotonicClock, SteppingClock
from w1.perfsan.config import LoggerConfig, RuleConfig
from w1.perfsan.enums import HistogramKind, Opcode, RuleId, ShimClass, ShimMethod
from w1.perfsan.errors import (
    BadMagicError,
    FieldOverflowError,
    IdSpaceExhaustedError,
    PerfsanError,
    SymbolMapError,
    TruncatedCommandError,
    UnknownHistogramKindError,
    UnknownOpcodeError,
    UnknownRuleError,
    UnknownTraceError,
    UnregisteredReferenceError,
    WireFormatError,
)
from w1.perfsan.frames import FrameProvider, PythonFrameProvider, StaticFrameProvider
from w1.perfsan.logger import EventLogger, active_logger, install, uninstall
from w1.perfsan.report import (
    Histogram,
    emit_csv,
    findings_to_json,
    histogram,
    render_findings,
    render_histogram,
)
from w1.perfsan.rules import CATALOG, Finding, evaluate, run_all
from w1.perfsan.shims import (
    GrowableArray,
    HashedMap,
    OrderedMap,
    SharedHandle,
    TextBuffer,
)
from w1.perfsan.symbols import SymbolMap, load_symbol_map, symbolize
from w1.perfsan.tracedb import (
    InstanceTimeline,
    MethodEvent,
    TraceDb,
    build,
    load,
    reconstruct_instances,
    resolve_trace,
)
from w1.perfsan.wirefmt import (
    CompactEvent,
    LogHeader,
    RegisterCodeSegment,
    RegisterString,
    RegisterTraceNode,
    RegularEvent,
    compact_eligible,
    decode_stream,
    encode_command,
    encode_stream,
)

__all__ = [
    # Runtime
    "EventLogger",
    "active_logger",
    "install",
    "uninstall",
    "LoggerConfig",
    "Clock",
    "ManualClock",
    "MonotonicClock",
    "SteppingClock",
    "FrameProvider",
    "PythonFrameProvider",
    "StaticFrameProvider",
    # Shims
    "GrowableArray",
    "HashedMap",
    "OrderedMap",
    "SharedHandle",
    "TextBuffer",
    # Wire format
    "CompactEvent",
    "LogHeader",
    "RegisterCodeSegment",
    "RegisterString",
    "RegisterTraceNode",
    "RegularEvent",
    "compact_eligible",
    "decode_stream",
    "encode_command",
    "encode_stream",
    # Analysis
    "InstanceTimeline",
    "MethodEvent",
    "TraceDb",
    "build",
    "load",
    "reconstruct_instances",
    "resolve_trace",
    "CATALOG",
    "Finding",
    "RuleConfig",
    "evaluate",
    "run_all",
    # Reporting
    "Histogram",
    "SymbolMap",
    "emit_csv",
    "findings_to_json",
    "histogram",
    "load_symbol_map",
    "render_findings",
    "render_histogram",
    "symbolize",
    # Enums
    "HistogramKind",
    "Opcode",
    "RuleId",
    "ShimClass",
    "ShimMethod",
    # Errors
    "BadMagicError",
    "FieldOverflowError",
    "IdSpaceExhaustedError",
    "PerfsanError",
    "SymbolMapError",
    "TruncatedCommandError",
    "UnknownHistogramKindError",
    "UnknownOpcodeError",
    "UnknownRuleError",
    "UnknownTraceError",
    "UnregisteredReferenceError",
    "WireFormatError",
]
