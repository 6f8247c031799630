"""Shared test fixtures for w1-perfsan tests."""

from collections.abc import Callable
from pathlib import Path

import pytest

from w1.perfsan.clock import ManualClock
from w1.perfsan.config import LoggerConfig
from w1.perfsan.frames import StaticFrameProvider
from w1.perfsan.logger import EventLogger
from w1.perfsan.tracedb import TraceDb, load


@pytest.fixture
def manual_clock() -> ManualClock:
    """Return a clock that only moves when advanced."""
    return ManualClock(start=1_000, tick_rate=1_000_000)


@pytest.fixture
def frame_provider() -> StaticFrameProvider:
    """Return a provider that always reports the same two-frame stack."""
    return StaticFrameProvider(frames=(0x1000, 0x2000))


@pytest.fixture
def log_path(tmp_path: Path) -> Path:
    """Return a fresh log file path."""
    return tmp_path / "events.w1log"


@pytest.fixture
def logger_config(log_path: Path, manual_clock: ManualClock) -> LoggerConfig:
    """Return a config writing to ``log_path`` with the manual clock."""
    return LoggerConfig(output_path=log_path, clock=manual_clock)


@pytest.fixture
def event_logger(
    logger_config: LoggerConfig, frame_provider: StaticFrameProvider
) -> EventLogger:
    """Return a logger with deterministic time and stacks."""
    return EventLogger(logger_config, frame_provider)


@pytest.fixture
def analyze(event_logger: EventLogger, log_path: Path) -> Callable[[], TraceDb]:
    """Return a callable that flushes the logger and loads its log."""

    def _analyze() -> TraceDb:
        event_logger.flush()
        return load(log_path)

    return _analyze
