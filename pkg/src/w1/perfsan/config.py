"""Configuration models for the runtime logger and the rule catalog.

Both models are frozen pydantic models: thresholds are validated once at
construction and cannot drift while a log is being written or analyzed.
"""

import os
from collections.abc import Mapping
from pathlib import Path
from typing import Any, Self

from pydantic import BaseModel, ConfigDict, Field, field_validator

from w1.perfsan.clock import Clock, MonotonicClock

ENV_LOG_PATH = "W1_LOG_PATH"
ENV_BUFFER_BYTES = "W1_BUFFER_BYTES"

MIN_BUFFER_BYTES = 4 * 1024
DEFAULT_BUFFER_BYTES = 4 * 1024 * 1024
DEFAULT_MAX_DEPTH = 64
DEFAULT_LOG_PATH = Path("perfsan.w1log")


class LoggerConfig(BaseModel):
    """Runtime logger settings.

    Attributes:
        buffer_capacity: Bytes buffered before an automatic flush (>= 4 KiB)
        output_path: Log file that flushes append to
        max_depth: Maximum captured frames per event
        clock: Tick source; its tick_rate is written to the header
    """

    model_config = ConfigDict(frozen=True)

    buffer_capacity: int = Field(default=DEFAULT_BUFFER_BYTES, ge=MIN_BUFFER_BYTES)
    output_path: Path = DEFAULT_LOG_PATH
    max_depth: int = Field(default=DEFAULT_MAX_DEPTH, gt=0)
    clock: Any = Field(default_factory=MonotonicClock)

    @field_validator("clock")
    @classmethod
    def validate_clock(cls, v: Any) -> Clock:
        """Clock must expose now() and a positive tick_rate."""
        if not isinstance(v, Clock):
            raise ValueError("clock must provide now() and tick_rate")
        if v.tick_rate <= 0:
            raise ValueError("clock tick_rate must be > 0")
        return v

    @classmethod
    def from_env(
        cls,
        environ: Mapping[str, str] | None = None,
        **overrides: Any,
    ) -> Self:
        """Build a config, letting W1_LOG_PATH and W1_BUFFER_BYTES win.

        Raises:
            pydantic.ValidationError: An override is not a valid value.
        """
        env = os.environ if environ is None else environ
        values = dict(overrides)
        if path := env.get(ENV_LOG_PATH):
            values["output_path"] = path
        if capacity := env.get(ENV_BUFFER_BYTES):
            values["buffer_capacity"] = capacity.strip()
        return cls.model_validate(values)


class RuleConfig(BaseModel):
    """Thresholds of the diagnostics catalog.

    Attributes:
        short_lifetime_ticks: Lifetimes below this are short
        small_vector_max: Largest size still considered small
        shrink_waste_min: Minimum unused capacity worth a shrink
        shrink_waste_ratio: Unused capacity must also be >= ratio x size
        duplicate_string_min: Repeats of one content hash worth reporting
        high_refcount_min: Max refcount considered high
        double_lookup_window: Events after a lookup searched for its repeat
        data_shift_min: Total shifted elements per site worth reporting
        min_instances_per_finding: Findings below this instance count are dropped
    """

    model_config = ConfigDict(frozen=True)

    short_lifetime_ticks: int = Field(default=1000, gt=0)
    small_vector_max: int = Field(default=16, gt=0)
    shrink_waste_min: int = Field(default=16, gt=0)
    shrink_waste_ratio: int = Field(default=2, gt=0)
    duplicate_string_min: int = Field(default=100, gt=0)
    high_refcount_min: int = Field(default=100, gt=0)
    double_lookup_window: int = Field(default=1, gt=0)
    data_shift_min: int = Field(default=1000, gt=0)
    min_instances_per_finding: int = Field(default=1, gt=0)
