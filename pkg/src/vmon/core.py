"""Shared value types, monotonic clock, and statistics accumulation."""

from __future__ import annotations

import math
import time
from dataclasses import dataclass
from enum import IntEnum


class PixelFormat(IntEnum):
    """Pixel layout tag. The integer value doubles as the wire codec id."""

    RGB24 = 1
    RGBA32 = 2
    GRAY8 = 3
    YUV422 = 4  # packed Y0 U Y1 V (YUY2), width must be even
    JPEG = 5

    @property
    def bytes_per_pixel(self) -> int | None:
        """Bytes per pixel for fixed-size formats, None for JPEG."""
        return _BPP.get(self)

    def payload_size(self, width: int, height: int) -> int | None:
        bpp = self.bytes_per_pixel
        if bpp is None:
            return None
        return bpp * width * height


_BPP = {
    PixelFormat.RGB24: 3,
    PixelFormat.RGBA32: 4,
    PixelFormat.GRAY8: 1,
    PixelFormat.YUV422: 2,
}


def clock_now() -> int:
    """Monotonic process clock in microseconds.

    Never decreases within one process; resolution is well below 1 ms.
    All delay measurements in this package share this timebase.
    """
    return time.perf_counter_ns() // 1000


@dataclass(frozen=True)
class Frame:
    """One image moving through the pipeline.

    The payload is an immutable byte string in row-major, top-to-bottom
    order. ``seq`` increases strictly per source stream and ``capture_ts``
    is on the clock_now() timebase.
    """

    width: int
    height: int
    format: PixelFormat
    seq: int
    capture_ts: int
    payload: bytes

    def __post_init__(self):
        if self.width <= 0 or self.height <= 0:
            raise ValueError(f"bad frame dimensions {self.width}x{self.height}")
        if self.format == PixelFormat.YUV422 and self.width % 2 != 0:
            raise ValueError("YUV422 requires even width")
        expected = self.format.payload_size(self.width, self.height)
        if expected is not None and len(self.payload) != expected:
            raise ValueError(
                f"payload length {len(self.payload)} does not match "
                f"{self.format.name} {self.width}x{self.height} (expected {expected})"
            )


@dataclass(frozen=True)
class StatSummary:
    """Aggregate of a sample set: n, mean, sample stddev (n-1), min, max."""

    n: int
    mean: float
    stddev: float
    min: float
    max: float

    def to_dict(self) -> dict:
        return {
            "n": self.n,
            "mean": self.mean,
            "stddev": self.stddev,
            "min": self.min,
            "max": self.max,
        }

    @classmethod
    def from_dict(cls, d: dict) -> "StatSummary":
        return cls(n=d["n"], mean=d["mean"], stddev=d["stddev"], min=d["min"], max=d["max"])

    @classmethod
    def empty(cls) -> "StatSummary":
        return cls(n=0, mean=0.0, stddev=0.0, min=0.0, max=0.0)


class StatAccumulator:
    """Running count/mean/variance via Welford's one-pass update.

    Single-writer. Reading a summary from another thread is safe after a
    synchronization point (the writer has stopped or a lock was crossed).
    """

    __slots__ = ("_n", "_mean", "_m2", "_min", "_max")

    def __init__(self):
        self._n = 0
        self._mean = 0.0
        self._m2 = 0.0
        self._min = math.inf
        self._max = -math.inf

    def add(self, sample: float) -> "StatAccumulator":
        if not math.isfinite(sample):
            raise ValueError(f"non-finite sample {sample!r}")
        self._n += 1
        delta = sample - self._mean
        self._mean += delta / self._n
        self._m2 += delta * (sample - self._mean)
        if sample < self._min:
            self._min = sample
        if sample > self._max:
            self._max = sample
        return self

    @property
    def n(self) -> int:
        return self._n

    def summary(self) -> StatSummary:
        if self._n == 0:
            return StatSummary.empty()
        stddev = math.sqrt(self._m2 / (self._n - 1)) if self._n > 1 else 0.0
        return StatSummary(n=self._n, mean=self._mean, stddev=stddev, min=self._min, max=self._max)


class Counter:
    """Single-writer integer counter, readable from any thread."""

    __slots__ = ("_value",)

    def __init__(self):
        self._value = 0

    def increment(self, by: int = 1) -> None:
        self._value += by

    @property
    def value(self) -> int:
        return self._value
