"""Emulated imaging source and frame grabber.

Generates deterministic synthetic frames (or reads PPM/PGM files), embeds a
machine-readable pixel stopwatch, and paces emission at a fixed rate with
absolute-deadline scheduling so no drift accumulates.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .core import Counter, Frame, PixelFormat, StatAccumulator, clock_now

# The stopwatch is 64 bits written as 8x8 pixel blocks along the top edge,
# MSB first. Block size matches JPEG's DCT grid so quality >= 50 round trips
# keep every block solidly above/below the decode threshold.
STOPWATCH_BITS = 64
STOPWATCH_BLOCK = 8
STOPWATCH_MIN_WIDTH = STOPWATCH_BITS * STOPWATCH_BLOCK  # 512
STOPWATCH_THRESHOLD = 128.0


class StopwatchError(ValueError):
    """Frame cannot carry or yield the pixel stopwatch."""


# Continuous triangular wave, one 512-sample period ramping 256->0->255.
# Smooth content keeps the synthetic pattern JPEG-friendly.
_TRI_LUT = np.abs(np.arange(512, dtype=np.int64) - 256).clip(0, 255).astype(np.uint8)
_TRI_LUT2 = np.repeat(_TRI_LUT, 2)

_WINDOW_CACHE: dict = {}


def _tri_window(width: int, offsets: np.ndarray, lut: np.ndarray, period: int) -> np.ndarray:
    """Rows of tri(x + offset) built as sliding windows over the tiled wave."""
    key = (width, period)
    windows = _WINDOW_CACHE.get(key)
    if windows is None:
        tiled = np.tile(lut, width // period + 2)
        windows = np.lib.stride_tricks.sliding_window_view(tiled, width)
        _WINDOW_CACHE[key] = windows
    return windows[offsets]


class NetpbmError(ValueError):
    """Base class for PPM/PGM reader failures."""


class NetpbmMagicError(NetpbmError):
    pass


class NetpbmMaxvalError(NetpbmError):
    pass


class NetpbmTruncatedError(NetpbmError):
    pass


@dataclass
class SourceConfig:
    width: int = 1920
    height: int = 1080
    rate: float = 36.0
    mode: str = "pattern"  # pattern | files
    seed: int = 1
    directory: Path | None = None
    stopwatch: bool = False  # embed capture_ts before the pipeline sees the frame

    def __post_init__(self):
        if self.rate <= 0:
            raise ValueError("rate must be positive")
        if self.mode not in ("pattern", "files"):
            raise ValueError(f"unknown source mode {self.mode!r}")
        if self.mode == "files" and self.directory is None:
            raise ValueError("files mode needs a directory")
        if self.stopwatch and (self.width < STOPWATCH_MIN_WIDTH or self.height < 16):
            raise ValueError(
                f"stopwatch needs at least {STOPWATCH_MIN_WIDTH}x16, got {self.width}x{self.height}"
            )


def gen_pattern_frame(seed: int, index: int, width: int, height: int,
                      capture_ts: int = 0) -> Frame:
    """Deterministic RGB24 test pattern.

    A diagonal gradient drifts with the frame index, a static grid marks
    fixed positions, and a 16-px-high bright bar sweeps vertically so motion
    is obvious. Same (seed, index, size) always yields identical bytes.
    """
    if width < 16 or height < 16:
        raise ValueError(f"pattern needs at least 16x16, got {width}x{height}")
    ys = np.arange(height, dtype=np.int64)
    phase = (seed * 47) % 512
    shift = (index * 3) % 512

    # Channel value at (x, y) is tri(x + offset(y)) for a 512-periodic
    # triangular wave; rows are gathered as windows over a tiled LUT, which
    # is far cheaper than evaluating the wave per pixel.
    img = np.empty((height, width, 3), dtype=np.uint8)
    img[:, :, 0] = _tri_window(width, (ys + shift + phase) % 512, _TRI_LUT, 512)
    img[:, :, 1] = _tri_window(width, (-ys + 2 * index + 3 * phase + 128) % 512, _TRI_LUT, 512)
    # blue uses x >> 1: same wave stretched 2x, so index over the repeated LUT
    img[:, :, 2] = _tri_window(width, (2 * ((ys >> 1) + phase + 256)) % 1024, _TRI_LUT2, 1024)

    # Static grid every 64 px, mildly darkened to stay JPEG-friendly.
    img[::64, :, :] = (img[::64, :, :] * 3 // 4).astype(np.uint8)
    img[:, ::64, :] = (img[:, ::64, :] * 3 // 4).astype(np.uint8)

    # Moving marker bar, 16 px high, bright with a darker outline.
    bar_top = (index * 4) % max(1, height - 16)
    img[bar_top : bar_top + 16, :, :] = 230
    img[bar_top, :, :] = 64
    img[bar_top + 15, :, :] = 64

    return Frame(
        width=width,
        height=height,
        format=PixelFormat.RGB24,
        seq=index,
        capture_ts=capture_ts,
        payload=img.tobytes(),
    )


def _frame_array(frame: Frame) -> np.ndarray:
    """Read-only (h, w, channels) or (h, w) view of a raster frame payload."""
    arr = np.frombuffer(frame.payload, dtype=np.uint8)
    if frame.format == PixelFormat.GRAY8:
        return arr.reshape(frame.height, frame.width)
    if frame.format == PixelFormat.RGB24:
        return arr.reshape(frame.height, frame.width, 3)
    if frame.format == PixelFormat.RGBA32:
        return arr.reshape(frame.height, frame.width, 4)
    raise ValueError(f"not a raster format: {frame.format.name}")


def embed_stopwatch(frame: Frame, ts: int) -> Frame:
    """Write ts (64-bit big-endian) as 8x8 blocks at the top-left, MSB first.

    Bit 1 is a block of 255 in every channel, bit 0 a block of 0. The rest
    of the frame is untouched; the input frame is not modified.
    """
    if frame.format not in (PixelFormat.RGB24, PixelFormat.GRAY8):
        raise StopwatchError(f"cannot embed into {frame.format.name}")
    if frame.width < STOPWATCH_MIN_WIDTH or frame.height < STOPWATCH_BLOCK:
        raise StopwatchError(
            f"frame {frame.width}x{frame.height} too small for stopwatch row"
        )
    if not 0 <= ts < 1 << 64:
        raise StopwatchError(f"timestamp {ts} outside unsigned 64-bit range")
    img = _frame_array(frame).copy()
    for bit in range(STOPWATCH_BITS):
        value = 255 if (ts >> (STOPWATCH_BITS - 1 - bit)) & 1 else 0
        x0 = bit * STOPWATCH_BLOCK
        img[0:STOPWATCH_BLOCK, x0 : x0 + STOPWATCH_BLOCK] = value
    return Frame(
        width=frame.width,
        height=frame.height,
        format=frame.format,
        seq=frame.seq,
        capture_ts=frame.capture_ts,
        payload=img.tobytes(),
    )


def decode_stopwatch(frame: Frame) -> int:
    """Recover the embedded 64-bit value: block mean luminance >= 128 reads 1.

    Works on GRAY8, RGB24, and RGBA32 frames (alpha is ignored); survives
    JPEG round trips at quality >= 50 exactly.
    """
    if frame.width < STOPWATCH_MIN_WIDTH or frame.height < STOPWATCH_BLOCK:
        raise StopwatchError(f"frame {frame.width}x{frame.height} cannot hold a stopwatch")
    img = _frame_array(frame)
    row = img[0:STOPWATCH_BLOCK, 0:STOPWATCH_MIN_WIDTH]
    if row.ndim == 3:
        row = row[:, :, :3]  # drop alpha if present
    blocks = row.reshape(STOPWATCH_BLOCK, STOPWATCH_BITS, STOPWATCH_BLOCK, -1)
    means = blocks.astype(np.float64).mean(axis=(0, 2, 3))
    value = 0
    for bit_mean in means:
        value = (value << 1) | (1 if bit_mean >= STOPWATCH_THRESHOLD else 0)
    return value


def _read_netpbm_header(data: bytes):
    """Parse magic, width, height, maxval; returns (magic, w, h, maxval, offset)."""
    if len(data) < 2:
        raise NetpbmMagicError("file too short for a Netpbm magic")
    magic = data[0:2]
    if magic not in (b"P5", b"P6"):
        raise NetpbmMagicError(f"unsupported magic {magic!r} (need binary P5 or P6)")
    pos = 2
    fields = []
    while len(fields) < 3:
        # skip whitespace and '#' comments between header tokens
        while pos < len(data) and data[pos : pos + 1].isspace():
            pos += 1
        if pos < len(data) and data[pos] == ord("#"):
            while pos < len(data) and data[pos] != ord("\n"):
                pos += 1
            continue
        start = pos
        while pos < len(data) and not data[pos : pos + 1].isspace():
            pos += 1
        if start == pos:
            raise NetpbmTruncatedError("header ended before width/height/maxval")
        try:
            fields.append(int(data[start:pos]))
        except ValueError:
            raise NetpbmTruncatedError(f"non-numeric header token {data[start:pos]!r}")
    pos += 1  # exactly one whitespace byte separates maxval from the raster
    width, height, maxval = fields
    return magic, width, height, maxval, pos


def read_image_file(path) -> Frame:
    """Read a binary PPM (P6 -> RGB24) or PGM (P5 -> GRAY8) file, maxval 255."""
    data = Path(path).read_bytes()
    magic, width, height, maxval, offset = _read_netpbm_header(data)
    if maxval != 255:
        raise NetpbmMaxvalError(f"maxval {maxval} unsupported (need 255)")
    if width <= 0 or height <= 0:
        raise NetpbmTruncatedError(f"bad dimensions {width}x{height}")
    fmt = PixelFormat.RGB24 if magic == b"P6" else PixelFormat.GRAY8
    expected = fmt.payload_size(width, height)
    payload = data[offset : offset + expected]
    if len(payload) < expected:
        raise NetpbmTruncatedError(
            f"payload holds {len(payload)} bytes, header promises {expected}"
        )
    return Frame(width=width, height=height, format=fmt, seq=0, capture_ts=0, payload=payload)


class SinkClosed(Exception):
    """Raised by a sink to stop the paced source cleanly."""


@dataclass
class SourceStats:
    intervals_us: StatAccumulator = field(default_factory=StatAccumulator)
    emitted: Counter = field(default_factory=Counter)


class PacedSource:
    """Emits frames at a fixed rate on its own thread.

    Deadlines are absolute (start + k/rate) so jitter never accumulates.
    Each frame gets capture_ts = clock_now() and seq = k. The sink is any
    callable taking a Frame; raising SinkClosed shuts the source down.
    """

    def __init__(self, config: SourceConfig, sink):
        self.config = config
        self.sink = sink
        self.stats = SourceStats()
        self._stop = threading.Event()
        self._thread: threading.Thread | None = None
        self._files: list[Path] = []
        if config.mode == "files":
            self._files = sorted(
                p for p in Path(config.directory).iterdir()
                if p.suffix.lower() in (".ppm", ".pgm")
            )
            if not self._files:
                raise FileNotFoundError(f"no .ppm/.pgm files in {config.directory}")

    def _make_frame(self, index: int) -> Frame:
        ts = clock_now()
        if self.config.mode == "pattern":
            frame = gen_pattern_frame(
                self.config.seed, index, self.config.width, self.config.height, capture_ts=ts
            )
        else:
            base = read_image_file(self._files[index % len(self._files)])
            frame = Frame(
                width=base.width,
                height=base.height,
                format=base.format,
                seq=index,
                capture_ts=ts,
                payload=base.payload,
            )
        if self.config.stopwatch:
            frame = embed_stopwatch(frame, ts)
        return frame

    def _run(self):
        period = 1.0 / self.config.rate
        start = time.perf_counter()
        last_emit_us = None
        k = 0
        while not self._stop.is_set():
            deadline = start + k * period
            delay = deadline - time.perf_counter()
            if delay > 0:
                if self._stop.wait(delay):
                    break
            frame = self._make_frame(k)
            try:
                self.sink(frame)
            except SinkClosed:
                break
            now_us = clock_now()
            if last_emit_us is not None:
                self.stats.intervals_us.add(now_us - last_emit_us)
            last_emit_us = now_us
            self.stats.emitted.increment()
            k += 1

    def start(self):
        self._thread = threading.Thread(target=self._run, name="vmon-source", daemon=True)
        self._thread.start()
        return self

    def stop(self, timeout: float = 5.0):
        self._stop.set()
        if self._thread is not None:
            self._thread.join(timeout)

    def run_for(self, duration_s: float):
        """Convenience: start, sleep, stop."""
        self.start()
        time.sleep(duration_s)
        self.stop()
        return self.stats
