"""Simulated HMD: receive, validate, decode, texture-load, render, measure.

Two threads of control: a receiver/loader turning frame messages into RGBA
textures, and a render ticker capped at the vsync rate. They share a
single-slot latest-texture mailbox, so the ticker always paints the newest
frame and never shows an older one after a newer one.
"""

from __future__ import annotations

import threading
import time
from dataclasses import dataclass

from . import anchoring
from .core import Frame, PixelFormat, StatAccumulator, StatSummary, clock_now
from .pipeline import JpegDecodeError, convert, jpeg_decode
from .source import STOPWATCH_MIN_WIDTH, StopwatchError, decode_stopwatch
from .transport import ReceivedMessage

# Reject stopwatch readings implying more than a minute of latency; they are
# misdecodes (e.g. stopwatch-free content that happens to cross the threshold).
MAX_PLAUSIBLE_E2E_US = 60_000_000


@dataclass(frozen=True)
class RenderTexture:
    width: int
    height: int
    buffer: bytes  # RGBA32, 4*w*h bytes
    loaded_seq: int
    load_duration_us: int

    def __post_init__(self):
        if len(self.buffer) != 4 * self.width * self.height:
            raise ValueError("texture buffer length must be 4*w*h")


def texture_load(msg: ReceivedMessage) -> RenderTexture:
    """JPEG-decode a frame message and convert it to an RGBA32 texture."""
    t0 = clock_now()
    frame = jpeg_decode(msg.payload)
    rgba = convert(frame, PixelFormat.RGBA32)
    buffer = rgba.payload
    return RenderTexture(
        width=rgba.width,
        height=rgba.height,
        buffer=buffer,
        loaded_seq=msg.header.seq,
        load_duration_us=clock_now() - t0,
    )


class RateMonitor:
    """Windowed event-rate sampler: count per fixed window, scaled to Hz.

    Gaps emit zero-rate samples for every elapsed empty window, so bunching
    inflates the spread while the mean stays at the average throughput.
    """

    def __init__(self, window_s: float = 0.25):
        self.window_us = int(window_s * 1e6)
        self.acc = StatAccumulator()
        self._window_start: int | None = None
        self._count = 0

    def record(self, ts_us: int) -> None:
        if self._window_start is None:
            self._window_start = ts_us
        while ts_us >= self._window_start + self.window_us:
            self.acc.add(self._count * 1e6 / self.window_us)
            self._count = 0
            self._window_start += self.window_us
        self._count += 1

    def finish(self, end_ts_us: int | None = None) -> None:
        """Flush complete windows up to end_ts; the partial tail is discarded."""
        if self._window_start is None or end_ts_us is None:
            return
        while end_ts_us >= self._window_start + self.window_us:
            self.acc.add(self._count * 1e6 / self.window_us)
            self._count = 0
            self._window_start += self.window_us

    def summary(self) -> StatSummary:
        return self.acc.summary()


class ReceptionMonitor:
    """Arrival statistics: windowed reception rate plus raw inter-arrival gaps."""

    def __init__(self, window_s: float = 0.25):
        self.rate = RateMonitor(window_s)
        self.intervals_us = StatAccumulator()
        self._last_ts: int | None = None

    def record(self, ts_us: int) -> None:
        if self._last_ts is not None:
            self.intervals_us.add(ts_us - self._last_ts)
        self._last_ts = ts_us
        self.rate.record(ts_us)

    def finish(self, end_ts_us: int | None = None) -> None:
        self.rate.finish(end_ts_us)

    def summary(self) -> StatSummary:
        return self.rate.summary()


def reception_monitor(stream) -> StatSummary:
    """Fold a finite message stream into a reception-rate summary."""
    mon = ReceptionMonitor()
    last = None
    for msg in stream:
        mon.record(msg.receive_ts_us)
        last = msg.receive_ts_us
    mon.finish(last)
    return mon.summary()


@dataclass
class ClientStats:
    reception_rate: StatSummary
    reception_interval_us: StatSummary
    texture_load_us: StatSummary
    render_rate: StatSummary
    displayed_rate: StatSummary
    end_to_end_delay_us: StatSummary
    transfer_delay_us: StatSummary
    crc_rejects: int
    decode_errors: int
    stopwatch_misreads: int
    frames_received: int
    frames_displayed: int

    def to_json(self) -> dict:
        return {
            "version": 1,
            "stats": {
                "reception_rate_hz": self.reception_rate.to_dict(),
                "reception_interval_us": self.reception_interval_us.to_dict(),
                "texture_load_us": self.texture_load_us.to_dict(),
                "render_rate_hz": self.render_rate.to_dict(),
                "displayed_rate_hz": self.displayed_rate.to_dict(),
                "end_to_end_delay_us": self.end_to_end_delay_us.to_dict(),
                "transfer_delay_us": self.transfer_delay_us.to_dict(),
            },
            "counters": {
                "crc_rejects": self.crc_rejects,
                "decode_errors": self.decode_errors,
                "stopwatch_misreads": self.stopwatch_misreads,
                "frames_received": self.frames_received,
                "frames_displayed": self.frames_displayed,
            },
        }


class _TextureMailbox:
    """Single-slot newest-texture handoff between loader and ticker."""

    def __init__(self):
        self._lock = threading.Lock()
        self._texture: RenderTexture | None = None

    def store(self, texture: RenderTexture) -> None:
        with self._lock:
            if self._texture is None or texture.loaded_seq >= self._texture.loaded_seq:
                self._texture = texture

    def take_if_newer(self, seq: int) -> RenderTexture | None:
        with self._lock:
            if self._texture is not None and self._texture.loaded_seq > seq:
                return self._texture
            return None


class HmdClient:
    """Receive/decode/render simulator producing per-stage client statistics."""

    def __init__(self, conn, anchor_state: anchoring.AnchorState | None = None,
                 trajectory_kind: str = "static", trajectory_params: dict | None = None,
                 vsync_hz: float = 60.0, expect_stopwatch: bool = True,
                 clock_offset_us: float = 0.0, rate_window_s: float = 0.25):
        self.conn = conn
        self.anchor_state = anchor_state or anchoring.AnchorState(mode="world")
        self.trajectory_kind = trajectory_kind
        self.trajectory_params = trajectory_params or {}
        self.vsync_hz = vsync_hz
        self.expect_stopwatch = expect_stopwatch
        self.clock_offset_us = clock_offset_us

        self.reception = ReceptionMonitor(rate_window_s)
        self.displayed = RateMonitor(rate_window_s)
        self.texture_load_us = StatAccumulator()
        self.render_rate = StatAccumulator()
        self.end_to_end_us = StatAccumulator()
        self.transfer_us = StatAccumulator()
        self.decode_errors = 0
        self.stopwatch_misreads = 0
        self.frames_received = 0
        self.frames_displayed = 0

        self._mailbox = _TextureMailbox()
        self._stop = threading.Event()
        self._receiver: threading.Thread | None = None
        self._render: threading.Thread | None = None
        self._last_arrival_us: int | None = None

    def _receive_loop(self):
        for msg in self.conn.messages():
            if self._stop.is_set():
                break
            if msg.header.msg_type != 1:  # frames only
                continue
            self.frames_received += 1
            self.reception.record(msg.receive_ts_us)
            self._last_arrival_us = msg.receive_ts_us
            self.transfer_us.add(msg.receive_ts_us - (msg.header.send_ts_us + self.clock_offset_us))
            try:
                texture = texture_load(msg)
            except JpegDecodeError:
                self.decode_errors += 1
                continue
            self.texture_load_us.add(texture.load_duration_us)
            self._mailbox.store(texture)

    def _sample_stopwatch(self, texture: RenderTexture, now_us: int) -> None:
        if not self.expect_stopwatch or texture.width < STOPWATCH_MIN_WIDTH:
            return
        frame = Frame(width=texture.width, height=texture.height,
                      format=PixelFormat.RGBA32, seq=texture.loaded_seq,
                      capture_ts=0, payload=texture.buffer)
        try:
            embedded = decode_stopwatch(frame)
        except StopwatchError:
            self.stopwatch_misreads += 1
            return
        delay = now_us - (embedded + self.clock_offset_us)
        if 0 <= delay <= MAX_PLAUSIBLE_E2E_US:
            self.end_to_end_us.add(delay)
        else:
            self.stopwatch_misreads += 1

    def _render_loop(self):
        period = 1.0 / self.vsync_hz
        start = time.perf_counter()
        displayed_seq = -1
        last_tick_us = None
        k = 0
        while not self._stop.is_set():
            deadline = start + k * period
            delay = deadline - time.perf_counter()
            if delay > 0 and self._stop.wait(delay):
                break
            now_us = clock_now()
            if last_tick_us is not None and now_us > last_tick_us:
                self.render_rate.add(1e6 / (now_us - last_tick_us))
            last_tick_us = now_us

            t = time.perf_counter() - start
            g_wh = anchoring.simulate_head_trajectory(
                self.trajectory_kind, t, self.trajectory_params)
            anchoring.anchored_pose(self.anchor_state, g_wh, dt=period)

            texture = self._mailbox.take_if_newer(displayed_seq)
            if texture is not None:
                displayed_seq = texture.loaded_seq
                self.frames_displayed += 1
                self.displayed.record(now_us)
                self._sample_stopwatch(texture, now_us)
            k += 1

    def start(self) -> "HmdClient":
        self._receiver = threading.Thread(target=self._receive_loop, daemon=True,
                                          name="vmon-hmd-recv")
        self._render = threading.Thread(target=self._render_loop, daemon=True,
                                        name="vmon-hmd-render")
        self._receiver.start()
        self._render.start()
        return self

    def stop(self) -> ClientStats:
        self._stop.set()
        self.conn.close()
        for t in (self._receiver, self._render):
            if t is not None:
                t.join(timeout=2.0)
        self.reception.finish(self._last_arrival_us)
        self.displayed.finish(self._last_arrival_us)
        return self.stats()

    def run_for(self, duration_s: float) -> ClientStats:
        self.start()
        time.sleep(duration_s)
        return self.stop()

    def stats(self) -> ClientStats:
        return ClientStats(
            reception_rate=self.reception.summary(),
            reception_interval_us=self.reception.intervals_us.summary(),
            texture_load_us=self.texture_load_us.summary(),
            render_rate=self.render_rate.summary(),
            displayed_rate=self.displayed.summary(),
            end_to_end_delay_us=self.end_to_end_us.summary(),
            transfer_delay_us=self.transfer_us.summary(),
            crc_rejects=getattr(self.conn, "crc_rejects", 0),
            decode_errors=self.decode_errors,
            stopwatch_misreads=self.stopwatch_misreads,
            frames_received=self.frames_received,
            frames_displayed=self.frames_displayed,
        )
