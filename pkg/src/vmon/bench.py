"""Benchmark orchestration: per-stage delays, size sweeps, report emission.

Loopback is the default mode: every component runs in this process sharing
one monotonic clock, so transfer deltas need no synchronization. Network
mode estimates the remote clock offset with the ping handshake and labels
delay figures with a +/- rtt/2 uncertainty.

Published measurements from the original grabber + untethered-HMD rig are
embedded as comparison rows only; they reflect 2017-era hardware and are
never used as pass/fail thresholds.
"""

from __future__ import annotations

import json
import threading
from dataclasses import dataclass, field, asdict

from .client import HmdClient
from .core import StatAccumulator, StatSummary
from .gateway import HttpGateway
from .pipeline import PipelineConfig, PixelFormat, process
from .queues import DropOldestQueue, QueueClosed
from .source import PacedSource, SourceConfig, STOPWATCH_MIN_WIDTH
from .transport import ClientConnection, StreamServer

SCHEMA_VERSION = 1
MIN_SAMPLES = 30  # summaries below this carry the under-sampled flag

DEFAULT_SWEEP_SIZES = [(620, 480), (800, 450), (1000, 1000), (1600, 900), (1920, 1080)]

# Reference system: stage delays in ms and the stopwatch end-to-end figure.
REF_STAGE_MS = {
    "stage_a_grabbing": (106.0, 29.0),
    "stage_b_processing": (100.0, 7.0),
    "stage_c_transfer": (6.03, 2.28),
    "stage_d_hmd": (2.12, 3.71),
}
REF_END_TO_END_MS = (214.0, 30.0)
# Reference system: per-size reception rate (Hz), texture load (ms), render rate (Hz).
REF_RECEPTION_HZ = {
    "620x480": (62.2, 44.6),
    "800x450": (41.4, 32.0),
    "1000x1000": (31.8, 23.7),
    "1600x900": (27.6, 19.4),
    "1920x1080": (31.7, 26.2),
}
REF_TEXTURE_MS = {
    "620x480": (3.33, 8.83),
    "800x450": (3.92, 10.47),
    "1000x1000": (16.9, 34.2),
    "1600x900": (25.7, 49.3),
    "1920x1080": (61.3, 81.7),
}
REF_RENDER_HZ = {
    "620x480": (46.4, 6.7),
    "800x450": (47.1, 6.5),
    "1000x1000": (32.1, 9.2),
    "1600x900": (22.5, 9.0),
    "1920x1080": (16.4, 6.5),
}


def format_value(v: float) -> str:
    """Three significant digits, matching the reference tables' precision."""
    return f"{v:.3g}"


def format_mu_sigma(mean: float, stddev: float) -> str:
    return f"{format_value(mean)} ({format_value(stddev)})"


def format_summary_cell(summary: StatSummary, unit: str) -> str:
    if summary.n == 0:
        return "-"
    scale = 1e-3 if unit == "us" else 1.0  # delay cells are printed in ms
    return format_mu_sigma(summary.mean * scale, summary.stddev * scale)


def _ref_cell(ref: tuple | None) -> str | None:
    if ref is None:
        return None
    return format_mu_sigma(ref[0], ref[1])


@dataclass
class BenchConfig:
    sizes: list = field(default_factory=lambda: list(DEFAULT_SWEEP_SIZES))
    duration_s: float = 30.0
    rate_hz: float = 36.0
    quality: int = 90
    mode: str = "loopback"  # loopback | network
    output: str | None = None
    source_size: tuple = (1920, 1080)
    vsync_hz: float = 60.0
    queue_depth: int = 4
    pipeline_depth: int = 2
    seed: int = 1
    connect: str | None = None  # network mode: host:port of a running server
    http_port: int | None = None

    def __post_init__(self):
        if self.duration_s < 5:
            raise ValueError("duration must be at least 5 s")
        if self.mode not in ("loopback", "network"):
            raise ValueError(f"unknown mode {self.mode!r}")
        if not self.sizes:
            raise ValueError("at least one size required")
        for w, h in self.sizes:
            if w < 8 or h < 8:
                raise ValueError(f"size {w}x{h} below 8x8")


@dataclass
class MetricRow:
    name: str
    unit: str  # "us" or "hz"
    summary: StatSummary
    size: str | None = None
    reference: str | None = None
    under_sampled: bool = False

    def to_dict(self) -> dict:
        d = asdict(self)
        d["summary"] = self.summary.to_dict()
        return d

    @classmethod
    def from_dict(cls, d: dict) -> "MetricRow":
        return cls(
            name=d["name"], unit=d["unit"], summary=StatSummary.from_dict(d["summary"]),
            size=d.get("size"), reference=d.get("reference"),
            under_sampled=d.get("under_sampled", False),
        )


@dataclass
class BenchReport:
    kind: str  # "e2e" or "sweep"
    config: dict
    rows: list
    counters: dict
    meta: dict
    schema_version: int = SCHEMA_VERSION

    def to_json(self) -> str:
        doc = {
            "schema_version": self.schema_version,
            "kind": self.kind,
            "config": self.config,
            "rows": [r.to_dict() for r in self.rows],
            "counters": self.counters,
            "meta": self.meta,
        }
        return json.dumps(doc, indent=2)

    @classmethod
    def from_json(cls, text: str) -> "BenchReport":
        doc = json.loads(text)
        return cls(
            kind=doc["kind"],
            config=doc["config"],
            rows=[MetricRow.from_dict(r) for r in doc["rows"]],
            counters=doc["counters"],
            meta=doc["meta"],
            schema_version=doc["schema_version"],
        )

    def row(self, name: str, size: str | None = None) -> MetricRow:
        for r in self.rows:
            if r.name == name and (size is None or r.size == size):
                return r
        raise KeyError(f"no row {name} (size={size})")


class PipelineWorker:
    """One stage worker: pulls raw frames, runs process(), hands results on."""

    def __init__(self, in_queue: DropOldestQueue, cfg: PipelineConfig, publish):
        self.in_queue = in_queue
        self.cfg = cfg
        self.publish = publish
        self.stage_us = {k: StatAccumulator() for k in ("convert", "scale", "embed", "enhance", "encode")}
        self.total_us = StatAccumulator()
        self.processed = 0
        self._thread: threading.Thread | None = None

    def _run(self):
        while True:
            try:
                frame = self.in_queue.get(timeout=0.5)
            except TimeoutError:
                continue
            except QueueClosed:
                break
            ef = process(frame, self.cfg)
            for key, acc in self.stage_us.items():
                acc.add(ef.durations.get(key, 0))
            self.total_us.add(ef.total_us)
            self.processed += 1
            self.publish(ef)

    def start(self) -> "PipelineWorker":
        self._thread = threading.Thread(target=self._run, daemon=True, name="vmon-pipeline")
        self._thread.start()
        return self

    def stop(self):
        self.in_queue.close()
        if self._thread is not None:
            self._thread.join(timeout=5.0)


@dataclass
class Session:
    """A running source -> pipeline -> server (+gateway) stack."""

    source: PacedSource
    worker: PipelineWorker
    server: StreamServer
    gateway: HttpGateway | None = None

    def stop(self):
        self.source.stop()
        self.worker.stop()
        if self.gateway is not None:
            self.gateway.stop()
        self.server.stop()


def start_session(size: tuple, cfg: BenchConfig, bind=("127.0.0.1", 0),
                  with_gateway: bool = False, stats_provider=None) -> Session:
    """Wire and start the producing half of the pipeline on loopback."""
    width, height = size
    embed = width >= STOPWATCH_MIN_WIDTH and height >= 16
    pipe_cfg = PipelineConfig(
        target_format=PixelFormat.RGB24,
        target_width=width,
        target_height=height,
        jpeg_quality=cfg.quality,
        embed_stopwatch=embed,
        queue_depth=cfg.pipeline_depth,
    )
    server = StreamServer(bind=bind, queue_depth=cfg.queue_depth).start()
    in_queue = DropOldestQueue(cfg.pipeline_depth)
    worker = PipelineWorker(in_queue, pipe_cfg, publish=server.publish).start()
    src_cfg = SourceConfig(width=cfg.source_size[0], height=cfg.source_size[1],
                           rate=cfg.rate_hz, seed=cfg.seed)

    def sink(frame):
        if in_queue.closed:
            raise QueueClosed
        in_queue.put(frame)

    source = PacedSource(src_cfg, sink)
    gateway = None
    if with_gateway:
        port = cfg.http_port or 0
        gateway = HttpGateway(("127.0.0.1", port), server.hub,
                              stats_provider=stats_provider).start()
    source.start()
    return Session(source=source, worker=worker, server=server, gateway=gateway)


def _summ_row(name: str, unit: str, summary: StatSummary, size: str | None = None,
              reference: tuple | None = None) -> MetricRow:
    return MetricRow(
        name=name, unit=unit, summary=summary, size=size,
        reference=_ref_cell(reference), under_sampled=summary.n < MIN_SAMPLES,
    )


def _run_one(size: tuple, cfg: BenchConfig, duration_s: float):
    """Run one session for duration_s; returns (client stats, session, sync info).

    Loopback mode shares this process's clock, so no synchronization is
    needed. Network mode estimates the offset with the ping handshake and
    reports a +/- rtt/2 uncertainty on delay figures.
    """
    session = start_session(size, cfg)
    sync = {"clock_offset_us": 0.0, "rtt_us": 0.0, "delay_uncertainty_us": 0.0}
    try:
        conn = ClientConnection(session.server.address)
        if cfg.mode == "network":
            offset, rtt = conn.clock_offset_handshake()
            sync = {"clock_offset_us": offset, "rtt_us": rtt,
                    "delay_uncertainty_us": rtt / 2.0}
        hmd = HmdClient(conn, vsync_hz=cfg.vsync_hz,
                        expect_stopwatch=size[0] >= STOPWATCH_MIN_WIDTH,
                        clock_offset_us=sync["clock_offset_us"])
        stats = hmd.run_for(duration_s)
    finally:
        session.stop()
    return stats, session, sync


def run_end_to_end(cfg: BenchConfig) -> BenchReport:
    """Stage-by-stage delay measurement plus stopwatch end-to-end figure."""
    size = tuple(cfg.sizes[0])
    stats, session, sync = _run_one(size, cfg, cfg.duration_s)
    size_key = f"{size[0]}x{size[1]}"

    rows = [
        _summ_row("stage_a_grabbing", "us", session.source.stats.intervals_us.summary(),
                  reference=REF_STAGE_MS["stage_a_grabbing"]),
        _summ_row("stage_b_processing", "us", session.worker.total_us.summary(),
                  reference=REF_STAGE_MS["stage_b_processing"]),
        _summ_row("stage_c_transfer", "us", stats.transfer_delay_us,
                  reference=REF_STAGE_MS["stage_c_transfer"]),
        _summ_row("stage_d_hmd", "us", stats.texture_load_us,
                  reference=REF_STAGE_MS["stage_d_hmd"]),
        _summ_row("end_to_end", "us", stats.end_to_end_delay_us,
                  reference=REF_END_TO_END_MS),
        _summ_row("reception_rate", "hz", stats.reception_rate, size=size_key,
                  reference=REF_RECEPTION_HZ.get(size_key)),
        _summ_row("render_rate", "hz", stats.render_rate, size=size_key,
                  reference=REF_RENDER_HZ.get(size_key)),
        _summ_row("displayed_rate", "hz", stats.displayed_rate, size=size_key),
    ]
    stage_sum_ms = sum(r.summary.mean for r in rows[:4]) / 1000.0
    counters = {
        "frames_emitted": session.source.stats.emitted.value,
        "frames_processed": session.worker.processed,
        "pipeline_dropped": session.worker.in_queue.dropped,
        "server_clients": session.server.client_stats(),
        "frames_received": stats.frames_received,
        "frames_displayed": stats.frames_displayed,
        "crc_rejects": stats.crc_rejects,
        "decode_errors": stats.decode_errors,
        "stopwatch_misreads": stats.stopwatch_misreads,
    }
    meta = {
        "stage_sum_ms": stage_sum_ms,  # shown beside the stopwatch figure, equality not asserted
        "stopwatch_end_to_end_ms": stats.end_to_end_delay_us.mean / 1000.0,
        "mode": cfg.mode,
        "timebase": "monotonic microseconds (improves on the reference 15 ms stopwatch tick)",
        **sync,
    }
    return BenchReport(
        kind="e2e",
        config=_config_dict(cfg, size),
        rows=rows,
        counters=counters,
        meta=meta,
    )


def run_size_sweep(cfg: BenchConfig) -> BenchReport:
    """Reception/texture-load/render-rate rows for every configured size."""
    rows = []
    counters = {}
    for size in cfg.sizes:
        size = tuple(size)
        size_key = f"{size[0]}x{size[1]}"
        stats, session, _sync = _run_one(size, cfg, cfg.duration_s)
        rows.extend([
            _summ_row("reception_rate", "hz", stats.reception_rate, size=size_key,
                      reference=REF_RECEPTION_HZ.get(size_key)),
            _summ_row("texture_load", "us", stats.texture_load_us, size=size_key,
                      reference=REF_TEXTURE_MS.get(size_key)),
            _summ_row("render_rate", "hz", stats.render_rate, size=size_key,
                      reference=REF_RENDER_HZ.get(size_key)),
            _summ_row("displayed_rate", "hz", stats.displayed_rate, size=size_key),
        ])
        counters[size_key] = {
            "frames_emitted": session.source.stats.emitted.value,
            "frames_received": stats.frames_received,
            "frames_displayed": stats.frames_displayed,
            "pipeline_dropped": session.worker.in_queue.dropped,
        }
    return BenchReport(
        kind="sweep",
        config=_config_dict(cfg, None),
        rows=rows,
        counters=counters,
        meta={"per_size_duration_s": cfg.duration_s},
    )


def _config_dict(cfg: BenchConfig, size: tuple | None) -> dict:
    return {
        "sizes": [list(s) for s in cfg.sizes],
        "size": list(size) if size else None,
        "duration_s": cfg.duration_s,
        "rate_hz": cfg.rate_hz,
        "quality": cfg.quality,
        "mode": cfg.mode,
        "source_size": list(cfg.source_size),
        "vsync_hz": cfg.vsync_hz,
        "queue_depth": cfg.queue_depth,
    }


def render_text(report: BenchReport) -> str:
    """Human-readable table with "mu (sigma)" cells and reference columns."""
    lines = []
    title = "End-to-end delay report" if report.kind == "e2e" else "Size sweep report"
    lines.append(title)
    lines.append("=" * len(title))
    cfg = report.config
    lines.append(f"mode={cfg['mode']} rate={cfg['rate_hz']} Hz quality={cfg['quality']} "
                 f"source={cfg['source_size'][0]}x{cfg['source_size'][1]}")
    lines.append("")
    header = f"{'metric':<22}{'size':<12}{'n':>6}  {'measured mu (sigma)':<22}{'reference mu (sigma)':<22}"
    lines.append(header)
    lines.append("-" * len(header))
    for row in report.rows:
        unit_label = "ms" if row.unit == "us" else "Hz"
        cell = format_summary_cell(row.summary, row.unit)
        flag = " *" if row.under_sampled else ""
        ref = row.reference or "-"
        lines.append(
            f"{row.name:<22}{row.size or '-':<12}{row.summary.n:>6}  "
            f"{cell + ' ' + unit_label + flag:<22}{ref:<22}"
        )
    if any(r.under_sampled for r in report.rows):
        lines.append("")
        lines.append("* under-sampled: fewer than 30 samples")
    if report.kind == "e2e":
        lines.append("")
        lines.append(f"stage-sum figure: {format_value(report.meta['stage_sum_ms'])} ms; "
                     f"stopwatch figure: {format_value(report.meta['stopwatch_end_to_end_ms'])} ms")
    lines.append("")
    return "\n".join(lines)


def render_csv(report: BenchReport) -> str:
    lines = ["metric,size,unit,n,mean,stddev,min,max,under_sampled,reference"]
    for row in report.rows:
        s = row.summary
        ref = (row.reference or "").replace(",", ";")
        lines.append(
            f"{row.name},{row.size or ''},{row.unit},{s.n},{s.mean!r},{s.stddev!r},"
            f"{s.min!r},{s.max!r},{int(row.under_sampled)},{ref}"
        )
    return "\n".join(lines) + "\n"


def emit_report(report: BenchReport, fmt: str) -> bytes:
    if fmt == "text":
        return render_text(report).encode()
    if fmt == "json":
        return report.to_json().encode()
    if fmt == "csv":
        return render_csv(report).encode()
    raise ValueError(f"unknown report format {fmt!r}")


def write_report_files(report: BenchReport, out_dir) -> list:
    from pathlib import Path

    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    written = []
    for fmt, suffix in (("json", "json"), ("text", "txt"), ("csv", "csv")):
        path = out / f"report_{report.kind}.{suffix}"
        path.write_bytes(emit_report(report, fmt))
        written.append(path)
    return written
