"""Command line entry points.

    vmon serve        source + pipeline + stream server + HTTP gateway
    vmon view         headless client printing live statistics
    vmon bench e2e    stage-delay and end-to-end benchmark (loopback)
    vmon bench sweep  per-size reception/texture/render benchmark
    vmon report       re-render a saved JSON report as text or CSV
    vmon fixtures     regenerate the shared anchoring test vectors

Flags override values from an optional JSON config file (--config PATH).
Exit codes: 0 success, 1 runtime failure, 2 usage error.
"""

from __future__ import annotations

import argparse
import json
import sys
import time

from . import bench
from .bench import BenchConfig, BenchReport
from .client import HmdClient
from .fixtures import write_anchoring_fixture
from .transport import ClientConnection


def parse_size(text: str) -> tuple:
    try:
        w, h = text.lower().split("x")
        size = (int(w), int(h))
    except ValueError:
        raise argparse.ArgumentTypeError(f"size must look like 800x450, got {text!r}")
    if size[0] < 8 or size[1] < 8:
        raise argparse.ArgumentTypeError(f"size {text} below the 8x8 minimum")
    return size


def _build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="vmon",
                                     description="virtual-monitor streaming toolkit")
    parser.add_argument("--config", help="JSON config file; flags override its values")
    sub = parser.add_subparsers(dest="command", required=True)

    def common(p):
        p.add_argument("--size", type=parse_size, default=None, help="target WxH (default 800x450)")
        p.add_argument("--source-size", type=parse_size, default=None,
                       help="generated source WxH (default 1920x1080)")
        p.add_argument("--rate", type=float, default=None, help="source rate in Hz (default 36)")
        p.add_argument("--quality", type=int, default=None, help="JPEG quality 1..100 (default 90)")
        p.add_argument("--seed", type=int, default=None, help="pattern seed (default 1)")

    p_serve = sub.add_parser("serve", help="run the streaming stack until interrupted")
    common(p_serve)
    p_serve.add_argument("--port", type=int, default=None, help="stream TCP port (default 7661)")
    p_serve.add_argument("--http-port", type=int, default=None, help="gateway port (default 8765)")
    p_serve.add_argument("--viewer-dir", default=None, help="serve this directory under /viewer/")
    p_serve.add_argument("--duration", type=float, default=None,
                         help="stop after this many seconds (default: run forever)")

    p_view = sub.add_parser("view", help="headless client with live stats")
    p_view.add_argument("--connect", default=None, help="host:port (default 127.0.0.1:7661)")
    p_view.add_argument("--duration", type=float, default=None,
                        help="seconds to run (default: until the stream ends)")
    p_view.add_argument("--vsync", type=float, default=None, help="render cap in Hz (default 60)")
    p_view.add_argument("--json", action="store_true", help="print final stats as JSON only")

    p_bench = sub.add_parser("bench", help="measurement harness")
    bench_sub = p_bench.add_subparsers(dest="bench_command", required=True)
    for name, help_text in (("e2e", "stage delays and end-to-end latency"),
                            ("sweep", "per-size reception/texture/render rates")):
        bp = bench_sub.add_parser(name, help=help_text)
        common(bp)
        bp.add_argument("--sizes", default=None,
                        help="comma-separated WxH list for sweep (default: the five standard sizes)")
        bp.add_argument("--duration", type=float, default=None,
                        help="seconds per run (default 30, minimum 5)")
        bp.add_argument("--out", default=None, help="directory for report files (default ./reports)")

    p_report = sub.add_parser("report", help="render a saved JSON report")
    p_report.add_argument("--in", dest="input", required=True, help="path to report_*.json")
    p_report.add_argument("--format", choices=("text", "csv", "json"), default="text")
    p_report.add_argument("--out", default=None, help="write here instead of stdout")

    p_fix = sub.add_parser("fixtures", help="regenerate shared anchoring vectors")
    p_fix.add_argument("--out", default="fixtures/anchoring_vectors.json")
    p_fix.add_argument("--seed", type=int, default=7)

    return parser


def _load_config(path: str | None) -> dict:
    if not path:
        return {}
    with open(path) as fh:
        doc = json.load(fh)
    if not isinstance(doc, dict):
        raise ValueError("config file must hold a JSON object")
    return doc


def _pick(args, config: dict, key: str, default):
    value = getattr(args, key.replace("-", "_"), None)
    if value is not None:
        return value
    if key in config:
        return config[key]
    return default


def _bench_config(args, config: dict) -> BenchConfig:
    size = _pick(args, config, "size", None)
    if isinstance(size, str):
        size = parse_size(size)
    sizes_arg = _pick(args, config, "sizes", None)
    if isinstance(sizes_arg, str):
        sizes = [parse_size(s) for s in sizes_arg.split(",") if s]
    elif sizes_arg:
        sizes = [tuple(s) for s in sizes_arg]
    else:
        sizes = [tuple(size)] if size else list(bench.DEFAULT_SWEEP_SIZES)
    if size:
        sizes = [tuple(size)] + [s for s in sizes if tuple(s) != tuple(size)]
    source_size = _pick(args, config, "source-size", (1920, 1080))
    if isinstance(source_size, str):
        source_size = parse_size(source_size)
    return BenchConfig(
        sizes=sizes,
        duration_s=_pick(args, config, "duration", 30.0),
        rate_hz=_pick(args, config, "rate", 36.0),
        quality=int(_pick(args, config, "quality", 90)),
        source_size=tuple(source_size),
        seed=int(_pick(args, config, "seed", 1)),
    )


def _cmd_serve(args, config: dict) -> int:
    size = _pick(args, config, "size", (800, 450))
    if isinstance(size, str):
        size = parse_size(size)
    cfg = BenchConfig(
        sizes=[tuple(size)],
        duration_s=1e9,
        rate_hz=_pick(args, config, "rate", 36.0),
        quality=int(_pick(args, config, "quality", 90)),
        source_size=tuple(_pick(args, config, "source-size", (1920, 1080))),
        seed=int(_pick(args, config, "seed", 1)),
        http_port=int(_pick(args, config, "http-port", 8765)),
    )
    port = int(_pick(args, config, "port", 7661))
    viewer_dir = _pick(args, config, "viewer-dir", None)

    session = None

    def stats_provider() -> dict:
        if session is None:
            return {}
        return {
            "version": 1,
            "stats": {
                "source_interval_us": session.source.stats.intervals_us.summary().to_dict(),
                "processing_us": session.worker.total_us.summary().to_dict(),
            },
            "counters": {
                "frames_emitted": session.source.stats.emitted.value,
                "frames_processed": session.worker.processed,
                "clients": session.server.client_stats(),
            },
        }

    session = bench.start_session(tuple(size), cfg, bind=("0.0.0.0", port),
                                  with_gateway=True, stats_provider=stats_provider)
    if viewer_dir and session.gateway is not None:
        session.gateway.httpd.static_dir = viewer_dir
    wire_port = session.server.address[1]
    http_port = session.gateway.address[1]
    print(f"stream: tcp://0.0.0.0:{wire_port}  gateway: http://0.0.0.0:{http_port}  "
          f"target {size[0]}x{size[1]} @ {cfg.rate_hz} Hz q{cfg.quality}", flush=True)
    duration = _pick(args, config, "duration", None)
    try:
        if duration:
            time.sleep(float(duration))
        else:
            while True:
                time.sleep(3600)
    except KeyboardInterrupt:
        pass
    finally:
        session.stop()
    return 0


def _cmd_view(args, config: dict) -> int:
    target = _pick(args, config, "connect", "127.0.0.1:7661")
    host, _, port = target.rpartition(":")
    conn = ClientConnection((host or "127.0.0.1", int(port)))
    hmd = HmdClient(conn, vsync_hz=float(_pick(args, config, "vsync", 60.0)))
    duration = _pick(args, config, "duration", None)
    hmd.start()
    started = time.monotonic()
    try:
        while True:
            time.sleep(1.0)
            stats = hmd.stats()
            if not args.json:
                rec = stats.reception_rate
                e2e = stats.end_to_end_delay_us
                print(
                    f"received={stats.frames_received} displayed={stats.frames_displayed} "
                    f"reception={bench.format_summary_cell(rec, 'hz')} Hz "
                    f"end_to_end={bench.format_summary_cell(e2e, 'us')} ms",
                    flush=True,
                )
            if duration is not None and time.monotonic() - started >= float(duration):
                break
    except KeyboardInterrupt:
        pass
    final = hmd.stop()
    print(json.dumps(final.to_json()), flush=True)
    return 0


def _cmd_bench(args, config: dict) -> int:
    cfg = _bench_config(args, config)
    if args.bench_command == "e2e":
        report = bench.run_end_to_end(cfg)
    else:
        report = bench.run_size_sweep(cfg)
    out_dir = _pick(args, config, "out", "reports")
    written = bench.write_report_files(report, out_dir)
    sys.stdout.write(bench.render_text(report))
    print(f"wrote {', '.join(str(p) for p in written)}")
    return 0


def _cmd_report(args, _config: dict) -> int:
    with open(args.input) as fh:
        report = BenchReport.from_json(fh.read())
    data = bench.emit_report(report, args.format)
    if args.out:
        with open(args.out, "wb") as fh:
            fh.write(data)
    else:
        sys.stdout.write(data.decode())
    return 0


def _cmd_fixtures(args, _config: dict) -> int:
    count = write_anchoring_fixture(args.out, seed=args.seed)
    print(f"wrote {count} vectors to {args.out}")
    return 0


def main(argv=None) -> int:
    parser = _build_parser()
    try:
        args = parser.parse_args(argv)
    except SystemExit as exc:
        return exc.code if isinstance(exc.code, int) else 2
    try:
        config = _load_config(args.config)
        if args.command == "serve":
            return _cmd_serve(args, config)
        if args.command == "view":
            return _cmd_view(args, config)
        if args.command == "bench":
            return _cmd_bench(args, config)
        if args.command == "report":
            return _cmd_report(args, config)
        if args.command == "fixtures":
            return _cmd_fixtures(args, config)
        parser.error(f"unknown command {args.command}")
    except KeyboardInterrupt:
        return 1
    except (ValueError, OSError, ConnectionError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
