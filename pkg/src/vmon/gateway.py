"""HTTP/1.1 gateway for browser clients.

GET /stream.mjpeg  multipart/x-mixed-replace (boundary "vmframe"), one
                   image/jpeg part per frame with X-Seq and X-Capture-Ts.
GET /stats         JSON document of current stat summaries and counters.
GET /health        200 "ok".

Anything else is 404; malformed requests get the usual 400. Optionally
serves a static viewer directory under /viewer/.
"""

from __future__ import annotations

import json
import mimetypes
import threading
from http.server import BaseHTTPRequestHandler, ThreadingHTTPServer
from pathlib import Path

from .queues import QueueClosed
from .transport import FrameHub

BOUNDARY = "vmframe"


class GatewayHandler(BaseHTTPRequestHandler):
    protocol_version = "HTTP/1.1"
    server_version = "vmon-gateway/0.1"

    def log_message(self, fmt, *args):  # quiet by default
        if self.server.verbose:
            super().log_message(fmt, *args)

    def _send_body(self, code: int, content_type: str, body: bytes):
        self.send_response(code)
        self.send_header("Content-Type", content_type)
        self.send_header("Content-Length", str(len(body)))
        self.send_header("Access-Control-Allow-Origin", "*")
        self.end_headers()
        self.wfile.write(body)

    def do_GET(self):
        path = self.path.split("?", 1)[0]
        if path == "/health":
            self._send_body(200, "text/plain; charset=utf-8", b"ok")
        elif path == "/stats":
            doc = self.server.stats_provider()
            self._send_body(200, "application/json", json.dumps(doc).encode())
        elif path == "/stream.mjpeg":
            self._stream()
        elif self.server.static_dir and (path == "/" or path.startswith("/viewer")):
            self._static(path)
        else:
            self._send_body(404, "text/plain; charset=utf-8", b"not found")

    def _stream(self):
        queue = self.server.hub.subscribe()
        self.close_connection = True
        try:
            self.send_response(200)
            self.send_header("Cache-Control", "no-cache, private")
            self.send_header("Pragma", "no-cache")
            self.send_header("Access-Control-Allow-Origin", "*")
            self.send_header("Content-Type", f"multipart/x-mixed-replace; boundary={BOUNDARY}")
            self.end_headers()
            while not self.server.stopping.is_set():
                try:
                    ef = queue.get(timeout=0.5)
                except TimeoutError:
                    continue
                except QueueClosed:
                    break
                part = (
                    f"--{BOUNDARY}\r\n"
                    f"Content-Type: image/jpeg\r\n"
                    f"Content-Length: {len(ef.payload)}\r\n"
                    f"X-Seq: {ef.seq}\r\n"
                    f"X-Capture-Ts: {ef.capture_ts}\r\n"
                    "\r\n"
                ).encode() + ef.payload + b"\r\n"
                self.wfile.write(part)
                self.wfile.flush()
        except (BrokenPipeError, ConnectionResetError, OSError):
            pass
        finally:
            self.server.hub.unsubscribe(queue)

    def _static(self, path: str):
        rel = path[len("/viewer"):] if path.startswith("/viewer") else path
        rel = rel.lstrip("/") or "index.html"
        root = Path(self.server.static_dir).resolve()
        target = (root / rel).resolve()
        if not str(target).startswith(str(root)) or not target.is_file():
            self._send_body(404, "text/plain; charset=utf-8", b"not found")
            return
        ctype = mimetypes.guess_type(str(target))[0] or "application/octet-stream"
        self._send_body(200, ctype, target.read_bytes())


class HttpGateway:
    """Threaded HTTP server bridging the frame hub and a stats snapshot callable."""

    def __init__(self, bind, hub: FrameHub, stats_provider=None,
                 static_dir=None, verbose: bool = False):
        self.httpd = ThreadingHTTPServer(bind, GatewayHandler)
        self.httpd.daemon_threads = True
        self.httpd.hub = hub
        self.httpd.stats_provider = stats_provider or (lambda: {})
        self.httpd.static_dir = str(static_dir) if static_dir else None
        self.httpd.verbose = verbose
        self.httpd.stopping = threading.Event()
        self._thread: threading.Thread | None = None

    @property
    def address(self):
        return self.httpd.server_address

    def start(self) -> "HttpGateway":
        self._thread = threading.Thread(target=self.httpd.serve_forever,
                                        kwargs={"poll_interval": 0.1},
                                        daemon=True, name="vmon-gateway")
        self._thread.start()
        return self

    def stop(self) -> None:
        self.httpd.stopping.set()
        self.httpd.shutdown()
        self.httpd.server_close()
        if self._thread is not None:
            self._thread.join(timeout=2.0)
