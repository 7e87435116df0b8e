import http.client
import json
import threading
import time

import pytest

from vmon.core import clock_now
from vmon.gateway import BOUNDARY, HttpGateway
from vmon.pipeline import EncodedFrame
from vmon.transport import FrameHub


@pytest.fixture
def gateway():
    hub = FrameHub(default_depth=4)
    gw = HttpGateway(("127.0.0.1", 0), hub,
                     stats_provider=lambda: {"version": 1, "stats": {"x": {"n": 3}}}).start()
    yield gw, hub
    gw.stop()


def http_get(gw, path):
    conn = http.client.HTTPConnection(*gw.address, timeout=5)
    conn.request("GET", path)
    resp = conn.getresponse()
    body = resp.read()
    conn.close()
    return resp.status, resp.getheader("Content-Type"), body


JPEG_STUB = b"\xff\xd8fakejpegdata\xff\xd9"


class TestRoutes:
    def test_health(self, gateway):
        gw, _hub = gateway
        status, ctype, body = http_get(gw, "/health")
        assert status == 200 and body == b"ok"
        assert ctype.startswith("text/plain")

    def test_stats_json(self, gateway):
        gw, _hub = gateway
        status, ctype, body = http_get(gw, "/stats")
        assert status == 200 and ctype == "application/json"
        assert json.loads(body) == {"version": 1, "stats": {"x": {"n": 3}}}

    def test_unknown_path_404(self, gateway):
        gw, _hub = gateway
        status, _, _ = http_get(gw, "/nope")
        assert status == 404

    def test_static_dir_serving(self, tmp_path):
        (tmp_path / "index.html").write_text("<html>viewer</html>")
        hub = FrameHub()
        gw = HttpGateway(("127.0.0.1", 0), hub, static_dir=tmp_path).start()
        try:
            status, ctype, body = http_get(gw, "/viewer/")
            assert status == 200 and b"viewer" in body
            status, _, _ = http_get(gw, "/viewer/../secret")
            assert status == 404
        finally:
            gw.stop()


class TestMjpegStream:
    def test_two_parts_with_increasing_seq(self, gateway):
        gw, hub = gateway

        def feeder():
            for i in range(10):
                hub.publish(EncodedFrame(seq=i, capture_ts=clock_now(), width=4,
                                         height=4, payload=JPEG_STUB))
                time.sleep(0.05)

        threading.Thread(target=feeder, daemon=True).start()

        conn = http.client.HTTPConnection(*gw.address, timeout=5)
        conn.request("GET", "/stream.mjpeg")
        resp = conn.getresponse()
        assert resp.status == 200
        assert resp.getheader("Content-Type") == f"multipart/x-mixed-replace; boundary={BOUNDARY}"

        parts = []
        buf = b""
        while len(parts) < 2:
            chunk = resp.read1(65536)
            assert chunk, "stream ended early"
            buf += chunk
            while True:
                start = buf.find(b"--" + BOUNDARY.encode())
                if start < 0:
                    break
                head_end = buf.find(b"\r\n\r\n", start)
                if head_end < 0:
                    break
                headers = {}
                for line in buf[start:head_end].split(b"\r\n")[1:]:
                    key, _, value = line.partition(b": ")
                    headers[key.decode()] = value.decode()
                length = int(headers["Content-Length"])
                body_start = head_end + 4
                if len(buf) < body_start + length:
                    break
                parts.append((headers, buf[body_start : body_start + length]))
                buf = buf[body_start + length :]
        conn.close()

        assert all(h["Content-Type"] == "image/jpeg" for h, _ in parts)
        assert all(body.startswith(b"\xff\xd8") and body.endswith(b"\xff\xd9")
                   for _h, body in parts)
        seqs = [int(h["X-Seq"]) for h, _ in parts]
        assert seqs[1] > seqs[0]
        assert all("X-Capture-Ts" in h for h, _ in parts)

    def test_stream_client_disconnect_cleans_up(self, gateway):
        gw, hub = gateway
        conn = http.client.HTTPConnection(*gw.address, timeout=5)
        conn.request("GET", "/stream.mjpeg")
        resp = conn.getresponse()
        hub.publish(EncodedFrame(seq=0, capture_ts=0, width=4, height=4, payload=JPEG_STUB))
        resp.read1(16)
        resp.close()
        conn.close()
        deadline = time.time() + 5
        while time.time() < deadline:
            with hub._lock:
                count = len(hub._subscribers)
            if count == 0:
                break
            hub.publish(EncodedFrame(seq=1, capture_ts=0, width=4, height=4,
                                     payload=JPEG_STUB))
            time.sleep(0.05)
        assert count == 0
