"""Framed streaming over TCP: multi-client server, client stream, clock sync.

Server shape: one acceptor, one distributor pulling the frame feed, and per
client a sender thread (draining that client's bounded drop-oldest queue)
plus a receiver thread answering clock pings. Queues are the only shared
state. send_ts_us is stamped at dequeue so transfer delay excludes queue
residency.
"""

from __future__ import annotations

import socket
import statistics
import threading
from dataclasses import dataclass

from .core import PixelFormat, clock_now
from .pipeline import EncodedFrame
from .queues import DropOldestQueue, QueueClosed
from . import wire


def _read_exact(sock: socket.socket, n: int) -> bytes | None:
    """Read exactly n bytes; None on clean EOF mid-read."""
    chunks = []
    remaining = n
    while remaining > 0:
        data = sock.recv(remaining)
        if not data:
            return None
        chunks.append(data)
        remaining -= len(data)
    return b"".join(chunks)


def read_message(sock: socket.socket):
    """Read one framed message from a socket.

    Returns (header, payload), or None on EOF at a message boundary.
    CrcMismatchError is raised after the full message was consumed, so the
    stream stays in sync and the caller may keep reading.
    """
    head = _read_exact(sock, wire.HEADER_SIZE)
    if head is None:
        return None
    header = wire.decode_header(head)
    payload = b""
    if header.payload_len:
        payload = _read_exact(sock, header.payload_len)
        if payload is None:
            return None
    if wire.payload_crc32(payload) != header.payload_crc32:
        raise wire.CrcMismatchError(f"seq {header.seq}: payload checksum mismatch")
    return header, payload


class FrameHub:
    """Fans encoded frames out to any number of bounded subscriber queues."""

    def __init__(self, default_depth: int = 4):
        self.default_depth = default_depth
        self._subscribers: list[DropOldestQueue] = []
        self._lock = threading.Lock()
        self.published = 0

    def subscribe(self, depth: int | None = None) -> DropOldestQueue:
        q = DropOldestQueue(depth or self.default_depth)
        with self._lock:
            self._subscribers.append(q)
        return q

    def unsubscribe(self, q: DropOldestQueue) -> None:
        with self._lock:
            if q in self._subscribers:
                self._subscribers.remove(q)
        q.close()

    def publish(self, item) -> None:
        with self._lock:
            subscribers = list(self._subscribers)
            self.published += 1
        for q in subscribers:
            try:
                q.put(item)
            except QueueClosed:
                pass

    def close(self) -> None:
        with self._lock:
            subscribers = list(self._subscribers)
            self._subscribers.clear()
        for q in subscribers:
            q.close()


def frame_message(ef: EncodedFrame, send_ts_us: int) -> bytes:
    return wire.encode_message(
        wire.MSG_FRAME,
        ef.payload,
        seq=ef.seq,
        capture_ts_us=ef.capture_ts,
        send_ts_us=send_ts_us,
        width=ef.width,
        height=ef.height,
        codec=int(PixelFormat.JPEG),
    )


class _ClientHandle:
    def __init__(self, server: "StreamServer", sock: socket.socket, addr):
        self.server = server
        self.sock = sock
        self.addr = addr
        self.queue = server.hub.subscribe(server.queue_depth)
        self.write_lock = threading.Lock()
        self.sent = 0
        self.send_failures = 0
        self.alive = True
        self._sender = threading.Thread(target=self._send_loop, daemon=True,
                                        name=f"vmon-send-{addr[1]}")
        self._receiver = threading.Thread(target=self._recv_loop, daemon=True,
                                          name=f"vmon-recv-{addr[1]}")

    def start(self):
        self._sender.start()
        self._receiver.start()

    def _send_loop(self):
        while self.alive:
            try:
                ef = self.queue.get(timeout=0.5)
            except TimeoutError:
                continue
            except QueueClosed:
                break
            data = frame_message(ef, send_ts_us=self.server.clock())
            try:
                with self.write_lock:
                    self.sock.sendall(data)
                self.sent += 1
            except OSError:
                self.send_failures += 1
                break
        self.detach()

    def _recv_loop(self):
        while self.alive:
            try:
                msg = read_message(self.sock)
            except wire.CrcMismatchError:
                continue
            except (wire.WireError, OSError):
                break
            if msg is None:
                break
            header, _payload = msg
            if header.msg_type == wire.MSG_CLOCK_PING:
                pong = wire.encode_message(
                    wire.MSG_CLOCK_PONG,
                    b"",
                    seq=header.seq,
                    capture_ts_us=header.capture_ts_us,  # echo client t0
                    send_ts_us=self.server.clock(),
                )
                try:
                    with self.write_lock:
                        self.sock.sendall(pong)
                except OSError:
                    break
        self.detach()

    def detach(self):
        if not self.alive:
            return
        self.alive = False
        self.queue.close()  # residue counts as dropped
        try:
            self.sock.shutdown(socket.SHUT_RDWR)  # wakes any blocked recv
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass
        self.server._remove_client(self)

    def stats(self) -> dict:
        return {
            "addr": f"{self.addr[0]}:{self.addr[1]}",
            "offered": self.queue.offered,
            "delivered": self.sent,
            "dropped": self.queue.dropped + self.send_failures,
            "queue_len": len(self.queue),
        }


class StreamServer:
    """Accepts stream clients and fans frames out with drop-oldest backpressure."""

    def __init__(self, bind=("127.0.0.1", 0), queue_depth: int = 4, clock=clock_now,
                 sndbuf: int | None = None):
        self.bind = bind
        self.queue_depth = queue_depth
        self.clock = clock
        self.sndbuf = sndbuf
        self.hub = FrameHub(default_depth=queue_depth)
        self._listener: socket.socket | None = None
        self._clients: list[_ClientHandle] = []
        self._lock = threading.Lock()
        self._stop = threading.Event()
        self._acceptor: threading.Thread | None = None
        self._distributor: threading.Thread | None = None
        self.detached: list[dict] = []  # final stats of disconnected clients

    @property
    def address(self):
        return self._listener.getsockname()

    def start(self) -> "StreamServer":
        listener = socket.socket(socket.AF_INET, socket.SOCK_STREAM)
        listener.setsockopt(socket.SOL_SOCKET, socket.SO_REUSEADDR, 1)
        listener.bind(self.bind)
        listener.listen(16)
        self._listener = listener
        self._acceptor = threading.Thread(target=self._accept_loop, daemon=True,
                                          name="vmon-accept")
        self._acceptor.start()
        return self

    def _accept_loop(self):
        while not self._stop.is_set():
            try:
                sock, addr = self._listener.accept()
            except OSError:
                break
            sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
            if self.sndbuf:
                sock.setsockopt(socket.SOL_SOCKET, socket.SO_SNDBUF, self.sndbuf)
            handle = _ClientHandle(self, sock, addr)
            with self._lock:
                self._clients.append(handle)
            handle.start()

    def attach_feed(self, feed) -> "StreamServer":
        """Consume an EncodedFrame iterable on a distributor thread."""

        def _run():
            for ef in feed:
                if self._stop.is_set():
                    break
                self.hub.publish(ef)

        self._distributor = threading.Thread(target=_run, daemon=True, name="vmon-feed")
        self._distributor.start()
        return self

    def publish(self, ef: EncodedFrame) -> None:
        self.hub.publish(ef)

    def _remove_client(self, handle: _ClientHandle) -> None:
        with self._lock:
            if handle in self._clients:
                self._clients.remove(handle)
                self.detached.append(handle.stats())

    def client_stats(self) -> list[dict]:
        with self._lock:
            return [c.stats() for c in self._clients] + list(self.detached)

    def stop(self) -> None:
        self._stop.set()
        if self._listener is not None:
            try:
                self._listener.close()
            except OSError:
                pass
        with self._lock:
            clients = list(self._clients)
        for c in clients:
            c.detach()
        self.hub.close()
        if self._distributor is not None:
            self._distributor.join(timeout=2.0)
        if self._acceptor is not None:
            self._acceptor.join(timeout=2.0)


def serve(bind, feed, queue_depth: int = 4) -> StreamServer:
    """Start a server bound to `bind` consuming `feed` until stopped."""
    server = StreamServer(bind=bind, queue_depth=queue_depth).start()
    server.attach_feed(feed)
    return server


@dataclass(frozen=True)
class ReceivedMessage:
    header: wire.WireHeader
    payload: bytes
    receive_ts_us: int


def offset_from_exchanges(exchanges) -> tuple:
    """Median clock offset and RTT from (t0, server_ts, t1) ping exchanges.

    Per exchange: offset = server_ts - (t0 + t1)/2 assuming symmetric links;
    rtt = t1 - t0. Medians discard asymmetric outliers.
    """
    if not exchanges:
        raise ValueError("no exchanges")
    offsets = [ts - (t0 + t1) / 2.0 for (t0, ts, t1) in exchanges]
    rtts = [t1 - t0 for (t0, ts, t1) in exchanges]
    return statistics.median(offsets), statistics.median(rtts)


class ClientConnection:
    """Validated message stream from a running server.

    messages() yields ReceivedMessage in arrival order; CRC-corrupted frames
    are dropped, counted, and the stream continues. The generator ends when
    the server goes away; end_cause says why.
    """

    def __init__(self, address, timeout: float = 5.0, rcvbuf: int | None = None):
        self.sock = socket.create_connection(address, timeout=timeout)
        self.sock.setsockopt(socket.IPPROTO_TCP, socket.TCP_NODELAY, 1)
        if rcvbuf:
            self.sock.setsockopt(socket.SOL_SOCKET, socket.SO_RCVBUF, rcvbuf)
        self.sock.settimeout(None)
        self.crc_rejects = 0
        self.end_cause: str | None = None
        self.clock_offset_us = 0.0
        self.rtt_us = 0.0
        self._pending: list[ReceivedMessage] = []
        self._ping_seq = 0
        self._closed = False

    def clock_offset_handshake(self, exchanges: int = 9, timeout: float = 5.0) -> tuple:
        """Ping/pong offset estimation; frames arriving meanwhile are buffered."""
        samples = []
        self.sock.settimeout(timeout)
        try:
            for _ in range(exchanges):
                self._ping_seq += 1
                t0 = clock_now()
                ping = wire.encode_message(wire.MSG_CLOCK_PING, b"",
                                           seq=self._ping_seq, capture_ts_us=t0)
                self.sock.sendall(ping)
                while True:
                    msg = self._read_one()
                    if msg is None:
                        raise ConnectionError(f"stream ended during handshake: {self.end_cause}")
                    if (msg.header.msg_type == wire.MSG_CLOCK_PONG
                            and msg.header.seq == self._ping_seq):
                        t1 = clock_now()
                        samples.append((t0, msg.header.send_ts_us, t1))
                        break
                    self._pending.append(msg)
        finally:
            self.sock.settimeout(None)
        self.clock_offset_us, self.rtt_us = offset_from_exchanges(samples)
        return self.clock_offset_us, self.rtt_us

    def _read_one(self) -> ReceivedMessage | None:
        while True:
            try:
                msg = read_message(self.sock)
            except wire.CrcMismatchError:
                self.crc_rejects += 1
                continue
            except wire.WireError as exc:
                self.end_cause = f"protocol: {exc}"
                return None
            except socket.timeout:
                raise
            except OSError as exc:
                self.end_cause = f"reset: {exc}"
                return None
            if msg is None:
                self.end_cause = "eof"
                return None
            header, payload = msg
            return ReceivedMessage(header=header, payload=payload, receive_ts_us=clock_now())

    def messages(self):
        while True:
            if self._pending:
                yield self._pending.pop(0)
                continue
            if self._closed:
                return
            msg = self._read_one()
            if msg is None:
                return
            yield msg

    def close(self) -> None:
        self._closed = True
        try:
            self.sock.shutdown(socket.SHUT_RDWR)
        except OSError:
            pass
        try:
            self.sock.close()
        except OSError:
            pass


def client_connect(address, timeout: float = 5.0) -> ClientConnection:
    return ClientConnection(address, timeout=timeout)
