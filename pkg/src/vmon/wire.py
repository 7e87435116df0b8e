"""Framed message layout for the streaming protocol.

Fixed little-endian header followed by the payload:

    magic            4 bytes  b"VMN1"
    msg_type         u8       1=frame 2=clock_ping 3=clock_pong 4=stats
    seq              u64
    capture_ts_us    u64
    send_ts_us       u64
    width            u32
    height           u32
    codec            u8       PixelFormat tag
    payload_len      u32      <= 64 MiB
    payload_crc32    u32      CRC-32/ISO-HDLC of the payload

Encoding/decoding is pure and safe on adversarial bytes; every failure is a
distinct WireError subclass and none of them is fatal to a connection.
"""

from __future__ import annotations

import struct
import zlib
from dataclasses import dataclass

MAGIC = b"VMN1"
_HEADER = struct.Struct("<4sBQQQIIBII")
HEADER_SIZE = _HEADER.size  # 46 bytes
MAX_PAYLOAD = 64 * 1024 * 1024

MSG_FRAME = 1
MSG_CLOCK_PING = 2
MSG_CLOCK_PONG = 3
MSG_STATS = 4
_VALID_TYPES = (MSG_FRAME, MSG_CLOCK_PING, MSG_CLOCK_PONG, MSG_STATS)


class WireError(ValueError):
    pass


class BadMagicError(WireError):
    pass


class ShortHeaderError(WireError):
    pass


class OversizeError(WireError):
    pass


class CrcMismatchError(WireError):
    pass


class BadTypeError(WireError):
    pass


def payload_crc32(payload: bytes) -> int:
    """CRC-32/ISO-HDLC (reflected 0xEDB88320, init/xorout 0xFFFFFFFF)."""
    return zlib.crc32(payload) & 0xFFFFFFFF


@dataclass(frozen=True)
class WireHeader:
    msg_type: int
    seq: int
    capture_ts_us: int
    send_ts_us: int
    width: int
    height: int
    codec: int
    payload_len: int
    payload_crc32: int


def encode_message(msg_type: int, payload: bytes, *, seq: int = 0,
                   capture_ts_us: int = 0, send_ts_us: int = 0,
                   width: int = 0, height: int = 0, codec: int = 0) -> bytes:
    """Serialize header plus payload, stamping length and CRC."""
    if msg_type not in _VALID_TYPES:
        raise BadTypeError(f"unknown msg_type {msg_type}")
    if len(payload) > MAX_PAYLOAD:
        raise OversizeError(f"payload {len(payload)} exceeds {MAX_PAYLOAD}")
    header = _HEADER.pack(
        MAGIC, msg_type, seq, capture_ts_us, send_ts_us,
        width, height, codec, len(payload), payload_crc32(payload),
    )
    return header + payload


def decode_header(data: bytes) -> WireHeader:
    """Validate and unpack the fixed header from the first HEADER_SIZE bytes."""
    if len(data) < HEADER_SIZE:
        raise ShortHeaderError(f"{len(data)} bytes, header needs {HEADER_SIZE}")
    magic, msg_type, seq, capture, send, width, height, codec, plen, crc = _HEADER.unpack_from(data)
    if magic != MAGIC:
        raise BadMagicError(f"bad magic {magic!r}")
    if msg_type not in _VALID_TYPES:
        raise BadTypeError(f"unknown msg_type {msg_type}")
    if plen > MAX_PAYLOAD:
        raise OversizeError(f"declared payload {plen} exceeds {MAX_PAYLOAD}")
    return WireHeader(
        msg_type=msg_type, seq=seq, capture_ts_us=capture, send_ts_us=send,
        width=width, height=height, codec=codec, payload_len=plen, payload_crc32=crc,
    )


def decode_message(data: bytes) -> tuple:
    """Parse one complete message from a byte buffer.

    Returns (header, payload). Never reads past the declared payload_len;
    trailing bytes are ignored. Raises a WireError subclass on any defect.
    """
    header = decode_header(data)
    end = HEADER_SIZE + header.payload_len
    if len(data) < end:
        raise ShortHeaderError(
            f"payload truncated: have {len(data) - HEADER_SIZE}, declared {header.payload_len}"
        )
    payload = bytes(data[HEADER_SIZE:end])
    if payload_crc32(payload) != header.payload_crc32:
        raise CrcMismatchError(
            f"payload crc {payload_crc32(payload):#010x} != header {header.payload_crc32:#010x}"
        )
    return header, payload
