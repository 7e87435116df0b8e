"""Independent oracles the tests check the implementation against.

Everything here is deliberately written scalar / brute-force, separate from
the vectorized production paths.
"""

import math

import numpy as np

from vmon.core import Frame, PixelFormat


def two_pass_stats(samples):
    """Two-pass mean / sample stddev oracle."""
    n = len(samples)
    mean = sum(samples) / n
    if n > 1:
        var = sum((s - mean) ** 2 for s in samples) / (n - 1)
    else:
        var = 0.0
    return mean, math.sqrt(var)


def round_half_up(value: float) -> int:
    return int(math.floor(value + 0.5))


def clamp8(value: int) -> int:
    return max(0, min(255, value))


def luma_scalar(r: float, g: float, b: float) -> int:
    return clamp8(round_half_up(0.299 * r + 0.587 * g + 0.114 * b))


def chroma_u_scalar(r: float, g: float, b: float) -> float:
    return 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b


def chroma_v_scalar(r: float, g: float, b: float) -> float:
    return 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b


def yuv422_pair_scalar(p0, p1):
    """(Y0, U, Y1, V) for one horizontal pixel pair, averaging unrounded chroma."""
    y0 = luma_scalar(*p0)
    y1 = luma_scalar(*p1)
    u = clamp8(round_half_up((chroma_u_scalar(*p0) + chroma_u_scalar(*p1)) * 0.5))
    v = clamp8(round_half_up((chroma_v_scalar(*p0) + chroma_v_scalar(*p1)) * 0.5))
    return y0, u, y1, v


def bilinear_scalar(src: np.ndarray, dst_w: int, dst_h: int) -> np.ndarray:
    """Per-pixel bilinear resample oracle; src is (h, w) or (h, w, c) uint8."""
    gray = src.ndim == 2
    arr = src[:, :, np.newaxis] if gray else src
    sh, sw, sc = arr.shape
    out = np.zeros((dst_h, dst_w, sc), dtype=np.uint8)
    for i in range(dst_h):
        sy = min(max((i + 0.5) * (sh / dst_h) - 0.5, 0.0), sh - 1.0)
        y0 = int(math.floor(sy))
        y1 = min(y0 + 1, sh - 1)
        fy = sy - y0
        for j in range(dst_w):
            sx = min(max((j + 0.5) * (sw / dst_w) - 0.5, 0.0), sw - 1.0)
            x0 = int(math.floor(sx))
            x1 = min(x0 + 1, sw - 1)
            fx = sx - x0
            for k in range(sc):
                top = (1.0 - fy) * arr[y0, x0, k] + fy * arr[y1, x0, k]
                bot = (1.0 - fy) * arr[y0, x1, k] + fy * arr[y1, x1, k]
                out[i, j, k] = clamp8(round_half_up((1.0 - fx) * top + fx * bot))
    return out[:, :, 0] if gray else out


def psnr_db(a: Frame, b: Frame) -> float:
    aa = np.frombuffer(a.payload, np.uint8).astype(np.float64)
    bb = np.frombuffer(b.payload, np.uint8).astype(np.float64)
    mse = float(((aa - bb) ** 2).mean())
    if mse == 0:
        return math.inf
    return 10.0 * math.log10(255.0 ** 2 / mse)


def crc32_reference(data: bytes) -> int:
    """Bitwise CRC-32/ISO-HDLC: reflected 0xEDB88320, init/xorout 0xFFFFFFFF."""
    crc = 0xFFFFFFFF
    for byte in data:
        crc ^= byte
        for _ in range(8):
            if crc & 1:
                crc = (crc >> 1) ^ 0xEDB88320
            else:
                crc >>= 1
    return crc ^ 0xFFFFFFFF


def simulate_drop_oldest(offered_ts, consumed_ts, depth: int):
    """Event-accurate simulation of a bounded drop-oldest queue.

    offered_ts: times items are offered; consumed_ts: times the consumer
    pops (takes the oldest queued item, if any). Returns (delivered_items,
    dropped_count, max_queue_len) with items identified by offer index.
    """
    queue = []
    delivered = []
    dropped = 0
    max_len = 0
    events = [(t, 0, i) for i, t in enumerate(offered_ts)]
    events += [(t, 1, None) for t in consumed_ts]
    events.sort()
    for _t, kind, item in events:
        if kind == 0:
            if len(queue) >= depth:
                queue.pop(0)
                dropped += 1
            queue.append(item)
            max_len = max(max_len, len(queue))
        else:
            if queue:
                delivered.append(queue.pop(0))
    dropped += len(queue)  # residue at shutdown
    return delivered, dropped, max_len


def gray_frame(width, height, value) -> Frame:
    return Frame(width, height, PixelFormat.GRAY8, 0, 0, bytes([value]) * (width * height))


def rgb_frame_from_array(arr: np.ndarray, seq=0, ts=0) -> Frame:
    h, w, _ = arr.shape
    return Frame(w, h, PixelFormat.RGB24, seq, ts, arr.astype(np.uint8).tobytes())
