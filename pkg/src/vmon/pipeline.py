"""Runtime image processing: convert, scale, enhance, Motion-JPEG encode/decode.

Conversions use BT.601 full-range coefficients with round-half-up, stated
here exactly because tests check them against per-pixel scalar arithmetic
with zero tolerance:

    Y = round(0.299 R + 0.587 G + 0.114 B)
    U = round(128 - 0.168736 R - 0.331264 G + 0.5 B)
    V = round(128 + 0.5 R - 0.418688 G - 0.081312 B)

all clipped to [0, 255]. YUV422 packs Y0 U Y1 V per horizontal pixel pair
with U, V averaged (before rounding) over the pair.

Motion-JPEG means an independent baseline JFIF image per frame, no
container. Encoding and decoding are delegated to libjpeg via Pillow; the
conformance contract (SOI/EOI markers, decodability by independent
decoders, PSNR floors) is enforced by the test suite.
"""

from __future__ import annotations

import io
from dataclasses import dataclass, field

import numpy as np
from PIL import Image

from .core import Frame, PixelFormat, clock_now
from .source import embed_stopwatch

try:
    from numba import njit
except ImportError:  # pragma: no cover - numba is a normal dependency
    njit = None


class ConversionError(ValueError):
    """Unsupported conversion pair or malformed source frame."""


class JpegDecodeError(ValueError):
    """Payload is not a decodable baseline JPEG stream."""


def _round_half_up(values: np.ndarray) -> np.ndarray:
    return np.floor(values + 0.5)


def _to_u8(values: np.ndarray) -> np.ndarray:
    return np.clip(_round_half_up(values), 0.0, 255.0).astype(np.uint8)


def _rgb_planes(frame: Frame) -> tuple:
    arr = np.frombuffer(frame.payload, dtype=np.uint8)
    channels = 4 if frame.format == PixelFormat.RGBA32 else 3
    arr = arr.reshape(frame.height, frame.width, channels)
    r = arr[:, :, 0].astype(np.float64)
    g = arr[:, :, 1].astype(np.float64)
    b = arr[:, :, 2].astype(np.float64)
    return r, g, b


def _luma(r, g, b) -> np.ndarray:
    return 0.299 * r + 0.587 * g + 0.114 * b


def _chroma_u(r, g, b) -> np.ndarray:
    return 128.0 - 0.168736 * r - 0.331264 * g + 0.5 * b


def _chroma_v(r, g, b) -> np.ndarray:
    return 128.0 + 0.5 * r - 0.418688 * g - 0.081312 * b


def _new_frame(frame: Frame, fmt: PixelFormat, payload: bytes,
               width: int | None = None, height: int | None = None) -> Frame:
    return Frame(
        width=frame.width if width is None else width,
        height=frame.height if height is None else height,
        format=fmt,
        seq=frame.seq,
        capture_ts=frame.capture_ts,
        payload=payload,
    )


_RASTER = (PixelFormat.RGB24, PixelFormat.RGBA32, PixelFormat.GRAY8, PixelFormat.YUV422)


def convert(frame: Frame, target: PixelFormat) -> Frame:
    """Convert between RGB24, RGBA32, GRAY8 and packed YUV422."""
    if frame.format not in _RASTER or target not in _RASTER:
        raise ConversionError(f"cannot convert {frame.format.name} -> {target.name}")
    if frame.format == target:
        return frame
    if target == PixelFormat.YUV422 and frame.width % 2 != 0:
        raise ConversionError("YUV422 target requires even width")

    src = frame.format
    if src == PixelFormat.GRAY8:
        gray = np.frombuffer(frame.payload, dtype=np.uint8).reshape(frame.height, frame.width)
        if target == PixelFormat.RGB24:
            out = np.repeat(gray[:, :, np.newaxis], 3, axis=2)
        elif target == PixelFormat.RGBA32:
            out = np.empty((frame.height, frame.width, 4), dtype=np.uint8)
            out[:, :, 0:3] = gray[:, :, np.newaxis]
            out[:, :, 3] = 255
        else:  # YUV422: R=G=B makes U=V=128 exactly
            out = np.empty((frame.height, frame.width, 2), dtype=np.uint8)
            out[:, :, 0] = gray
            out[:, :, 1] = 128
        return _new_frame(frame, target, out.tobytes())

    if src == PixelFormat.YUV422:
        packed = np.frombuffer(frame.payload, dtype=np.uint8).reshape(frame.height, frame.width, 2)
        y = packed[:, :, 0].astype(np.float64)
        u = packed[:, 0::2, 1].astype(np.float64)
        v = packed[:, 1::2, 1].astype(np.float64)
        u_full = np.repeat(u, 2, axis=1)
        v_full = np.repeat(v, 2, axis=1)
        if target == PixelFormat.GRAY8:
            return _new_frame(frame, target, packed[:, :, 0].tobytes())
        r = y + 1.402 * (v_full - 128.0)
        g = y - 0.344136 * (u_full - 128.0) - 0.714136 * (v_full - 128.0)
        b = y + 1.772 * (u_full - 128.0)
        rgb = np.stack([_to_u8(r), _to_u8(g), _to_u8(b)], axis=2)
        if target == PixelFormat.RGB24:
            return _new_frame(frame, target, rgb.tobytes())
        if target == PixelFormat.RGBA32:
            out = np.empty((frame.height, frame.width, 4), dtype=np.uint8)
            out[:, :, 0:3] = rgb
            out[:, :, 3] = 255
            return _new_frame(frame, target, out.tobytes())
        raise ConversionError(f"cannot convert {src.name} -> {target.name}")

    # src is RGB24 or RGBA32
    if target == PixelFormat.RGB24:  # RGBA32 -> RGB24: drop alpha
        arr = np.frombuffer(frame.payload, dtype=np.uint8).reshape(frame.height, frame.width, 4)
        return _new_frame(frame, target, np.ascontiguousarray(arr[:, :, 0:3]).tobytes())
    if target == PixelFormat.RGBA32:  # RGB24 -> RGBA32: alpha 255
        arr = np.frombuffer(frame.payload, dtype=np.uint8).reshape(frame.height, frame.width, 3)
        out = np.empty((frame.height, frame.width, 4), dtype=np.uint8)
        out[:, :, 0:3] = arr
        out[:, :, 3] = 255
        return _new_frame(frame, target, out.tobytes())

    r, g, b = _rgb_planes(frame)
    if target == PixelFormat.GRAY8:
        return _new_frame(frame, target, _to_u8(_luma(r, g, b)).tobytes())
    if target == PixelFormat.YUV422:
        y8 = _to_u8(_luma(r, g, b))
        u = _chroma_u(r, g, b)
        v = _chroma_v(r, g, b)
        u_pair = _to_u8((u[:, 0::2] + u[:, 1::2]) * 0.5)
        v_pair = _to_u8((v[:, 0::2] + v[:, 1::2]) * 0.5)
        out = np.empty((frame.height, frame.width, 2), dtype=np.uint8)
        out[:, :, 0] = y8
        out[:, 0::2, 1] = u_pair
        out[:, 1::2, 1] = v_pair
        return _new_frame(frame, target, out.tobytes())
    raise ConversionError(f"cannot convert {src.name} -> {target.name}")


def _axis_coords(dst: int, src: int):
    """Pixel-center source coordinates for one axis, clamped to the edges."""
    ratio = src / dst
    coords = (np.arange(dst, dtype=np.float64) + 0.5) * ratio - 0.5
    coords = np.clip(coords, 0.0, src - 1.0)
    lo = np.floor(coords).astype(np.int64)
    frac = coords - lo
    hi = np.minimum(lo + 1, src - 1)
    return lo, hi, frac


def _bilinear_kernel(arr, y0, y1, fy, x0, x1, fx, out):
    # Reference loop; compiled by numba below. Keep the float64 operation
    # order in lockstep with the numpy fallback and the test oracle.
    h, w, c = out.shape
    for i in range(h):
        row_a = arr[y0[i]]
        row_b = arr[y1[i]]
        wy = fy[i]
        for j in range(w):
            a = x0[j]
            b = x1[j]
            wx = fx[j]
            for k in range(c):
                top = (1.0 - wy) * row_a[a, k] + wy * row_b[a, k]
                bot = (1.0 - wy) * row_a[b, k] + wy * row_b[b, k]
                v = np.floor((1.0 - wx) * top + wx * bot + 0.5)
                if v < 0.0:
                    v = 0.0
                elif v > 255.0:
                    v = 255.0
                out[i, j, k] = np.uint8(v)


_bilinear_fast = njit(cache=True)(_bilinear_kernel) if njit is not None else None


def scale_bilinear(frame: Frame, width: int, height: int) -> Frame:
    """Bilinear resample with pixel-center alignment, channels rounded half-up."""
    if frame.format not in (PixelFormat.RGB24, PixelFormat.GRAY8):
        raise ConversionError(f"cannot scale {frame.format.name}")
    if width < 1 or height < 1:
        raise ValueError(f"bad target size {width}x{height}")
    if width == frame.width and height == frame.height:
        return frame
    gray = frame.format == PixelFormat.GRAY8
    channels = 1 if gray else 3
    arr = np.frombuffer(frame.payload, dtype=np.uint8).reshape(frame.height, frame.width, channels)

    x0, x1, fx = _axis_coords(width, frame.width)
    y0, y1, fy = _axis_coords(height, frame.height)
    out = np.empty((height, width, channels), dtype=np.uint8)
    if _bilinear_fast is not None:
        _bilinear_fast(arr, y0, y1, fy, x0, x1, fx, out)
    else:
        # Separable numpy fallback with the same float64 operation order:
        # blend the two source rows first, then the two columns.
        fxw = fx[np.newaxis, :, np.newaxis]
        fyw = fy[:, np.newaxis, np.newaxis]
        rows = (1.0 - fyw) * arr[y0].astype(np.float64) + fyw * arr[y1].astype(np.float64)
        values = (1.0 - fxw) * rows[:, x0] + fxw * rows[:, x1]
        out[:] = _to_u8(values)
    return _new_frame(frame, frame.format, out.tobytes(), width=width, height=height)


@dataclass(frozen=True)
class StretchResult:
    frame: Frame
    degenerate: bool  # percentile window collapsed; frame returned unchanged


def contrast_stretch(frame: Frame, p_low: float, p_high: float) -> StretchResult:
    """Linear percentile stretch on luminance, applied per channel for RGB."""
    if not (0 <= p_low < p_high <= 100):
        raise ValueError(f"bad percentiles ({p_low}, {p_high})")
    if frame.format not in (PixelFormat.RGB24, PixelFormat.GRAY8):
        raise ConversionError(f"cannot stretch {frame.format.name}")
    arr = np.frombuffer(frame.payload, dtype=np.uint8)
    if frame.format == PixelFormat.GRAY8:
        arr = arr.reshape(frame.height, frame.width)
        luma = arr.astype(np.float64)
    else:
        arr = arr.reshape(frame.height, frame.width, 3)
        r, g, b = (arr[:, :, i].astype(np.float64) for i in range(3))
        luma = _round_half_up(_luma(r, g, b))
    lo = float(np.percentile(luma, p_low))
    hi = float(np.percentile(luma, p_high))
    if hi <= lo:
        return StretchResult(frame=frame, degenerate=True)
    # multiply before dividing so integer-valued inputs stay exact in float64
    mapped = (arr.astype(np.float64) - lo) * 255.0 / (hi - lo)
    return StretchResult(frame=_new_frame(frame, frame.format, _to_u8(mapped).tobytes()),
                         degenerate=False)


def jpeg_encode(frame: Frame, quality: int = 90) -> bytes:
    """Encode one frame as a standalone baseline JFIF image."""
    if not 1 <= quality <= 100:
        raise ValueError(f"quality {quality} out of range 1..100")
    if frame.format == PixelFormat.RGB24:
        img = Image.frombuffer("RGB", (frame.width, frame.height), frame.payload, "raw", "RGB", 0, 1)
    elif frame.format == PixelFormat.GRAY8:
        img = Image.frombuffer("L", (frame.width, frame.height), frame.payload, "raw", "L", 0, 1)
    elif frame.format == PixelFormat.YUV422:
        packed = np.frombuffer(frame.payload, dtype=np.uint8).reshape(frame.height, frame.width, 2)
        ycbcr = np.empty((frame.height, frame.width, 3), dtype=np.uint8)
        ycbcr[:, :, 0] = packed[:, :, 0]
        ycbcr[:, :, 1] = np.repeat(packed[:, 0::2, 1], 2, axis=1)  # U across the pair
        ycbcr[:, :, 2] = np.repeat(packed[:, 1::2, 1], 2, axis=1)  # V across the pair
        img = Image.frombuffer("YCbCr", (frame.width, frame.height), ycbcr.tobytes(), "raw", "YCbCr", 0, 1)
    else:
        raise ConversionError(f"cannot JPEG-encode {frame.format.name}")
    buf = io.BytesIO()
    # 4:4:4 chroma: full-fidelity color, which medical content deserves
    img.save(buf, format="JPEG", quality=quality, subsampling=0)
    return buf.getvalue()


def jpeg_decode(data: bytes) -> Frame:
    """Decode a baseline JPEG to RGB24; malformed input raises JpegDecodeError."""
    try:
        img = Image.open(io.BytesIO(data))
        img.load()
        if img.mode != "RGB":
            img = img.convert("RGB")
    except JpegDecodeError:
        raise
    except Exception as exc:  # Pillow raises a zoo of types on bad streams
        raise JpegDecodeError(f"undecodable JPEG stream: {exc}") from exc
    return Frame(
        width=img.width,
        height=img.height,
        format=PixelFormat.RGB24,
        seq=0,
        capture_ts=0,
        payload=img.tobytes(),
    )


@dataclass
class PipelineConfig:
    target_format: PixelFormat = PixelFormat.RGB24
    target_width: int = 800
    target_height: int = 450
    enhance: tuple | None = None  # (p_low, p_high) percentiles, or None
    jpeg_quality: int = 90
    embed_stopwatch: bool = False  # stamp clock_now() after the scale stage
    queue_depth: int = 2  # stage hand-off depth when run as a worker

    def __post_init__(self):
        if self.target_width < 8 or self.target_height < 8:
            raise ValueError(f"target {self.target_width}x{self.target_height} below 8x8")
        if not 1 <= self.jpeg_quality <= 100:
            raise ValueError(f"quality {self.jpeg_quality} out of range")
        if self.enhance is not None:
            p_low, p_high = self.enhance
            if not (0 <= p_low < p_high <= 100):
                raise ValueError(f"bad enhance percentiles {self.enhance}")
        if self.target_format not in (PixelFormat.RGB24, PixelFormat.GRAY8, PixelFormat.YUV422):
            raise ValueError(f"unsupported target format {self.target_format.name}")


@dataclass(frozen=True)
class EncodedFrame:
    """Motion-JPEG frame plus per-stage processing durations in microseconds."""

    seq: int
    capture_ts: int
    width: int
    height: int
    payload: bytes
    durations: dict = field(default_factory=dict)  # convert/scale/embed/enhance/encode
    total_us: int = 0


def process(frame: Frame, cfg: PipelineConfig) -> EncodedFrame:
    """Run convert -> scale -> stopwatch -> enhance -> encode, timing each stage.

    The input frame is never modified. total_us is the report's
    "processing" figure: frame available to frame ready to send.
    """
    t_start = clock_now()
    durations = {}

    working = PixelFormat.GRAY8 if cfg.target_format == PixelFormat.GRAY8 else PixelFormat.RGB24
    t0 = clock_now()
    fr = convert(frame, working)
    durations["convert"] = clock_now() - t0

    t0 = clock_now()
    fr = scale_bilinear(fr, cfg.target_width, cfg.target_height)
    durations["scale"] = clock_now() - t0

    if cfg.embed_stopwatch:
        t0 = clock_now()
        fr = embed_stopwatch(fr, clock_now())
        durations["embed"] = clock_now() - t0

    if cfg.enhance is not None:
        t0 = clock_now()
        fr = contrast_stretch(fr, cfg.enhance[0], cfg.enhance[1]).frame
        durations["enhance"] = clock_now() - t0
    else:
        durations["enhance"] = 0

    if cfg.target_format == PixelFormat.YUV422:
        t0 = clock_now()
        fr = convert(fr, PixelFormat.YUV422)
        durations["convert"] += clock_now() - t0

    t0 = clock_now()
    payload = jpeg_encode(fr, cfg.jpeg_quality)
    durations["encode"] = clock_now() - t0

    return EncodedFrame(
        seq=frame.seq,
        capture_ts=frame.capture_ts,
        width=fr.width,
        height=fr.height,
        payload=payload,
        durations=durations,
        total_us=clock_now() - t_start,
    )
