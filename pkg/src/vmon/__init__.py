"""vmon: real-time virtual-monitor streaming toolkit.

Synthetic frame source, Motion-JPEG image pipeline, framed TCP streaming
with drop-oldest backpressure, an HTTP/MJPEG gateway, SE(3) anchoring math,
a simulated HMD client, and a latency/refresh-rate benchmark harness.
"""

__version__ = "0.1.0"

from .core import Frame, PixelFormat, StatAccumulator, StatSummary, clock_now

__all__ = [
    "Frame",
    "PixelFormat",
    "StatAccumulator",
    "StatSummary",
    "clock_now",
    "__version__",
]
