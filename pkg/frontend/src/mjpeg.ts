/**
 * Incremental parser for multipart/x-mixed-replace MJPEG streams.
 *
 * Feed it raw network chunks; it yields complete parts (headers + JPEG
 * bytes). Framing relies on the Content-Length each part carries, so JPEG
 * payloads may legally contain the boundary bytes.
 */

export interface MjpegPart {
  headers: Record<string, string>;
  data: Uint8Array;
  seq: number; // from X-Seq, -1 if absent
  captureTs: number; // from X-Capture-Ts, -1 if absent
}

const encoder = new TextEncoder();
const decoder = new TextDecoder();

function indexOf(haystack: Uint8Array, needle: Uint8Array, from: number): number {
  outer: for (let i = from; i <= haystack.length - needle.length; i++) {
    for (let j = 0; j < needle.length; j++) {
      if (haystack[i + j] !== needle[j]) continue outer;
    }
    return i;
  }
  return -1;
}

export class MjpegStreamParser {
  private buffer = new Uint8Array(0);
  private readonly delimiter: Uint8Array;
  private readonly headerEnd = encoder.encode("\r\n\r\n");

  constructor(boundary = "vmframe") {
    this.delimiter = encoder.encode(`--${boundary}`);
  }

  /** Append a network chunk; returns every part completed by it. */
  push(chunk: Uint8Array): MjpegPart[] {
    const merged = new Uint8Array(this.buffer.length + chunk.length);
    merged.set(this.buffer, 0);
    merged.set(chunk, this.buffer.length);
    this.buffer = merged;

    const parts: MjpegPart[] = [];
    for (;;) {
      const start = indexOf(this.buffer, this.delimiter, 0);
      if (start < 0) break;
      const headStart = start + this.delimiter.length;
      const headEnd = indexOf(this.buffer, this.headerEnd, headStart);
      if (headEnd < 0) break;
      const headers = this.parseHeaders(this.buffer.subarray(headStart, headEnd));
      const length = Number(headers["content-length"] ?? NaN);
      if (!Number.isFinite(length) || length < 0) {
        // unframed part: drop up to the header end and resync
        this.buffer = this.buffer.subarray(headEnd + 4);
        continue;
      }
      const bodyStart = headEnd + 4;
      if (this.buffer.length < bodyStart + length) break; // body incomplete
      const data = this.buffer.slice(bodyStart, bodyStart + length);
      this.buffer = this.buffer.subarray(bodyStart + length);
      parts.push({
        headers,
        data,
        seq: Number(headers["x-seq"] ?? -1),
        captureTs: Number(headers["x-capture-ts"] ?? -1),
      });
    }
    return parts;
  }

  private parseHeaders(raw: Uint8Array): Record<string, string> {
    const headers: Record<string, string> = {};
    for (const line of decoder.decode(raw).split("\r\n")) {
      const idx = line.indexOf(":");
      if (idx > 0) {
        headers[line.slice(0, idx).trim().toLowerCase()] = line.slice(idx + 1).trim();
      }
    }
    return headers;
  }
}

/**
 * Keeps only the newest frame: stale parts are skipped so a slow painter
 * never falls behind the stream. Sequence numbers never move backwards.
 */
export class LatestFrameGate {
  private lastSeq = -1;
  private pending: MjpegPart | null = null;
  skipped = 0;

  offer(part: MjpegPart): void {
    if (part.seq >= 0 && part.seq <= this.lastSeq) {
      this.skipped++;
      return; // out of order: never paint an older frame
    }
    if (this.pending !== null) this.skipped++;
    this.pending = part;
  }

  /** The newest unpainted frame, or null; marks it painted. */
  take(): MjpegPart | null {
    const part = this.pending;
    if (part === null) return null;
    this.pending = null;
    this.lastSeq = Math.max(this.lastSeq, part.seq);
    return part;
  }

  get paintedSeq(): number {
    return this.lastSeq;
  }
}
