/**
 * Canvas viewer: paints the live MJPEG stream onto the anchored monitor
 * quad over a reference grid, steered by mouse drag (yaw/pitch) and WASD
 * keys (translation). Stream reading and stats polling are independent
 * asynchronous activities that only touch ViewerState via queued updates.
 */

import {
  AnchorMode,
  AnchorState,
  DEFAULT_BODY_PARAMS,
  Pose,
  Vec3,
  alignBody,
  anchoredPose,
  compose,
  fromTranslation,
  identity,
} from "./pose.js";
import { LatestFrameGate, MjpegPart, MjpegStreamParser } from "./mjpeg.js";
import { StatsPoller } from "./stats.js";
import {
  Viewport,
  gridSegmentsWorld,
  headPoseFromSteering,
  monitorCornersHead,
  projectPoint,
  projectSegment,
} from "./scene.js";

type Vec2 = [number, number];

export interface ViewerOptions {
  streamUrl: string;
  statsUrl: string;
  monitorSize: number; // meters
}

const DEFAULTS: ViewerOptions = {
  streamUrl: "/stream.mjpeg",
  statsUrl: "/stats",
  monitorSize: 1.2,
};

/** Affine-map an image triangle onto a screen triangle. */
function drawTriangle(ctx: CanvasRenderingContext2D, img: CanvasImageSource,
                      src: [Vec2, Vec2, Vec2], dst: [Vec2, Vec2, Vec2]): void {
  const [[sx0, sy0], [sx1, sy1], [sx2, sy2]] = src;
  const [[dx0, dy0], [dx1, dy1], [dx2, dy2]] = dst;
  const denom = (sx1 - sx0) * (sy2 - sy0) - (sx2 - sx0) * (sy1 - sy0);
  if (Math.abs(denom) < 1e-9) return;
  const a = ((dx1 - dx0) * (sy2 - sy0) - (dx2 - dx0) * (sy1 - sy0)) / denom;
  const b = ((dx2 - dx0) * (sx1 - sx0) - (dx1 - dx0) * (sx2 - sx0)) / denom;
  const c = ((dy1 - dy0) * (sy2 - sy0) - (dy2 - dy0) * (sy1 - sy0)) / denom;
  const d = ((dy2 - dy0) * (sx1 - sx0) - (dy1 - dy0) * (sx2 - sx0)) / denom;
  const e = dx0 - a * sx0 - b * sy0;
  const f = dy0 - c * sx0 - d * sy0;
  ctx.save();
  ctx.beginPath();
  ctx.moveTo(dx0, dy0);
  ctx.lineTo(dx1, dy1);
  ctx.lineTo(dx2, dy2);
  ctx.closePath();
  ctx.clip();
  ctx.transform(a, c, b, d, e, f);
  ctx.drawImage(img, 0, 0);
  ctx.restore();
}

export class Viewer {
  readonly options: ViewerOptions;
  readonly anchor: AnchorState;
  yaw = 0;
  pitch = 0;
  position: Vec3 = [0, 0, 0];
  status = "connecting";
  paintedSeq = -1;
  paintFps = 0;

  private readonly ctx: CanvasRenderingContext2D;
  private readonly gate = new LatestFrameGate();
  private bitmap: ImageBitmap | null = null;
  private bitmapSeq = -1;
  private decoding = false;
  private dragging = false;
  private lastPointer: Vec2 = [0, 0];
  private keys = new Set<string>();
  private lastTick = performance.now();
  private paintTimes: number[] = [];
  private backoffMs = 500;
  private stopped = false;
  private poller: StatsPoller;

  constructor(private readonly canvas: HTMLCanvasElement,
              private readonly overlay: HTMLElement,
              private readonly statusEl: HTMLElement,
              options: Partial<ViewerOptions> = {}) {
    this.options = { ...DEFAULTS, ...options };
    const ctx = canvas.getContext("2d");
    if (!ctx) throw new Error("2d canvas context unavailable");
    this.ctx = ctx;
    this.anchor = {
      mode: "world",
      // G_HO maps head to object coords, so the monitor center sits at
      // x_H = -t: +2.2 here means 2.2 m in front of the eyes (camera -z).
      fixedGHO: fromTranslation([0, 0, 2.2]),
      fixedGWO: identity(),
      body: { ...DEFAULT_BODY_PARAMS },
      currentGWO: identity(),
    };
    this.pinHere(); // world placement starts where the monitor floats now
    this.bindInput();
    this.poller = new StatsPoller(this.options.statsUrl, (lines) => {
      this.overlay.textContent = lines.join("\n");
    });
  }

  get gWH(): Pose {
    return headPoseFromSteering(this.yaw, this.pitch, this.position);
  }

  setMode(mode: AnchorMode): void {
    this.anchor.mode = mode;
    if (mode === "body") alignBody(this.anchor, this.gWH);
  }

  /** Pin the monitor in the world at its current on-screen placement. */
  pinHere(): void {
    this.anchor.fixedGWO = compose(this.anchor.fixedGHO, this.gWH);
    this.anchor.currentGWO = this.anchor.fixedGWO;
  }

  start(): void {
    this.poller.start();
    void this.streamLoop();
    requestAnimationFrame((t) => this.tick(t));
  }

  stop(): void {
    this.stopped = true;
    this.poller.stop();
  }

  private bindInput(): void {
    this.canvas.addEventListener("pointerdown", (ev) => {
      this.dragging = true;
      this.lastPointer = [ev.clientX, ev.clientY];
      this.canvas.setPointerCapture(ev.pointerId);
    });
    this.canvas.addEventListener("pointermove", (ev) => {
      if (!this.dragging) return;
      const dx = ev.clientX - this.lastPointer[0];
      const dy = ev.clientY - this.lastPointer[1];
      this.lastPointer = [ev.clientX, ev.clientY];
      this.yaw -= dx * 0.005;
      this.pitch = Math.max(-1.2, Math.min(1.2, this.pitch - dy * 0.005));
    });
    this.canvas.addEventListener("pointerup", () => (this.dragging = false));
    window.addEventListener("keydown", (ev) => this.keys.add(ev.key.toLowerCase()));
    window.addEventListener("keyup", (ev) => this.keys.delete(ev.key.toLowerCase()));
  }

  private moveFromKeys(dt: number): void {
    const speed = 1.5 * dt; // m/s
    const forward: Vec3 = [-Math.sin(this.yaw), 0, -Math.cos(this.yaw)];
    const right: Vec3 = [Math.cos(this.yaw), 0, -Math.sin(this.yaw)];
    const step = (dir: Vec3, sign: number) => {
      this.position = [
        this.position[0] + sign * speed * dir[0],
        this.position[1] + sign * speed * dir[1],
        this.position[2] + sign * speed * dir[2],
      ];
    };
    if (this.keys.has("w")) step(forward, 1);
    if (this.keys.has("s")) step(forward, -1);
    if (this.keys.has("d")) step(right, 1);
    if (this.keys.has("a")) step(right, -1);
    if (this.keys.has("e")) this.position = [this.position[0], this.position[1] + speed, this.position[2]];
    if (this.keys.has("q")) this.position = [this.position[0], this.position[1] - speed, this.position[2]];
  }

  private async streamLoop(): Promise<void> {
    while (!this.stopped) {
      try {
        this.status = "connecting";
        const resp = await fetch(this.options.streamUrl, { cache: "no-store" });
        if (!resp.ok || !resp.body) throw new Error(`HTTP ${resp.status}`);
        this.status = "live";
        this.backoffMs = 500;
        const parser = new MjpegStreamParser();
        const reader = resp.body.getReader();
        for (;;) {
          const { done, value } = await reader.read();
          if (done || this.stopped) break;
          if (value) {
            for (const part of parser.push(value)) this.gate.offer(part);
            void this.decodeLatest();
          }
        }
      } catch {
        // fall through to reconnect
      }
      if (this.stopped) return;
      this.status = `disconnected, retrying in ${(this.backoffMs / 1000).toFixed(1)} s`;
      await new Promise((resolve) => setTimeout(resolve, this.backoffMs));
      this.backoffMs = Math.min(this.backoffMs * 2, 8000);
    }
  }

  private async decodeLatest(): Promise<void> {
    if (this.decoding) return; // newest frame will be picked up next round
    const part = this.gate.take();
    if (part === null) return;
    this.decoding = true;
    try {
      const blob = new Blob([part.data as BlobPart], { type: "image/jpeg" });
      const bitmap = await createImageBitmap(blob);
      if (part.seq > this.bitmapSeq) {
        this.bitmap?.close();
        this.bitmap = bitmap;
        this.bitmapSeq = part.seq;
      } else {
        bitmap.close();
      }
    } catch {
      // corrupt frame: keep the previous texture
    } finally {
      this.decoding = false;
    }
    void this.decodeLatest(); // drain anything newer that arrived meanwhile
  }

  private tick(now: number): void {
    if (this.stopped) return;
    const dt = Math.max(1e-3, (now - this.lastTick) / 1000);
    this.lastTick = now;
    this.moveFromKeys(dt);
    this.render(dt, now);
    requestAnimationFrame((t) => this.tick(t));
  }

  private render(dt: number, now: number): void {
    const vp: Viewport = { width: this.canvas.width, height: this.canvas.height, fovY: 1.0 };
    const ctx = this.ctx;
    ctx.fillStyle = "#10141c";
    ctx.fillRect(0, 0, vp.width, vp.height);

    const gWH = this.gWH;
    ctx.strokeStyle = "#2d4a57";
    ctx.lineWidth = 1;
    for (const seg of gridSegmentsWorld()) {
      const line = projectSegment(seg, gWH, vp);
      if (!line) continue;
      ctx.beginPath();
      ctx.moveTo(line[0][0], line[0][1]);
      ctx.lineTo(line[1][0], line[1][1]);
      ctx.stroke();
    }

    const gHO = anchoredPose(this.anchor, gWH, dt);
    const cornersH = monitorCornersHead(gHO, this.options.monitorSize);
    const screen = cornersH.map((c) => projectPoint(c, vp));
    if (screen.every((p) => p !== null)) {
      const quad = screen as Vec2[];
      if (this.bitmap) {
        this.paintQuad(this.bitmap, cornersH, vp);
        if (this.bitmapSeq > this.paintedSeq) {
          this.paintedSeq = this.bitmapSeq;
          this.paintTimes.push(now);
          while (this.paintTimes.length && now - this.paintTimes[0] > 2000) {
            this.paintTimes.shift();
          }
          this.paintFps = this.paintTimes.length / 2;
        }
      } else {
        ctx.fillStyle = "#223";
        ctx.beginPath();
        ctx.moveTo(quad[0][0], quad[0][1]);
        for (const p of quad.slice(1)) ctx.lineTo(p[0], p[1]);
        ctx.closePath();
        ctx.fill();
      }
      ctx.strokeStyle = "#7fd0e8";
      ctx.lineWidth = 2;
      ctx.beginPath();
      ctx.moveTo(quad[0][0], quad[0][1]);
      for (const p of quad.slice(1)) ctx.lineTo(p[0], p[1]);
      ctx.closePath();
      ctx.stroke();
    }

    this.statusEl.textContent =
      `${this.status} | mode: ${this.anchor.mode} | seq: ${this.paintedSeq}` +
      ` | paint: ${this.paintFps.toFixed(1)} fps`;
  }

  /** Paint the bitmap across the quad with a perspective-correct 3x3 mesh. */
  private paintQuad(bitmap: ImageBitmap, cornersH: Vec3[], vp: Viewport): void {
    const n = 3;
    const lerp3 = (a: Vec3, b: Vec3, t: number): Vec3 => [
      a[0] + (b[0] - a[0]) * t,
      a[1] + (b[1] - a[1]) * t,
      a[2] + (b[2] - a[2]) * t,
    ];
    const surface = (u: number, v: number): Vec3 =>
      lerp3(lerp3(cornersH[0], cornersH[1], u), lerp3(cornersH[3], cornersH[2], u), v);
    for (let i = 0; i < n; i++) {
      for (let j = 0; j < n; j++) {
        const u0 = i / n, u1 = (i + 1) / n;
        const v0 = j / n, v1 = (j + 1) / n;
        const p00 = projectPoint(surface(u0, v0), vp);
        const p10 = projectPoint(surface(u1, v0), vp);
        const p01 = projectPoint(surface(u0, v1), vp);
        const p11 = projectPoint(surface(u1, v1), vp);
        if (!p00 || !p10 || !p01 || !p11) continue;
        const sw = bitmap.width, sh = bitmap.height;
        const s00: Vec2 = [u0 * sw, v0 * sh];
        const s10: Vec2 = [u1 * sw, v0 * sh];
        const s01: Vec2 = [u0 * sw, v1 * sh];
        const s11: Vec2 = [u1 * sw, v1 * sh];
        drawTriangle(this.ctx, bitmap, [s00, s10, s11], [p00, p10, p11]);
        drawTriangle(this.ctx, bitmap, [s00, s11, s01], [p00, p11, p01]);
      }
    }
  }
}
