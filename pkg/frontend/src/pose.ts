/**
 * SE(3) pose math and the three anchoring laws, mirroring the server side.
 *
 * Convention: G_AB maps coordinates in frame A to frame B, products apply
 * right-to-left, so compose(a, b) applies b first. World anchoring solves
 * G_HO = G_WO * inverse(G_WH) and therefore compose(G_HO, G_WH) = G_WO.
 *
 * The shared fixture (fixtures/anchoring_vectors.json) pins this module to
 * the server implementation within 1e-6.
 */

export type Quat = [number, number, number, number]; // w, x, y, z
export type Vec3 = [number, number, number];

export interface Pose {
  q: Quat;
  t: Vec3;
}

export function identity(): Pose {
  return { q: [1, 0, 0, 0], t: [0, 0, 0] };
}

export function normalizeQuat(q: Quat): Quat {
  const n = Math.hypot(q[0], q[1], q[2], q[3]);
  if (n === 0) throw new Error("zero quaternion");
  return [q[0] / n, q[1] / n, q[2] / n, q[3] / n];
}

export function fromAxisAngle(axis: Vec3, angle: number, t: Vec3 = [0, 0, 0]): Pose {
  const n = Math.hypot(axis[0], axis[1], axis[2]);
  if (n === 0) throw new Error("zero rotation axis");
  const half = angle / 2;
  const s = Math.sin(half) / n;
  return {
    q: normalizeQuat([Math.cos(half), axis[0] * s, axis[1] * s, axis[2] * s]),
    t: [t[0], t[1], t[2]],
  };
}

export function fromTranslation(t: Vec3): Pose {
  return { q: [1, 0, 0, 0], t: [t[0], t[1], t[2]] };
}

export function rotateVector(q: Quat, v: Vec3): Vec3 {
  const [w, x, y, z] = q;
  const [vx, vy, vz] = v;
  const tx = 2 * (y * vz - z * vy);
  const ty = 2 * (z * vx - x * vz);
  const tz = 2 * (x * vy - y * vx);
  return [
    vx + w * tx + (y * tz - z * ty),
    vy + w * ty + (z * tx - x * tz),
    vz + w * tz + (x * ty - y * tx),
  ];
}

export function applyPose(p: Pose, point: Vec3): Vec3 {
  const r = rotateVector(p.q, point);
  return [r[0] + p.t[0], r[1] + p.t[1], r[2] + p.t[2]];
}

function quatMul(a: Quat, b: Quat): Quat {
  const [aw, ax, ay, az] = a;
  const [bw, bx, by, bz] = b;
  return [
    aw * bw - ax * bx - ay * by - az * bz,
    aw * bx + ax * bw + ay * bz - az * by,
    aw * by - ax * bz + ay * bw + az * bx,
    aw * bz + ax * by - ay * bx + az * bw,
  ];
}

/** compose(a, b) = a * b: apply b first, then a. Result renormalized. */
export function compose(a: Pose, b: Pose): Pose {
  const q = normalizeQuat(quatMul(a.q, b.q));
  const rb = rotateVector(a.q, b.t);
  return { q, t: [rb[0] + a.t[0], rb[1] + a.t[1], rb[2] + a.t[2]] };
}

export function inverse(p: Pose): Pose {
  const conj: Quat = normalizeQuat([p.q[0], -p.q[1], -p.q[2], -p.q[3]]);
  const r = rotateVector(conj, p.t);
  return { q: conj, t: [-r[0], -r[1], -r[2]] };
}

/** [positional distance (m), angular distance (rad)] between two poses. */
export function poseDeviation(a: Pose, b: Pose): [number, number] {
  const d = Math.hypot(a.t[0] - b.t[0], a.t[1] - b.t[1], a.t[2] - b.t[2]);
  let dot = a.q[0] * b.q[0] + a.q[1] * b.q[1] + a.q[2] * b.q[2] + a.q[3] * b.q[3];
  dot = Math.min(1, Math.abs(dot));
  return [d, 2 * Math.acos(dot)];
}

function slerp(qa: Quat, qb: Quat, alpha: number): Quat {
  let dot = qa[0] * qb[0] + qa[1] * qb[1] + qa[2] * qb[2] + qa[3] * qb[3];
  let b = qb;
  if (dot < 0) {
    b = [-qb[0], -qb[1], -qb[2], -qb[3]];
    dot = -dot;
  }
  if (dot > 0.9995) {
    return normalizeQuat([
      qa[0] + alpha * (b[0] - qa[0]),
      qa[1] + alpha * (b[1] - qa[1]),
      qa[2] + alpha * (b[2] - qa[2]),
      qa[3] + alpha * (b[3] - qa[3]),
    ]);
  }
  const theta0 = Math.acos(Math.min(1, dot));
  const sin0 = Math.sin(theta0);
  const sa = Math.sin((1 - alpha) * theta0) / sin0;
  const sb = Math.sin(alpha * theta0) / sin0;
  return normalizeQuat([
    sa * qa[0] + sb * b[0],
    sa * qa[1] + sb * b[1],
    sa * qa[2] + sb * b[2],
    sa * qa[3] + sb * b[3],
  ]);
}

/** Blend a toward b: translation linear, rotation spherical-linear. */
export function interpolate(a: Pose, b: Pose, alpha: number): Pose {
  return {
    q: slerp(a.q, b.q, alpha),
    t: [
      a.t[0] + alpha * (b.t[0] - a.t[0]),
      a.t[1] + alpha * (b.t[1] - a.t[1]),
      a.t[2] + alpha * (b.t[2] - a.t[2]),
    ],
  };
}

export type AnchorMode = "head" | "world" | "body";

export interface BodyParams {
  dDead: number;   // meters
  thetaDead: number; // radians
  tau: number;     // seconds
}

export const DEFAULT_BODY_PARAMS: BodyParams = {
  dDead: 0.1,
  thetaDead: (10 * Math.PI) / 180,
  tau: 0.5,
};

export interface AnchorState {
  mode: AnchorMode;
  fixedGHO: Pose;
  fixedGWO: Pose;
  body: BodyParams;
  currentGWO: Pose;
}

export function headAnchoredPose(state: AnchorState, _gWH: Pose): Pose {
  return state.fixedGHO;
}

export function worldAnchoredPose(state: AnchorState, gWH: Pose): Pose {
  return compose(state.fixedGWO, inverse(gWH));
}

/**
 * Body mode step: hold like world mode while the candidate G_HO stays within
 * the deadband of fixedGHO; outside it, pursue the world pose implied by
 * fixedGHO with factor alpha = 1 - exp(-dt / tau). Mutates state.currentGWO.
 */
export function bodyAnchoredStep(state: AnchorState, gWH: Pose, dt: number): Pose {
  if (dt <= 0) throw new Error(`dt must be positive, got ${dt}`);
  const candidate = compose(state.currentGWO, inverse(gWH));
  const [d, theta] = poseDeviation(candidate, state.fixedGHO);
  if (d <= state.body.dDead && theta <= state.body.thetaDead) {
    return candidate;
  }
  const target = compose(state.fixedGHO, gWH);
  const alpha = 1 - Math.exp(-dt / state.body.tau);
  state.currentGWO = interpolate(state.currentGWO, target, alpha);
  return compose(state.currentGWO, inverse(gWH));
}

/** Seed body mode from the current head pose so it starts deviation-free. */
export function alignBody(state: AnchorState, gWH: Pose): void {
  state.currentGWO = compose(state.fixedGHO, gWH);
}

export function anchoredPose(state: AnchorState, gWH: Pose, dt: number): Pose {
  if (state.mode === "head") return headAnchoredPose(state, gWH);
  if (state.mode === "world") return worldAnchoredPose(state, gWH);
  return bodyAnchoredStep(state, gWH, dt);
}

export function poseFromJson(d: { q: number[]; t: number[] }): Pose {
  return { q: [d.q[0], d.q[1], d.q[2], d.q[3]], t: [d.t[0], d.t[1], d.t[2]] };
}
