/**
 * Geometry for the virtual-monitor scene: a pinhole camera at the head
 * frame, a flat reference grid standing in for the room, and the monitor
 * quad placed by the active anchoring law. Pure math here; canvas painting
 * lives in viewer.ts so these functions stay unit-testable.
 */

import { Pose, Vec3, applyPose, inverse } from "./pose.js";

export interface Viewport {
  width: number;
  height: number;
  fovY: number; // radians
}

/** Camera frame: x right, y up, looking down -z (screen depth = -z). */
export function projectPoint(pH: Vec3, vp: Viewport): [number, number] | null {
  const depth = -pH[2];
  if (depth < 0.05) return null; // behind or too close
  const f = vp.height / 2 / Math.tan(vp.fovY / 2);
  return [vp.width / 2 + (f * pH[0]) / depth, vp.height / 2 - (f * pH[1]) / depth];
}

/** Monitor quad corners in its own object frame; 16:9, `size` meters wide. */
export function monitorCornersObject(size = 1.0): Vec3[] {
  const w = size / 2;
  const h = (size * 9) / 16 / 2;
  return [
    [-w, h, 0],
    [w, h, 0],
    [w, -h, 0],
    [-w, -h, 0],
  ];
}

/** Corners expressed in the head frame for a given G_HO (maps H -> O). */
export function monitorCornersHead(gHO: Pose, size = 1.0): Vec3[] {
  const toHead = inverse(gHO);
  return monitorCornersObject(size).map((c) => applyPose(toHead, c));
}

/** Corners in world coordinates, for grid-relative checks: p_W = G_WH^-1 p_H. */
export function monitorCornersWorld(gHO: Pose, gWH: Pose, size = 1.0): Vec3[] {
  const headToWorld = inverse(gWH);
  return monitorCornersHead(gHO, size).map((c) => applyPose(headToWorld, c));
}

export interface GridSegment {
  a: Vec3;
  b: Vec3;
}

/** Floor grid: lines every meter on y = floorY, extent meters each way. */
export function gridSegmentsWorld(extent = 8, floorY = -1.4): GridSegment[] {
  const segments: GridSegment[] = [];
  for (let i = -extent; i <= extent; i++) {
    segments.push({ a: [i, floorY, -extent], b: [i, floorY, extent] });
    segments.push({ a: [-extent, floorY, i], b: [extent, floorY, i] });
  }
  return segments;
}

/** World-space segment projected to the screen through the head pose. */
export function projectSegment(seg: GridSegment, gWH: Pose, vp: Viewport):
    [[number, number], [number, number]] | null {
  const a = projectPoint(applyPose(gWH, seg.a), vp);
  const b = projectPoint(applyPose(gWH, seg.b), vp);
  if (a === null || b === null) return null;
  return [a, b];
}

/**
 * Head pose from user steering: yaw/pitch looking direction plus a world
 * position. Returns G_WH (world -> head): the inverse of the head's pose
 * in the world, built as yaw about +y then pitch about +x.
 */
export function headPoseFromSteering(yaw: number, pitch: number, position: Vec3): Pose {
  const cy = Math.cos(yaw / 2);
  const sy = Math.sin(yaw / 2);
  const cp = Math.cos(pitch / 2);
  const sp = Math.sin(pitch / 2);
  // q = q_yaw(y) * q_pitch(x)
  const q: [number, number, number, number] = [
    cy * cp,
    cy * sp,
    sy * cp,
    -sy * sp,
  ];
  const headInWorld: Pose = { q, t: position };
  return inverse(headInWorld);
}
