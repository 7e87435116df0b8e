import { readFileSync } from "node:fs";
import { dirname, join } from "node:path";
import { fileURLToPath } from "node:url";
import { describe, expect, it } from "vitest";

import {
  AnchorState,
  DEFAULT_BODY_PARAMS,
  Pose,
  alignBody,
  bodyAnchoredStep,
  compose,
  fromAxisAngle,
  fromTranslation,
  headAnchoredPose,
  identity,
  interpolate,
  inverse,
  poseDeviation,
  poseFromJson,
  worldAnchoredPose,
} from "../src/pose.js";

const here = dirname(fileURLToPath(import.meta.url));
const fixturePath = join(here, "..", "..", "fixtures", "anchoring_vectors.json");

interface FixtureVector {
  mode: "head" | "world" | "body";
  G_WH: { q: number[]; t: number[] };
  fixed_G_HO?: { q: number[]; t: number[] };
  fixed_G_WO?: { q: number[]; t: number[] };
  body?: {
    d_dead: number;
    theta_dead: number;
    tau: number;
    current_G_WO: { q: number[]; t: number[] };
    dt: number;
  };
  expected_G_HO: { q: number[]; t: number[] };
  expected_current_G_WO?: { q: number[]; t: number[] };
}

interface FixtureDoc {
  tolerance: number;
  vectors: FixtureVector[];
}

const doc: FixtureDoc = JSON.parse(readFileSync(fixturePath, "utf-8"));

function stateFor(vector: FixtureVector): AnchorState {
  return {
    mode: vector.mode,
    fixedGHO: vector.fixed_G_HO ? poseFromJson(vector.fixed_G_HO) : identity(),
    fixedGWO: vector.fixed_G_WO ? poseFromJson(vector.fixed_G_WO) : identity(),
    body: vector.body
      ? { dDead: vector.body.d_dead, thetaDead: vector.body.theta_dead, tau: vector.body.tau }
      : { ...DEFAULT_BODY_PARAMS },
    currentGWO: vector.body ? poseFromJson(vector.body.current_G_WO) : identity(),
  };
}

function replay(vector: FixtureVector, state: AnchorState): Pose {
  const gWH = poseFromJson(vector.G_WH);
  if (vector.mode === "head") return headAnchoredPose(state, gWH);
  if (vector.mode === "world") return worldAnchoredPose(state, gWH);
  return bodyAnchoredStep(state, gWH, vector.body!.dt);
}

describe("shared anchoring fixture", () => {
  it("holds at least 50 vectors across all three modes", () => {
    expect(doc.vectors.length).toBeGreaterThanOrEqual(50);
    const modes = new Set(doc.vectors.map((v) => v.mode));
    expect(modes).toEqual(new Set(["head", "world", "body"]));
  });

  it("replays every vector within the published tolerance", () => {
    for (const [i, vector] of doc.vectors.entries()) {
      const state = stateFor(vector);
      const got = replay(vector, state);
      const expected = poseFromJson(vector.expected_G_HO);
      const [d, theta] = poseDeviation(got, expected);
      expect(d, `vector ${i} (${vector.mode}) translation`).toBeLessThanOrEqual(doc.tolerance);
      expect(theta, `vector ${i} (${vector.mode}) rotation`).toBeLessThanOrEqual(doc.tolerance);
      if (vector.expected_current_G_WO) {
        const [ds, ts] = poseDeviation(state.currentGWO, poseFromJson(vector.expected_current_G_WO));
        expect(ds, `vector ${i} stored world pose`).toBeLessThanOrEqual(doc.tolerance);
        expect(ts, `vector ${i} stored world rotation`).toBeLessThanOrEqual(doc.tolerance);
      }
    }
  });
});

describe("pose algebra", () => {
  it("compose with inverse is the identity", () => {
    const p = fromAxisAngle([0.3, 1, -0.2], 0.9, [1, 2, 3]);
    const [d, theta] = poseDeviation(compose(inverse(p), p), identity());
    expect(d).toBeLessThan(1e-12);
    expect(theta).toBeLessThan(1e-9);
  });

  it("pure translations add", () => {
    const out = compose(fromTranslation([1, 2, 3]), fromTranslation([-0.5, 4, 0.25]));
    expect(out.t[0]).toBeCloseTo(0.5, 12);
    expect(out.t[1]).toBeCloseTo(6, 12);
    expect(out.t[2]).toBeCloseTo(3.25, 12);
  });

  it("world anchoring keeps G_WO constant as the head moves", () => {
    const fixed = fromAxisAngle([0, 1, 0], 0.7, [0.5, 0, -2]);
    const state: AnchorState = {
      mode: "world", fixedGHO: identity(), fixedGWO: fixed,
      body: { ...DEFAULT_BODY_PARAMS }, currentGWO: identity(),
    };
    for (let i = 0; i < 50; i++) {
      const gWH = fromAxisAngle([0, 1, 0], i * 0.1, [i * 0.02, 0, -i * 0.01]);
      const gHO = worldAnchoredPose(state, gWH);
      const [d, theta] = poseDeviation(compose(gHO, gWH), fixed);
      expect(d).toBeLessThan(1e-9);
      // the angle metric amplifies float noise near zero (acos of ~1)
      expect(theta).toBeLessThan(1e-7);
    }
  });

  it("body mode holds inside the deadband and pursues outside", () => {
    const gWH = fromAxisAngle([0, 1, 0], 0.2);
    const state: AnchorState = {
      mode: "body", fixedGHO: fromTranslation([0, 0, -2]), fixedGWO: identity(),
      body: { ...DEFAULT_BODY_PARAMS }, currentGWO: identity(),
    };
    alignBody(state, gWH);
    const before = state.currentGWO;
    bodyAnchoredStep(state, gWH, 1 / 60);
    expect(state.currentGWO).toBe(before); // hold branch

    const turned = fromAxisAngle([0, 1, 0], 0.2 + Math.PI / 4);
    let gHO = bodyAnchoredStep(state, turned, 1 / 60);
    expect(state.currentGWO).not.toBe(before); // pursuit branch engaged
    for (let i = 0; i < 5 * 0.5 * 60; i++) {
      gHO = bodyAnchoredStep(state, turned, 1 / 60);
    }
    const [d, theta] = poseDeviation(gHO, state.fixedGHO);
    expect(d).toBeLessThanOrEqual(state.body.dDead);
    expect(theta).toBeLessThanOrEqual(state.body.thetaDead);
  });

  it("interpolate blends translation linearly", () => {
    const mid = interpolate(fromTranslation([0, 0, 0]), fromTranslation([2, 4, 6]), 0.25);
    expect(mid.t).toEqual([0.5, 1, 1.5]);
  });
});
