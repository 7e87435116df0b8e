import { describe, expect, it } from "vitest";

import { formatMuSigma, formatNumber, statsLines } from "../src/stats.js";

describe("mu (sigma) formatting", () => {
  it("renders the canonical end-to-end cell", () => {
    // 214 ms mean, 30 ms sigma arrives as microseconds
    expect(formatMuSigma({ mean: 214_000, stddev: 30_000 }, 1000, "ms")).toBe("214 (30) ms");
  });

  it("keeps three significant digits", () => {
    expect(formatMuSigma({ mean: 6030, stddev: 2280 }, 1000, "ms")).toBe("6.03 (2.28) ms");
    expect(formatMuSigma({ mean: 41.4, stddev: 32.0 }, 1, "Hz")).toBe("41.4 (32) Hz");
  });

  it("dashes out missing fields without crashing", () => {
    expect(formatMuSigma(undefined)).toBe("–");
    expect(formatMuSigma({})).toBe("–");
    expect(formatMuSigma({ mean: 5 })).toBe("–");
  });

  it("formatNumber trims trailing zeros", () => {
    expect(formatNumber(30.0)).toBe("30");
    expect(formatNumber(2.28)).toBe("2.28");
  });
});

describe("stats document rendering", () => {
  it("labels and scales summaries by their unit suffix", () => {
    const lines = statsLines({
      stats: {
        end_to_end_delay_us: { mean: 214_000, stddev: 30_000 },
        reception_rate_hz: { mean: 41.4, stddev: 32.0 },
      },
      counters: { frames_emitted: 180 },
    }, false);
    expect(lines).toContain("end_to_end_delay: 214 (30) ms");
    expect(lines).toContain("reception_rate: 41.4 (32) Hz");
    expect(lines).toContain("frames_emitted: 180");
  });

  it("marks stale documents and survives null", () => {
    expect(statsLines(null, true)).toEqual(["stats: –"]);
    const lines = statsLines({ stats: {} }, true);
    expect(lines[lines.length - 1]).toBe("(stale)");
  });

  it("skips malformed summaries with a dash", () => {
    const lines = statsLines({ stats: { broken_us: {} } }, false);
    expect(lines).toContain("broken: –");
  });
});
