/**
 * Stats overlay data: polls /stats once a second and formats summaries the
 * way the reports do, "mu (sigma)". A failed poll keeps the last document
 * and flags it stale; missing fields render as a dash.
 */

export interface StatSummaryDoc {
  n?: number;
  mean?: number;
  stddev?: number;
  min?: number;
  max?: number;
}

export function formatNumber(v: number): string {
  return Number(v.toPrecision(3)).toString();
}

/** "214 (30) ms" style cell; unitScale divides (1000 turns us into ms). */
export function formatMuSigma(summary: StatSummaryDoc | undefined | null,
                              unitScale = 1, unit = ""): string {
  if (!summary || typeof summary.mean !== "number" || typeof summary.stddev !== "number") {
    return "–";
  }
  const cell = `${formatNumber(summary.mean / unitScale)} (${formatNumber(summary.stddev / unitScale)})`;
  return unit ? `${cell} ${unit}` : cell;
}

export interface StatsDoc {
  stats?: Record<string, StatSummaryDoc>;
  counters?: Record<string, unknown>;
}

/** Render the whole stats document into display lines. */
export function statsLines(doc: StatsDoc | null, stale: boolean): string[] {
  const lines: string[] = [];
  if (doc === null) {
    return ["stats: –"];
  }
  for (const [key, summary] of Object.entries(doc.stats ?? {})) {
    const us = key.endsWith("_us");
    const hz = key.endsWith("_hz");
    const label = key.replace(/_(us|hz)$/, "");
    const cell = formatMuSigma(summary, us ? 1000 : 1, us ? "ms" : hz ? "Hz" : "");
    lines.push(`${label}: ${cell}`);
  }
  for (const [key, value] of Object.entries(doc.counters ?? {})) {
    if (typeof value === "number") lines.push(`${key}: ${value}`);
  }
  if (stale) lines.push("(stale)");
  return lines;
}

export class StatsPoller {
  doc: StatsDoc | null = null;
  stale = false;
  private timer: ReturnType<typeof setInterval> | null = null;

  constructor(private readonly url: string,
              private readonly onUpdate: (lines: string[]) => void,
              private readonly periodMs = 1000) {}

  start(): void {
    this.tick();
    this.timer = setInterval(() => this.tick(), this.periodMs);
  }

  stop(): void {
    if (this.timer !== null) clearInterval(this.timer);
    this.timer = null;
  }

  private async tick(): Promise<void> {
    try {
      const resp = await fetch(this.url, { cache: "no-store" });
      if (!resp.ok) throw new Error(`${resp.status}`);
      this.doc = (await resp.json()) as StatsDoc;
      this.stale = false;
    } catch {
      this.stale = true; // keep the last document, mark it
    }
    this.onUpdate(statsLines(this.doc, this.stale));
  }
}
