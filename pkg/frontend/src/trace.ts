/**
 * Parser for the trace CSV artifact (`# sample_rate_hz=…` header line, then
 * `t_ms,disp_mm,force_cN,vib` rows) and helpers to build what-if overlay
 * geometry from it: the rendered force-vs-displacement path plus vibration
 * markers, drawn over the reference curve.
 */

import type { ChartBox } from "./charts.js";
import { DEFAULT_BOX } from "./charts.js";
import type { ModelDoc } from "./types.js";

export interface TraceData {
  sampleRateHz: number;
  tMs: number[];
  dispMm: number[];
  forceCN: number[];
  vib: number[];
}

export function parseTraceCsv(text: string): TraceData {
  const lines = text.split(/\r?\n/).filter((line) => line.length > 0);
  if (lines.length < 3 || !lines[0].startsWith("# sample_rate_hz=")) {
    throw new Error("not a trace CSV: missing sample_rate_hz header");
  }
  const sampleRateHz = Number(lines[0].split("=", 2)[1]);
  if (!(sampleRateHz > 0)) {
    throw new Error("bad sample_rate_hz");
  }
  if (lines[1].trim() !== "t_ms,disp_mm,force_cN,vib") {
    throw new Error("unexpected trace header");
  }
  const trace: TraceData = { sampleRateHz, tMs: [], dispMm: [], forceCN: [], vib: [] };
  for (let i = 2; i < lines.length; i++) {
    const parts = lines[i].split(",");
    if (parts.length !== 4) {
      throw new Error(`bad row at line ${i + 1}`);
    }
    const values = parts.map(Number);
    if (values.some((v) => !Number.isFinite(v))) {
      throw new Error(`non-numeric value at line ${i + 1}`);
    }
    trace.tMs.push(values[0]);
    trace.dispMm.push(values[1]);
    trace.forceCN.push(values[2]);
    trace.vib.push(values[3]);
  }
  return trace;
}

/** Rendered force vs displacement as an SVG path in the curve chart's frame. */
export function tracePath(
  trace: TraceData,
  doc: ModelDoc,
  maxForce: number,
  box: ChartBox = DEFAULT_BOX,
): string {
  const innerW = box.width - 2 * box.padding;
  const innerH = box.height - 2 * box.padding;
  const parts: string[] = [];
  for (let k = 0; k < trace.dispMm.length; k++) {
    const x = box.padding
      + (innerW * Math.min(Math.max(trace.dispMm[k], 0), doc.travel_mm))
      / doc.travel_mm;
    const y = box.height - box.padding
      - (innerH * Math.min(Math.max(trace.forceCN[k], 0), maxForce)) / maxForce;
    parts.push(`${k === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`);
  }
  return parts.join(" ");
}

/** Chart x positions of vibration onsets (event ticks mapped through the trace). */
export function vibrationMarkerXs(
  trace: TraceData,
  events: { tick: number; event: string }[],
  doc: ModelDoc,
  box: ChartBox = DEFAULT_BOX,
): number[] {
  const innerW = box.width - 2 * box.padding;
  const xs: number[] = [];
  for (const { tick, event } of events) {
    if (event !== "vibration_started" || tick < 0 || tick >= trace.dispMm.length) {
      continue;
    }
    xs.push(box.padding + (innerW * trace.dispMm[tick]) / doc.travel_mm);
  }
  return xs;
}
