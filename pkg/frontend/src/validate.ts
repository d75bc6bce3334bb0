/**
 * Client-side mirror of the server's model validation. The server remains
 * the authority (every save revalidates there); this copy only gates the
 * save button and flags bad geometry inline while editing.
 */

import type { ModelDoc } from "./types.js";

const DIRECTIONS = ["press", "release"] as const;

export function gridPointCount(doc: ModelDoc): number {
  return Math.round(doc.travel_mm / doc.step_mm) + 1;
}

export function validateModelDoc(doc: ModelDoc): string[] {
  const violations: string[] = [];
  if (doc.schema_version !== 1) {
    violations.push(`schema_version: ${doc.schema_version} unsupported`);
  }
  if (!(doc.travel_mm > 0) || !(doc.step_mm > 0)) {
    violations.push("grid: travel_mm and step_mm must be > 0");
  } else {
    const ratio = doc.travel_mm / doc.step_mm;
    if (Math.abs(ratio - Math.round(ratio)) > 1e-9) {
      violations.push(
        `travel_mm ${doc.travel_mm} is not a whole number of steps of ${doc.step_mm}`,
      );
    }
  }
  if (doc.bins.length === 0) {
    violations.push("bins: at least one velocity bin required");
  }
  let previousHi: number | null = null;
  doc.bins.forEach((bin, i) => {
    if (!(bin.lo_mm_s >= 0 && bin.lo_mm_s < bin.hi_mm_s)) {
      violations.push(`bins[${i}]: requires 0 <= lo < hi`);
    }
    if (!(bin.lo_mm_s <= bin.center_mm_s && bin.center_mm_s <= bin.hi_mm_s)) {
      violations.push(`bins[${i}]: center outside [lo, hi]`);
    }
    if (previousHi !== null && bin.lo_mm_s < previousHi) {
      violations.push(`bins[${i}]: overlaps or is out of order with bins[${i - 1}]`);
    }
    previousHi = bin.hi_mm_s;
  });

  const nPoints = gridPointCount(doc);
  const seen = new Set<string>();
  for (const curve of doc.curves) {
    const key = `${curve.direction},${curve.bin}`;
    const label = `curves[${key}]`;
    seen.add(key);
    if (!DIRECTIONS.includes(curve.direction)) {
      violations.push(`${label}: unknown direction`);
      continue;
    }
    if (curve.bin < 0 || curve.bin >= doc.bins.length) {
      violations.push(`${label}: bin index out of range`);
      continue;
    }
    if (curve.force_cN.length !== nPoints) {
      violations.push(
        `${label}: length ${curve.force_cN.length} != grid point count ${nPoints}`,
      );
    } else if (curve.force_cN.some((f) => !Number.isFinite(f) || f < 0)) {
      violations.push(`${label}: values outside [0, inf]`);
    }
  }
  for (const direction of DIRECTIONS) {
    for (let i = 0; i < doc.bins.length; i++) {
      if (!seen.has(`${direction},${i}`)) {
        violations.push(`curves[${direction},${i}]: missing`);
      }
    }
  }
  doc.vibrations.forEach((vib, i) => {
    const label = `vibrations[${i}]`;
    if (!DIRECTIONS.includes(vib.direction)) {
      violations.push(`${label}: unknown direction`);
    }
    if (!(vib.trigger_mm >= 0 && vib.trigger_mm <= doc.travel_mm)) {
      violations.push(`${label}: trigger_mm outside [0, travel]`);
    }
    if (!(vib.sample_rate_hz > 0)) {
      violations.push(`${label}: sample_rate_hz must be > 0`);
    }
    if (vib.samples.some((s) => !Number.isFinite(s) || s < -1 || s > 1)) {
      violations.push(`${label}.samples: values outside [-1, 1]`);
    }
  });
  return violations;
}
