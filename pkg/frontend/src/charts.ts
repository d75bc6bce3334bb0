/**
 * Pure chart geometry: SVG path strings for force-displacement curves
 * (displacement on x, force on y, press/release arrows) and per-iteration
 * convergence series. No DOM access here so everything is unit-testable.
 */

import type { CurveDoc, ModelDoc, ProgressSnapshot } from "./types.js";

export interface ChartBox {
  width: number;
  height: number;
  padding: number;
}

export const DEFAULT_BOX: ChartBox = { width: 640, height: 320, padding: 24 };

export function forceScale(doc: ModelDoc): number {
  let max = 0;
  for (const curve of doc.curves) {
    for (const f of curve.force_cN) {
      if (f > max) {
        max = f;
      }
    }
  }
  return max > 0 ? max : 1;
}

export function curveToPath(
  curve: CurveDoc,
  doc: ModelDoc,
  box: ChartBox = DEFAULT_BOX,
  maxForce = forceScale(doc),
): string {
  const innerW = box.width - 2 * box.padding;
  const innerH = box.height - 2 * box.padding;
  const n = curve.force_cN.length;
  const parts: string[] = [];
  for (let k = 0; k < n; k++) {
    const x = box.padding + (innerW * (k * doc.step_mm)) / doc.travel_mm;
    const y = box.height - box.padding - (innerH * curve.force_cN[k]) / maxForce;
    parts.push(`${k === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`);
  }
  return parts.join(" ");
}

/** Arrow marker midway along the curve: right for press, left for release. */
export function directionArrow(
  curve: CurveDoc,
  doc: ModelDoc,
  box: ChartBox = DEFAULT_BOX,
  maxForce = forceScale(doc),
): { x: number; y: number; dx: number } {
  const innerW = box.width - 2 * box.padding;
  const innerH = box.height - 2 * box.padding;
  const mid = Math.floor(curve.force_cN.length / 2);
  return {
    x: box.padding + (innerW * (mid * doc.step_mm)) / doc.travel_mm,
    y: box.height - box.padding - (innerH * curve.force_cN[mid]) / maxForce,
    dx: curve.direction === "press" ? 1 : -1,
  };
}

export function convergenceToPath(
  series: ProgressSnapshot[],
  box: ChartBox = DEFAULT_BOX,
): string {
  if (series.length === 0) {
    return "";
  }
  const innerW = box.width - 2 * box.padding;
  const innerH = box.height - 2 * box.padding;
  const maxErr = Math.max(...series.map((s) => s.mean_err_cN), 1e-9);
  const maxIter = Math.max(...series.map((s) => s.snapshot));
  return series
    .map((s, i) => {
      const x = box.padding + (innerW * (s.snapshot - 1)) / Math.max(maxIter - 1, 1);
      const y = box.height - box.padding - (innerH * s.mean_err_cN) / maxErr;
      return `${i === 0 ? "M" : "L"}${x.toFixed(2)},${y.toFixed(2)}`;
    })
    .join(" ");
}

/** Map a pointer position inside the chart back to (grid index, force). */
export function pointerToCurvePoint(
  px: number,
  py: number,
  doc: ModelDoc,
  box: ChartBox = DEFAULT_BOX,
  maxForce = forceScale(doc),
): { index: number; force_cN: number } {
  const innerW = box.width - 2 * box.padding;
  const innerH = box.height - 2 * box.padding;
  const nPoints = Math.round(doc.travel_mm / doc.step_mm) + 1;
  const frac = Math.min(Math.max((px - box.padding) / innerW, 0), 1);
  const index = Math.min(Math.round(frac * (nPoints - 1)), nPoints - 1);
  const forceFrac = Math.min(
    Math.max((box.height - box.padding - py) / innerH, 0),
    1,
  );
  return { index, force_cN: forceFrac * maxForce };
}
