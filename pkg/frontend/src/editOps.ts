/**
 * Local application of the server's named edit operations.
 *
 * The editor keeps a working copy updated with these mirrors so the preview
 * is live, but every saved edit is POSTed to /models/{id}/edits as the same
 * named op, so the server recomputes it and lineage stays intact. The mirror
 * must therefore match the server semantics exactly (the integration test
 * compares both).
 */

import type { Direction, EditOp, ModelDoc } from "./types.js";
import { gridPointCount } from "./validate.js";

function cloneDoc(doc: ModelDoc): ModelDoc {
  return JSON.parse(JSON.stringify(doc)) as ModelDoc;
}

function curveOf(doc: ModelDoc, direction: Direction, bin: number) {
  const curve = doc.curves.find(
    (c) => c.direction === direction && c.bin === bin,
  );
  if (!curve) {
    throw new Error(`no curve for (${direction}, ${bin})`);
  }
  return curve;
}

export function scaleForce(doc: ModelDoc, factor: number): ModelDoc {
  if (!(factor > 0)) {
    throw new Error("scale factor must be > 0");
  }
  const out = cloneDoc(doc);
  for (const curve of out.curves) {
    curve.force_cN = curve.force_cN.map((f) => f * factor);
  }
  return out;
}

export function shiftCurve(
  doc: ModelDoc,
  direction: Direction,
  bin: number,
  deltaCN: number,
): ModelDoc {
  const out = cloneDoc(doc);
  const curve = curveOf(out, direction, bin);
  curve.force_cN = curve.force_cN.map((f) => Math.max(0, f + deltaCN));
  return out;
}

export function setTravel(doc: ModelDoc, travelMm: number): ModelDoc {
  const out = cloneDoc(doc);
  const oldPoints = gridPointCount(doc);
  out.travel_mm = travelMm;
  const newPoints = gridPointCount(out);
  const oldX = (k: number) => k * doc.step_mm;
  for (const curve of out.curves) {
    const source = curve.force_cN;
    const resampled: number[] = [];
    for (let k = 0; k < newPoints; k++) {
      const x = k * out.step_mm;
      if (x >= oldX(oldPoints - 1)) {
        resampled.push(source[oldPoints - 1]);
        continue;
      }
      const cell = Math.min(Math.floor(x / doc.step_mm), oldPoints - 2);
      const t = x / doc.step_mm - cell;
      resampled.push(source[cell] * (1 - t) + source[cell + 1] * t);
    }
    curve.force_cN = resampled;
  }
  for (const vib of out.vibrations) {
    vib.trigger_mm = Math.min(Math.max(vib.trigger_mm, 0), travelMm);
  }
  return out;
}

export function setVibrationTrigger(
  doc: ModelDoc,
  index: number,
  triggerMm: number,
): ModelDoc {
  if (index < 0 || index >= doc.vibrations.length) {
    throw new Error(`no vibration profile at index ${index}`);
  }
  if (!(triggerMm >= 0 && triggerMm <= doc.travel_mm)) {
    throw new Error(`trigger ${triggerMm} outside [0, ${doc.travel_mm}]`);
  }
  const out = cloneDoc(doc);
  out.vibrations[index].trigger_mm = triggerMm;
  return out;
}

export function setCurvePoint(
  doc: ModelDoc,
  direction: Direction,
  bin: number,
  index: number,
  forceCN: number,
  smoothRadius = 0,
): ModelDoc {
  const out = cloneDoc(doc);
  const curve = curveOf(out, direction, bin);
  const n = curve.force_cN.length;
  if (index < 0 || index >= n) {
    throw new Error(`grid index ${index} outside [0, ${n})`);
  }
  if (forceCN < 0) {
    throw new Error("force_cN must be >= 0");
  }
  const delta = forceCN - curve.force_cN[index];
  const lo = Math.max(0, index - smoothRadius);
  const hi = Math.min(n - 1, index + smoothRadius);
  for (let k = lo; k <= hi; k++) {
    const weight = 1 - Math.abs(k - index) / (smoothRadius + 1);
    curve.force_cN[k] = Math.max(0, curve.force_cN[k] + delta * weight);
  }
  curve.force_cN[index] = forceCN;
  return out;
}

/** Apply one named op to a document; throws on unknown ops or bad params. */
export function applyEditOp(doc: ModelDoc, edit: EditOp): ModelDoc {
  const p = edit.params;
  switch (edit.op) {
    case "scale_force":
      return scaleForce(doc, Number(p.factor));
    case "shift_curve":
      return shiftCurve(doc, p.direction as Direction, Number(p.bin),
        Number(p.delta_cN));
    case "set_travel":
      return setTravel(doc, Number(p.travel_mm));
    case "set_vibration_trigger":
      return setVibrationTrigger(doc, Number(p.index), Number(p.trigger_mm));
    case "set_curve_point":
      return setCurvePoint(doc, p.direction as Direction, Number(p.bin),
        Number(p.index), Number(p.force_cN),
        p.smooth_radius === undefined ? 0 : Number(p.smooth_radius));
    default:
      throw new Error(`unknown edit op ${edit.op}`);
  }
}

export function replayEdits(base: ModelDoc, edits: EditOp[]): ModelDoc {
  return edits.reduce((doc, edit) => applyEditOp(doc, edit), cloneDoc(base));
}
