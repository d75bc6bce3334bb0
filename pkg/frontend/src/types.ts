/**
 * Wire types for the workbench HTTP API.
 * Field names mirror the server's stable JSON contract (see docs/api.md in
 * the repository root); nothing here is recomputed client-side.
 */

export type Direction = "press" | "release";

export interface VelocityBinDoc {
  lo_mm_s: number;
  hi_mm_s: number;
  center_mm_s: number;
}

export interface CurveDoc {
  direction: Direction;
  bin: number;
  force_cN: number[];
}

export interface VibrationDoc {
  trigger_mm: number;
  direction: Direction;
  sample_rate_hz: number;
  samples: number[];
}

export interface ModelDoc {
  schema_version: number;
  name: string;
  travel_mm: number;
  step_mm: number;
  bins: VelocityBinDoc[];
  curves: CurveDoc[];
  vibrations: VibrationDoc[];
}

export interface ModelRecord {
  id: string;
  created_at_ms: number;
  updated_at_ms: number;
  parent_id: string | null;
  model: ModelDoc;
}

export interface EditOp {
  op: string;
  params: Record<string, number | string>;
}

export type JobStatus =
  | "queued"
  | "running"
  | "done"
  | "failed"
  | "non_converged";

export interface ProgressSnapshot {
  snapshot: number;
  direction: Direction;
  bin: number;
  iteration: number;
  mean_err_cN: number;
  max_err_cN: number;
}

export interface JobRecord {
  id: string;
  kind: "compensate" | "render" | "synth";
  status: JobStatus;
  inputs: Record<string, unknown>;
  progress: ProgressSnapshot[];
  artifacts: Record<string, string>;
  error: string | null;
  summary?: Record<string, unknown>;
}

export interface ProgressChunk {
  status: JobStatus;
  snapshots: ProgressSnapshot[];
  next_cursor: number;
}

export interface PlantPreset {
  name: string;
  config: Record<string, number>;
}

export interface TrajectorySpec {
  travel_mm: number;
  peak_velocity_mm_s: number;
  tick_rate_hz?: number;
  dwell_ms?: number;
}

/** Summary artifact written by render (what-if) jobs. */
export interface RenderSummary {
  mean_abs_error_cN: number | null;
  events: { tick: number; event: string }[];
}

export const TERMINAL_STATUSES: JobStatus[] = ["done", "failed", "non_converged"];

export function isTerminal(status: JobStatus): boolean {
  return TERMINAL_STATUSES.includes(status);
}
