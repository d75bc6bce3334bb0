/**
 * Editor session state: the loaded model, a working copy driven by named
 * edit ops with undo, and the results of what-if runs.
 *
 * Numeric results shown in the UI (mean error, convergence series) are taken
 * verbatim from server artifacts; the client never recomputes them.
 */

import { ApiClient } from "./api.js";
import { applyEditOp, replayEdits } from "./editOps.js";
import { parseTraceCsv, type TraceData } from "./trace.js";
import type {
  Direction,
  EditOp,
  JobRecord,
  ModelDoc,
  ModelRecord,
  ProgressSnapshot,
  RenderSummary,
  TrajectorySpec,
} from "./types.js";
import { validateModelDoc } from "./validate.js";

export interface WhatIfResult {
  jobId: string;
  status: string;
  /** Displayed value; sourced from the render job's summary artifact. */
  meanErrorCN: number | null;
  events: { tick: number; event: string }[];
  /** Rendered trace for the overlay chart, parsed from the trace artifact. */
  trace: TraceData | null;
}

export interface CompensationResult {
  jobId: string;
  status: string;
  series: ProgressSnapshot[];
  summary: Record<string, unknown> | null;
  tableDoc: Record<string, unknown> | null;
}

export class EditorSession {
  loaded: ModelRecord | null = null;
  working: ModelDoc | null = null;
  selectedDirection: Direction = "press";
  selectedBin = 0;
  undoStack: EditOp[] = [];
  lastWhatIf: WhatIfResult | null = null;
  lastCompensation: CompensationResult | null = null;

  constructor(private readonly api: ApiClient) {}

  async load(modelId: string): Promise<ModelDoc> {
    this.loaded = await this.api.getModel(modelId);
    this.working = JSON.parse(JSON.stringify(this.loaded.model)) as ModelDoc;
    this.undoStack = [];
    this.selectedDirection = "press";
    this.selectedBin = 0;
    return this.working;
  }

  private requireLoaded(): ModelRecord {
    if (!this.loaded || !this.working) {
      throw new Error("no model loaded");
    }
    return this.loaded;
  }

  /** Apply one named edit to the working copy and remember it for save. */
  edit(op: EditOp): ModelDoc {
    this.requireLoaded();
    this.working = applyEditOp(this.working!, op);
    this.undoStack.push(op);
    return this.working;
  }

  /** Drop the most recent edit; the working copy replays from the loaded state. */
  undo(): ModelDoc {
    const record = this.requireLoaded();
    this.undoStack.pop();
    this.working = replayEdits(record.model, this.undoStack);
    return this.working;
  }

  get dirty(): boolean {
    return this.undoStack.length > 0;
  }

  /** Violations of the working copy (client-side mirror; server re-checks). */
  validation(): string[] {
    this.requireLoaded();
    return validateModelDoc(this.working!);
  }

  get canSave(): boolean {
    return this.validation().length === 0;
  }

  /**
   * Save the pending edits as a chain of named edit ops, producing one child
   * record per op (lineage preserved). With no pending edits this still
   * creates one identity child (scale by 1), so "save" always yields a
   * record whose parent chain reaches the loaded model.
   */
  async save(): Promise<ModelRecord> {
    const record = this.requireLoaded();
    if (!this.canSave) {
      throw new Error("working copy is invalid: " + this.validation().join("; "));
    }
    const edits: EditOp[] = this.dirty
      ? this.undoStack
      : [{ op: "scale_force", params: { factor: 1.0 } }];
    let current = record;
    for (const edit of edits) {
      current = await this.api.editModel(current.id, edit);
    }
    this.loaded = current;
    this.working = JSON.parse(JSON.stringify(current.model)) as ModelDoc;
    this.undoStack = [];
    return current;
  }

  /**
   * What-if press: render the given actuation table against a plant and
   * report the server-computed force error for the working model's id.
   */
  async whatIfRun(
    plant: string | Record<string, number>,
    tableDoc: Record<string, unknown>,
    trajectory: TrajectorySpec,
  ): Promise<WhatIfResult> {
    const record = this.requireLoaded();
    const { id } = await this.api.submitJob({
      kind: "render",
      model_id: record.id,
      plant,
      table: tableDoc,
      trajectory,
    });
    const job = await this.api.followJob(id);
    let summary: RenderSummary | null = null;
    if (job.artifacts["summary"]) {
      summary = await this.api.fetchArtifactJson<RenderSummary>(
        id,
        job.artifacts["summary"],
      );
    }
    let trace: TraceData | null = null;
    if (job.artifacts["trace"]) {
      trace = parseTraceCsv(
        await this.api.fetchArtifact(id, job.artifacts["trace"]));
    }
    this.lastWhatIf = {
      jobId: id,
      status: job.status,
      meanErrorCN: summary ? summary.mean_abs_error_cN : null,
      events: summary ? summary.events : [],
      trace,
    };
    return this.lastWhatIf;
  }

  /** Compensate the loaded model; convergence series streams via long-poll. */
  async runCompensation(
    plant: string | Record<string, number>,
    config: Record<string, unknown> = {},
    onSnapshot?: (snapshot: ProgressSnapshot) => void,
  ): Promise<CompensationResult> {
    const record = this.requireLoaded();
    const { id } = await this.api.submitJob({
      kind: "compensate",
      model_id: record.id,
      plant,
      config,
    });
    const series: ProgressSnapshot[] = [];
    const job: JobRecord = await this.api.followJob(id, (snapshot) => {
      series.push(snapshot);
      onSnapshot?.(snapshot);
    });
    let tableDoc: Record<string, unknown> | null = null;
    if (job.artifacts["table"]) {
      tableDoc = await this.api.fetchArtifactJson(id, job.artifacts["table"]);
    }
    this.lastCompensation = {
      jobId: id,
      status: job.status,
      series,
      summary: (job.summary as Record<string, unknown>) ?? null,
      tableDoc,
    };
    return this.lastCompensation;
  }
}
