/**
 * Thin typed client for the workbench HTTP API. All state changes go through
 * the documented endpoints; the fetch implementation is injectable so unit
 * tests can run against a scripted transport.
 */

import type {
  EditOp,
  JobRecord,
  ModelDoc,
  ModelRecord,
  PlantPreset,
  ProgressChunk,
} from "./types.js";
import { isTerminal } from "./types.js";

export class ApiError extends Error {
  constructor(
    readonly status: number,
    message: string,
    readonly violations: string[] = [],
  ) {
    super(message);
  }
}

type FetchLike = (url: string, init?: RequestInit) => Promise<Response>;

export class ApiClient {
  constructor(
    private readonly baseUrl: string,
    private readonly fetchFn: FetchLike = (url, init) => fetch(url, init),
  ) {}

  private async request<T>(
    method: string,
    path: string,
    body?: unknown,
  ): Promise<T> {
    const response = await this.fetchFn(this.baseUrl + path, {
      method,
      headers: body === undefined ? {} : { "Content-Type": "application/json" },
      body: body === undefined ? undefined : JSON.stringify(body),
    });
    if (response.status === 204) {
      return undefined as T;
    }
    const text = await response.text();
    const payload = text ? JSON.parse(text) : null;
    if (!response.ok) {
      throw new ApiError(
        response.status,
        payload?.error ?? `HTTP ${response.status}`,
        payload?.violations ?? [],
      );
    }
    return payload as T;
  }

  healthz(): Promise<{ status: string }> {
    return this.request("GET", "/healthz");
  }

  listPlants(): Promise<{ plants: PlantPreset[] }> {
    return this.request("GET", "/plants");
  }

  listModels(): Promise<{ models: ModelRecord[] }> {
    return this.request("GET", "/models");
  }

  getModel(id: string): Promise<ModelRecord> {
    return this.request("GET", `/models/${id}`);
  }

  createModel(doc: ModelDoc): Promise<ModelRecord> {
    return this.request("POST", "/models", doc);
  }

  deleteModel(id: string): Promise<void> {
    return this.request("DELETE", `/models/${id}`);
  }

  /** POST one named edit; the server answers with the child record. */
  editModel(id: string, edit: EditOp): Promise<ModelRecord> {
    return this.request("POST", `/models/${id}/edits`, edit);
  }

  submitJob(body: Record<string, unknown>): Promise<{ id: string }> {
    return this.request("POST", "/jobs", body);
  }

  getJob(id: string): Promise<JobRecord> {
    return this.request("GET", `/jobs/${id}`);
  }

  pollProgress(
    id: string,
    since: number,
    timeoutMs = 10000,
  ): Promise<ProgressChunk> {
    return this.request(
      "GET",
      `/jobs/${id}/progress?since=${since}&timeout_ms=${timeoutMs}`,
    );
  }

  async fetchArtifact(id: string, name: string): Promise<string> {
    const response = await this.fetchFn(
      `${this.baseUrl}/jobs/${id}/artifacts/${name}`,
      { method: "GET" },
    );
    if (!response.ok) {
      throw new ApiError(response.status, `artifact ${name} unavailable`);
    }
    return response.text();
  }

  async fetchArtifactJson<T>(id: string, name: string): Promise<T> {
    return JSON.parse(await this.fetchArtifact(id, name)) as T;
  }

  /**
   * Long-poll progress until the job is terminal; onSnapshot fires for each
   * new snapshot in order.
   */
  async followJob(
    id: string,
    onSnapshot?: (snapshot: ProgressChunk["snapshots"][number]) => void,
    timeoutMs = 10000,
  ): Promise<JobRecord> {
    let cursor = 0;
    for (;;) {
      const chunk = await this.pollProgress(id, cursor, timeoutMs);
      for (const snapshot of chunk.snapshots) {
        onSnapshot?.(snapshot);
      }
      cursor = chunk.next_cursor;
      if (isTerminal(chunk.status) && chunk.snapshots.length === 0) {
        return this.getJob(id);
      }
    }
  }
}
