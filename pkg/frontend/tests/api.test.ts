import { describe, expect, it } from "vitest";

import { ApiClient, ApiError } from "../src/api.js";
import type { ProgressChunk } from "../src/types.js";

describe("ApiClient", () => {
  it("surfaces violations from a 400", async () => {
    const client = new ApiClient("http://x", async () =>
      new Response(
        JSON.stringify({ error: "model document rejected",
          violations: ["curves[press,0]: length 2 != grid point count 21"] }),
        { status: 400 },
      ));
    const err = await client
      .createModel({} as never)
      .then(() => null, (e: unknown) => e as ApiError);
    expect(err).toBeInstanceOf(ApiError);
    expect(err!.status).toBe(400);
    expect(err!.violations[0]).toMatch(/curves/);
  });

  it("followJob drains snapshots then returns the terminal record", async () => {
    const chunks: ProgressChunk[] = [
      { status: "running",
        snapshots: [{ snapshot: 1, direction: "press", bin: 0, iteration: 1,
          mean_err_cN: 5, max_err_cN: 9 }],
        next_cursor: 1 },
      { status: "done",
        snapshots: [{ snapshot: 2, direction: "press", bin: 0, iteration: 2,
          mean_err_cN: 1, max_err_cN: 2 }],
        next_cursor: 2 },
      { status: "done", snapshots: [], next_cursor: 2 },
    ];
    let call = 0;
    const client = new ApiClient("http://x", async (url) => {
      if (url.includes("/progress")) {
        return new Response(JSON.stringify(chunks[call++]), { status: 200 });
      }
      return new Response(
        JSON.stringify({ id: "j1", kind: "compensate", status: "done",
          inputs: {}, progress: [], artifacts: {}, error: null }),
        { status: 200 },
      );
    });
    const seen: number[] = [];
    const job = await client.followJob("j1", (s) => seen.push(s.snapshot));
    expect(seen).toEqual([1, 2]);
    expect(job.status).toBe("done");
    expect(call).toBe(3);
  });

  it("deletes resolve on 204 with empty body", async () => {
    const client = new ApiClient("http://x", async () =>
      new Response(null, { status: 204 }));
    await expect(client.deleteModel("m1")).resolves.toBeUndefined();
  });
});
