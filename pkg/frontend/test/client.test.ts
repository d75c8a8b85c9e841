import { describe, expect, it } from "vitest";
import { FieldErrors, ServiceClient, base64Encode,
         clampParams } from "../src/client.js";
import { MaskLayer } from "../src/mask.js";

/** In-memory stand-in for the inpainting service. */
function stubService(options: { pollsUntilDone?: number;
                                failNetwork?: number } = {}) {
  let polls = 0;
  let networkFailures = options.failNetwork ?? 0;
  const requests: { path: string; body?: any }[] = [];
  const jobId = "job-123";
  const fetchImpl = (async (url: string, init?: RequestInit) => {
    const path = url.replace("http://svc", "");
    const body = init?.body && typeof init.body === "string"
      ? JSON.parse(init.body) : undefined;
    requests.push({ path, body });
    const json = (payload: any, status = 200) =>
      new Response(JSON.stringify(payload), { status });
    if (path === "/v1/jobs" && init?.method === "POST") {
      if (body.checkpoint === "missing.pomck") {
        return json({ detail: { checkpoint: "no such checkpoint" } }, 422);
      }
      return json({ job_id: jobId }, 202);
    }
    if (path === `/v1/jobs/${jobId}`) {
      if (networkFailures > 0) {
        networkFailures -= 1;
        throw new TypeError("fetch failed");
      }
      polls += 1;
      const wanted = options.pollsUntilDone ?? 2;
      return json(polls >= wanted
        ? { status: "done", progress: 1.0, sample_scores: [3.5, 1.25] }
        : { status: "running", progress: polls / wanted });
    }
    if (path === `/v1/jobs/${jobId}/results`) {
      return json([
        { rank: 0, score: 3.5, seed_offset: 1,
          png_url: `/v1/results/${jobId}/0.png`,
          midi_url: `/v1/results/${jobId}/0.mid` },
        { rank: 1, score: 1.25, seed_offset: 0,
          png_url: `/v1/results/${jobId}/1.png`,
          midi_url: `/v1/results/${jobId}/1.mid` },
      ]);
    }
    return json({ detail: "not found" }, 404);
  }) as unknown as typeof fetch;
  return { fetchImpl, requests };
}

const instantSleep = () => Promise.resolve();

function somePng(): Uint8Array {
  const mask = new MaskLayer();
  mask.rect({ x: 10, y: 20 }, { x: 60, y: 80 });
  return mask.exportPng();
}

describe("submit and poll", () => {
  it("round trips a job against a stubbed service", async () => {
    const { fetchImpl, requests } = stubService({ pollsUntilDone: 3 });
    const progress: number[] = [];
    const client = new ServiceClient("http://svc", {
      fetchImpl, sleep: instantSleep,
      onProgress: (value) => progress.push(value),
    });
    const outcome = await client.submitAndPoll("roll-1", somePng(), {
      steps: 6, repaints: 2, n_samples: 4, top_k: 2, eta: 1.0, seed: 7,
    });
    expect(outcome.job_id).toBe("job-123");
    expect(outcome.status).toBe("done");
    expect(outcome.results.map((r) => r.rank)).toEqual([0, 1]);
    expect(outcome.results[0].score).toBeGreaterThanOrEqual(
      outcome.results[1].score);
    // submission body carries the roll, the base64 mask, and the params
    const submit = requests.find((r) => r.path === "/v1/jobs")!;
    expect(submit.body.roll_id).toBe("roll-1");
    expect(submit.body.mask.png_base64).toBe(base64Encode(somePng()));
    expect(submit.body.steps).toBe(6);
    // progress is monotone non-decreasing
    for (let i = 1; i < progress.length; i++) {
      expect(progress[i]).toBeGreaterThanOrEqual(progress[i - 1]);
    }
  });

  it("surfaces 422 field errors with field-level messages", async () => {
    const { fetchImpl } = stubService();
    const client = new ServiceClient("http://svc",
                                     { fetchImpl, sleep: instantSleep });
    const error = await client
      .submitAndPoll("roll-1", somePng(), { checkpoint: "missing.pomck" })
      .catch((err) => err);
    expect(error).toBeInstanceOf(FieldErrors);
    expect(error.fields.checkpoint).toBe("no such checkpoint");
    expect(client.busy).toBe(false);
  });

  it("retries polling over transient network failures", async () => {
    const { fetchImpl } = stubService({ failNetwork: 2, pollsUntilDone: 1 });
    const notices: string[] = [];
    const client = new ServiceClient("http://svc", {
      fetchImpl, sleep: instantSleep,
      onNotice: (text) => notices.push(text),
    });
    const outcome = await client.submitAndPoll("roll-1", somePng(), {});
    expect(outcome.status).toBe("done");
    expect(notices.length).toBe(2);
  });

  it("allows only one submission in flight", async () => {
    const { fetchImpl } = stubService({ pollsUntilDone: 5 });
    const client = new ServiceClient("http://svc",
                                     { fetchImpl, sleep: instantSleep });
    const first = client.submitAndPoll("roll-1", somePng(), {});
    await expect(client.submitAndPoll("roll-1", somePng(), {}))
      .rejects.toThrow(/already in flight/);
    await first;
    expect(client.busy).toBe(false);
  });
});

describe("parameter clamping", () => {
  it("clamps to server invariant ranges", () => {
    expect(clampParams({ steps: 0, repaints: -3, n_samples: 2.7,
                         top_k: 99, eta: -1, seed: 5 }))
      .toEqual({ steps: 1, repaints: 1, n_samples: 3, top_k: 3,
                 eta: 0, seed: 5 });
  });

  it("fills defaults", () => {
    expect(clampParams({})).toEqual({ steps: 50, repaints: 1, n_samples: 1,
                                      top_k: 1, eta: 1.0, seed: 0 });
  });
});

describe("base64", () => {
  it("matches the platform encoder", () => {
    const bytes = Uint8Array.from({ length: 301 }, (_, i) => (i * 7) % 256);
    expect(base64Encode(bytes)).toBe(Buffer.from(bytes).toString("base64"));
  });
});
