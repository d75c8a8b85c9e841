/**
 * Client for the inpainting job service.  All generation goes through the
 * HTTP API; the UI never runs sampler logic itself.  One submission may be
 * in flight at a time; polling runs at 1 s intervals and backs off on
 * transient network failures.
 */

export interface JobParams {
  steps: number;
  repaints: number;
  n_samples: number;
  top_k: number;
  eta: number;
  seed: number;
  checkpoint?: string;
}

export interface JobResult {
  rank: number;
  score: number;
  seed_offset: number;
  png_url: string;
  midi_url: string;
}

export interface JobOutcome {
  job_id: string;
  status: string;
  sample_scores: number[];
  results: JobResult[];
}

export interface ClientOptions {
  fetchImpl?: typeof fetch;
  /** Injectable for tests; defaults to real timers. */
  sleep?: (ms: number) => Promise<void>;
  pollIntervalMs?: number;
  maxNetworkRetries?: number;
  onProgress?: (progress: number, status: string) => void;
  onNotice?: (message: string) => void;
}

/** Validation failure from the service, with per-field messages. */
export class FieldErrors extends Error {
  constructor(readonly fields: Record<string, string>) {
    super(Object.entries(fields)
      .map(([field, message]) => `${field}: ${message}`)
      .join("; "));
  }
}

/** Clamp control values to the server-side invariant ranges. */
export function clampParams(params: Partial<JobParams>): JobParams {
  const int = (value: number | undefined, fallback: number, lo: number,
               hi: number) =>
    Math.min(hi, Math.max(lo, Math.round(value ?? fallback)));
  const n = int(params.n_samples, 1, 1, 1000);
  return {
    steps: int(params.steps, 50, 1, 1000),
    repaints: int(params.repaints, 1, 1, 16),
    n_samples: n,
    top_k: int(params.top_k, 1, 1, n),
    eta: Math.min(10, Math.max(0, params.eta ?? 1.0)),
    seed: Math.round(params.seed ?? 0),
    ...(params.checkpoint ? { checkpoint: params.checkpoint } : {}),
  };
}

export function base64Encode(bytes: Uint8Array): string {
  const alphabet =
    "ABCDEFGHIJKLMNOPQRSTUVWXYZabcdefghijklmnopqrstuvwxyz0123456789+/";
  let out = "";
  for (let i = 0; i < bytes.length; i += 3) {
    const a = bytes[i];
    const b = i + 1 < bytes.length ? bytes[i + 1] : 0;
    const c = i + 2 < bytes.length ? bytes[i + 2] : 0;
    out += alphabet[a >> 2] + alphabet[((a & 3) << 4) | (b >> 4)];
    out += i + 1 < bytes.length ? alphabet[((b & 15) << 2) | (c >> 6)] : "=";
    out += i + 2 < bytes.length ? alphabet[c & 63] : "=";
  }
  return out;
}

export class ServiceClient {
  private inFlight = false;

  constructor(readonly baseUrl: string,
              private readonly options: ClientOptions = {}) {}

  get busy(): boolean {
    return this.inFlight;
  }

  async uploadRoll(data: Uint8Array,
                   contentType: string): Promise<{ id: string }> {
    const response = await this.request("/v1/rolls", {
      method: "POST",
      headers: { "content-type": contentType },
      body: data,
    });
    return response.json();
  }

  /** Submit a job and poll until it finishes; resolves with ranked results. */
  async submitAndPoll(rollId: string, maskPng: Uint8Array,
                      params: Partial<JobParams>): Promise<JobOutcome> {
    if (this.inFlight) {
      throw new Error("a submission is already in flight");
    }
    this.inFlight = true;
    try {
      const body = {
        roll_id: rollId,
        mask: { png_base64: base64Encode(maskPng) },
        ...clampParams(params),
      };
      const submitted = await this.request("/v1/jobs", {
        method: "POST",
        headers: { "content-type": "application/json" },
        body: JSON.stringify(body),
      });
      const { job_id } = await submitted.json();
      const manifest = await this.poll(job_id);
      if (manifest.status === "failed") {
        throw new Error(manifest.error || "job failed");
      }
      const results = await this.request(`/v1/jobs/${job_id}/results`);
      return {
        job_id,
        status: manifest.status,
        sample_scores: manifest.sample_scores ?? [],
        results: await results.json(),
      };
    } finally {
      this.inFlight = false;
    }
  }

  private async poll(jobId: string): Promise<any> {
    const base = this.options.pollIntervalMs ?? 1000;
    const sleep = this.options.sleep ??
      ((ms: number) => new Promise<void>((r) => setTimeout(r, ms)));
    let failures = 0;
    for (;;) {
      await sleep(base * 2 ** Math.min(failures, 5));
      let manifest;
      try {
        const response = await this.request(`/v1/jobs/${jobId}`);
        manifest = await response.json();
      } catch (err) {
        failures += 1;
        const max = this.options.maxNetworkRetries ?? 5;
        if (failures > max) throw err;
        this.options.onNotice?.(
          `connection lost while polling, retrying (${failures}/${max})`);
        continue;
      }
      failures = 0;
      this.options.onProgress?.(manifest.progress ?? 0, manifest.status);
      if (manifest.status === "done" || manifest.status === "failed") {
        return manifest;
      }
    }
  }

  private async request(path: string, init?: RequestInit): Promise<Response> {
    const fetchImpl = this.options.fetchImpl ?? fetch;
    const response = await fetchImpl(`${this.baseUrl}${path}`, init);
    if (response.status === 422) {
      const payload = await response.json();
      const detail = payload?.detail ?? payload;
      throw new FieldErrors(
        typeof detail === "object" ? detail : { request: String(detail) });
    }
    if (!response.ok) {
      let message = `${response.status}`;
      try {
        const payload = await response.json();
        message = payload?.detail ?? message;
      } catch {
        // non-JSON error body; keep the status code
      }
      throw new Error(`request ${path} failed: ${message}`);
    }
    return response;
  }
}
