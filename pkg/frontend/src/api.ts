/** HTTP client for the generation service.
 *
 * The transport is injectable so tests can run against a scripted stub;
 * the default wraps global fetch. Polling retries transient network
 * failures with exponential backoff and resumes where it left off.
 */

import type {
  JobView,
  ServiceConfig,
  TripletJson,
  ValidationReport,
} from "./types.js";

export interface HttpResponse {
  status: number;
  text(): Promise<string>;
  bytes(): Promise<Uint8Array>;
}

export interface HttpRequest {
  method: string;
  headers?: Record<string, string>;
  body?: string | Uint8Array;
}

export type HttpFn = (url: string, init: HttpRequest) => Promise<HttpResponse>;

/** Non-2xx response that is not a validation failure. */
export class ApiError extends Error {
  readonly status: number;

  constructor(status: number, message: string) {
    super(message);
    this.name = "ApiError";
    this.status = status;
  }
}

/** 400 from job submission: the server's ValidationReport, field by field. */
export class ValidationFailure extends Error {
  readonly report: ValidationReport;

  constructor(report: ValidationReport) {
    const first = report.violations[0];
    super(first ? `${first.path}: ${first.message}` : "validation failed");
    this.name = "ValidationFailure";
    this.report = report;
  }
}

export interface SubmitRequest {
  triplet: TripletJson;
  firstFrameAsset: string;
  steps: number;
  seed: number;
  idempotencyKey?: string;
}

export interface PollOptions {
  intervalMs?: number;
  backoffFactor?: number;
  maxIntervalMs?: number;
  /** Consecutive network failures tolerated before giving up. */
  maxNetworkRetries?: number;
  sleep?: (ms: number) => Promise<void>;
  onUpdate?: (job: JobView) => void;
}

const realSleep = (ms: number) => new Promise<void>((r) => setTimeout(r, ms));

function defaultHttp(): HttpFn {
  return async (url, init) => {
    const res = await fetch(url, {
      method: init.method,
      headers: init.headers,
      body: init.body as BodyInit | undefined,
    });
    return {
      status: res.status,
      text: () => res.text(),
      bytes: async () => new Uint8Array(await res.arrayBuffer()),
    };
  };
}

async function errorText(res: HttpResponse): Promise<string> {
  try {
    const body = JSON.parse(await res.text()) as { error?: string };
    if (body && typeof body.error === "string") return body.error;
  } catch {
    // fall through to the generic message
  }
  return `unexpected status ${res.status}`;
}

export class ServiceClient {
  private readonly base: string;
  private readonly http: HttpFn;

  constructor(baseUrl: string, http?: HttpFn) {
    this.base = baseUrl.replace(/\/+$/, "");
    this.http = http ?? defaultHttp();
  }

  /** Upload a PNG; returns the content-addressed asset id. */
  async uploadAsset(png: Uint8Array, kind: string): Promise<string> {
    const res = await this.http(
      `${this.base}/assets?kind=${encodeURIComponent(kind)}`,
      { method: "POST", headers: { "content-type": "image/png" }, body: png },
    );
    if (res.status !== 201) throw new ApiError(res.status, await errorText(res));
    const body = JSON.parse(await res.text()) as { asset_id: string };
    return body.asset_id;
  }

  async fetchAsset(assetId: string): Promise<Uint8Array> {
    const res = await this.http(`${this.base}/assets/${assetId}`, { method: "GET" });
    if (res.status !== 200) throw new ApiError(res.status, await errorText(res));
    return res.bytes();
  }

  /** Queue a generation job; resolves to the job id. */
  async submitGeneration(req: SubmitRequest): Promise<string> {
    const headers: Record<string, string> = { "content-type": "application/json" };
    if (req.idempotencyKey) headers["Idempotency-Key"] = req.idempotencyKey;
    const res = await this.http(`${this.base}/jobs/generate`, {
      method: "POST",
      headers,
      body: JSON.stringify({
        triplet: req.triplet,
        first_frame_asset: req.firstFrameAsset,
        steps: req.steps,
        seed: req.seed,
      }),
    });
    if (res.status === 400) {
      const report = JSON.parse(await res.text()) as ValidationReport;
      throw new ValidationFailure(report);
    }
    if (res.status !== 202) throw new ApiError(res.status, await errorText(res));
    const body = JSON.parse(await res.text()) as { job_id: string };
    return body.job_id;
  }

  async getJob(jobId: string): Promise<JobView> {
    const res = await this.http(`${this.base}/jobs/${jobId}`, { method: "GET" });
    if (res.status !== 200) throw new ApiError(res.status, await errorText(res));
    return JSON.parse(await res.text()) as JobView;
  }

  /** Download the result archive of a finished job. */
  async getResult(jobId: string): Promise<Uint8Array> {
    const res = await this.http(`${this.base}/jobs/${jobId}/result`, { method: "GET" });
    if (res.status !== 200) throw new ApiError(res.status, await errorText(res));
    return res.bytes();
  }

  async getConfig(): Promise<ServiceConfig> {
    const res = await this.http(`${this.base}/config`, { method: "GET" });
    if (res.status !== 200) throw new ApiError(res.status, await errorText(res));
    return JSON.parse(await res.text()) as ServiceConfig;
  }

  /** Poll a job until it reaches a terminal state.
   *
   * Transient transport errors are retried with exponential backoff; the
   * retry budget resets after every successful poll, so a flaky link only
   * fails the call once it stays down.
   */
  async pollJob(jobId: string, opts: PollOptions = {}): Promise<JobView> {
    const baseInterval = opts.intervalMs ?? 250;
    const factor = opts.backoffFactor ?? 2;
    const maxInterval = opts.maxIntervalMs ?? 4000;
    const maxRetries = opts.maxNetworkRetries ?? 5;
    const sleep = opts.sleep ?? realSleep;

    let failures = 0;
    let interval = baseInterval;
    for (;;) {
      let job: JobView;
      try {
        job = await this.getJob(jobId);
      } catch (e) {
        if (e instanceof ApiError) throw e; // HTTP-level errors are final
        failures += 1;
        if (failures > maxRetries) throw e;
        await sleep(interval);
        interval = Math.min(interval * factor, maxInterval);
        continue;
      }
      failures = 0;
      interval = baseInterval;
      opts.onUpdate?.(job);
      if (job.state === "done" || job.state === "failed") return job;
      await sleep(baseInterval);
    }
  }
}
