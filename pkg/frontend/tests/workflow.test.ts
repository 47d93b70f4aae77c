/** Submit-poll-playback flow against a scripted stub service. */

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { ApiError, ServiceClient, type HttpFn, type HttpResponse } from "../src/api.js";
import { CanvasSession } from "../src/session.js";
import { GenerationInFlight, badgesByTrack, submitAndPoll } from "../src/workflow.js";
import type { JobView, ValidationReport } from "../src/types.js";

const zipcase = JSON.parse(
  readFileSync(new URL("./fixtures/zipcase.json", import.meta.url), "utf-8"),
) as { zip_b64: string; entries: Record<string, string> };

const zipBytes = new Uint8Array(Buffer.from(zipcase.zip_b64, "base64"));

function jsonResponse(status: number, body: unknown): HttpResponse {
  const text = JSON.stringify(body);
  return {
    status,
    text: async () => text,
    bytes: async () => new TextEncoder().encode(text),
  };
}

function bytesResponse(status: number, bytes: Uint8Array): HttpResponse {
  return {
    status,
    text: async () => new TextDecoder().decode(bytes),
    bytes: async () => bytes,
  };
}

interface StubOptions {
  /** Job state sequence served by successive GET /jobs polls. */
  states?: JobView[];
  /** Reject submission with this report instead of accepting. */
  reject?: ValidationReport;
  /** 1-based poll indices that fail with a network error. */
  dropPolls?: number[];
}

function jobView(state: JobView["state"], progress: number): JobView {
  return {
    job_id: "job-1",
    state,
    progress,
    result_ref: state === "done" ? "results/job-1.zip" : null,
    error_msg: state === "failed" ? "decoder exploded" : null,
  };
}

/** Minimal scripted service: one job, canned poll states, optional faults. */
function stubService(opts: StubOptions = {}) {
  const calls: string[] = [];
  let polls = 0;
  const states = opts.states ?? [
    jobView("queued", 0),
    jobView("running", 0.5),
    jobView("done", 1),
  ];
  const http: HttpFn = async (url, init) => {
    const path = url.replace(/^https?:\/\/[^/]+/, "");
    calls.push(`${init.method} ${path}`);
    if (init.method === "POST" && path.startsWith("/assets")) {
      return jsonResponse(201, { asset_id: "asset-stub" });
    }
    if (init.method === "POST" && path === "/jobs/generate") {
      if (opts.reject) return jsonResponse(400, opts.reject);
      return jsonResponse(202, { job_id: "job-1" });
    }
    if (init.method === "GET" && path === "/jobs/job-1") {
      polls += 1;
      if (opts.dropPolls?.includes(polls)) {
        throw new TypeError("fetch failed: network down");
      }
      return jsonResponse(200, states[Math.min(polls - 1, states.length - 1)]!);
    }
    if (init.method === "GET" && path === "/jobs/job-1/result") {
      return bytesResponse(200, zipBytes);
    }
    return jsonResponse(404, { error: "no such route" });
  };
  return { http, calls };
}

function validSession(): CanvasSession {
  const s = new CanvasSession(64, 64, 8);
  s.setBackground("asset-bg");
  const t = s.drawTrack([[4, 4], [40, 40], [60, 20]]);
  s.setCaption(t.trackId, "the red circle moving right");
  s.setTrackBBox(t.trackId, { cx: 4, cy: 4, w: 8, h: 8 });
  return s;
}

const fastPoll = { intervalMs: 10, sleep: async () => {} };

describe("submit_and_poll", () => {
  it("runs the happy path: submit, poll to done, fetch frames, start playback", async () => {
    const { http, calls } = stubService();
    const client = new ServiceClient("http://svc", http);
    const session = validSession();
    const seen: string[] = [];

    const outcome = await submitAndPoll(client, session, {
      steps: 4,
      seed: 9,
      poll: { ...fastPoll, onUpdate: (j) => seen.push(j.state) },
    });

    expect(outcome.kind).toBe("done");
    if (outcome.kind !== "done") return;
    expect(seen).toEqual(["queued", "running", "done"]);
    expect(outcome.frames.length).toBe(3);
    // Frame bytes come straight out of the archive, unmodified.
    const want = new Uint8Array(Buffer.from(zipcase.entries["frames/0000.png"]!, "base64"));
    expect(outcome.frames[0]).toEqual(want);
    expect(session.lastJobId).toBe("job-1");
    expect(session.isLocked).toBe(true);
    expect(session.playback).toEqual({ status: "playing", frame: 0 });
    expect(calls[0]).toBe("POST /jobs/generate");
    expect(calls[calls.length - 1]).toBe("GET /jobs/job-1/result");
  });

  it("maps a server 400 report onto the offending track", async () => {
    const report: ValidationReport = {
      ok: false,
      violations: [
        {
          track_id: "track00",
          path: "points/visibility",
          message: "length mismatch: 8 points vs 5 visibility flags",
        },
      ],
    };
    const { http } = stubService({ reject: report });
    const client = new ServiceClient("http://svc", http);
    const session = validSession();

    const outcome = await submitAndPoll(client, session, { poll: fastPoll });
    expect(outcome.kind).toBe("invalid");
    if (outcome.kind !== "invalid") return;
    const badges = badgesByTrack(outcome.report);
    expect([...badges.keys()]).toEqual(["track00"]);
    expect(badges.get("track00")![0]!.path).toBe("points/visibility");
    // Rejected submissions leave the session editable.
    expect(session.isLocked).toBe(false);
  });

  it("catches invalid sessions client-side without any network traffic", async () => {
    const { http, calls } = stubService();
    const client = new ServiceClient("http://svc", http);
    const session = new CanvasSession(64, 64, 8);
    session.setBackground("asset-bg");
    session.drawTrack([[1, 1], [5, 5]]); // never captioned

    const outcome = await submitAndPoll(client, session, { poll: fastPoll });
    expect(outcome.kind).toBe("invalid");
    if (outcome.kind !== "invalid") return;
    expect(outcome.report.violations.map((v) => v.path)).toEqual(["bboxes", "captions"]);
    expect(calls).toEqual([]);
  });

  it("retries through a network outage with growing backoff", async () => {
    const { http } = stubService({ dropPolls: [1, 2, 3] });
    const client = new ServiceClient("http://svc", http);
    const session = validSession();
    const sleeps: number[] = [];

    const outcome = await submitAndPoll(client, session, {
      poll: {
        intervalMs: 100,
        backoffFactor: 2,
        maxNetworkRetries: 5,
        sleep: async (ms) => {
          sleeps.push(ms);
        },
      },
    });
    expect(outcome.kind).toBe("done");
    // Three failed polls back off 100, 200, 400; then the link recovers and
    // normal-interval polling resumes.
    expect(sleeps.slice(0, 3)).toEqual([100, 200, 400]);
  });

  it("gives up once consecutive network failures exhaust the budget", async () => {
    const { http } = stubService({ dropPolls: [1, 2, 3, 4] });
    const client = new ServiceClient("http://svc", http);
    const sleeps: number[] = [];
    await expect(
      client.pollJob("job-1", {
        intervalMs: 50,
        backoffFactor: 2,
        maxNetworkRetries: 3,
        sleep: async (ms) => {
          sleeps.push(ms);
        },
      }),
    ).rejects.toThrow(/network down/);
    expect(sleeps).toEqual([50, 100, 200]);
  });

  it("treats HTTP errors as final, not retriable", async () => {
    const http: HttpFn = async () => jsonResponse(404, { error: "job not found" });
    const client = new ServiceClient("http://svc", http);
    await expect(client.pollJob("nope", { sleep: async () => {} })).rejects.toThrow(ApiError);
  });

  it("surfaces failed jobs with the service's error message", async () => {
    const { http } = stubService({
      states: [jobView("queued", 0), jobView("failed", 0.2)],
    });
    const client = new ServiceClient("http://svc", http);
    const outcome = await submitAndPoll(client, validSession(), { poll: fastPoll });
    expect(outcome.kind).toBe("failed");
    if (outcome.kind !== "failed") return;
    expect(outcome.job.error_msg).toBe("decoder exploded");
  });

  it("allows only one generation in flight per session", async () => {
    let release!: () => void;
    const gate = new Promise<void>((r) => {
      release = r;
    });
    const { http } = stubService();
    const gated: HttpFn = async (url, init) => {
      if (url.endsWith("/jobs/job-1")) await gate;
      return http(url, init);
    };
    const client = new ServiceClient("http://svc", gated);
    const session = validSession();

    const first = submitAndPoll(client, session, { poll: fastPoll });
    await new Promise((r) => setTimeout(r, 0)); // let the first submit land
    await expect(submitAndPoll(client, session, { poll: fastPoll })).rejects.toThrow(
      GenerationInFlight,
    );
    release();
    const outcome = await first;
    expect(outcome.kind).toBe("done");
  });
});
