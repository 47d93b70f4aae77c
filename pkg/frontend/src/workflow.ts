/** Submit-and-poll orchestration tying sessions to the service client.
 *
 * One generation may be in flight per session. Validation failures are
 * mapped back onto the offending tracks so the canvas can badge them
 * inline; a finished job hands its frames to the playback layer.
 */

import { ServiceClient, ValidationFailure, type PollOptions } from "./api.js";
import { CanvasSession } from "./session.js";
import { readStoredZip, resultFrames } from "./zip.js";
import type { JobView, ValidationReport, Violation } from "./types.js";

export type SubmitOutcome =
  | { kind: "invalid"; report: ValidationReport }
  | { kind: "failed"; job: JobView }
  | { kind: "done"; job: JobView; frames: Uint8Array[] };

/** Group violations by track id; "" collects triplet-level ones. */
export function badgesByTrack(report: ValidationReport): Map<string, Violation[]> {
  const out = new Map<string, Violation[]>();
  for (const v of report.violations) {
    const list = out.get(v.track_id) ?? [];
    list.push(v);
    out.set(v.track_id, list);
  }
  return out;
}

export interface SubmitOptions {
  steps?: number;
  seed?: number;
  idempotencyKey?: string;
  poll?: PollOptions;
}

export class GenerationInFlight extends Error {
  constructor() {
    super("a generation is already in flight for this session");
    this.name = "GenerationInFlight";
  }
}

const inFlight = new WeakSet<CanvasSession>();

/** Run a session end to end: validate, submit, poll, fetch frames.
 *
 * Client-side validation runs first with the same rules the server uses,
 * so most bad requests never leave the browser; a server-side 400 is
 * mapped to the identical shape.
 */
export async function submitAndPoll(
  client: ServiceClient,
  session: CanvasSession,
  opts: SubmitOptions = {},
): Promise<SubmitOutcome> {
  if (inFlight.has(session)) throw new GenerationInFlight();
  if (session.backgroundAsset === null) {
    throw new Error("session needs a background image before submitting");
  }
  const report = session.validate();
  if (!report.ok) return { kind: "invalid", report };

  inFlight.add(session);
  try {
    let jobId: string;
    try {
      jobId = await client.submitGeneration({
        triplet: session.exportTriplet(),
        firstFrameAsset: session.backgroundAsset,
        steps: opts.steps ?? 20,
        seed: opts.seed ?? 0,
        idempotencyKey: opts.idempotencyKey,
      });
    } catch (e) {
      if (e instanceof ValidationFailure) return { kind: "invalid", report: e.report };
      throw e;
    }
    session.markSubmitted(jobId);

    const job = await client.pollJob(jobId, opts.poll);
    if (job.state === "failed") return { kind: "failed", job };

    const archive = readStoredZip(await client.getResult(jobId));
    const frames = resultFrames(archive);
    session.playback = { status: "playing", frame: 0 };
    return { kind: "done", job, frames };
  } finally {
    inFlight.delete(session);
  }
}
