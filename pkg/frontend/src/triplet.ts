/** Client mirror of the triplet wire schema (schema_version "1").
 *
 * Parsing, validation, canonical serialization and track resampling are
 * ports of the Python service's rules, kept rule-for-rule identical so the
 * client accepts exactly the set of documents the server accepts. Golden
 * fixtures generated against the server pin the agreement.
 *
 * Coordinates: origin top-left, x right, y down, pixels at native frame
 * resolution; a point is on-screen inside the closed rectangle [0,w]x[0,h].
 */

import type {
  BBoxJson,
  Point,
  TripletJson,
  TrackJson,
  ValidationReport,
  VisFlag,
  Violation,
} from "./types.js";
import { SCHEMA_VERSION } from "./types.js";

export class TripletError extends Error {
  readonly report: ValidationReport | null;

  constructor(message: string, report: ValidationReport | null = null) {
    super(message);
    this.name = "TripletError";
    this.report = report;
  }
}

export function inFrame(
  x: number,
  y: number,
  width: number,
  height: number,
): boolean {
  return 0 <= x && x <= width && 0 <= y && y <= height;
}

function isNum(v: unknown): v is number {
  return typeof v === "number";
}

function isInt(v: unknown): v is number {
  return typeof v === "number" && Number.isInteger(v);
}

function require(cond: boolean, msg: string): asserts cond {
  if (!cond) throw new TripletError(msg);
}

// --- Validation (invariant rules, same order as the server) -----------------

function firstVisibleIndex(vis: readonly number[]): number {
  for (let i = 0; i < vis.length; i++) {
    if (vis[i] !== 0) return i;
  }
  return -1;
}

function hasEntryTrack(tracks: readonly TrackJson[]): boolean {
  for (const tr of tracks) {
    const first = firstVisibleIndex(tr.visibility);
    if (first > 0) return true;
  }
  return false;
}

export function validateTriplet(triplet: TripletJson): ValidationReport {
  const violations: Violation[] = [];
  const add = (track_id: string, path: string, message: string) =>
    violations.push({ track_id, path, message });
  const [w, h] = triplet.frame_size;
  const T = triplet.num_frames;

  if (T < 2) add("", "num_frames", `num_frames must be >= 2, got ${T}`);

  const seen = new Set<string>();
  for (const tr of triplet.tracks) {
    const tid = tr.track_id;
    if (seen.has(tid)) add(tid, "track_id", "duplicate track_id");
    seen.add(tid);

    if (tr.points.length !== tr.visibility.length) {
      add(
        tid,
        "points/visibility",
        `length mismatch: ${tr.points.length} points vs ` +
          `${tr.visibility.length} visibility flags`,
      );
    }
    if (tr.points.length !== T) {
      add(
        tid,
        "points",
        `track has ${tr.points.length} frames, triplet declares ${T}`,
      );
    }
    const bad = [...new Set<number>(tr.visibility)]
      .filter((v) => v !== 0 && v !== 1)
      .sort((a, b) => a - b);
    if (bad.length) {
      add(tid, "visibility", `visibility values outside {0,1}: [${bad.join(", ")}]`);
    }

    const n = Math.min(tr.points.length, tr.visibility.length);
    for (let t = 0; t < n; t++) {
      const p = tr.points[t]!;
      if (tr.visibility[t] === 1 && !inFrame(p[0], p[1], w, h)) {
        add(tid, `points[${t}]`, "visible point lies outside the frame rectangle");
        break; // one violation per track is enough to localize it
      }
    }

    if (tr.is_background) {
      if (tid in triplet.bboxes) {
        add(tid, "bboxes", "background track must not have a bbox");
      }
      if (tid in triplet.captions) {
        add(tid, "captions", "background track must not have a caption");
      }
    } else {
      if (!(tid in triplet.bboxes)) {
        add(tid, "bboxes", "foreground track missing bbox");
      }
      if (!(tid in triplet.captions)) {
        add(tid, "captions", "foreground track missing caption");
      } else if (!triplet.captions[tid]!.text) {
        add(tid, "captions.text", "foreground caption text must be non-empty");
      }
    }
  }

  const trackIds = new Set(triplet.tracks.map((t) => t.track_id));
  for (const tid of Object.keys(triplet.bboxes)) {
    const bb = triplet.bboxes[tid]!;
    if (!trackIds.has(tid)) add(tid, "bboxes", "bbox refers to unknown track_id");
    if (!(bb.w > 0 && bb.h > 0)) {
      add(tid, "bboxes", `bbox dimensions must be positive, got ${bb.w}x${bb.h}`);
    }
  }
  for (const tid of Object.keys(triplet.captions)) {
    if (!trackIds.has(tid)) add(tid, "captions", "caption refers to unknown track_id");
  }

  triplet.references.forEach((ref, k) => {
    const bb = ref.target_bbox;
    if (!(bb.w > 0 && bb.h > 0)) {
      add("", `references[${k}].target_bbox`, "bbox dimensions must be positive");
      return;
    }
    const x0 = bb.cx - bb.w / 2;
    const y0 = bb.cy - bb.h / 2;
    const x1 = bb.cx + bb.w / 2;
    const y1 = bb.cy + bb.h / 2;
    const intersects = x1 >= 0 && x0 <= w && y1 >= 0 && y0 <= h;
    if (!intersects && !hasEntryTrack(triplet.tracks)) {
      add(
        "",
        `references[${k}].target_bbox`,
        "fully off-screen reference with no entry track to bind to",
      );
    }
  });

  return { ok: violations.length === 0, violations };
}

// --- Parsing (structural rules, same order as the server) -------------------

function parseBBox(b: unknown, where: string): BBoxJson {
  require(
    typeof b === "object" && b !== null && !Array.isArray(b),
    `${where} must have cx, cy, w, h`,
  );
  const o = b as Record<string, unknown>;
  for (const k of ["cx", "cy", "w", "h"]) {
    require(k in o && isNum(o[k]), `${where} must have cx, cy, w, h`);
  }
  return { cx: o.cx as number, cy: o.cy as number, w: o.w as number, h: o.h as number };
}

export function parseTriplet(text: string): TripletJson {
  let obj: unknown;
  try {
    obj = JSON.parse(text);
  } catch (e) {
    throw new TripletError(`malformed JSON: ${(e as Error).message}`);
  }
  require(
    typeof obj === "object" && obj !== null && !Array.isArray(obj),
    "top-level value must be an object",
  );
  const doc = obj as Record<string, unknown>;

  const version = doc.schema_version;
  if (version !== SCHEMA_VERSION) {
    throw new TripletError(
      `unsupported schema_version ${JSON.stringify(version)}, expected ${JSON.stringify(SCHEMA_VERSION)}`,
    );
  }

  const fs = doc.frame_size;
  require(Array.isArray(fs) && fs.length === 2, "frame_size must be [w, h]");
  require(isNum(fs[0]) && isNum(fs[1]), "frame_size must be [w, h]");
  const T = doc.num_frames;
  require(isInt(T), "num_frames must be an integer");

  const tracks: TrackJson[] = [];
  const rawTracks = Array.isArray(doc.tracks) ? doc.tracks : [];
  rawTracks.forEach((t: unknown, i: number) => {
    require(
      typeof t === "object" && t !== null && !Array.isArray(t),
      `tracks[${i}] must be an object`,
    );
    const tr = t as Record<string, unknown>;
    require(typeof tr.track_id === "string", `tracks[${i}].track_id must be a string`);
    const pts = tr.points;
    require(Array.isArray(pts), `tracks[${i}].points must be a list`);
    const points: Point[] = pts.map((p: unknown) => {
      require(
        Array.isArray(p) && p.length === 2 && isNum(p[0]) && isNum(p[1]),
        `tracks[${i}].points entries must be [x, y] numbers`,
      );
      // The server stores coordinates in float32; round here so on-screen
      // checks and re-emission agree with it bit for bit.
      return [Math.fround(p[0] as number), Math.fround(p[1] as number)];
    });
    const vis = tr.visibility;
    require(Array.isArray(vis), `tracks[${i}].visibility must be a list`);
    const visibility: VisFlag[] = vis.map((v: unknown) => {
      require(isInt(v) && (v === 0 || v === 1), `tracks[${i}].visibility values must be 0 or 1`);
      return v as VisFlag;
    });
    tracks.push({
      track_id: tr.track_id as string,
      is_background: Boolean(tr.is_background ?? false),
      points,
      visibility,
    });
  });

  const bboxes: Record<string, BBoxJson> = {};
  const rawBoxes = (doc.bboxes ?? {}) as Record<string, unknown>;
  for (const tid of Object.keys(rawBoxes)) {
    bboxes[tid] = parseBBox(rawBoxes[tid], `bboxes[${tid}]`);
  }

  const captions: Record<string, { text: string; subject_hint: string }> = {};
  const rawCaps = (doc.captions ?? {}) as Record<string, unknown>;
  for (const tid of Object.keys(rawCaps)) {
    const c = rawCaps[tid];
    require(
      typeof c === "object" && c !== null && !Array.isArray(c) &&
        typeof (c as Record<string, unknown>).text === "string",
      `captions[${tid}].text must be a string`,
    );
    const co = c as Record<string, unknown>;
    const hint = co.subject_hint ?? "";
    captions[tid] = {
      text: co.text as string,
      subject_hint: typeof hint === "string" ? hint : String(hint),
    };
  }

  const references: TripletJson["references"] = [];
  const rawRefs = Array.isArray(doc.references) ? doc.references : [];
  rawRefs.forEach((r: unknown, k: number) => {
    require(
      typeof r === "object" && r !== null && !Array.isArray(r) &&
        typeof (r as Record<string, unknown>).image_ref === "string",
      `references[${k}].image_ref must be a string`,
    );
    const ro = r as Record<string, unknown>;
    const rot = ro.rotation ?? 0.0;
    require(isNum(rot), `references[${k}].rotation must be a number`);
    references.push({
      image_ref: ro.image_ref as string,
      target_bbox: parseBBox(ro.target_bbox, `references[${k}].target_bbox`),
      rotation: rot,
    });
  });

  const triplet: TripletJson = {
    schema_version: SCHEMA_VERSION,
    frame_size: [Math.trunc(fs[0] as number), Math.trunc(fs[1] as number)],
    num_frames: T,
    tracks,
    bboxes,
    captions,
    references,
  };
  const report = validateTriplet(triplet);
  if (!report.ok) {
    const first = report.violations[0]!;
    throw new TripletError(
      `triplet violates invariants (${report.violations.length} violation(s); ` +
        `first: ${first.path}: ${first.message})`,
      report,
    );
  }
  return triplet;
}

// --- Canonical serialization -------------------------------------------------

/** Format a float the way the server's JSON encoder does ("3.0", "-12.5"). */
export function formatFloat(v: number): string {
  if (!Number.isFinite(v)) throw new Error("non-finite value in wire data");
  if (Number.isInteger(v)) {
    // Beyond 2^53-ish magnitudes the reference encoder switches to exponent
    // notation; canvas-scale coordinates never get near that regime.
    if (Math.abs(v) >= 1e16) throw new Error("float too large for canonical form");
    return (Object.is(v, -0) ? "-0" : String(v)) + ".0";
  }
  const s = String(v);
  if (s.includes("e") || s.includes("E") || (v !== 0 && Math.abs(v) < 1e-4)) {
    throw new Error("float outside the canonical decimal range");
  }
  return s;
}

/** JSON string literal with non-ASCII escaped as \uXXXX, like the server. */
export function formatString(s: string): string {
  const base = JSON.stringify(s);
  let out = "";
  for (const ch of base) {
    const code = ch.charCodeAt(0);
    out += code < 0x80 ? ch : "\\u" + code.toString(16).padStart(4, "0");
  }
  return out;
}

function formatBBox(b: BBoxJson): string {
  // Keys in sorted order: cx, cy, h, w.
  return (
    `{"cx":${formatFloat(b.cx)},"cy":${formatFloat(b.cy)},` +
    `"h":${formatFloat(b.h)},"w":${formatFloat(b.w)}}`
  );
}

function sortedIds(keys: string[]): string[] {
  return [...keys].sort((a, b) => (a < b ? -1 : a > b ? 1 : 0));
}

/** Serialize to the canonical wire form: sorted keys, no spaces, UTF-8. */
export function emitTriplet(triplet: TripletJson): string {
  const tracks = triplet.tracks
    .map((t) => {
      const pts = t.points
        .map((p) => `[${formatFloat(p[0])},${formatFloat(p[1])}]`)
        .join(",");
      const vis = t.visibility.join(",");
      return (
        `{"is_background":${t.is_background},"points":[${pts}],` +
        `"track_id":${formatString(t.track_id)},"visibility":[${vis}]}`
      );
    })
    .join(",");
  const bboxes = sortedIds(Object.keys(triplet.bboxes))
    .map((tid) => `${formatString(tid)}:${formatBBox(triplet.bboxes[tid]!)}`)
    .join(",");
  const captions = sortedIds(Object.keys(triplet.captions))
    .map((tid) => {
      const c = triplet.captions[tid]!;
      return (
        `${formatString(tid)}:{"subject_hint":${formatString(c.subject_hint)},` +
        `"text":${formatString(c.text)}}`
      );
    })
    .join(",");
  const references = triplet.references
    .map(
      (r) =>
        `{"image_ref":${formatString(r.image_ref)},"rotation":${formatFloat(r.rotation)},` +
        `"target_bbox":${formatBBox(r.target_bbox)}}`,
    )
    .join(",");
  return (
    `{"bboxes":{${bboxes}},"captions":{${captions}},` +
    `"frame_size":[${triplet.frame_size[0]},${triplet.frame_size[1]}],` +
    `"num_frames":${triplet.num_frames},"references":[${references}],` +
    `"schema_version":${formatString(triplet.schema_version)},"tracks":[${tracks}]}`
  );
}

// --- Trajectory timing / resampling ------------------------------------------

export interface ResampledTrack {
  points: Point[];
  visibility: VisFlag[];
}

/** Expand a sparse user polyline into a dense per-frame track.
 *
 * Same arithmetic as the service: equal time intervals per segment across
 * [startFrame, endFrame], linear interpolation inside each, first/last point
 * held outside the window, float32 rounding at the end. Bit-identical to the
 * server given the same inputs.
 */
export function resampleTrack(
  userPoints: readonly Point[],
  startFrame: number,
  endFrame: number,
  numFrames: number,
  visibleBefore: VisFlag = 1,
  visibleAfter: VisFlag = 1,
): ResampledTrack {
  if (userPoints.length < 2) throw new Error("need at least 2 user points");
  if (!(0 <= startFrame && startFrame < endFrame && endFrame < numFrames)) {
    throw new Error(
      `need 0 <= start_frame < end_frame < num_frames, ` +
        `got start=${startFrame} end=${endFrame} T=${numFrames}`,
    );
  }

  const nSeg = userPoints.length - 1;
  const out: [number, number][] = new Array(numFrames);
  const first = userPoints[0]!;
  const last = userPoints[nSeg]!;
  for (let t = 0; t < startFrame; t++) out[t] = [first[0], first[1]];
  for (let t = endFrame; t < numFrames; t++) out[t] = [last[0], last[1]];
  for (let t = startFrame; t <= endFrame; t++) {
    const u = (t - startFrame) / (endFrame - startFrame);
    const s = u * nSeg;
    const k = Math.min(Math.floor(s), nSeg - 1);
    const frac = s - k;
    const a = userPoints[k]!;
    const b = userPoints[k + 1]!;
    out[t] = [a[0] * (1.0 - frac) + b[0] * frac, a[1] * (1.0 - frac) + b[1] * frac];
  }

  const visibility: VisFlag[] = new Array(numFrames);
  for (let t = 0; t < numFrames; t++) {
    visibility[t] = t < startFrame ? visibleBefore : t <= endFrame ? 1 : visibleAfter;
  }
  return {
    points: out.map((p) => [Math.fround(p[0]), Math.fround(p[1])] as const),
    visibility,
  };
}
