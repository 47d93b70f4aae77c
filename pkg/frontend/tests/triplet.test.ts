/** Wire-schema mirror tests.
 *
 * The golden fixtures were produced by the server's own parser, so the
 * agreement checks here hold the client to the exact verdicts, violation
 * lists and canonical bytes the service would produce.
 */

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import {
  TripletError,
  emitTriplet,
  formatFloat,
  inFrame,
  parseTriplet,
  resampleTrack,
  validateTriplet,
} from "../src/triplet.js";

interface Golden {
  name: string;
  wire_text: string;
  expected: {
    verdict: "valid" | "invariant" | "structural";
    canonical?: string;
    violation_paths?: string[];
    violation_tracks?: string[];
  };
}

interface ResampleCase {
  user_points: [number, number][];
  start_frame: number;
  end_frame: number;
  num_frames: number;
  visible_before: 0 | 1;
  visible_after: 0 | 1;
  points: [number, number][];
  visibility: (0 | 1)[];
}

function fixture<T>(name: string): T {
  return JSON.parse(
    readFileSync(new URL(`./fixtures/${name}`, import.meta.url), "utf-8"),
  ) as T;
}

const goldens = fixture<Golden[]>("goldens.json");
const resampleCases = fixture<ResampleCase[]>("resample.json");

describe("golden agreement with the server validator", () => {
  it("covers 25 valid and 25 invalid documents", () => {
    const valid = goldens.filter((g) => g.expected.verdict === "valid");
    expect(goldens.length).toBe(50);
    expect(valid.length).toBe(25);
  });

  for (const g of goldens) {
    it(`${g.name}: ${g.expected.verdict}`, () => {
      if (g.expected.verdict === "valid") {
        const parsed = parseTriplet(g.wire_text);
        // Same acceptance and the same canonical bytes on re-emission.
        expect(emitTriplet(parsed)).toBe(g.expected.canonical);
      } else if (g.expected.verdict === "invariant") {
        let err: unknown;
        try {
          parseTriplet(g.wire_text);
        } catch (e) {
          err = e;
        }
        expect(err).toBeInstanceOf(TripletError);
        const report = (err as TripletError).report;
        expect(report).not.toBeNull();
        expect(report!.violations.map((v) => v.path)).toEqual(g.expected.violation_paths);
        expect(report!.violations.map((v) => v.track_id)).toEqual(g.expected.violation_tracks);
      } else {
        let err: unknown;
        try {
          parseTriplet(g.wire_text);
        } catch (e) {
          err = e;
        }
        expect(err).toBeInstanceOf(TripletError);
        expect((err as TripletError).report).toBeNull();
      }
    });
  }
});

describe("resample mirror", () => {
  resampleCases.forEach((c, i) => {
    it(`case ${i}: ${c.user_points.length} points over [${c.start_frame}, ${c.end_frame}] of ${c.num_frames}`, () => {
      const got = resampleTrack(
        c.user_points,
        c.start_frame,
        c.end_frame,
        c.num_frames,
        c.visible_before,
        c.visible_after,
      );
      // Bit-exact against the server: float32 values survive JSON intact.
      expect(got.points).toEqual(c.points);
      expect(got.visibility).toEqual(c.visibility);
    });
  });

  it("rejects a single-point polyline", () => {
    expect(() => resampleTrack([[1, 2]], 0, 5, 8)).toThrow(/at least 2 user points/);
  });

  it("rejects bad timing windows", () => {
    expect(() => resampleTrack([[0, 0], [1, 1]], 5, 5, 8)).toThrow(/start_frame/);
    expect(() => resampleTrack([[0, 0], [1, 1]], 0, 8, 8)).toThrow(/start_frame/);
    expect(() => resampleTrack([[0, 0], [1, 1]], -1, 4, 8)).toThrow(/start_frame/);
  });
});

describe("validation details", () => {
  it("treats the frame rectangle as closed", () => {
    expect(inFrame(0, 0, 64, 64)).toBe(true);
    expect(inFrame(64, 64, 64, 64)).toBe(true);
    expect(inFrame(64.000004, 0, 64, 64)).toBe(false);
    expect(inFrame(-0.001, 0, 64, 64)).toBe(false);
  });

  it("reports at most one out-of-frame violation per track", () => {
    const t = {
      schema_version: "1",
      frame_size: [64, 64] as [number, number],
      num_frames: 3,
      tracks: [{
        track_id: "a",
        is_background: false,
        points: [[-5, 0], [-6, 0], [70, 0]] as [number, number][],
        visibility: [1, 1, 1] as (0 | 1)[],
      }],
      bboxes: { a: { cx: 1, cy: 1, w: 2, h: 2 } },
      captions: { a: { text: "x", subject_hint: "" } },
      references: [],
    };
    const report = validateTriplet(t);
    const pointPaths = report.violations.filter((v) => v.path.startsWith("points["));
    expect(pointPaths).toEqual([
      { track_id: "a", path: "points[0]", message: "visible point lies outside the frame rectangle" },
    ]);
  });

  it("float formatting matches the server encoder", () => {
    expect(formatFloat(3)).toBe("3.0");
    expect(formatFloat(-12.5)).toBe("-12.5");
    expect(formatFloat(Math.fround(0.1))).toBe("0.10000000149011612");
    expect(formatFloat(-0)).toBe("-0.0");
    expect(() => formatFloat(Number.NaN)).toThrow();
    expect(() => formatFloat(1e-6)).toThrow();
  });
});
