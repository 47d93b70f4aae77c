/** Session model tests: round trips, gestures, visibility, references.
 *
 * Twenty fixture sessions drive the save-file round trip: fourteen built
 * through the public editing operations with seeded randomness, six
 * imported from server-emitted golden triplets.
 */

import { readFileSync } from "node:fs";
import { describe, expect, it } from "vitest";
import { CanvasSession, SessionLockedError } from "../src/session.js";
import { sampleGesture, segmentSpacing, speedReadout, MAX_USER_POINTS } from "../src/gesture.js";
import { TripletError, parseTriplet, resampleTrack } from "../src/triplet.js";
import type { Point } from "../src/types.js";

interface Golden {
  name: string;
  wire_text: string;
  expected: { verdict: string };
}

const goldens = JSON.parse(
  readFileSync(new URL("./fixtures/goldens.json", import.meta.url), "utf-8"),
) as Golden[];

/** Small deterministic PRNG so fixture sessions are reproducible. */
function mulberry32(seed: number): () => number {
  return () => {
    seed = (seed + 0x6d2b79f5) | 0;
    let t = seed;
    t = Math.imul(t ^ (t >>> 15), t | 1);
    t ^= t + Math.imul(t ^ (t >>> 7), t | 61);
    return ((t ^ (t >>> 14)) >>> 0) / 4294967296;
  };
}

const WORDS = ["the red circle", "the blue square", "the green triangle", "the orange disc"];

function buildFixtureSession(seed: number): CanvasSession {
  const rnd = mulberry32(seed);
  const wide = rnd() < 0.3;
  const T = rnd() < 0.5 ? 8 : 16;
  const s = new CanvasSession(wide ? 96 : 64, 64, T);
  s.setBackground(`asset-${seed}`);

  const nTracks = 1 + Math.floor(rnd() * 3);
  for (let i = 0; i < nTracks; i++) {
    const nPts = 3 + Math.floor(rnd() * 28);
    const gesture: Point[] = [];
    for (let p = 0; p < nPts; p++) {
      gesture.push([rnd() * s.frameWidth, rnd() * s.frameHeight]);
    }
    const start = Math.floor(rnd() * (T - 2));
    const end = start + 1 + Math.floor(rnd() * (T - start - 1));
    const track = s.drawTrack(gesture, start, end);
    s.setCaption(track.trackId, WORDS[Math.floor(rnd() * WORDS.length)]!, "subject");
    s.setTrackBBox(track.trackId, {
      cx: rnd() * s.frameWidth,
      cy: rnd() * s.frameHeight,
      w: 4 + rnd() * 20,
      h: 4 + rnd() * 20,
    });
    const nToggles = Math.floor(rnd() * 3);
    for (let k = 0; k < nToggles; k++) {
      const a = Math.floor(rnd() * T);
      const b = a + 1 + Math.floor(rnd() * (T - a));
      s.toggleVisibility(track.trackId, a, Math.min(b, T));
    }
  }

  if (rnd() < 0.5) {
    s.placeReference(`ref-${seed}`, [rnd() * s.frameWidth, rnd() * s.frameHeight],
      0.5 + rnd(), rnd() * 90, 12, 10);
  }
  // An off-canvas reference is only exportable with an entry track to bind
  // to, so force one by hiding a prefix of the first track.
  if (rnd() < 0.3) {
    const first = s.tracks[0]!;
    if (first.visibility[0] === 1) s.toggleVisibility(first.trackId, 0, 1);
    if (!first.visibility.some((v) => v === 1)) {
      s.toggleVisibility(first.trackId, 1, T); // all-hidden track is no entry
    }
    s.placeReference(`ref-off-${seed}`, [-40, 32], 1, 0, 16, 16);
  }
  return s;
}

describe("export/import round trip", () => {
  const seeds = Array.from({ length: 14 }, (_, i) => 1000 + i);
  for (const seed of seeds) {
    it(`ui-built session ${seed} survives exactly`, () => {
      const s = buildFixtureSession(seed);
      const text = s.exportSession();
      const back = CanvasSession.importSession(text);
      expect(back.exportSession()).toBe(text);
      // State-level equality, not just byte equality of the save file.
      expect(back.tracks.map((t) => t.caption)).toEqual(s.tracks.map((t) => t.caption));
      expect(back.tracks.map((t) => t.visibility)).toEqual(s.tracks.map((t) => t.visibility));
      expect(back.references).toEqual(s.references);
      expect(back.backgroundAsset).toBe(s.backgroundAsset);
    });
  }

  const importable = goldens.filter((g) => g.expected.verdict === "valid" && g.name.startsWith("synth_")).slice(0, 6);
  for (const g of importable) {
    it(`server-emitted ${g.name} survives exactly`, () => {
      const s = CanvasSession.importSession(g.wire_text);
      const text = s.exportSession();
      const back = CanvasSession.importSession(text);
      expect(back.exportSession()).toBe(text);
      // Dense tracks pass through untouched: the triplet half of the save
      // file carries exactly the server's canonical points.
      const exported = parseTriplet(JSON.stringify(JSON.parse(text).triplet));
      const original = parseTriplet(g.wire_text);
      expect(exported.tracks).toEqual(original.tracks);
      expect(exported.bboxes).toEqual(original.bboxes);
      expect(exported.captions).toEqual(original.captions);
      expect(exported.references).toEqual(original.references);
    });
  }

  it("rejects invalid save files", () => {
    const bad = goldens.find((g) => g.name === "invalid_missing_caption")!;
    expect(() => CanvasSession.importSession(bad.wire_text)).toThrow(TripletError);
  });

  it("refuses to export a session that would fail server validation", () => {
    const s = new CanvasSession(64, 64, 8);
    s.setBackground("bg");
    s.drawTrack([[1, 1], [10, 10]]); // no caption, no bbox
    expect(() => s.exportSession()).toThrow(TripletError);
    const report = s.validate();
    expect(report.ok).toBe(false);
    expect(report.violations.map((v) => v.path)).toContain("captions");
  });
});

describe("draw_track", () => {
  function readySession(): CanvasSession {
    const s = new CanvasSession(64, 64, 16);
    s.setBackground("bg");
    return s;
  }

  it("keeps a 20-point drag as 20 points", () => {
    const s = readySession();
    const gesture: Point[] = Array.from({ length: 20 }, (_, i) => [i * 3, i * 2]);
    const t = s.drawTrack(gesture);
    expect(t.userPoints.length).toBe(20);
    expect(t.userPoints).toEqual(gesture);
  });

  it("produces identical lists for identical gestures", () => {
    const gesture: Point[] = Array.from({ length: 150 }, (_, i) => [
      Math.sin(i / 10) * 30 + 32,
      Math.cos(i / 13) * 30 + 32,
    ]);
    const a = sampleGesture(gesture);
    const b = sampleGesture(gesture);
    expect(a).toEqual(b);
    expect(a.length).toBe(MAX_USER_POINTS);
    // Endpoints always survive the downsampling.
    expect(a[0]).toEqual(gesture[0]);
    expect(a[a.length - 1]).toEqual(gesture[gesture.length - 1]);
  });

  it("rejects a single-point gesture with guidance", () => {
    const s = readySession();
    expect(() => s.drawTrack([[5, 5]])).toThrow(/extend the stroke or mark the object static/);
  });

  it("requires a background image", () => {
    const s = new CanvasSession(64, 64, 16);
    expect(() => s.drawTrack([[0, 0], [1, 1]])).toThrow(/background/);
  });

  it("exports exactly what the service-side resampler computes", () => {
    const s = readySession();
    const gesture: Point[] = [[4.25, 8.5], [30.125, 40.75], [60.0, 12.375]];
    const t = s.drawTrack(gesture, 2, 13);
    const expected = resampleTrack(t.userPoints, 2, 13, 16);
    const wire = s.exportTriplet();
    expect(wire.tracks[0]!.points).toEqual(expected.points);
    expect(wire.tracks[0]!.visibility).toEqual(expected.visibility);
  });

  it("reads out segment spacing as drawing speed", () => {
    expect(segmentSpacing([[0, 0], [3, 4], [3, 4]])).toEqual([5, 0]);
    expect(speedReadout([[0, 0], [3, 4]])).toContain("avg 5.0");
    expect(speedReadout([[1, 1]])).toBe("no movement");
  });
});

describe("toggle_visibility", () => {
  function trackSession(): { s: CanvasSession; tid: string } {
    const s = new CanvasSession(64, 64, 16);
    s.setBackground("bg");
    const t = s.drawTrack(Array.from({ length: 5 }, (_, i) => [i * 10, i * 10] as Point));
    return { s, tid: t.trackId };
  }

  it("clears [0, 5) on an all-visible track", () => {
    const { s, tid } = trackSession();
    s.toggleVisibility(tid, 0, 5);
    expect(s.track(tid).visibility).toEqual([0, 0, 0, 0, 0, ...Array(11).fill(1)]);
  });

  it("is an involution", () => {
    const { s, tid } = trackSession();
    const before = [...s.track(tid).visibility];
    s.toggleVisibility(tid, 3, 11);
    s.toggleVisibility(tid, 3, 11);
    expect(s.track(tid).visibility).toEqual(before);
  });

  it("full-range toggle inverts everything", () => {
    const { s, tid } = trackSession();
    s.toggleVisibility(tid, 0, 16);
    expect(s.track(tid).visibility).toEqual(Array(16).fill(0));
  });

  it("rejects ranges outside [0, T)", () => {
    const { s, tid } = trackSession();
    expect(() => s.toggleVisibility(tid, -1, 3)).toThrow(/outside/);
    expect(() => s.toggleVisibility(tid, 4, 17)).toThrow(/outside/);
    expect(() => s.toggleVisibility(tid, 4, 4)).toThrow(/outside/);
  });
});

describe("place_reference", () => {
  it("centers the bbox at the drop point with native dimensions at scale 1", () => {
    const s = new CanvasSession(64, 64, 8);
    const r = s.placeReference("asset", [32, 32], 1, 0, 20, 14);
    expect(r.bbox).toEqual({ cx: 32, cy: 32, w: 20, h: 14 });
  });

  it("doubles dimensions at scale 2", () => {
    const s = new CanvasSession(64, 64, 8);
    const r = s.placeReference("asset", [10, 50], 2, 15, 20, 14);
    expect(r.bbox).toEqual({ cx: 10, cy: 50, w: 40, h: 28 });
    expect(r.rotation).toBe(15);
  });

  it("keeps a fully off-canvas drop and exports it", () => {
    const s = new CanvasSession(64, 64, 8);
    s.setBackground("bg");
    const t = s.drawTrack([[0, 10], [40, 10]]);
    s.setCaption(t.trackId, "the red circle");
    s.setTrackBBox(t.trackId, { cx: 8, cy: 10, w: 8, h: 8 });
    s.toggleVisibility(t.trackId, 0, 2); // entry event backs the placement
    const r = s.placeReference("asset", [-40, 32], 1, 0, 16, 16);
    expect(r.bbox.cx + r.bbox.w / 2).toBeLessThan(0);
    const wire = s.exportTriplet();
    expect(wire.references[0]!.target_bbox).toEqual(r.bbox);
    expect(s.validate().ok).toBe(true);
  });
});

describe("submitted jobs stay immutable", () => {
  function submitted(): CanvasSession {
    const s = new CanvasSession(64, 64, 8);
    s.setBackground("bg");
    const t = s.drawTrack([[1, 1], [30, 30]]);
    s.setCaption(t.trackId, "the red circle");
    s.setTrackBBox(t.trackId, { cx: 1, cy: 1, w: 4, h: 4 });
    s.markSubmitted("job-7");
    return s;
  }

  it("locks every editing operation after submission", () => {
    const s = submitted();
    expect(s.isLocked).toBe(true);
    expect(() => s.drawTrack([[0, 0], [1, 1]])).toThrow(SessionLockedError);
    expect(() => s.toggleVisibility("track00", 0, 1)).toThrow(SessionLockedError);
    expect(() => s.setCaption("track00", "x")).toThrow(SessionLockedError);
    expect(() => s.placeReference("a", [0, 0], 1, 0, 4, 4)).toThrow(SessionLockedError);
    expect(() => s.removeTrack("track00")).toThrow(SessionLockedError);
  });

  it("forks into an editable copy without touching the original", () => {
    const s = submitted();
    const fork = s.fork();
    expect(fork.isLocked).toBe(false);
    expect(fork.lastJobId).toBeNull();
    expect(fork.exportTriplet()).toEqual(s.exportTriplet());
    fork.toggleVisibility("track00", 0, 4);
    fork.setCaption("track00", "the blue square");
    expect(s.track("track00").visibility).toEqual(Array(8).fill(1));
    expect(s.track("track00").caption).toBe("the red circle");
  });
});
