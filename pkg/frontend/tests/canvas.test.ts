/** Renderer conventions: palette mirroring and hollow/filled markers. */

import { describe, expect, it } from "vitest";
import { TRACK_COLORS, renderTrack, renderSession, trackColor, type Draw2D } from "../src/canvas.js";
import { CanvasSession } from "../src/session.js";

interface Op {
  kind: "line" | "fillCircle" | "strokeCircle" | "rect";
  x: number;
  y: number;
  color: string;
}

/** Records marker and segment draws instead of rasterizing them. */
function fakeCtx(): { ctx: Draw2D; ops: Op[] } {
  const ops: Op[] = [];
  let pendingArc: { x: number; y: number } | null = null;
  let lineStart: { x: number; y: number } | null = null;
  const ctx: Draw2D = {
    strokeStyle: "",
    fillStyle: "",
    lineWidth: 1,
    beginPath() {
      pendingArc = null;
      lineStart = null;
    },
    moveTo(x, y) {
      lineStart = { x, y };
    },
    lineTo() {},
    stroke() {
      if (pendingArc) {
        ops.push({ kind: "strokeCircle", ...pendingArc, color: String(this.strokeStyle) });
        pendingArc = null;
      } else if (lineStart) {
        ops.push({ kind: "line", ...lineStart, color: String(this.strokeStyle) });
        lineStart = null;
      }
    },
    arc(x, y) {
      pendingArc = { x, y };
    },
    fill() {
      if (pendingArc) {
        ops.push({ kind: "fillCircle", ...pendingArc, color: String(this.fillStyle) });
        pendingArc = null;
      }
    },
    strokeRect(x, y) {
      ops.push({ kind: "rect", x, y, color: String(this.strokeStyle) });
    },
  };
  return { ctx, ops };
}

describe("track rendering", () => {
  it("draws hollow markers for invisible frames, filled for visible", () => {
    const { ctx, ops } = fakeCtx();
    renderTrack(ctx, [[0, 0], [10, 0], [20, 0]], [1, 0, 1], "rgb(255,0,255)");
    const markers = ops.filter((o) => o.kind !== "line");
    expect(markers.map((o) => o.kind)).toEqual(["fillCircle", "strokeCircle", "fillCircle"]);
  });

  it("connects only co-visible neighbours with segments", () => {
    const { ctx, ops } = fakeCtx();
    renderTrack(ctx, [[0, 0], [10, 0], [20, 0], [30, 0]], [1, 1, 0, 1], "c");
    const lines = ops.filter((o) => o.kind === "line");
    // Only the 0-1 pair is fully visible; 1-2 and 2-3 are truncated.
    expect(lines.length).toBe(1);
    expect(lines[0]!.x).toBe(0);
  });

  it("mirrors the training-time overlay palette, cycling by track index", () => {
    expect(TRACK_COLORS).toEqual([
      "rgb(255,0,255)",
      "rgb(255,255,0)",
      "rgb(0,255,255)",
      "rgb(255,128,0)",
      "rgb(128,255,0)",
      "rgb(0,128,255)",
    ]);
    expect(trackColor(0)).toBe("rgb(255,0,255)");
    expect(trackColor(7)).toBe("rgb(255,255,0)");
  });

  it("renders session tracks in palette order and references as outlines", () => {
    const s = new CanvasSession(64, 64, 8);
    s.setBackground("bg");
    const a = s.drawTrack([[0, 0], [10, 10]]);
    const b = s.drawTrack([[5, 5], [15, 15]]);
    s.setCaption(a.trackId, "one");
    s.setCaption(b.trackId, "two");
    s.placeReference("r", [32, 32], 1, 0, 10, 10);

    const { ctx, ops } = fakeCtx();
    renderSession(ctx, s);
    const colors = new Set(ops.filter((o) => o.kind === "fillCircle").map((o) => o.color));
    expect(colors).toEqual(new Set(["rgb(255,0,255)", "rgb(255,255,0)"]));
    const rects = ops.filter((o) => o.kind === "rect");
    expect(rects.length).toBe(1);
    expect(rects[0]!.x).toBe(27); // cx 32 minus w/2
  });
});
