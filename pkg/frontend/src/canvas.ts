/** Canvas drawing for draft tracks, references and playback overlays.
 *
 * Rendering goes through a narrow context interface so tests can record
 * draw calls. Colors cycle through the same palette the training-time
 * trajectory overlays use, assigned by track index; invisible frames are
 * drawn as hollow markers, visible ones filled.
 */

import { resampleTrack } from "./triplet.js";
import type { CanvasSession } from "./session.js";
import type { DraftTrack, Point } from "./types.js";

/** Overlay palette, one entry per track index, cycled. */
export const TRACK_COLORS = [
  "rgb(255,0,255)",
  "rgb(255,255,0)",
  "rgb(0,255,255)",
  "rgb(255,128,0)",
  "rgb(128,255,0)",
  "rgb(0,128,255)",
] as const;

export function trackColor(index: number): string {
  return TRACK_COLORS[index % TRACK_COLORS.length]!;
}

/** The subset of CanvasRenderingContext2D the renderer touches. */
export interface Draw2D {
  strokeStyle: string | CanvasGradient | CanvasPattern;
  fillStyle: string | CanvasGradient | CanvasPattern;
  lineWidth: number;
  beginPath(): void;
  moveTo(x: number, y: number): void;
  lineTo(x: number, y: number): void;
  stroke(): void;
  arc(x: number, y: number, r: number, a0: number, a1: number): void;
  fill(): void;
  strokeRect(x: number, y: number, w: number, h: number): void;
}

export const MARKER_RADIUS = 2.5;

function densePoints(t: DraftTrack & { dense?: boolean }, numFrames: number): readonly Point[] {
  if ((t as { dense?: boolean }).dense) return t.userPoints;
  return resampleTrack(t.userPoints, t.startFrame, t.endFrame, numFrames).points;
}

/** Draw one track: lines between co-visible frames, markers per frame. */
export function renderTrack(
  ctx: Draw2D,
  points: readonly Point[],
  visibility: readonly number[],
  color: string,
): void {
  ctx.strokeStyle = color;
  ctx.fillStyle = color;
  ctx.lineWidth = 1;
  const n = Math.min(points.length, visibility.length);
  for (let k = 0; k + 1 < n; k++) {
    if (visibility[k] === 1 && visibility[k + 1] === 1) {
      ctx.beginPath();
      ctx.moveTo(points[k]![0], points[k]![1]);
      ctx.lineTo(points[k + 1]![0], points[k + 1]![1]);
      ctx.stroke();
    }
  }
  for (let k = 0; k < n; k++) {
    ctx.beginPath();
    ctx.arc(points[k]![0], points[k]![1], MARKER_RADIUS, 0, 2 * Math.PI);
    // Hollow circles mark frames where the point is invisible.
    if (visibility[k] === 1) ctx.fill();
    else ctx.stroke();
  }
}

/** Draw all foreground tracks and reference outlines of a session. */
export function renderSession(ctx: Draw2D, session: CanvasSession): void {
  session.tracks.forEach((t, i) => {
    if (t.isBackground) return;
    renderTrack(ctx, densePoints(t, session.numFrames), t.visibility, trackColor(i));
  });
  session.references.forEach((r) => {
    ctx.strokeStyle = "rgba(255,255,255,0.8)";
    ctx.lineWidth = 1;
    ctx.strokeRect(
      r.bbox.cx - r.bbox.w / 2,
      r.bbox.cy - r.bbox.h / 2,
      r.bbox.w,
      r.bbox.h,
    );
  });
}

/** Overlay trajectories on one playback frame, up to that frame only.
 *
 * Result frames themselves are never modified; the overlay is drawn on
 * top, client-side, purely for visual verification.
 */
export function renderPlaybackOverlay(
  ctx: Draw2D,
  session: CanvasSession,
  frame: number,
): void {
  session.tracks.forEach((t, i) => {
    if (t.isBackground) return;
    const pts = densePoints(t, session.numFrames).slice(0, frame + 1);
    const vis = t.visibility.slice(0, frame + 1);
    renderTrack(ctx, pts, vis, trackColor(i));
  });
}
