/** Pointer gesture handling: downsampling and the speed readout. */

import type { Point } from "./types.js";

/** Hard cap on user points per track; keeps request payloads bounded. */
export const MAX_USER_POINTS = 64;

/** Reduce a raw pointer trail to at most MAX_USER_POINTS points.
 *
 * Short gestures pass through untouched. Longer ones are resampled by
 * linear interpolation in index space with both endpoints kept, so the
 * rule is deterministic: the same trail always yields the same list.
 */
export function sampleGesture(raw: readonly Point[]): Point[] {
  if (raw.length < 2) {
    throw new Error("gesture needs at least 2 points; extend the stroke or mark the object static");
  }
  if (raw.length <= MAX_USER_POINTS) {
    return raw.map((p) => [p[0], p[1]]);
  }
  const n = raw.length;
  const out: Point[] = [];
  for (let i = 0; i < MAX_USER_POINTS; i++) {
    const s = (i * (n - 1)) / (MAX_USER_POINTS - 1);
    const k = Math.min(Math.floor(s), n - 2);
    const frac = s - k;
    const a = raw[k]!;
    const b = raw[k + 1]!;
    out.push([a[0] * (1 - frac) + b[0] * frac, a[1] * (1 - frac) + b[1] * frac]);
  }
  return out;
}

/** Per-segment pixel spacing; sparser spacing means faster movement. */
export function segmentSpacing(points: readonly Point[]): number[] {
  const out: number[] = [];
  for (let i = 1; i < points.length; i++) {
    const dx = points[i]![0] - points[i - 1]![0];
    const dy = points[i]![1] - points[i - 1]![1];
    out.push(Math.hypot(dx, dy));
  }
  return out;
}

/** One-line readout shown while drawing ("avg 12.3 px/step, max 20.1"). */
export function speedReadout(points: readonly Point[]): string {
  const gaps = segmentSpacing(points);
  if (!gaps.length) return "no movement";
  const avg = gaps.reduce((a, b) => a + b, 0) / gaps.length;
  const max = Math.max(...gaps);
  return `avg ${avg.toFixed(1)} px/step, max ${max.toFixed(1)}`;
}
