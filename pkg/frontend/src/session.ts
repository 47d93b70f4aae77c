/** Editable canvas session and its save-file round trip.
 *
 * A session holds draft tracks, captions and reference placements, and
 * serializes to the triplet wire format plus a UI-state sidecar. Exports
 * always pre-validate with the same rules the server applies.
 */

import {
  TripletError,
  emitTriplet,
  formatFloat,
  formatString,
  parseTriplet,
  resampleTrack,
  validateTriplet,
} from "./triplet.js";
import { sampleGesture } from "./gesture.js";
import type {
  BBoxJson,
  DraftTrack,
  PlacedReference,
  PlaybackState,
  Point,
  SessionSidecar,
  TripletJson,
  ValidationReport,
  VisFlag,
} from "./types.js";

export const SIDECAR_VERSION = "1";

/** Thrown when an operation would edit the inputs of a submitted job. */
export class SessionLockedError extends Error {
  constructor() {
    super("session was submitted; fork() to keep editing");
    this.name = "SessionLockedError";
  }
}

interface InternalTrack extends DraftTrack {
  /** Dense tracks came in over the wire already per-frame; export passes
   * their points through untouched instead of resampling. */
  dense: boolean;
}

export class CanvasSession {
  readonly frameWidth: number;
  readonly frameHeight: number;
  readonly numFrames: number;

  backgroundAsset: string | null = null;
  lastJobId: string | null = null;
  playback: PlaybackState = { status: "idle", frame: 0 };

  private tracks_: InternalTrack[] = [];
  private references_: PlacedReference[] = [];
  private counter = 0;
  private locked = false;

  constructor(frameWidth: number, frameHeight: number, numFrames: number) {
    this.frameWidth = frameWidth;
    this.frameHeight = frameHeight;
    this.numFrames = numFrames;
  }

  get tracks(): readonly InternalTrack[] {
    return this.tracks_;
  }

  get references(): readonly PlacedReference[] {
    return this.references_;
  }

  get isLocked(): boolean {
    return this.locked;
  }

  private editable(): void {
    if (this.locked) throw new SessionLockedError();
  }

  setBackground(assetId: string): void {
    this.editable();
    this.backgroundAsset = assetId;
  }

  // --- track authoring -------------------------------------------------------

  /** Turn a pointer gesture into a draft track spanning [startFrame, endFrame]. */
  drawTrack(
    gesture: readonly Point[],
    startFrame = 0,
    endFrame = this.numFrames - 1,
  ): DraftTrack {
    this.editable();
    if (this.backgroundAsset === null) {
      throw new Error("draw needs a background image first");
    }
    const userPoints = sampleGesture(gesture);
    // Probe the timing window now so a bad range fails at draw time.
    const probe = resampleTrack(userPoints, startFrame, endFrame, this.numFrames);
    const track: InternalTrack = {
      trackId: this.nextTrackId(),
      isBackground: false,
      userPoints,
      startFrame,
      endFrame,
      visibility: probe.visibility,
      caption: "",
      subjectHint: "",
      bbox: null,
      dense: false,
    };
    this.tracks_.push(track);
    return track;
  }

  private nextTrackId(): string {
    // Imported tracks keep their original ids, so skip past collisions.
    for (;;) {
      const id = `track${String(this.counter).padStart(2, "0")}`;
      this.counter += 1;
      if (!this.tracks_.some((t) => t.trackId === id)) return id;
    }
  }

  track(trackId: string): InternalTrack {
    const t = this.tracks_.find((t) => t.trackId === trackId);
    if (!t) throw new Error(`no such track: ${trackId}`);
    return t;
  }

  removeTrack(trackId: string): void {
    this.editable();
    this.track(trackId);
    this.tracks_ = this.tracks_.filter((t) => t.trackId !== trackId);
  }

  setCaption(trackId: string, text: string, subjectHint = ""): void {
    this.editable();
    const t = this.track(trackId);
    t.caption = text;
    t.subjectHint = subjectHint;
  }

  setTrackBBox(trackId: string, bbox: BBoxJson): void {
    this.editable();
    this.track(trackId).bbox = { ...bbox };
  }

  /** Flip visibility flags on the half-open frame range [start, end). */
  toggleVisibility(trackId: string, start: number, end = start + 1): void {
    this.editable();
    const t = this.track(trackId);
    if (!(0 <= start && start < end && end <= this.numFrames)) {
      throw new Error(`range [${start}, ${end}) outside [0, ${this.numFrames})`);
    }
    for (let f = start; f < end; f++) {
      t.visibility[f] = t.visibility[f] === 1 ? 0 : 1;
    }
  }

  // --- references ------------------------------------------------------------

  /** Drop a reference image: bbox centered at the drop point, dimensions
   * scaled from the asset's native size. Off-canvas placement is kept as
   * authored; validation decides at export whether an entry track backs it. */
  placeReference(
    assetId: string,
    dropPoint: Point,
    scale: number,
    rotation: number,
    nativeWidth: number,
    nativeHeight: number,
  ): PlacedReference {
    this.editable();
    const placed: PlacedReference = {
      assetId,
      bbox: {
        cx: dropPoint[0],
        cy: dropPoint[1],
        w: nativeWidth * scale,
        h: nativeHeight * scale,
      },
      rotation,
      nativeWidth,
      nativeHeight,
    };
    this.references_.push(placed);
    return placed;
  }

  removeReference(index: number): void {
    this.editable();
    this.references_.splice(index, 1);
  }

  // --- export / import ---------------------------------------------------------

  exportTriplet(): TripletJson {
    const triplet: TripletJson = {
      schema_version: "1",
      frame_size: [this.frameWidth, this.frameHeight],
      num_frames: this.numFrames,
      tracks: this.tracks_.map((t) => ({
        track_id: t.trackId,
        is_background: t.isBackground,
        points: t.dense
          ? t.userPoints.map((p) => [Math.fround(p[0]), Math.fround(p[1])] as const)
          : resampleTrack(t.userPoints, t.startFrame, t.endFrame, this.numFrames).points,
        visibility: [...t.visibility],
      })),
      bboxes: {},
      captions: {},
      references: this.references_.map((r) => ({
        image_ref: r.assetId,
        target_bbox: { ...r.bbox },
        rotation: r.rotation,
      })),
    };
    for (const t of this.tracks_) {
      if (t.bbox) triplet.bboxes[t.trackId] = { ...t.bbox };
      if (!t.isBackground && t.caption !== "") {
        triplet.captions[t.trackId] = { text: t.caption, subject_hint: t.subjectHint };
      }
    }
    return triplet;
  }

  /** Run the shared validation rules on the current state. */
  validate(): ValidationReport {
    return validateTriplet(this.exportTriplet());
  }

  private sidecar(): SessionSidecar {
    const trackUi: SessionSidecar["track_ui"] = {};
    for (const t of this.tracks_) {
      if (!t.dense) {
        trackUi[t.trackId] = {
          user_points: t.userPoints.map((p) => [p[0], p[1]]),
          start_frame: t.startFrame,
          end_frame: t.endFrame,
        };
      }
    }
    return {
      sidecar_version: SIDECAR_VERSION,
      background_asset: this.backgroundAsset,
      track_ui: trackUi,
      reference_ui: this.references_.map((r) => ({
        native_width: r.nativeWidth,
        native_height: r.nativeHeight,
      })),
      last_job_id: this.lastJobId,
      playback: { ...this.playback },
    };
  }

  /** Serialize the whole session: canonical triplet JSON plus UI sidecar.
   *
   * Refuses states that would not validate server-side, so every saved
   * session is also a well-formed generation request.
   */
  exportSession(): string {
    const triplet = this.exportTriplet();
    const report = validateTriplet(triplet);
    if (!report.ok) {
      throw new TripletError(
        `session does not export a valid triplet (${report.violations.length} violation(s))`,
        report,
      );
    }
    const sc = this.sidecar();
    const trackUi = Object.keys(sc.track_ui)
      .sort()
      .map((tid) => {
        const u = sc.track_ui[tid]!;
        const pts = u.user_points
          .map((p) => `[${formatFloat(p[0])},${formatFloat(p[1])}]`)
          .join(",");
        return (
          `${formatString(tid)}:{"end_frame":${u.end_frame},` +
          `"start_frame":${u.start_frame},"user_points":[${pts}]}`
        );
      })
      .join(",");
    const refUi = sc.reference_ui
      .map((r) => `{"native_height":${formatFloat(r.native_height)},"native_width":${formatFloat(r.native_width)}}`)
      .join(",");
    const sidecar =
      `{"background_asset":${sc.background_asset === null ? "null" : formatString(sc.background_asset)},` +
      `"last_job_id":${sc.last_job_id === null ? "null" : formatString(sc.last_job_id)},` +
      `"playback":{"frame":${sc.playback.frame},"status":${formatString(sc.playback.status)}},` +
      `"reference_ui":[${refUi}],` +
      `"sidecar_version":${formatString(sc.sidecar_version)},` +
      `"track_ui":{${trackUi}}}`;
    return `{"sidecar":${sidecar},"triplet":${emitTriplet(triplet)}}`;
  }

  /** Rebuild a session from a save file; rejects invalid triplets. */
  static importSession(text: string): CanvasSession {
    let doc: unknown;
    try {
      doc = JSON.parse(text);
    } catch (e) {
      throw new Error(`malformed session file: ${(e as Error).message}`);
    }
    if (typeof doc !== "object" || doc === null || Array.isArray(doc)) {
      throw new Error("session file must be an object");
    }
    const d = doc as Record<string, unknown>;
    // Accept both the full save file and a bare triplet document.
    const hasSidecar = "triplet" in d;
    const tripletObj = hasSidecar ? d.triplet : doc;
    const sidecar = (hasSidecar ? d.sidecar : null) as Partial<SessionSidecar> | null;

    const triplet = parseTriplet(JSON.stringify(tripletObj));
    const s = new CanvasSession(
      triplet.frame_size[0],
      triplet.frame_size[1],
      triplet.num_frames,
    );
    s.backgroundAsset = sidecar?.background_asset ?? null;
    s.lastJobId = sidecar?.last_job_id ?? null;
    if (sidecar?.playback) s.playback = { ...sidecar.playback };

    const trackUi = sidecar?.track_ui ?? {};
    for (const tr of triplet.tracks) {
      const ui = trackUi[tr.track_id];
      const caption = triplet.captions[tr.track_id];
      s.tracks_.push({
        trackId: tr.track_id,
        isBackground: tr.is_background,
        userPoints: ui
          ? ui.user_points.map((p) => [p[0], p[1]] as const)
          : tr.points.map((p) => [p[0], p[1]] as const),
        startFrame: ui ? ui.start_frame : 0,
        endFrame: ui ? ui.end_frame : triplet.num_frames - 1,
        visibility: [...tr.visibility] as VisFlag[],
        caption: caption?.text ?? "",
        subjectHint: caption?.subject_hint ?? "",
        bbox: triplet.bboxes[tr.track_id] ? { ...triplet.bboxes[tr.track_id]! } : null,
        dense: !ui,
      });
    }
    s.counter = s.tracks_.length;

    const refUi = sidecar?.reference_ui ?? [];
    triplet.references.forEach((r, i) => {
      const native = refUi[i];
      s.references_.push({
        assetId: r.image_ref,
        bbox: { ...r.target_bbox },
        rotation: r.rotation,
        nativeWidth: native?.native_width ?? r.target_bbox.w,
        nativeHeight: native?.native_height ?? r.target_bbox.h,
      });
    });
    return s;
  }

  // --- submission bookkeeping --------------------------------------------------

  /** Record a submitted job and freeze the inputs that produced it. */
  markSubmitted(jobId: string): void {
    this.lastJobId = jobId;
    this.locked = true;
  }

  /** Editable deep copy for iterating after a submission. */
  fork(): CanvasSession {
    const s = new CanvasSession(this.frameWidth, this.frameHeight, this.numFrames);
    s.backgroundAsset = this.backgroundAsset;
    s.playback = { ...this.playback };
    s.tracks_ = this.tracks_.map((t) => ({
      ...t,
      userPoints: t.userPoints.map((p) => [p[0], p[1]] as const),
      visibility: [...t.visibility],
      bbox: t.bbox ? { ...t.bbox } : null,
    }));
    s.references_ = this.references_.map((r) => ({ ...r, bbox: { ...r.bbox } }));
    s.counter = this.counter;
    return s;
  }
}
