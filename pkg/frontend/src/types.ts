/** Wire and session types shared across the canvas app. */

export const SCHEMA_VERSION = "1";

export type Point = readonly [number, number];
export type VisFlag = 0 | 1;

export interface BBoxJson {
  cx: number;
  cy: number;
  w: number;
  h: number;
}

export interface TrackJson {
  track_id: string;
  is_background: boolean;
  points: Point[];
  visibility: VisFlag[];
}

export interface CaptionJson {
  text: string;
  subject_hint: string;
}

export interface ReferenceJson {
  image_ref: string;
  target_bbox: BBoxJson;
  rotation: number;
}

export interface TripletJson {
  schema_version: string;
  frame_size: [number, number];
  num_frames: number;
  tracks: TrackJson[];
  bboxes: Record<string, BBoxJson>;
  captions: Record<string, CaptionJson>;
  references: ReferenceJson[];
}

export interface Violation {
  track_id: string;
  path: string;
  message: string;
}

export interface ValidationReport {
  ok: boolean;
  violations: Violation[];
}

/** Editable track state held by the canvas before export. */
export interface DraftTrack {
  trackId: string;
  isBackground: boolean;
  /** Gesture points in frame coordinates, already downsampled to <= 64. */
  userPoints: Point[];
  startFrame: number;
  endFrame: number;
  /** Dense per-frame flags; starts from timing defaults, edited by toggles. */
  visibility: VisFlag[];
  caption: string;
  subjectHint: string;
  bbox: BBoxJson | null;
}

/** A reference image dropped onto the canvas. */
export interface PlacedReference {
  assetId: string;
  bbox: BBoxJson;
  rotation: number;
  /** Native pixel size of the uploaded image, kept for rescaling. */
  nativeWidth: number;
  nativeHeight: number;
}

export type PlaybackStatus = "idle" | "playing" | "paused";

export interface PlaybackState {
  status: PlaybackStatus;
  frame: number;
}

/** Job lifecycle mirror of the service's wire format. */
export type JobState = "queued" | "running" | "done" | "failed";

export interface JobView {
  job_id: string;
  state: JobState;
  progress: number;
  result_ref: string | null;
  error_msg: string | null;
}

export interface ServiceConfig {
  frame_size: [number, number];
  num_frames: number;
  attention_mode: string;
  attention_weight: number;
  caption_words: string[];
  palette: string[];
}

/** Sidecar state that travels with an exported triplet. */
export interface SessionSidecar {
  sidecar_version: string;
  background_asset: string | null;
  track_ui: Record<
    string,
    { user_points: Point[]; start_frame: number; end_frame: number }
  >;
  reference_ui: Array<{ native_width: number; native_height: number }>;
  last_job_id: string | null;
  playback: PlaybackState;
}

export interface SessionExport {
  triplet: TripletJson;
  sidecar: SessionSidecar;
}
