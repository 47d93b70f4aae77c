"""Canonical types for trajectory/caption/reference prompts.

Coordinate convention: origin at the top-left corner, x grows rightward,
y grows downward, units are pixels at native frame resolution. A point is
considered on-screen inside the closed rectangle [0, w] x [0, h]; the same
closed-rectangle test is used when cropping rewrites visibility.
"""

from __future__ import annotations

import json
from dataclasses import dataclass, field
from typing import Iterable, Sequence

import numpy as np

SCHEMA_VERSION = "1"


class TripletError(ValueError):
    """Raised when parsing rejects malformed or invariant-violating input."""

    def __init__(self, message: str, report: "ValidationReport | None" = None):
        super().__init__(message)
        self.report = report


def in_frame(x: float, y: float, width: float, height: float) -> bool:
    """Closed-rectangle on-screen test shared by validation, synthesis and crops."""
    return 0.0 <= x <= width and 0.0 <= y <= height


def _freeze(a: np.ndarray) -> np.ndarray:
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class TrajectoryTrack:
    """One tracked point over T frames: positions plus binary visibility."""

    track_id: str
    points: np.ndarray  # (T, 2) float32, pixel coords
    visibility: np.ndarray  # (T,) uint8 in {0, 1}
    is_background: bool = False

    def __post_init__(self):
        pts = _freeze(np.asarray(self.points, dtype=np.float32).reshape(-1, 2))
        vis = _freeze(np.asarray(self.visibility, dtype=np.uint8).reshape(-1))
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "visibility", vis)

    @property
    def num_frames(self) -> int:
        return len(self.points)


@dataclass(frozen=True)
class BBox:
    cx: float
    cy: float
    w: float
    h: float

    def as_rect(self) -> tuple[float, float, float, float]:
        """(x_min, y_min, x_max, y_max)."""
        return (self.cx - self.w / 2, self.cy - self.h / 2,
                self.cx + self.w / 2, self.cy + self.h / 2)


@dataclass(frozen=True)
class Caption:
    text: str
    subject_hint: str = ""


@dataclass(frozen=True)
class ReferencePlacement:
    """A reference image dropped onto the first-frame canvas."""

    image_ref: str
    target_bbox: BBox
    rotation: float = 0.0  # degrees, counter-clockwise


@dataclass(frozen=True)
class MultimodalTriplet:
    """Per-clip prompt: tracks, per-foreground-track bbox and caption, references."""

    tracks: tuple[TrajectoryTrack, ...]
    bboxes: dict[str, BBox]
    captions: dict[str, Caption]
    references: tuple[ReferencePlacement, ...]
    frame_size: tuple[int, int]  # (width, height)
    num_frames: int

    def __post_init__(self):
        object.__setattr__(self, "tracks", tuple(self.tracks))
        object.__setattr__(self, "references", tuple(self.references))
        object.__setattr__(self, "frame_size",
                           (int(self.frame_size[0]), int(self.frame_size[1])))

    def foreground_tracks(self) -> list[TrajectoryTrack]:
        return [t for t in self.tracks if not t.is_background]

    def track(self, track_id: str) -> TrajectoryTrack:
        for t in self.tracks:
            if t.track_id == track_id:
                return t
        raise KeyError(track_id)


@dataclass(frozen=True)
class Violation:
    track_id: str  # "" for triplet-level violations
    path: str
    message: str


@dataclass
class ValidationReport:
    violations: list[Violation] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return not self.violations

    def add(self, track_id: str, path: str, message: str) -> None:
        self.violations.append(Violation(track_id, path, message))

    def to_json_obj(self) -> dict:
        return {
            "ok": self.ok,
            "violations": [
                {"track_id": v.track_id, "path": v.path, "message": v.message}
                for v in self.violations
            ],
        }


def validate_triplet(triplet: MultimodalTriplet) -> ValidationReport:
    """Check every triplet invariant; reports violations, never raises."""
    rep = ValidationReport()
    w, h = triplet.frame_size
    T = triplet.num_frames

    if T < 2:
        rep.add("", "num_frames", f"num_frames must be >= 2, got {T}")

    seen: set[str] = set()
    for tr in triplet.tracks:
        tid = tr.track_id
        if tid in seen:
            rep.add(tid, "track_id", "duplicate track_id")
        seen.add(tid)

        if len(tr.points) != len(tr.visibility):
            rep.add(tid, "points/visibility",
                    f"length mismatch: {len(tr.points)} points vs "
                    f"{len(tr.visibility)} visibility flags")
        if len(tr.points) != T:
            rep.add(tid, "points",
                    f"track has {len(tr.points)} frames, triplet declares {T}")
        bad = [int(v) for v in np.unique(tr.visibility) if v not in (0, 1)]
        if bad:
            rep.add(tid, "visibility", f"visibility values outside {{0,1}}: {bad}")

        n = min(len(tr.points), len(tr.visibility))
        for t in range(n):
            if tr.visibility[t] == 1 and not in_frame(*tr.points[t], w, h):
                rep.add(tid, f"points[{t}]",
                        "visible point lies outside the frame rectangle")
                break  # one violation per track is enough to localize it

        if tr.is_background:
            if tid in triplet.bboxes:
                rep.add(tid, "bboxes", "background track must not have a bbox")
            if tid in triplet.captions:
                rep.add(tid, "captions", "background track must not have a caption")
        else:
            if tid not in triplet.bboxes:
                rep.add(tid, "bboxes", "foreground track missing bbox")
            if tid not in triplet.captions:
                rep.add(tid, "captions", "foreground track missing caption")
            else:
                if not triplet.captions[tid].text:
                    rep.add(tid, "captions.text",
                            "foreground caption text must be non-empty")

    track_ids = {t.track_id for t in triplet.tracks}
    for tid in triplet.bboxes:
        bb = triplet.bboxes[tid]
        if tid not in track_ids:
            rep.add(tid, "bboxes", "bbox refers to unknown track_id")
        if not (bb.w > 0 and bb.h > 0):
            rep.add(tid, "bboxes", f"bbox dimensions must be positive, got {bb.w}x{bb.h}")
    for tid in triplet.captions:
        if tid not in track_ids:
            rep.add(tid, "captions", "caption refers to unknown track_id")

    for k, ref in enumerate(triplet.references):
        bb = ref.target_bbox
        if not (bb.w > 0 and bb.h > 0):
            rep.add("", f"references[{k}].target_bbox", "bbox dimensions must be positive")
            continue
        x0, y0, x1, y1 = bb.as_rect()
        intersects = x1 >= 0 and x0 <= w and y1 >= 0 and y0 <= h
        if not intersects:
            # Off-screen placement is allowed only for entry events: some track
            # must become visible strictly after the first frame.
            if not _has_entry_track(triplet.tracks):
                rep.add("", f"references[{k}].target_bbox",
                        "fully off-screen reference with no entry track to bind to")
    return rep


def _has_entry_track(tracks: Iterable[TrajectoryTrack]) -> bool:
    for tr in tracks:
        vis = np.flatnonzero(tr.visibility)
        if len(vis) and vis[0] > 0:
            return True
    return False


# --- JSON wire format (schema_version "1") ---------------------------------

def emit_triplet(triplet: MultimodalTriplet) -> bytes:
    """Serialize to the canonical JSON wire format (UTF-8, sorted keys)."""
    obj = {
        "schema_version": SCHEMA_VERSION,
        "frame_size": [triplet.frame_size[0], triplet.frame_size[1]],
        "num_frames": triplet.num_frames,
        "tracks": [
            {
                "track_id": t.track_id,
                "is_background": t.is_background,
                "points": [[float(x), float(y)] for x, y in t.points],
                "visibility": [int(v) for v in t.visibility],
            }
            for t in triplet.tracks
        ],
        "bboxes": {
            tid: {"cx": float(b.cx), "cy": float(b.cy),
                  "w": float(b.w), "h": float(b.h)}
            for tid, b in sorted(triplet.bboxes.items())
        },
        "captions": {
            tid: {"text": c.text, "subject_hint": c.subject_hint}
            for tid, c in sorted(triplet.captions.items())
        },
        "references": [
            {
                "image_ref": r.image_ref,
                "target_bbox": {"cx": float(r.target_bbox.cx), "cy": float(r.target_bbox.cy),
                                "w": float(r.target_bbox.w), "h": float(r.target_bbox.h)},
                "rotation": float(r.rotation),
            }
            for r in triplet.references
        ],
    }
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def _require(cond: bool, msg: str) -> None:
    if not cond:
        raise TripletError(msg)


def parse_triplet(data: bytes | str) -> MultimodalTriplet:
    """Parse and validate the JSON wire format; rejects invariant violations."""
    try:
        obj = json.loads(data)
    except json.JSONDecodeError as e:
        raise TripletError(f"malformed JSON: {e}") from e
    _require(isinstance(obj, dict), "top-level value must be an object")

    version = obj.get("schema_version")
    if version != SCHEMA_VERSION:
        raise TripletError(f"unsupported schema_version {version!r}, expected {SCHEMA_VERSION!r}")

    fs = obj.get("frame_size")
    _require(isinstance(fs, list) and len(fs) == 2, "frame_size must be [w, h]")
    T = obj.get("num_frames")
    _require(isinstance(T, int) and not isinstance(T, bool), "num_frames must be an integer")

    tracks = []
    for i, t in enumerate(obj.get("tracks", [])):
        _require(isinstance(t, dict), f"tracks[{i}] must be an object")
        _require(isinstance(t.get("track_id"), str), f"tracks[{i}].track_id must be a string")
        pts = t.get("points")
        _require(isinstance(pts, list), f"tracks[{i}].points must be a list")
        for p in pts:
            _require(isinstance(p, list) and len(p) == 2
                     and all(isinstance(c, (int, float)) and not isinstance(c, bool) for c in p),
                     f"tracks[{i}].points entries must be [x, y] numbers")
        vis = t.get("visibility")
        _require(isinstance(vis, list), f"tracks[{i}].visibility must be a list")
        for v in vis:
            _require(isinstance(v, int) and not isinstance(v, bool) and v in (0, 1),
                     f"tracks[{i}].visibility values must be 0 or 1")
        tracks.append(TrajectoryTrack(
            track_id=t["track_id"],
            points=np.asarray(pts, dtype=np.float32).reshape(-1, 2),
            visibility=np.asarray(vis, dtype=np.uint8),
            is_background=bool(t.get("is_background", False)),
        ))

    def _parse_bbox(b: dict, where: str) -> BBox:
        _require(isinstance(b, dict) and all(k in b for k in ("cx", "cy", "w", "h")),
                 f"{where} must have cx, cy, w, h")
        return BBox(float(b["cx"]), float(b["cy"]), float(b["w"]), float(b["h"]))

    bboxes = {tid: _parse_bbox(b, f"bboxes[{tid}]")
              for tid, b in obj.get("bboxes", {}).items()}
    captions = {}
    for tid, c in obj.get("captions", {}).items():
        _require(isinstance(c, dict) and isinstance(c.get("text"), str),
                 f"captions[{tid}].text must be a string")
        captions[tid] = Caption(text=c["text"], subject_hint=str(c.get("subject_hint", "")))
    references = []
    for k, r in enumerate(obj.get("references", [])):
        _require(isinstance(r, dict) and isinstance(r.get("image_ref"), str),
                 f"references[{k}].image_ref must be a string")
        references.append(ReferencePlacement(
            image_ref=r["image_ref"],
            target_bbox=_parse_bbox(r.get("target_bbox"), f"references[{k}].target_bbox"),
            rotation=float(r.get("rotation", 0.0)),
        ))

    triplet = MultimodalTriplet(
        tracks=tuple(tracks), bboxes=bboxes, captions=captions,
        references=tuple(references), frame_size=(int(fs[0]), int(fs[1])),
        num_frames=T,
    )
    report = validate_triplet(triplet)
    if not report.ok:
        first = report.violations[0]
        raise TripletError(
            f"triplet violates invariants ({len(report.violations)} violation(s); "
            f"first: {first.path}: {first.message})", report)
    return triplet


# --- Trajectory timing / resampling -----------------------------------------

def resample_track(
    user_points: Sequence[tuple[float, float]],
    start_frame: int,
    end_frame: int,
    num_frames: int,
    track_id: str = "track",
    visible_before: int = 1,
    visible_after: int = 1,
    is_background: bool = False,
) -> TrajectoryTrack:
    """Expand a sparse user polyline into a dense per-frame track.

    Consecutive user points are assigned equal time intervals across
    [start_frame, end_frame]; positions inside each interval are linearly
    interpolated, so sparser points travel farther per frame (faster motion).
    Frames before start_frame hold the first point, frames after end_frame
    hold the last; visibility is 1 on [start_frame, end_frame] and takes the
    caller's explicit flags outside that window.
    """
    pts = np.asarray(user_points, dtype=np.float64).reshape(-1, 2)
    if len(pts) < 2:
        raise ValueError("need at least 2 user points")
    if not (0 <= start_frame < end_frame < num_frames):
        raise ValueError(
            f"need 0 <= start_frame < end_frame < num_frames, "
            f"got start={start_frame} end={end_frame} T={num_frames}")

    n_seg = len(pts) - 1
    out = np.empty((num_frames, 2), dtype=np.float64)
    out[:start_frame] = pts[0]
    out[end_frame:] = pts[-1]
    for t in range(start_frame, end_frame + 1):
        u = (t - start_frame) / (end_frame - start_frame)  # in [0, 1]
        s = u * n_seg
        k = min(int(np.floor(s)), n_seg - 1)
        frac = s - k
        out[t] = pts[k] * (1.0 - frac) + pts[k + 1] * frac

    vis = np.empty(num_frames, dtype=np.uint8)
    vis[:start_frame] = visible_before
    vis[start_frame:end_frame + 1] = 1
    vis[end_frame + 1:] = visible_after
    return TrajectoryTrack(track_id=track_id, points=out.astype(np.float32),
                           visibility=vis, is_background=is_background)
