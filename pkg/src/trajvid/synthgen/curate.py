"""Clip curation: motion filtering, crop augmentation, reference extraction.

Crops are the mechanism that manufactures entry/exit events: a track that
never reaches the crop window on early frames becomes an entry track with
visibility rewritten by the same closed-rectangle test used everywhere else.
"""

from __future__ import annotations

import dataclasses
import math

import numpy as np
from PIL import Image, ImageDraw

from trajvid.synthgen.scene import (
    ClipRecord,
    ObjectMeta,
    fill_caption,
    motion_phrase,
    motion_score,
    shape_bbox,
)
from trajvid.triplet import (
    BBox,
    Caption,
    MultimodalTriplet,
    ReferencePlacement,
    TrajectoryTrack,
    in_frame,
    validate_triplet,
)

__all__ = [
    "motion_score", "filter_clips", "crop_augment", "extract_reference",
    "paste_reference", "rotated_extent", "render_trajectory_overlay",
]

TRAJ_COLORS = ((255, 0, 255), (255, 255, 0), (0, 255, 255),
               (255, 128, 0), (128, 255, 0), (0, 128, 255))


def filter_clips(clips: list[ClipRecord], threshold: float) -> list[ClipRecord]:
    """Keep clips whose motion score reaches the threshold, order preserved."""
    if threshold < 0:
        raise ValueError("threshold must be >= 0")
    return [c for c in clips if c.motion_score >= threshold]


def crop_augment(clip: ClipRecord, crop_rect: tuple[int, int, int, int]) -> ClipRecord | None:
    """Crop a clip to (x0, y0, w, h), rewriting coordinates and visibility.

    A point is visible in the crop iff it was visible before and lies inside
    the closed crop rectangle. Objects with no visible frame left are dropped;
    returns None when no foreground track survives (drop signal, not an error).
    """
    x0, y0, cw, ch = (int(v) for v in crop_rect)
    H, W = clip.frames.shape[1:3]
    if cw < 1 or ch < 1:
        raise ValueError("crop must have nonzero area")
    if x0 < 0 or y0 < 0 or x0 + cw > W or y0 + ch > H:
        raise ValueError(f"crop {crop_rect} exceeds {W}x{H} frame")

    frames = clip.frames[:, y0:y0 + ch, x0:x0 + cw].copy()
    off = np.array([x0, y0], dtype=np.float32)
    T = clip.triplet.num_frames

    def _shift(track: TrajectoryTrack) -> TrajectoryTrack | None:
        pts = track.points - off
        vis = np.array(
            [1 if (track.visibility[t] == 1 and in_frame(pts[t, 0], pts[t, 1], cw, ch))
             else 0 for t in range(T)], dtype=np.uint8)
        if not vis.any():
            return None
        return TrajectoryTrack(track.track_id, pts, vis, track.is_background)

    shifted = {t.track_id: _shift(t) for t in clip.triplet.tracks}

    metas: list[ObjectMeta] = []
    ground_truth: dict[str, np.ndarray] = {}
    tracks: list[TrajectoryTrack] = []
    bboxes: dict[str, BBox] = {}
    captions: dict[str, Caption] = {}

    for meta in clip.objects:
        kept_ids = tuple(tid for tid in meta.track_ids if shifted.get(tid) is not None)
        if not kept_ids:
            continue
        center = clip.ground_truth[meta.object_id] - off.astype(np.float64)
        first_vis = min(int(np.flatnonzero(shifted[tid].visibility)[0])
                        for tid in kept_ids)
        bb = shape_bbox(meta.shape, meta.size, tuple(center[first_vis]),
                        clip_to=(cw, ch))
        vis_center = np.array([1 if in_frame(x, y, cw, ch) else 0
                               for x, y in center], dtype=np.uint8)
        text = fill_caption(meta.caption_template, meta.color_name, meta.shape,
                            motion_phrase(center, vis_center))
        hint = f"{meta.color_name} {meta.shape}"
        for tid in kept_ids:
            tracks.append(shifted[tid])
            bboxes[tid] = bb
            captions[tid] = Caption(text, hint)
        kept_offsets = meta.offsets[[meta.track_ids.index(t) for t in kept_ids]]
        metas.append(dataclasses.replace(meta, track_ids=kept_ids,
                                         offsets=kept_offsets))
        ground_truth[meta.object_id] = center

    if not tracks:
        return None
    for t in clip.triplet.tracks:
        if t.is_background and shifted.get(t.track_id) is not None:
            tracks.append(shifted[t.track_id])

    references = tuple(
        dataclasses.replace(r, target_bbox=BBox(
            r.target_bbox.cx - x0, r.target_bbox.cy - y0,
            r.target_bbox.w, r.target_bbox.h))
        for r in clip.triplet.references)

    triplet = MultimodalTriplet(
        tracks=tuple(tracks), bboxes=bboxes, captions=captions,
        references=references, frame_size=(cw, ch), num_frames=T)
    if not validate_triplet(triplet).ok:
        return None
    return ClipRecord(frames=frames, triplet=triplet, ground_truth=ground_truth,
                      motion_score=motion_score(triplet.tracks),
                      objects=tuple(metas), ref_images=clip.ref_images)


def rotated_extent(w: float, h: float, rotation_deg: float) -> tuple[float, float]:
    """Bounding-box extent of a w x h rectangle rotated by the given angle."""
    a = math.radians(rotation_deg)
    ca, sa = abs(math.cos(a)), abs(math.sin(a))
    return (w * ca + h * sa, w * sa + h * ca)


def extract_reference(
    frame: np.ndarray,
    bbox: BBox,
    translate: tuple[float, float] = (0.0, 0.0),
    scale: float = 1.0,
    rotation: float = 0.0,
    rotate_image: bool = True,
) -> tuple[np.ndarray, ReferencePlacement]:
    """Cut the bbox patch and apply a mild affine; returns RGBA + placement.

    The placement records where pasting the patch back into a first frame
    should center it, so the identity affine reproduces the source pixels.
    With rotate_image=False the returned patch stays unrotated while the
    placement still records the angle, for pipelines that store unrotated
    assets and rotate exactly once at paste time.
    """
    if not (0.5 <= scale <= 2.0):
        raise ValueError(f"scale {scale} outside the mild range [0.5, 2.0]")
    if abs(rotation) > 30.0:
        raise ValueError(f"rotation {rotation} outside the mild range [-30, 30]")
    H, W = frame.shape[:2]
    dx, dy = translate
    if abs(dx) > 0.25 * W or abs(dy) > 0.25 * H:
        raise ValueError(f"translation {translate} outside the mild range "
                         f"(0.25 of the frame dimension)")

    rx0, ry0, rx1, ry1 = bbox.as_rect()
    x0 = max(int(math.floor(rx0)), 0)
    y0 = max(int(math.floor(ry0)), 0)
    x1 = min(int(math.ceil(rx1)), W)
    y1 = min(int(math.ceil(ry1)), H)
    if x1 <= x0 or y1 <= y0:
        raise ValueError("bbox outside frame")

    patch = frame[y0:y1, x0:x1]
    rgba = np.concatenate(
        [patch, np.full(patch.shape[:2] + (1,), 255, dtype=np.uint8)], axis=2)
    img = Image.fromarray(rgba, "RGBA")
    if scale != 1.0:
        img = img.resize((max(1, round(img.width * scale)),
                          max(1, round(img.height * scale))),
                         Image.Resampling.BILINEAR)
    if rotation != 0.0 and rotate_image:
        img = img.rotate(rotation, expand=True,
                         resample=Image.Resampling.BILINEAR)

    cx, cy = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    placement = ReferencePlacement(
        image_ref="",
        target_bbox=BBox(cx + dx, cy + dy, (x1 - x0) * scale, (y1 - y0) * scale),
        rotation=rotation)
    return np.asarray(img), placement


def paste_reference(canvas: np.ndarray, ref_image: np.ndarray,
                    placement: ReferencePlacement) -> np.ndarray:
    """Alpha-composite an RGBA patch onto an RGB canvas at the placement center."""
    out = canvas.copy()
    H, W = out.shape[:2]
    rh, rw = ref_image.shape[:2]
    left = round(placement.target_bbox.cx - rw / 2.0)
    top = round(placement.target_bbox.cy - rh / 2.0)
    x0, y0 = max(left, 0), max(top, 0)
    x1, y1 = min(left + rw, W), min(top + rh, H)
    if x1 <= x0 or y1 <= y0:
        return out
    src = ref_image[y0 - top:y1 - top, x0 - left:x1 - left]
    alpha = src[..., 3:4].astype(np.float32) / 255.0
    region = out[y0:y1, x0:x1].astype(np.float32)
    blended = alpha * src[..., :3].astype(np.float32) + (1.0 - alpha) * region
    out[y0:y1, x0:x1] = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    return out


def render_trajectory_overlay(clip: ClipRecord) -> np.ndarray:
    """Draw each foreground object's tracks in one color over every frame.

    Only segments with both endpoints visible are drawn, so entries and exits
    truncate the polyline instead of sweeping across the frame.
    """
    T, H, W = clip.frames.shape[:3]
    by_id = {t.track_id: t for t in clip.triplet.tracks}
    out = np.empty_like(clip.frames)
    for t in range(T):
        img = Image.fromarray(clip.frames[t])
        draw = ImageDraw.Draw(img)
        for i, meta in enumerate(clip.objects):
            color = TRAJ_COLORS[i % len(TRAJ_COLORS)]
            for tid in meta.track_ids:
                tr = by_id[tid]
                pts = tr.points
                vis = tr.visibility
                for k in range(len(pts) - 1):
                    if vis[k] == 1 and vis[k + 1] == 1:
                        draw.line((float(pts[k, 0]), float(pts[k, 1]),
                                   float(pts[k + 1, 0]), float(pts[k + 1, 1])),
                                  fill=color, width=1)
                for k in range(len(pts)):
                    if vis[k] == 1:
                        x, y = float(pts[k, 0]), float(pts[k, 1])
                        draw.ellipse((x - 2, y - 2, x + 2, y + 2), fill=color)
        out[t] = np.asarray(img)
    return out
