"""Trajectory-following and appearance metrics with a color-centroid tracker.

The tracker is an oracle, not a learned model: it only works on the synthetic
shape vocabulary (one distinct palette color per object), where it is
essentially exact. Each foreground track's color is read off its own caption,
every pixel is assigned to its nearest candidate color, and the track point
per frame is the centroid of the pixels assigned to that color within
tolerance. That makes the trajectory metrics trustworthy without a pretrained
point tracker.

Undefined metric values (no co-visible frames, empty masks, and so on) are
returned as NaN and counted separately by the report; they never silently
enter an aggregate.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .conditioning import LatentGrid, encode_frame
from .synthgen.scene import BG_DARK, BG_LIGHT, PALETTE
from .triplet import MultimodalTriplet, TrajectoryTrack

EVAL_SCHEMA_VERSION = "1"
COLOR_TOLERANCE = 60.0
MIN_VISIBLE_PIXELS = 4

CONSISTENCY_NOTE = ("consistency uses the builtin block-pooling features; "
                    "values are not comparable to scores from pretrained "
                    "image backbones")


def _caption_color(text: str) -> str | None:
    for word in text.lower().split():
        if word in PALETTE:
            return word
    return None


def _track_colors(triplet: MultimodalTriplet) -> dict[str, str]:
    """Map each foreground track to its caption's palette color.

    Tracks may share a color only when they share the exact same caption
    (keypoints of one object); otherwise the clip is ambiguous for a
    color-based tracker and is rejected.
    """
    colors: dict[str, str] = {}
    caption_of: dict[str, str] = {}
    for track in triplet.foreground_tracks():
        cap = triplet.captions.get(track.track_id)
        if cap is None:
            raise ValueError(f"track {track.track_id!r} has no caption")
        color = _caption_color(cap.text)
        if color is None:
            raise ValueError(
                f"caption for {track.track_id!r} names no palette color")
        if color in caption_of and caption_of[color] != cap.text:
            raise ValueError(f"ambiguous colors: {color!r} is claimed by "
                             f"two differently captioned objects")
        caption_of[color] = cap.text
        colors[track.track_id] = color
    return colors


def oracle_track(frames: np.ndarray, triplet: MultimodalTriplet,
                 tolerance: float = COLOR_TOLERANCE,
                 min_pixels: int = MIN_VISIBLE_PIXELS,
                 ) -> dict[str, TrajectoryTrack]:
    """Track every foreground point by its object's color centroid.

    Per frame, pixels are assigned to the nearest of all object colors plus
    the two background grays; a track is visible when at least min_pixels
    land on its color within tolerance, and its point is their centroid
    (pixel centers, so x = col + 0.5).
    """
    if frames.shape[0] != triplet.num_frames:
        raise ValueError(f"{frames.shape[0]} frames for a "
                         f"{triplet.num_frames}-frame triplet")
    colors = _track_colors(triplet)
    names = sorted(set(colors.values()))
    candidates = np.array([PALETTE[c] for c in names]
                          + [BG_LIGHT, BG_DARK], dtype=np.float64)

    T = frames.shape[0]
    pts = {c: np.zeros((T, 2), dtype=np.float32) for c in names}
    vis = {c: np.zeros(T, dtype=np.uint8) for c in names}
    for t in range(T):
        px = frames[t].astype(np.float64)  # (H, W, 3)
        d = np.linalg.norm(px[:, :, None, :] - candidates[None, None],
                           axis=-1)  # (H, W, K)
        nearest = d.argmin(axis=-1)
        for ci, cname in enumerate(names):
            mask = (nearest == ci) & (d[:, :, ci] <= tolerance)
            if int(mask.sum()) < min_pixels:
                continue
            ii, jj = np.nonzero(mask)
            pts[cname][t] = (jj.mean() + 0.5, ii.mean() + 0.5)
            vis[cname][t] = 1

    return {tid: TrajectoryTrack(tid, pts[color], vis[color])
            for tid, color in colors.items()}


def objmc(generated: TrajectoryTrack, reference: TrajectoryTrack) -> float:
    """Mean Euclidean error over co-visible frames; NaN when there are none."""
    if generated.num_frames != reference.num_frames:
        raise ValueError(f"track lengths differ: {generated.num_frames} vs "
                         f"{reference.num_frames}")
    both = (generated.visibility == 1) & (reference.visibility == 1)
    if not both.any():
        return math.nan
    diff = generated.points[both].astype(np.float64) \
        - reference.points[both].astype(np.float64)
    return float(np.linalg.norm(diff, axis=1).mean())


def appearance_rate(gen_vis: np.ndarray, ref_vis: np.ndarray) -> float:
    """Recall of reference-visible frames; NaN when reference has none."""
    gen_vis = np.asarray(gen_vis)
    ref_vis = np.asarray(ref_vis)
    if gen_vis.shape != ref_vis.shape:
        raise ValueError(f"visibility lengths differ: {gen_vis.shape} vs "
                         f"{ref_vis.shape}")
    ref_on = ref_vis == 1
    if not ref_on.any():
        return math.nan
    return float(((gen_vis == 1) & ref_on).sum() / ref_on.sum())


def foreground_cell_masks(triplet: MultimodalTriplet,
                          grid: LatentGrid) -> np.ndarray:
    """(T, H_l, W_l) bool: cells covered by any visible foreground track.

    Coverage per frame is the track's first-frame bbox re-centered on its
    current point, intersected with the frame; cell membership is the closed
    test on cell centers.
    """
    s = grid.spatial_stride
    fw, fh = grid.width * s, grid.height * s
    cx = (np.arange(grid.width) + 0.5) * s
    cy = (np.arange(grid.height) + 0.5) * s
    masks = np.zeros((triplet.num_frames, grid.height, grid.width),
                     dtype=bool)
    for track in triplet.foreground_tracks():
        bb = triplet.bboxes[track.track_id]
        for t in range(triplet.num_frames):
            if not track.visibility[t]:
                continue
            x, y = track.points[t]
            x0, x1 = max(x - bb.w / 2, 0.0), min(x + bb.w / 2, fw)
            y0, y1 = max(y - bb.h / 2, 0.0), min(y + bb.h / 2, fh)
            if x0 > x1 or y0 > y1:
                continue
            masks[t] |= ((cy >= y0) & (cy <= y1))[:, None] \
                & ((cx >= x0) & (cx <= x1))[None, :]
    return masks


def consistency(frames: np.ndarray,
                fg_masks: np.ndarray) -> tuple[float, float]:
    """Feature stability of subject and background across adjacent frames.

    Features are the builtin per-cell encodings, mean-pooled over the
    foreground cells (subject) and their complement (background); per pair of
    consecutive frames the cosine similarity is mapped to [0, 1]. Pairs where
    either side has an empty pool are skipped; if no pair survives, that
    component is NaN.
    """
    if frames.shape[0] < 2:
        raise ValueError("need at least 2 frames")
    if fg_masks.shape[0] != frames.shape[0]:
        raise ValueError(f"{fg_masks.shape[0]} masks for "
                         f"{frames.shape[0]} frames")
    grid = LatentGrid.for_video(frames.shape[0], frames.shape[1],
                                frames.shape[2])
    feats = [encode_frame(f, grid) for f in frames]

    def pooled(t: int, mask: np.ndarray) -> np.ndarray | None:
        if not mask.any():
            return None
        return feats[t][mask].astype(np.float64).mean(axis=0)

    def score(select) -> float:
        sims = []
        for t in range(frames.shape[0] - 1):
            a, b = pooled(t, select(t)), pooled(t + 1, select(t + 1))
            if a is None or b is None:
                continue
            na, nb = np.linalg.norm(a), np.linalg.norm(b)
            if na == 0.0 or nb == 0.0:
                continue
            sims.append((float(np.dot(a, b) / (na * nb)) + 1.0) / 2.0)
        return float(np.mean(sims)) if sims else math.nan

    return (score(lambda t: fg_masks[t]), score(lambda t: ~fg_masks[t]))


@dataclass
class EvalReport:
    objmc: float
    appearance_rate: float
    subject_consistency: float
    background_consistency: float
    undefined_counts: dict[str, int]
    cases: list[dict] = field(default_factory=list)

    def to_json_obj(self) -> dict:
        return {
            "schema_version": EVAL_SCHEMA_VERSION,
            "aggregate": {
                "objmc": _jsonable(self.objmc),
                "appearance_rate": _jsonable(self.appearance_rate),
                "subject_consistency": _jsonable(self.subject_consistency),
                "background_consistency": _jsonable(
                    self.background_consistency),
                "undefined_counts": self.undefined_counts,
            },
            "cases": self.cases,
            "notes": CONSISTENCY_NOTE,
        }

    def save(self, path) -> None:
        Path(path).write_text(json.dumps(self.to_json_obj(), sort_keys=True,
                                         indent=1) + "\n")


def _jsonable(x: float):
    return None if math.isnan(x) else float(x)


def _nanmean(values: list[float]) -> float:
    kept = [v for v in values if not math.isnan(v)]
    return float(np.mean(kept)) if kept else math.nan


def evaluate_cases(cases) -> EvalReport:
    """Aggregate metrics over (case_id, generated frames, triplet) cases.

    The triplet is the ground truth: its tracks are the reference
    trajectories and its bboxes define the subject cells.
    """
    rows = []
    for case_id, frames, triplet in cases:
        tracked = oracle_track(frames, triplet)
        dists, rates = [], []
        for tid, gen in sorted(tracked.items()):
            ref = triplet.track(tid)
            dists.append(objmc(gen, ref))
            rates.append(appearance_rate(gen.visibility, ref.visibility))
        grid = LatentGrid.for_video(triplet.num_frames,
                                    triplet.frame_size[1],
                                    triplet.frame_size[0])
        subj, bg = consistency(frames, foreground_cell_masks(triplet, grid))
        rows.append({
            "case_id": case_id,
            "objmc": _jsonable(_nanmean(dists)),
            "appearance_rate": _jsonable(_nanmean(rates)),
            "subject_consistency": _jsonable(subj),
            "background_consistency": _jsonable(bg),
        })

    def collect(key: str) -> list[float]:
        return [math.nan if r[key] is None else r[key] for r in rows]

    metrics = {k: collect(k) for k in
               ("objmc", "appearance_rate", "subject_consistency",
                "background_consistency")}
    return EvalReport(
        objmc=_nanmean(metrics["objmc"]),
        appearance_rate=_nanmean(metrics["appearance_rate"]),
        subject_consistency=_nanmean(metrics["subject_consistency"]),
        background_consistency=_nanmean(metrics["background_consistency"]),
        undefined_counts={k: sum(math.isnan(v) for v in vals)
                          for k, vals in metrics.items()},
        cases=rows)


def evaluate(model_or_checkpoint, benchmark_dir, steps: int = 20,
             seed: int = 0) -> EvalReport:
    """Sample every benchmark case from its first frame, then score it."""
    from .model import VelocityModel, load_checkpoint, sample
    from .synthgen.dataset import (load_clip, load_reference_images,
                                   read_manifest)

    if isinstance(model_or_checkpoint, VelocityModel):
        model = model_or_checkpoint
    else:
        model = load_checkpoint(model_or_checkpoint)
    manifest = read_manifest(benchmark_dir)
    if not manifest["clips"]:
        raise ValueError(f"benchmark at {benchmark_dir} is empty")

    def cases():
        for idx, entry in enumerate(manifest["clips"]):
            clip_id = entry["clip_id"]
            frames, triplet = load_clip(benchmark_dir, clip_id)
            assets = None
            if triplet.references:
                imgs = load_reference_images(benchmark_dir, clip_id, triplet)
                assets = {r.image_ref: img
                          for r, img in zip(triplet.references, imgs)}
            case_seed = int(np.random.SeedSequence(
                [seed, idx]).generate_state(1)[0])
            generated = sample(model, frames[0], triplet, steps=steps,
                               seed=case_seed, assets=assets)
            yield clip_id, generated, triplet

    return evaluate_cases(cases())
