"""Dataset assembly: sample scenes, filter, attach references, write to disk.

Layout: <root>/manifest.json, <root>/<clip_id>/frames/%04d.png,
<clip_id>/triplet.json, <clip_id>/refs/<k>.png, <clip_id>/overlay/%04d.png
(optional). Everything is deterministic per (n, seed): each candidate clip
draws its RNG stream from (seed, attempt index), so accepted clips do not
depend on scheduling or batch size.
"""

from __future__ import annotations

import dataclasses
import json
from pathlib import Path

import numpy as np
from PIL import Image

from trajvid.synthgen.curate import (
    crop_augment,
    extract_reference,
    render_trajectory_overlay,
)
from trajvid.synthgen.scene import (
    DEFAULT_KIND_MIX,
    ClipRecord,
    render_scene,
    sample_scene_spec,
)
from trajvid.triplet import (
    BBox,
    MultimodalTriplet,
    emit_triplet,
    parse_triplet,
    validate_triplet,
)

MANIFEST_SCHEMA_VERSION = "1"
DEFAULT_MOTION_THRESHOLD = 2.0
CROP_MARGIN = 32


def _attach_references(clip: ClipRecord, rng: np.random.Generator) -> ClipRecord:
    """Extract one mild-affine appearance patch per object.

    The patch is cut at the object's first visible frame. Its paste target is
    the object's frame-0 position (extrapolated off-screen for entry objects,
    where the paste clips away and captions carry the binding), jittered a
    few pixels so training never sees an exact copy-paste.
    """
    refs, images = [], []
    by_id = {t.track_id: t for t in clip.triplet.tracks}
    for meta in clip.objects:
        vis = by_id[meta.track_ids[0]].visibility
        first_vis = int(np.flatnonzero(vis)[0])
        bbox = clip.triplet.bboxes[meta.track_ids[0]]
        jitter = rng.uniform(-3.0, 3.0, size=2)
        # Stored unrotated; paste_references applies the recorded angle once.
        img, placement = extract_reference(
            clip.frames[first_vis], bbox,
            translate=(float(jitter[0]), float(jitter[1])),
            scale=float(rng.uniform(0.7, 1.4)),
            rotation=float(rng.uniform(-30.0, 30.0)),
            rotate_image=False)
        if first_vis > 0:
            start = clip.ground_truth[meta.object_id][0]
            placement = dataclasses.replace(placement, target_bbox=BBox(
                float(start[0] + jitter[0]), float(start[1] + jitter[1]),
                placement.target_bbox.w, placement.target_bbox.h))
        placement = dataclasses.replace(
            placement, image_ref=f"refs/{len(refs)}.png")
        refs.append(placement)
        images.append(img)
    triplet = dataclasses.replace(clip.triplet, references=tuple(refs))
    if not validate_triplet(triplet).ok:
        return clip  # keep the clip usable without references
    return dataclasses.replace(clip, triplet=triplet, ref_images=tuple(images))


def _sample_clip(rng: np.random.Generator, kind: str,
                 frame_size: tuple[int, int], num_frames: int,
                 keypoints_per_object: int) -> ClipRecord | None:
    if kind == "cropped":
        w, h = frame_size
        inner = str(rng.choice(["interior", "cross", "exit"]))
        spec = sample_scene_spec(
            rng, kind=inner, frame_size=(w + CROP_MARGIN, h + CROP_MARGIN),
            num_frames=num_frames, keypoints_per_object=keypoints_per_object)
        full = render_scene(spec)
        rect = (int(rng.integers(0, CROP_MARGIN + 1)),
                int(rng.integers(0, CROP_MARGIN + 1)), w, h)
        return crop_augment(full, rect)
    spec = sample_scene_spec(rng, kind=kind, frame_size=frame_size,
                             num_frames=num_frames,
                             keypoints_per_object=keypoints_per_object)
    return render_scene(spec)


def generate_clips(n: int, seed: int, *,
                   frame_size: tuple[int, int] = (64, 64),
                   num_frames: int = 16,
                   threshold: float = DEFAULT_MOTION_THRESHOLD,
                   kind_mix: dict[str, float] | None = None,
                   keypoints_per_object: int = 1,
                   with_references: bool = True) -> list[ClipRecord]:
    """Sample scenes until n clips pass the motion filter; deterministic."""
    if n < 1:
        raise ValueError("n must be >= 1")
    mix = dict(kind_mix or DEFAULT_KIND_MIX)
    kinds = sorted(mix)
    weights = np.array([mix[k] for k in kinds], dtype=np.float64)
    weights /= weights.sum()

    accepted: list[ClipRecord] = []
    max_attempts = 20 + 8 * n
    for attempt in range(max_attempts):
        if len(accepted) >= n:
            break
        rng = np.random.default_rng(np.random.SeedSequence([seed, attempt]))
        kind = str(rng.choice(kinds, p=weights))
        clip = _sample_clip(rng, kind, frame_size, num_frames,
                            keypoints_per_object)
        if clip is None or clip.motion_score < threshold:
            continue
        if with_references:
            clip = _attach_references(clip, rng)
        accepted.append(clip)
    if not accepted:
        raise ValueError("dataset empty after filtering")
    if len(accepted) < n:
        raise ValueError(
            f"only {len(accepted)} of {n} clips passed filtering; "
            f"lower the threshold or adjust the scene mix")
    return accepted


def _canonical_json_bytes(obj) -> bytes:
    return json.dumps(obj, sort_keys=True, separators=(",", ":")).encode("utf-8")


def make_dataset(n: int, seed: int, out_dir, *,
                 frame_size: tuple[int, int] = (64, 64),
                 num_frames: int = 16,
                 threshold: float = DEFAULT_MOTION_THRESHOLD,
                 kind_mix: dict[str, float] | None = None,
                 keypoints_per_object: int = 1,
                 overlay: bool = False) -> dict:
    """Generate n filtered clips and write the on-disk dataset layout."""
    root = Path(out_dir)
    root.mkdir(parents=True, exist_ok=True)
    clips = generate_clips(
        n, seed, frame_size=frame_size, num_frames=num_frames,
        threshold=threshold, kind_mix=kind_mix,
        keypoints_per_object=keypoints_per_object)

    entries = []
    for idx, clip in enumerate(clips):
        clip_id = f"clip{idx:05d}"
        cdir = root / clip_id
        (cdir / "frames").mkdir(parents=True, exist_ok=True)
        for t in range(clip.frames.shape[0]):
            Image.fromarray(clip.frames[t]).save(cdir / "frames" / f"{t:04d}.png")
        (cdir / "triplet.json").write_bytes(emit_triplet(clip.triplet))
        if clip.ref_images:
            (cdir / "refs").mkdir(exist_ok=True)
            for k, img in enumerate(clip.ref_images):
                Image.fromarray(img, "RGBA").save(cdir / "refs" / f"{k}.png")
        if overlay:
            (cdir / "overlay").mkdir(exist_ok=True)
            ov = render_trajectory_overlay(clip)
            for t in range(ov.shape[0]):
                Image.fromarray(ov[t]).save(cdir / "overlay" / f"{t:04d}.png")
        entries.append({
            "clip_id": clip_id,
            "motion_score": float(clip.motion_score),
            "num_frames": int(clip.triplet.num_frames),
            "frame_size": [clip.triplet.frame_size[0], clip.triplet.frame_size[1]],
        })

    manifest = {"schema_version": MANIFEST_SCHEMA_VERSION, "clips": entries}
    (root / "manifest.json").write_bytes(_canonical_json_bytes(manifest))
    return manifest


def read_manifest(root) -> dict:
    manifest = json.loads((Path(root) / "manifest.json").read_text())
    if manifest.get("schema_version") != MANIFEST_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported manifest schema_version {manifest.get('schema_version')!r}")
    return manifest


def load_clip(root, clip_id: str) -> tuple[np.ndarray, MultimodalTriplet]:
    """Read one clip's frames and triplet back from the dataset layout."""
    cdir = Path(root) / clip_id
    triplet = parse_triplet((cdir / "triplet.json").read_bytes())
    paths = sorted((cdir / "frames").glob("*.png"))
    frames = np.stack([np.asarray(Image.open(p).convert("RGB")) for p in paths])
    return frames, triplet


def load_reference_images(root, clip_id: str,
                          triplet: MultimodalTriplet) -> list[np.ndarray]:
    cdir = Path(root) / clip_id
    return [np.asarray(Image.open(cdir / r.image_ref).convert("RGBA"))
            for r in triplet.references]
