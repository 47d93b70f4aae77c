"""Synthetic moving-shape clips with exact tracks, plus curation ops."""

from trajvid.synthgen.curate import (
    crop_augment,
    extract_reference,
    filter_clips,
    paste_reference,
    render_trajectory_overlay,
    rotated_extent,
)
from trajvid.synthgen.dataset import (
    generate_clips,
    load_clip,
    load_reference_images,
    make_dataset,
    read_manifest,
)
from trajvid.synthgen.scene import (
    DEFAULT_KIND_MIX,
    PALETTE,
    SHAPES,
    ClipRecord,
    ObjectMeta,
    ObjectSpec,
    PathSpec,
    SceneSpec,
    analytic_area,
    motion_score,
    render_scene,
    sample_scene_spec,
    shape_bbox,
    shape_extents,
    shape_mask,
)

__all__ = [
    "DEFAULT_KIND_MIX", "PALETTE", "SHAPES",
    "ClipRecord", "ObjectMeta", "ObjectSpec", "PathSpec", "SceneSpec",
    "analytic_area", "motion_score", "render_scene", "sample_scene_spec",
    "shape_bbox", "shape_extents", "shape_mask",
    "crop_augment", "extract_reference", "filter_clips", "paste_reference",
    "render_trajectory_overlay", "rotated_extent",
    "generate_clips", "load_clip", "load_reference_images", "make_dataset",
    "read_manifest",
]
