"""Conditioning tensors: latent grid, heatmap, point map, pasted first frame.

The latent layout follows the image-plus-video convention: latent frame 0
encodes pixel frame 0 alone; latent frame l >= 1 covers the pixel window
[1 + s*(l-1), min(1 + s*l, T)) for temporal stride s, and is represented by
the window's first frame. The channel concatenation order
[noise | image_latent | mask | heatmap | point_map] is a checkpoint
compatibility contract and is recorded in checkpoint metadata.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from PIL import Image

from trajvid.triplet import (
    MultimodalTriplet,
    ReferencePlacement,
    TrajectoryTrack,
    in_frame,
)

DEFAULT_SPATIAL_STRIDE = 8
DEFAULT_TEMPORAL_STRIDE = 4
DEFAULT_CHANNELS = 16
HEATMAP_SIGMA = 1.5
CHANNEL_ORDER = "noise|image|mask|heatmap|point_map"

# Rec. 601 luma weights for the single luminance channel.
_LUMA = np.array([0.299, 0.587, 0.114], dtype=np.float32)


@dataclass(frozen=True)
class LatentGrid:
    """Shape contract between pixel space and latent space."""

    num_latent_frames: int
    height: int  # latent cells
    width: int
    channels: int
    spatial_stride: int
    temporal_stride: int
    num_frames: int  # pixel frames

    @classmethod
    def for_video(cls, num_frames: int, frame_height: int, frame_width: int,
                  channels: int = DEFAULT_CHANNELS,
                  spatial_stride: int = DEFAULT_SPATIAL_STRIDE,
                  temporal_stride: int = DEFAULT_TEMPORAL_STRIDE) -> "LatentGrid":
        if num_frames < 2:
            raise ValueError("need at least 2 frames")
        if frame_height % spatial_stride or frame_width % spatial_stride:
            raise ValueError(
                f"frame {frame_width}x{frame_height} not divisible by "
                f"spatial stride {spatial_stride}")
        if spatial_stride % 2:
            raise ValueError("spatial stride must be even")
        T_l = 1 + math.ceil((num_frames - 1) / temporal_stride)
        return cls(T_l, frame_height // spatial_stride,
                   frame_width // spatial_stride, channels,
                   spatial_stride, temporal_stride, num_frames)

    def rep_frame(self, latent_frame: int) -> int:
        """Pixel frame that represents a latent frame."""
        if latent_frame == 0:
            return 0
        return 1 + self.temporal_stride * (latent_frame - 1)

    def frame_window(self, latent_frame: int) -> tuple[int, int]:
        """Half-open pixel-frame range a latent frame covers."""
        if latent_frame == 0:
            return (0, 1)
        a = 1 + self.temporal_stride * (latent_frame - 1)
        return (a, min(a + self.temporal_stride, self.num_frames))

    def cell(self, x: float, y: float) -> tuple[int, int]:
        """(row, col) latent cell under a pixel point, clamped at the edges."""
        j = min(max(int(x // self.spatial_stride), 0), self.width - 1)
        i = min(max(int(y // self.spatial_stride), 0), self.height - 1)
        return i, j

    @property
    def latent_shape(self) -> tuple[int, int, int, int]:
        return (self.num_latent_frames, self.height, self.width, self.channels)


@dataclass(frozen=True)
class ConditionBundle:
    """The five channel groups, all sharing the (T_l, H_l, W_l) grid."""

    noise: np.ndarray        # (T_l, H_l, W_l, C)
    image_latent: np.ndarray  # (T_l, H_l, W_l, C), frame 0 real, rest zeros
    mask: np.ndarray         # (T_l, H_l, W_l, 1), 1 on conditioned frames
    heatmap: np.ndarray      # (T_l, H_l, W_l, 1)
    point_map: np.ndarray    # (T_l, H_l, W_l, C)

    def concat(self) -> np.ndarray:
        """Channel concatenation in the fixed CHANNEL_ORDER."""
        return np.concatenate(
            [self.noise, self.image_latent, self.mask, self.heatmap,
             self.point_map], axis=-1)

    @property
    def total_channels(self) -> int:
        return 3 * self.noise.shape[-1] + 2


def encode_frame(frame: np.ndarray, grid: LatentGrid) -> np.ndarray:
    """Fixed block-pooling patchify of one RGB frame to (H_l, W_l, C).

    Per latent cell: 12 channels of 2x2 sub-block RGB means, 3 channels of
    whole-block RGB means, 1 channel of whole-block luminance; pixel values
    mapped to [-1, 1]. Linear and locality-preserving by construction.
    """
    s = grid.spatial_stride
    H, W = frame.shape[:2]
    if H != grid.height * s or W != grid.width * s:
        raise ValueError(
            f"frame {W}x{H} does not match grid "
            f"{grid.width * s}x{grid.height * s}")
    if grid.channels != 16:
        raise ValueError("block-pooling encoder is defined for C=16")
    x = frame.astype(np.float32) / 127.5 - 1.0
    hs = s // 2
    blocks = x.reshape(grid.height, 2, hs, grid.width, 2, hs, 3)
    sub = blocks.mean(axis=(2, 5))                      # (H_l, 2, W_l, 2, 3)
    sub = sub.transpose(0, 2, 1, 3, 4)                  # (H_l, W_l, 2, 2, 3)
    sub12 = sub.reshape(grid.height, grid.width, 12)
    full = x.reshape(grid.height, s, grid.width, s, 3).mean(axis=(1, 3))
    luma = (full * _LUMA).sum(axis=-1, keepdims=True)
    return np.concatenate([sub12, full, luma], axis=-1).astype(np.float32)


def decode_frame(latent: np.ndarray, grid: LatentGrid) -> np.ndarray:
    """Invert encode_frame up to 4x4 sub-block pooling; returns uint8 RGB."""
    s = grid.spatial_stride
    hs = s // 2
    sub = latent[..., :12].reshape(grid.height, grid.width, 2, 2, 3)
    sub = sub.transpose(0, 2, 1, 3, 4)                  # (H_l, 2, W_l, 2, 3)
    px = np.repeat(np.repeat(sub, hs, axis=1), hs, axis=3)
    px = px.reshape(grid.height * s, grid.width * s, 3)
    return np.clip(np.rint((px + 1.0) * 127.5), 0, 255).astype(np.uint8)


def encode_video(frames: np.ndarray, grid: LatentGrid) -> np.ndarray:
    """Encode a (T, H, W, 3) video at each latent frame's representative frame."""
    if frames.shape[0] != grid.num_frames:
        raise ValueError(f"expected {grid.num_frames} frames, got {frames.shape[0]}")
    return np.stack([encode_frame(frames[grid.rep_frame(l)], grid)
                     for l in range(grid.num_latent_frames)])


def decode_video(latents: np.ndarray, grid: LatentGrid) -> np.ndarray:
    """Decode (T_l, H_l, W_l, C) latents to (T, H, W, 3), repeating per window."""
    T = grid.num_frames
    s = grid.spatial_stride
    out = np.empty((T, grid.height * s, grid.width * s, 3), dtype=np.uint8)
    for l in range(latents.shape[0]):
        img = decode_frame(latents[l], grid)
        a, b = grid.frame_window(l)
        out[a:b] = img
    return out


def rasterize_heatmap(tracks, grid: LatentGrid,
                      sigma: float = HEATMAP_SIGMA) -> np.ndarray:
    """Gaussian trajectory heatmap at latent resolution, max-combined.

    Each visible in-frame point adds an isotropic Gaussian with peak exactly
    1.0 at the point's own latent cell (distances measured between cell
    indices), evaluated at the latent frame's representative pixel frame.
    """
    if sigma <= 0:
        raise ValueError("sigma must be positive")
    T_l, H_l, W_l, _ = grid.latent_shape
    fw = grid.width * grid.spatial_stride
    fh = grid.height * grid.spatial_stride
    heat = np.zeros((T_l, H_l, W_l, 1), dtype=np.float32)
    ii, jj = np.mgrid[0:H_l, 0:W_l]
    inv = 1.0 / (2.0 * sigma * sigma)
    for l in range(T_l):
        a = grid.rep_frame(l)
        for tr in tracks:
            if a >= len(tr.points) or tr.visibility[a] != 1:
                continue
            x, y = float(tr.points[a, 0]), float(tr.points[a, 1])
            if not in_frame(x, y, fw, fh):
                continue
            i0, j0 = grid.cell(x, y)
            g = np.exp(-((ii - i0) ** 2 + (jj - j0) ** 2) * inv)
            np.maximum(heat[l, :, :, 0], g.astype(np.float32),
                       out=heat[l, :, :, 0])
    return heat


def build_point_map(tracks, first_frame_latent: np.ndarray,
                    grid: LatentGrid) -> np.ndarray:
    """Propagate each track's frame-0 latent feature along its trajectory.

    Tracks invisible at frame 0 contribute zeros (their appearance is carried
    by captions and references instead). When two tracks land in one cell the
    lexicographically later track_id wins.
    """
    T_l, H_l, W_l, C = grid.latent_shape
    fw = grid.width * grid.spatial_stride
    fh = grid.height * grid.spatial_stride
    out = np.zeros((T_l, H_l, W_l, C), dtype=np.float32)
    for tr in sorted(tracks, key=lambda t: t.track_id):
        if len(tr.points) == 0 or tr.visibility[0] != 1:
            continue
        x0, y0 = float(tr.points[0, 0]), float(tr.points[0, 1])
        if not in_frame(x0, y0, fw, fh):
            continue
        feat = first_frame_latent[grid.cell(x0, y0)]
        for l in range(T_l):
            a = grid.rep_frame(l)
            if a >= len(tr.points) or tr.visibility[a] != 1:
                continue
            x, y = float(tr.points[a, 0]), float(tr.points[a, 1])
            if not in_frame(x, y, fw, fh):
                continue
            i, j = grid.cell(x, y)
            out[l, i, j] = feat
    return out


def paste_references(first_frame: np.ndarray,
                     references: tuple[ReferencePlacement, ...],
                     assets: dict[str, np.ndarray]) -> np.ndarray:
    """Composite reference patches onto the first frame, in list order.

    Assets are unrotated RGBA patches; each is resized to its target bbox and
    rotated by the placement's angle before alpha-over compositing, so the
    recorded rotation is applied exactly once. Fully off-screen placements
    leave the frame unchanged (entry events).
    """
    out = first_frame.copy()
    H, W = out.shape[:2]
    for ref in references:
        if ref.image_ref not in assets:
            raise KeyError(f"missing asset {ref.image_ref!r}")
        patch = assets[ref.image_ref]
        bb = ref.target_bbox
        tw, th = max(1, round(bb.w)), max(1, round(bb.h))
        img = Image.fromarray(patch, "RGBA")
        if img.size != (tw, th):
            img = img.resize((tw, th), Image.Resampling.BILINEAR)
        if ref.rotation != 0.0:
            img = img.rotate(ref.rotation, expand=True,
                             resample=Image.Resampling.BILINEAR)
        arr = np.asarray(img)
        rh, rw = arr.shape[:2]
        left = round(bb.cx - rw / 2.0)
        top = round(bb.cy - rh / 2.0)
        x0, y0 = max(left, 0), max(top, 0)
        x1, y1 = min(left + rw, W), min(top + rh, H)
        if x1 <= x0 or y1 <= y0:
            continue
        src = arr[y0 - top:y1 - top, x0 - left:x1 - left]
        alpha = src[..., 3:4].astype(np.float32) / 255.0
        region = out[y0:y1, x0:x1].astype(np.float32)
        blended = alpha * src[..., :3].astype(np.float32) + (1 - alpha) * region
        out[y0:y1, x0:x1] = np.clip(np.rint(blended), 0, 255).astype(np.uint8)
    return out


def assemble(triplet: MultimodalTriplet, first_frame: np.ndarray,
             noise: np.ndarray, assets: dict[str, np.ndarray] | None = None,
             grid: LatentGrid | None = None,
             sigma: float = HEATMAP_SIGMA) -> ConditionBundle:
    """Build the full conditioning bundle for one clip."""
    w, h = triplet.frame_size
    if grid is None:
        grid = LatentGrid.for_video(triplet.num_frames, h, w)
    if noise.shape != grid.latent_shape:
        raise ValueError(
            f"noise shape {noise.shape} does not match grid {grid.latent_shape}")
    if triplet.references:
        if assets is None:
            raise ValueError("triplet has references but no assets were given")
        first_frame = paste_references(first_frame, triplet.references, assets)

    first_latent = encode_frame(first_frame, grid)
    image_latent = np.zeros(grid.latent_shape, dtype=np.float32)
    image_latent[0] = first_latent
    mask = np.zeros(grid.latent_shape[:3] + (1,), dtype=np.float32)
    mask[0] = 1.0
    heatmap = rasterize_heatmap(triplet.tracks, grid, sigma)
    point_map = build_point_map(triplet.tracks, first_latent, grid)
    return ConditionBundle(noise=noise.astype(np.float32),
                           image_latent=image_latent, mask=mask,
                           heatmap=heatmap, point_map=point_map)
