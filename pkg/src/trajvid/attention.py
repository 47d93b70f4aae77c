"""Spatially anchored cross-attention between video tokens and caption tokens.

Each trajectory point carries a coverage region: the track's first-frame bbox
re-centered on the point's current position. Video tokens whose cell centers
fall inside that region get an additive log-weight bias toward the track's own
caption tokens, steering text only where the subject actually is. Everywhere
else the bias is zero, so with weight 1 the kernel is exactly standard
attention.

Video tokens are indexed flat over (latent_frame, row, col); the bias is kept
sparse as one token mask per track plus that track's caption span.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

import numpy as np
import torch

from .conditioning import LatentGrid
from .text import CaptionSpan
from .triplet import MultimodalTriplet

ATTENTION_MODES = ("weighted", "full", "hard")
DEFAULT_ATTENTION_WEIGHT = 30.0


@dataclass(frozen=True)
class CoverageRegion:
    """Axis-aligned pixel rect (x0, y0, x1, y1), possibly out of frame."""
    x0: float
    y0: float
    x1: float
    y1: float


def coverage_region(point: tuple[float, float],
                    bbox_w: float, bbox_h: float) -> CoverageRegion:
    """First-frame bbox extents re-centered on the current point."""
    x, y = float(point[0]), float(point[1])
    return CoverageRegion(x - bbox_w / 2.0, y - bbox_h / 2.0,
                          x + bbox_w / 2.0, y + bbox_h / 2.0)


def tokens_in_region(region: CoverageRegion, grid: LatentGrid,
                     latent_frame: int) -> frozenset[int]:
    """Flat video-token indices of one latent frame covered by the region.

    A cell belongs to the region when its pixel center lies inside the
    region clamped to the frame (closed rect on both axes). A region that
    intersects the frame but captures no center still claims the single
    nearest cell, so no visible point ever anchors to nothing.
    """
    if not 0 <= latent_frame < grid.num_latent_frames:
        raise ValueError(f"latent frame {latent_frame} out of range")
    fw = grid.width * grid.spatial_stride
    fh = grid.height * grid.spatial_stride
    x0, x1 = max(region.x0, 0.0), min(region.x1, float(fw))
    y0, y1 = max(region.y0, 0.0), min(region.y1, float(fh))
    if x0 > x1 or y0 > y1:
        return frozenset()

    base = latent_frame * grid.height * grid.width
    s = grid.spatial_stride
    out = []
    for i in range(grid.height):
        cy = (i + 0.5) * s
        if not y0 <= cy <= y1:
            continue
        for j in range(grid.width):
            if x0 <= (j + 0.5) * s <= x1:
                out.append(base + i * grid.width + j)
    if out:
        return frozenset(out)

    # Clamped rect is non-empty but sits between cell centers: claim the
    # nearest cell, ties broken toward the smaller index.
    rx, ry = (x0 + x1) / 2.0, (y0 + y1) / 2.0
    best = min(
        ((((j + 0.5) * s - rx) ** 2 + ((i + 0.5) * s - ry) ** 2, i, j)
         for i in range(grid.height) for j in range(grid.width)))
    return frozenset([base + best[1] * grid.width + best[2]])


@dataclass(frozen=True)
class AttentionBias:
    """Sparse pairwise bias: per-track query masks plus caption spans.

    A (query, key) pair qualifies when some track covers the query token and
    the key lies in that track's span; qualifying pairs get log_w, the rest 0.
    Overlaps do not accumulate.
    """
    log_w: float
    track_ids: tuple[str, ...]
    query_masks: np.ndarray  # (n_tracks, n_video_tokens) bool
    spans: tuple[tuple[int, int], ...]
    n_video_tokens: int
    n_text_tokens: int

    def qualifying(self) -> np.ndarray:
        """Boolean (n_video_tokens, n_text_tokens) qualifying-pair mask."""
        m = np.zeros((self.n_video_tokens, self.n_text_tokens), dtype=bool)
        for t, (lo, hi) in enumerate(self.spans):
            m[self.query_masks[t], lo:hi] = True
        return m

    def dense(self) -> np.ndarray:
        """Materialized (n_video_tokens, n_text_tokens) float32 bias."""
        return np.where(self.qualifying(), np.float32(self.log_w),
                        np.float32(0.0))


def build_bias(triplet: MultimodalTriplet, grid: LatentGrid,
               spans: list[CaptionSpan], n_text_tokens: int,
               w: float = DEFAULT_ATTENTION_WEIGHT) -> AttentionBias:
    """Anchor each span's caption tokens to its track's coverage regions.

    Per latent frame the track is sampled at the representative pixel frame:
    if visible there, the first-frame bbox re-centered on that point claims
    the frame's covered tokens. Tracks without a span (backgrounds) and
    invisible frames contribute nothing.
    """
    if w <= 0:
        raise ValueError(f"attention weight must be positive, got {w}")
    n_video = grid.num_latent_frames * grid.height * grid.width
    by_id = {t.track_id: t for t in triplet.tracks}

    track_ids, masks, out_spans = [], [], []
    for span in spans:
        track = by_id.get(span.track_id)
        if track is None:
            raise ValueError(f"span references unknown track {span.track_id!r}")
        bbox = triplet.bboxes.get(span.track_id)
        if bbox is None:
            raise ValueError(f"track {span.track_id!r} has a span but no bbox")
        if span.hi > n_text_tokens:
            raise ValueError(f"span {span} exceeds {n_text_tokens} text tokens")
        mask = np.zeros(n_video, dtype=bool)
        for l in range(grid.num_latent_frames):
            a = grid.rep_frame(l)
            if not track.visibility[a]:
                continue
            region = coverage_region(track.points[a], bbox.w, bbox.h)
            idx = tokens_in_region(region, grid, l)
            if idx:
                mask[list(idx)] = True
        track_ids.append(span.track_id)
        masks.append(mask)
        out_spans.append((span.lo, span.hi))

    query_masks = (np.stack(masks) if masks
                   else np.zeros((0, n_video), dtype=bool))
    return AttentionBias(
        log_w=math.log(w), track_ids=tuple(track_ids),
        query_masks=query_masks, spans=tuple(out_spans),
        n_video_tokens=n_video, n_text_tokens=n_text_tokens)


def _check_mode(mode: str) -> None:
    if mode not in ATTENTION_MODES:
        raise ValueError(f"unknown attention mode {mode!r}")


def sawca(q: torch.Tensor, k: torch.Tensor, v: torch.Tensor,
          bias: AttentionBias | None = None, mode: str = "weighted",
          return_weights: bool = False):
    """Softmax(QK^T / sqrt(D) + W) V with the sparse anchoring bias.

    Modes: "weighted" applies the additive bias, "full" ignores it (plain
    attention), "hard" restricts every covered query to its qualifying keys
    while uncovered queries attend normally. Accepts leading batch dims on
    q/k/v; bias broadcasts over them.
    """
    _check_mode(mode)
    if q.shape[-1] != k.shape[-1]:
        raise ValueError(f"query dim {q.shape[-1]} != key dim {k.shape[-1]}")
    if k.shape[-2] != v.shape[-2]:
        raise ValueError(f"{k.shape[-2]} keys but {v.shape[-2]} values")
    if bias is not None:
        if bias.n_video_tokens != q.shape[-2]:
            raise ValueError(f"bias built for {bias.n_video_tokens} queries, "
                             f"got {q.shape[-2]}")
        if bias.n_text_tokens != k.shape[-2]:
            raise ValueError(f"bias built for {bias.n_text_tokens} keys, "
                             f"got {k.shape[-2]}")

    logits = q @ k.transpose(-2, -1) / math.sqrt(q.shape[-1])
    if bias is not None and mode == "weighted":
        logits = logits + torch.from_numpy(bias.dense()).to(
            dtype=logits.dtype, device=logits.device)
    elif bias is not None and mode == "hard":
        qual = torch.from_numpy(bias.qualifying()).to(device=logits.device)
        covered = qual.any(dim=-1, keepdim=True)
        keep = qual | ~covered
        logits = logits.masked_fill(~keep, float("-inf"))

    weights = torch.softmax(logits, dim=-1)
    out = weights @ v
    return (out, weights) if return_weights else out
