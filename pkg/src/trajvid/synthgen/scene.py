"""Analytic moving-shape scenes with exact ground-truth tracks.

Each scene is a fixed camera over a flat background with 1..6 rigid shapes
translating along parametric paths. Because geometry is analytic, tracks,
visibility, masks and bboxes are exact, which is what lets the evaluation
oracle be trusted.

Crossing paths are constructed so that between consecutive frames an object
jumps the partial-visibility band at the frame edge: its center is either
fully inside the frame with margin or fully outside with margin, never
straddling. Partial visibility still arises later from crop augmentation.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from trajvid.triplet import (
    BBox,
    Caption,
    MultimodalTriplet,
    TrajectoryTrack,
    in_frame,
    validate_triplet,
)

# Flat fill colors, pairwise RGB distance >= ~116 so a tolerance-based
# color matcher can never confuse two objects or an object with background.
PALETTE: dict[str, tuple[int, int, int]] = {
    "red": (200, 30, 30),
    "blue": (30, 60, 200),
    "green": (30, 160, 40),
    "orange": (240, 150, 30),
    "purple": (140, 30, 180),
    "cyan": (30, 190, 190),
}
COLOR_NAMES = tuple(PALETTE)
SHAPES = ("circle", "square", "triangle")
BG_LIGHT = (230, 230, 230)
BG_DARK = (205, 205, 205)

# Visible centers keep this margin beyond the shape radius from every frame
# edge; off-screen centers keep it beyond the edge. A one-frame crossing
# therefore moves at least 2*(size+MARGIN) along the crossing axis.
MARGIN = 3.0


@dataclass(frozen=True)
class PathSpec:
    """Parametric center path, evaluated at integer frame times.

    kind "line": piecewise-linear through `points` at frame indices `times`
    (clamped outside), which also encodes sit-then-jump crossing paths.
    kind "arc": circle segment, arc=(cx, cy, R, a0, a1) radians.
    kind "bezier": quadratic curve through 3 control points.
    """

    kind: str
    points: tuple[tuple[float, float], ...] = ()
    times: tuple[int, ...] = ()
    arc: tuple[float, float, float, float, float] | None = None
    profile: str = "uniform"  # "uniform" | "ease" (arc/bezier only)

    def positions(self, num_frames: int) -> np.ndarray:
        T = num_frames
        if self.kind == "line":
            times = np.asarray(self.times, dtype=np.float64)
            pts = np.asarray(self.points, dtype=np.float64)
            t = np.arange(T, dtype=np.float64)
            return np.stack([np.interp(t, times, pts[:, 0]),
                             np.interp(t, times, pts[:, 1])], axis=1)
        u = np.arange(T, dtype=np.float64) / max(T - 1, 1)
        if self.profile == "ease":
            u = u * u * (3.0 - 2.0 * u)
        if self.kind == "arc":
            cx, cy, R, a0, a1 = self.arc
            a = a0 + (a1 - a0) * u
            return np.stack([cx + R * np.cos(a), cy + R * np.sin(a)], axis=1)
        if self.kind == "bezier":
            p0, p1, p2 = (np.asarray(p, dtype=np.float64) for p in self.points)
            uu = u[:, None]
            return (1 - uu) ** 2 * p0 + 2 * uu * (1 - uu) * p1 + uu ** 2 * p2
        raise ValueError(f"unknown path kind {self.kind!r}")


@dataclass(frozen=True)
class ObjectSpec:
    shape: str  # circle | square | triangle
    color_name: str  # PALETTE key
    size: float  # circle radius; square half-side; triangle circumradius
    path: PathSpec
    caption_template: str = "the {color} {shape} {phrase}"


@dataclass(frozen=True)
class SceneSpec:
    frame_size: tuple[int, int]
    num_frames: int
    objects: tuple[ObjectSpec, ...]
    background: tuple[str, tuple[int, int, int], tuple[int, int, int]] = (
        "checker", BG_LIGHT, BG_DARK)
    seed: int = 0
    keypoints_per_object: int = 1


@dataclass(frozen=True)
class ObjectMeta:
    """Analytic facts about one rendered object, carried through cropping."""

    object_id: str
    shape: str
    color_name: str
    size: float
    caption_template: str
    track_ids: tuple[str, ...]
    offsets: np.ndarray  # (k, 2) float32 keypoint offsets from the center


@dataclass(frozen=True)
class ClipRecord:
    frames: np.ndarray  # (T, H, W, 3) uint8
    triplet: MultimodalTriplet
    ground_truth: dict[str, np.ndarray]  # object_id -> (T, 2) center path
    motion_score: float
    objects: tuple[ObjectMeta, ...]
    ref_images: tuple[np.ndarray, ...] = ()  # RGBA patches, parallel to triplet.references


# --- Geometry ----------------------------------------------------------------

def shape_mask(shape: str, size: float, center: tuple[float, float],
               frame_size: tuple[int, int]) -> np.ndarray:
    """Boolean (H, W) coverage mask, pixel-center point test, no antialiasing."""
    w, h = frame_size
    cx, cy = center
    X, Y = np.meshgrid(np.arange(w) + 0.5, np.arange(h) + 0.5)
    if shape == "circle":
        return (X - cx) ** 2 + (Y - cy) ** 2 <= size ** 2
    if shape == "square":
        return np.maximum(np.abs(X - cx), np.abs(Y - cy)) <= size
    if shape == "triangle":
        verts = _triangle_vertices(size, cx, cy)
        mask = np.ones((h, w), dtype=bool)
        for i in range(3):
            ax, ay = verts[i]
            bx, by = verts[(i + 1) % 3]
            # Vertices wind clockwise in screen coords; keep the inner side.
            mask &= (bx - ax) * (Y - ay) - (by - ay) * (X - ax) >= 0
        return mask
    raise ValueError(f"unknown shape {shape!r}")


def _triangle_vertices(size: float, cx: float, cy: float) -> list[tuple[float, float]]:
    """Equilateral triangle, apex up, circumradius `size`, centroid at center."""
    s3 = math.sqrt(3.0) / 2.0
    return [(cx, cy - size), (cx + size * s3, cy + size / 2),
            (cx - size * s3, cy + size / 2)]


def analytic_area(shape: str, size: float) -> float:
    if shape == "circle":
        return math.pi * size ** 2
    if shape == "square":
        return 4.0 * size ** 2
    if shape == "triangle":
        return 3.0 * math.sqrt(3.0) / 4.0 * size ** 2
    raise ValueError(f"unknown shape {shape!r}")


def shape_extents(shape: str, size: float) -> tuple[float, float, float, float]:
    """(left, top, right, bottom) positive distances from center to the tight box."""
    if shape in ("circle", "square"):
        return (size, size, size, size)
    if shape == "triangle":
        hw = size * math.sqrt(3.0) / 2.0
        return (hw, size, hw, size / 2)
    raise ValueError(f"unknown shape {shape!r}")


def shape_bbox(shape: str, size: float, center: tuple[float, float],
               clip_to: tuple[int, int] | None = None) -> BBox:
    """Tight bbox at a center position, optionally clipped to frame bounds."""
    l, t, r, b = shape_extents(shape, size)
    x0, y0 = center[0] - l, center[1] - t
    x1, y1 = center[0] + r, center[1] + b
    if clip_to is not None:
        w, h = clip_to
        x0, y0 = max(x0, 0.0), max(y0, 0.0)
        x1, y1 = min(x1, float(w)), min(y1, float(h))
    return BBox((x0 + x1) / 2, (y0 + y1) / 2, x1 - x0, y1 - y0)


def _kmeans_points(mask: np.ndarray, k: int) -> np.ndarray:
    """Deterministic Lloyd k-means over mask pixel centers; (k, 2) xy coords."""
    ys, xs = np.nonzero(mask)
    pts = np.stack([xs + 0.5, ys + 0.5], axis=1).astype(np.float64)
    k = max(1, min(k, len(pts)))
    if k == 1:
        return pts.mean(axis=0, keepdims=True)
    centers = pts[np.round(np.linspace(0, len(pts) - 1, k)).astype(int)].copy()
    for _ in range(25):
        d2 = ((pts[:, None, :] - centers[None, :, :]) ** 2).sum(axis=2)
        labels = d2.argmin(axis=1)
        for j in range(k):
            sel = pts[labels == j]
            if len(sel):
                centers[j] = sel.mean(axis=0)
    return centers[np.lexsort((centers[:, 1], centers[:, 0]))]


def _background_image(background, w: int, h: int) -> np.ndarray:
    kind, c1, c2 = background
    if kind == "solid":
        return np.full((h, w, 3), c1, dtype=np.uint8)
    if kind == "checker":
        yy, xx = np.mgrid[0:h, 0:w]
        cells = ((xx // 8) + (yy // 8)) % 2
        img = np.where(cells[..., None] == 0, np.uint8(c1), np.uint8(c2))
        return img.astype(np.uint8)
    raise ValueError(f"unknown background kind {kind!r}")


# --- Motion scoring (needed here so rendering can stamp ClipRecord) ----------

def motion_score(tracks, foreground_only: bool = False) -> float:
    """Mean over tracks of summed consecutive-frame displacement.

    A displacement contributes only when both endpoints are visible, so
    off-screen teleports never count.
    """
    pool = [t for t in tracks if not (foreground_only and t.is_background)]
    if not pool:
        raise ValueError("motion_score needs at least one track")
    total = 0.0
    for tr in pool:
        p = tr.points.astype(np.float64)
        both = (tr.visibility[:-1] == 1) & (tr.visibility[1:] == 1)
        steps = np.linalg.norm(np.diff(p, axis=0), axis=1)
        total += float(steps[both].sum())
    return total / len(pool)


# --- Captioning --------------------------------------------------------------

def _from_word(d: np.ndarray) -> str:
    dx, dy = d
    if abs(dx) >= abs(dy):
        return "left" if dx > 0 else "right"
    return "top" if dy > 0 else "bottom"


def _to_word(d: np.ndarray) -> str:
    dx, dy = d
    if abs(dx) >= abs(dy):
        return "right" if dx > 0 else "left"
    return "bottom" if dy > 0 else "top"


def motion_phrase(points: np.ndarray, visibility: np.ndarray) -> str:
    """Short motion description derived from a center path and visibility."""
    vis_idx = np.flatnonzero(visibility)
    if len(vis_idx) == 0:
        return ""
    first, last = int(vis_idx[0]), int(vis_idx[-1])
    entered = first > 0
    exited = last < len(visibility) - 1
    if entered and exited:
        return f"crossing the scene to the {_to_word(points[last + 1] - points[last])}"
    if entered:
        return f"entering from the {_from_word(points[first] - points[first - 1])}"
    if exited:
        return f"exiting to the {_to_word(points[last + 1] - points[last])}"
    net = points[last] - points[first]
    seg = np.diff(points[first:last + 1], axis=0)
    total = float(np.linalg.norm(seg, axis=1).sum()) if len(seg) else 0.0
    if float(np.linalg.norm(net)) < 4.0:
        return "staying still" if total < 8.0 else "moving around"
    dx, dy = net
    if abs(dx) >= abs(dy):
        return "moving right" if dx > 0 else "moving left"
    return "moving down" if dy > 0 else "moving up"


def fill_caption(template: str, color_name: str, shape: str, phrase: str) -> str:
    text = template.format(color=color_name, shape=shape, phrase=phrase)
    return " ".join(text.split())


# --- Rendering ---------------------------------------------------------------

def _validate_spec(spec: SceneSpec) -> None:
    if not (1 <= len(spec.objects) <= 6):
        raise ValueError(f"scene needs 1..6 objects, got {len(spec.objects)}")
    colors = [o.color_name for o in spec.objects]
    if len(set(colors)) != len(colors):
        raise ValueError("object colors must be pairwise distinct")
    w, h = spec.frame_size
    for o in spec.objects:
        if o.color_name not in PALETTE:
            raise ValueError(f"unknown color {o.color_name!r}")
        if o.shape not in SHAPES:
            raise ValueError(f"unknown shape {o.shape!r}")
        if 2 * (o.size + MARGIN) >= min(w, h):
            raise ValueError(
                f"object size {o.size} too large for {w}x{h} frame")
    if spec.num_frames < 2:
        raise ValueError("need at least 2 frames")
    if not (1 <= spec.keypoints_per_object <= 3):
        raise ValueError("keypoints_per_object must be in 1..3")


def render_scene(spec: SceneSpec) -> ClipRecord:
    """Render a scene to frames plus an exact triplet and ground-truth paths."""
    _validate_spec(spec)
    w, h = spec.frame_size
    T = spec.num_frames
    rng = np.random.default_rng(np.random.SeedSequence([0x5CE11E, spec.seed]))

    centers = [o.path.positions(T) for o in spec.objects]
    bg = _background_image(spec.background, w, h)
    frames = np.empty((T, h, w, 3), dtype=np.uint8)
    for t in range(T):
        img = bg.copy()
        for obj, pos in zip(spec.objects, centers):
            l, tp, r, b = shape_extents(obj.shape, obj.size)
            cx, cy = pos[t]
            if cx + r < 0 or cx - l > w or cy + b < 0 or cy - tp > h:
                continue  # fully off-screen, nothing to paint
            m = shape_mask(obj.shape, obj.size, (cx, cy), (w, h))
            img[m] = PALETTE[obj.color_name]
        frames[t] = img

    tracks: list[TrajectoryTrack] = []
    bboxes: dict[str, BBox] = {}
    captions: dict[str, Caption] = {}
    metas: list[ObjectMeta] = []
    ground_truth: dict[str, np.ndarray] = {}

    for i, (obj, pos) in enumerate(zip(spec.objects, centers)):
        oid = f"obj{i}"
        ground_truth[oid] = pos.copy()
        vis_center = np.array([1 if in_frame(x, y, w, h) else 0 for x, y in pos],
                              dtype=np.uint8)
        vis_frames = np.flatnonzero(vis_center)
        if len(vis_frames) == 0:
            raise ValueError(f"object {oid} is never visible")
        first_vis = int(vis_frames[0])
        mask0 = shape_mask(obj.shape, obj.size, tuple(pos[first_vis]), (w, h))
        kpts = _kmeans_points(mask0, spec.keypoints_per_object)
        offsets = kpts - pos[first_vis]

        tids = []
        for j in range(len(offsets)):
            tid = oid if len(offsets) == 1 else f"{oid}_kp{j}"
            pts = pos + offsets[j]
            vis = np.array([1 if in_frame(x, y, w, h) else 0 for x, y in pts],
                           dtype=np.uint8)
            tracks.append(TrajectoryTrack(tid, pts.astype(np.float32), vis))
            tids.append(tid)

        bb = shape_bbox(obj.shape, obj.size, tuple(pos[first_vis]), clip_to=(w, h))
        phrase = motion_phrase(pos, vis_center)
        text = fill_caption(obj.caption_template, obj.color_name, obj.shape, phrase)
        hint = f"{obj.color_name} {obj.shape}"
        for tid in tids:
            bboxes[tid] = bb
            captions[tid] = Caption(text, hint)
        metas.append(ObjectMeta(oid, obj.shape, obj.color_name, obj.size,
                                obj.caption_template, tuple(tids),
                                offsets.astype(np.float32)))

    # Static background anchor points, sampled outside every object's swept box.
    swept = []
    for obj, pos in zip(spec.objects, centers):
        l, tp, r, b = shape_extents(obj.shape, obj.size)
        for t in range(T):
            swept.append((pos[t][0] - l - 2, pos[t][1] - tp - 2,
                          pos[t][0] + r + 2, pos[t][1] + b + 2))
    n_bg = int(rng.integers(3, 6))
    for j in range(n_bg):
        px, py = 1.0, 1.0
        for _ in range(60):
            cand = (float(rng.uniform(1, w - 1)), float(rng.uniform(1, h - 1)))
            if not any(x0 <= cand[0] <= x1 and y0 <= cand[1] <= y1
                       for x0, y0, x1, y1 in swept):
                px, py = cand
                break
        pts = np.tile(np.array([px, py], dtype=np.float32), (T, 1))
        tracks.append(TrajectoryTrack(f"bg{j}", pts,
                                      np.ones(T, dtype=np.uint8),
                                      is_background=True))

    triplet = MultimodalTriplet(
        tracks=tuple(tracks), bboxes=bboxes, captions=captions,
        references=(), frame_size=(w, h), num_frames=T)
    report = validate_triplet(triplet)
    if not report.ok:
        raise AssertionError(f"rendered triplet invalid: {report.violations[:3]}")
    return ClipRecord(frames=frames, triplet=triplet, ground_truth=ground_truth,
                      motion_score=motion_score(triplet.tracks),
                      objects=tuple(metas))


# --- Scene sampling ----------------------------------------------------------

SCENE_KINDS = ("interior", "entry", "exit", "cross", "dual_entry", "static")
DEFAULT_KIND_MIX = {
    "interior": 0.30, "cropped": 0.10, "entry": 0.15, "exit": 0.10,
    "cross": 0.05, "dual_entry": 0.25, "static": 0.05,
}


def _interior_point(rng, size: float, w: int, h: int) -> tuple[float, float]:
    m = size + MARGIN
    return (float(rng.uniform(m, w - m)), float(rng.uniform(m, h - m)))


def _interior_path(rng, size: float, w: int, h: int, T: int) -> PathSpec:
    m = size + MARGIN
    kind = rng.choice(["line", "arc", "bezier"], p=[0.5, 0.25, 0.25])
    profile = str(rng.choice(["uniform", "ease"]))
    if kind == "line":
        for _ in range(20):
            nw = int(rng.integers(2, min(5, T)))
            pts = [_interior_point(rng, size, w, h) for _ in range(nw)]
            length = sum(math.dist(pts[i], pts[i + 1]) for i in range(nw - 1))
            if length >= 24.0:
                times = np.round(np.linspace(0, T - 1, nw)).astype(int)
                return PathSpec("line", points=tuple(pts), times=tuple(times))
        # Fall through to an arc if random waypoints kept coming out short.
        kind = "arc"
    if kind == "arc":
        R_max = (min(w, h) - 2 * m) / 2.0 - 1.0
        if R_max < 2.0:
            return PathSpec("line", points=((m, m), (w - m, h - m)),
                            times=(0, T - 1))
        R = float(rng.uniform(min(8.0, R_max), R_max))
        cx = float(rng.uniform(m + R, w - m - R))
        cy = float(rng.uniform(m + R, h - m - R))
        a0 = float(rng.uniform(0, 2 * math.pi))
        sweep = max(24.0 / R, float(rng.uniform(math.pi / 2, 2 * math.pi)))
        sweep *= -1.0 if rng.random() < 0.5 else 1.0
        return PathSpec("arc", arc=(cx, cy, R, a0, a0 + sweep), profile=profile)
    # bezier
    for _ in range(20):
        p0 = _interior_point(rng, size, w, h)
        p1 = _interior_point(rng, size, w, h)
        p2 = _interior_point(rng, size, w, h)
        if math.dist(p0, p2) >= 20.0:
            return PathSpec("bezier", points=(p0, p1, p2), profile=profile)
    return PathSpec("line", points=((m, m), (w - m, h - m)), times=(0, T - 1))


def _edge_points(rng, edge: str, size: float, w: int, h: int):
    """(outside point, inside entry point) for a given frame edge."""
    m = size + MARGIN
    out_d = size + MARGIN + float(rng.uniform(0, 4))
    in_d = m + float(rng.uniform(0, 5))
    if edge == "left":
        lane = float(rng.uniform(m, h - m))
        return (-out_d, lane), (in_d, lane)
    if edge == "right":
        lane = float(rng.uniform(m, h - m))
        return (w + out_d, lane), (w - in_d, lane)
    if edge == "top":
        lane = float(rng.uniform(m, w - m))
        return (lane, -out_d), (lane, in_d)
    lane = float(rng.uniform(m, w - m))
    return (lane, h + out_d), (lane, h - in_d)


def _far_target(rng, edge: str, size: float, w: int, h: int) -> tuple[float, float]:
    """Interior target in the half away from the given edge."""
    m = size + MARGIN
    if edge == "left":
        return (float(rng.uniform(w * 0.55, w - m)), float(rng.uniform(m, h - m)))
    if edge == "right":
        return (float(rng.uniform(m, w * 0.45)), float(rng.uniform(m, h - m)))
    if edge == "top":
        return (float(rng.uniform(m, w - m)), float(rng.uniform(h * 0.55, h - m)))
    return (float(rng.uniform(m, w - m)), float(rng.uniform(m, h * 0.45)))


def _entry_path(rng, size: float, w: int, h: int, T: int) -> PathSpec:
    edge = str(rng.choice(["left", "right", "top", "bottom"]))
    t_e = int(rng.integers(2, min(6, T - 2)))
    p_out, p_in = _edge_points(rng, edge, size, w, h)
    target = _far_target(rng, edge, size, w, h)
    return PathSpec("line", points=(p_out, p_out, p_in, target),
                    times=(0, t_e - 1, t_e, T - 1))


def _exit_path(rng, size: float, w: int, h: int, T: int) -> PathSpec:
    edge = str(rng.choice(["left", "right", "top", "bottom"]))
    t_x = int(rng.integers(max(2, T - 6), T - 1))
    p_out, p_pre = _edge_points(rng, edge, size, w, h)
    start = _far_target(rng, edge, size, w, h)
    return PathSpec("line", points=(start, p_pre, p_out, p_out),
                    times=(0, t_x - 1, t_x, T - 1))


def _cross_path(rng, size: float, w: int, h: int, T: int) -> PathSpec:
    edge = str(rng.choice(["left", "right", "top", "bottom"]))
    opposite = {"left": "right", "right": "left", "top": "bottom", "bottom": "top"}
    t_e = int(rng.integers(2, 5))
    t_x = int(rng.integers(T - 4, T - 1))
    p_out, p_in = _edge_points(rng, edge, size, w, h)
    q_out, q_pre = _edge_points(rng, opposite[edge], size, w, h)
    return PathSpec("line", points=(p_out, p_out, p_in, q_pre, q_out, q_out),
                    times=(0, t_e - 1, t_e, t_x - 1, t_x, T - 1))


def _static_path(rng, size: float, w: int, h: int, T: int) -> PathSpec:
    p0 = _interior_point(rng, size, w, h)
    amp = float(rng.uniform(0.2, 1.0))
    p1 = (p0[0] + amp, p0[1])
    return PathSpec("line", points=(p0, p1), times=(0, T - 1))


def _paths_overlap(a: np.ndarray, b: np.ndarray, min_dist: float) -> bool:
    return bool((np.linalg.norm(a - b, axis=1) < min_dist).any())


def sample_scene_spec(rng: np.random.Generator, kind: str | None = None,
                      frame_size: tuple[int, int] = (64, 64), num_frames: int = 16,
                      keypoints_per_object: int = 1,
                      dual_color_bias: float = 0.4) -> SceneSpec:
    """Draw a random scene of the given kind (or a random interior-ish kind).

    dual_color_bias is the probability that a dual-entry scene uses the
    red/blue pair, keeping the caption-binding evaluation in-distribution.
    """
    w, h = frame_size
    T = num_frames
    if kind is None:
        pool = SCENE_KINDS if T >= 8 else ("interior", "static")
        kind = str(rng.choice(pool))
    if T < 8 and kind in ("entry", "exit", "cross", "dual_entry"):
        raise ValueError(f"scene kind {kind!r} needs at least 8 frames")
    background = ("solid", tuple(int(v) for v in BG_LIGHT), tuple(int(v) for v in BG_DARK)) \
        if rng.random() < 0.2 else ("checker", BG_LIGHT, BG_DARK)
    seed = int(rng.integers(2 ** 31))

    if kind == "dual_entry":
        size = float(rng.uniform(5.0, 8.0))
        shape = str(rng.choice(SHAPES))
        if rng.random() < dual_color_bias:
            pair = ["red", "blue"]
        else:
            pair = list(rng.choice(COLOR_NAMES, size=2, replace=False))
        if rng.random() < 0.5:
            pair.reverse()
        m = size + MARGIN
        lane_a = float(rng.uniform(m, h / 2 - size - 4))
        lane_b = float(rng.uniform(h / 2 + size + 4, h - m))
        if rng.random() < 0.5:
            lane_a, lane_b = lane_b, lane_a
        objs = []
        for color, (edge, lane) in zip(pair, (("left", lane_a), ("right", lane_b))):
            t_e = int(rng.integers(2, 6))
            out_d = size + MARGIN + float(rng.uniform(0, 4))
            in_d = m + float(rng.uniform(0, 4))
            if edge == "left":
                p_out, p_in = (-out_d, lane), (in_d, lane)
                target = (float(rng.uniform(w * 0.6, w - m)), lane)
            else:
                p_out, p_in = (w + out_d, lane), (w - in_d, lane)
                target = (float(rng.uniform(m, w * 0.4)), lane)
            path = PathSpec("line", points=(p_out, p_out, p_in, target),
                            times=(0, t_e - 1, t_e, T - 1))
            objs.append(ObjectSpec(shape, color, size, path,
                                   caption_template="the {color} {shape}"))
        return SceneSpec((w, h), T, tuple(objs), background, seed,
                         keypoints_per_object)

    builders = {
        "interior": _interior_path, "entry": _entry_path,
        "exit": _exit_path, "cross": _cross_path, "static": _static_path,
    }
    if kind not in builders:
        raise ValueError(f"unknown scene kind {kind!r}")
    n_obj = 1
    if kind == "interior":
        n_obj = int(rng.integers(1, 4))
    elif kind in ("entry", "exit"):
        n_obj = int(rng.integers(1, 3))

    colors = list(rng.choice(COLOR_NAMES, size=n_obj, replace=False))
    objs = []
    taken_paths: list[np.ndarray] = []
    for i in range(n_obj):
        shape = str(rng.choice(SHAPES))
        size = float(rng.uniform(5.0, 9.0))
        build = builders[kind] if i == 0 else _interior_path
        path = None
        for _ in range(30):
            cand = build(rng, size, w, h, T)
            pos = cand.positions(T)
            min_d = 2 * size + 4  # sizes are close enough for a shared bound
            if all(not _paths_overlap(pos, other, min_d) for other in taken_paths):
                path = cand
                taken_paths.append(pos)
                break
        if path is None:
            continue
        objs.append(ObjectSpec(shape, colors[i], size, path))
    if not objs:
        # Degenerate fallback so callers always get a valid scene.
        size = 6.0
        objs = [ObjectSpec("circle", colors[0], size,
                           _interior_path(rng, size, w, h, T))]
    return SceneSpec((w, h), T, tuple(objs), background, seed,
                     keypoints_per_object)
