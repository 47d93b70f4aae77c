"""Toy latent video transformer trained with flow matching.

The network predicts a velocity field over the latent grid. Conditioning
enters two ways: channel concatenation of the bundle (current state, first
frame latent, mask, heatmap, point map) through an input projection whose
heatmap and point-map columns start at exactly zero, and anchored
cross-attention from video tokens to caption tokens in every block.

Residual branch output projections also start at zero, so an untrained model
is a function of the state channels alone; the final head is initialized
normally so gradients reach every branch from step one.
"""

from __future__ import annotations

import io
import json
import math
from dataclasses import asdict, dataclass

import numpy as np
import torch
from torch import nn

from .attention import ATTENTION_MODES, AttentionBias, build_bias, sawca
from .conditioning import (CHANNEL_ORDER, ConditionBundle, LatentGrid,
                           assemble, decode_video)
from .text import MAX_TEXT_TOKENS, PAD, VOCAB_SIZE, caption_spans
from .triplet import MultimodalTriplet

CHECKPOINT_MAGIC = b"TVCKPT1\n"
CHECKPOINT_SCHEMA_VERSION = "1"

_DTYPES = {"f4": np.float32, "f8": np.float64}


@dataclass(frozen=True)
class ModelConfig:
    channels: int = 16
    dim: int = 128
    depth: int = 6
    heads: int = 4
    vocab_size: int = VOCAB_SIZE
    text_dim: int = 128
    num_frames: int = 16
    frame_height: int = 64
    frame_width: int = 64
    spatial_stride: int = 8
    temporal_stride: int = 4
    attention_mode: str = "weighted"
    attention_weight: float = 30.0
    max_text_tokens: int = MAX_TEXT_TOKENS

    def __post_init__(self):
        if self.dim % self.heads != 0:
            raise ValueError(f"dim {self.dim} not divisible by "
                             f"{self.heads} heads")
        if self.attention_mode not in ATTENTION_MODES:
            raise ValueError(f"unknown attention mode {self.attention_mode!r}")
        if self.attention_weight <= 0:
            raise ValueError("attention weight must be positive")

    def grid(self) -> LatentGrid:
        return LatentGrid.for_video(
            self.num_frames, self.frame_height, self.frame_width,
            channels=self.channels, spatial_stride=self.spatial_stride,
            temporal_stride=self.temporal_stride)

    @property
    def latent_dims(self) -> tuple[int, int, int]:
        g = self.grid()
        return (g.num_latent_frames, g.height, g.width)


@dataclass(frozen=True)
class FlowSample:
    """One flow-matching training point on the straight x0 -> x1 path."""
    x0: torch.Tensor
    x1: torch.Tensor
    t: float
    x_t: torch.Tensor
    v_t: torch.Tensor


def fm_interpolate(x0: torch.Tensor, x1: torch.Tensor, t: float) -> FlowSample:
    """x_t = t*x1 + (1-t)*x0 and its constant velocity v_t = x1 - x0."""
    if x0.shape != x1.shape:
        raise ValueError(f"shape mismatch {tuple(x0.shape)} vs "
                         f"{tuple(x1.shape)}")
    t = float(t)
    if not 0.0 <= t <= 1.0:
        raise ValueError(f"t must be in [0, 1], got {t}")
    return FlowSample(x0=x0, x1=x1, t=t,
                      x_t=t * x1 + (1.0 - t) * x0, v_t=x1 - x0)


def fm_loss(pred: torch.Tensor, v_t: torch.Tensor,
            kind: str = "mse") -> torch.Tensor:
    """Velocity regression loss: mean squared error, or mean absolute."""
    if pred.shape != v_t.shape:
        raise ValueError(f"shape mismatch {tuple(pred.shape)} vs "
                         f"{tuple(v_t.shape)}")
    if kind == "mse":
        return ((pred - v_t) ** 2).mean()
    if kind == "l1":
        return (pred - v_t).abs().mean()
    raise ValueError(f"unknown loss kind {kind!r}")


def _timestep_embedding(t: float, dim: int, dtype: torch.dtype,
                        device: torch.device) -> torch.Tensor:
    """Sinusoidal features of the scalar time, geometric frequency ladder."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0)
                      * torch.arange(half, dtype=dtype, device=device) / half)
    ang = t * 1000.0 * freqs
    emb = torch.cat([torch.sin(ang), torch.cos(ang)])
    if dim % 2:
        emb = torch.cat([emb, torch.zeros(1, dtype=dtype, device=device)])
    return emb


def _axis_embedding(positions: torch.Tensor, dim: int) -> torch.Tensor:
    """(n, dim) sinusoidal features per position, same ladder as above."""
    half = dim // 2
    freqs = torch.exp(-math.log(10000.0)
                      * torch.arange(half, dtype=torch.float32) / half)
    ang = positions.to(torch.float32)[:, None] * freqs[None, :]
    emb = torch.cat([torch.sin(ang), torch.cos(ang)], dim=1)
    if dim % 2:
        emb = torch.cat([emb, torch.zeros(len(positions), 1)], dim=1)
    return emb


def _grid_pos_init(t_l: int, h_l: int, w_l: int, dim: int) -> torch.Tensor:
    """Factorized (frame, row, col) sinusoidal init for video token positions.

    Tokens in different latent frames must be distinguishable from the very
    first step or the model blends neighboring frames' content into each
    window; a small random init leaves them nearly interchangeable. The
    parameter stays learnable on top of this structure.
    """
    d_axis = 2 * (dim // 6)
    out = torch.zeros(t_l, h_l, w_l, dim)
    if d_axis:
        et = _axis_embedding(torch.arange(t_l), d_axis)
        er = _axis_embedding(torch.arange(h_l), d_axis)
        ec = _axis_embedding(torch.arange(w_l), d_axis)
        out[..., :d_axis] = et[:, None, None, :]
        out[..., d_axis:2 * d_axis] = er[None, :, None, :]
        out[..., 2 * d_axis:3 * d_axis] = ec[None, None, :, :]
    return out.reshape(t_l * h_l * w_l, dim)


class _Block(nn.Module):
    """Self-attention, anchored cross-attention, MLP; all pre-norm residual."""

    def __init__(self, dim: int, heads: int):
        super().__init__()
        self.heads = heads
        self.ln_self = nn.LayerNorm(dim)
        self.qkv = nn.Linear(dim, 3 * dim)
        self.self_out = nn.Linear(dim, dim)
        self.ln_cross = nn.LayerNorm(dim)
        self.q_proj = nn.Linear(dim, dim)
        self.k_proj = nn.Linear(dim, dim)
        self.v_proj = nn.Linear(dim, dim)
        self.cross_out = nn.Linear(dim, dim)
        self.ln_mlp = nn.LayerNorm(dim)
        self.fc1 = nn.Linear(dim, 4 * dim)
        self.fc2 = nn.Linear(4 * dim, dim)
        # Residual branches start as identity.
        for lin in (self.self_out, self.cross_out, self.fc2):
            nn.init.zeros_(lin.weight)
            nn.init.zeros_(lin.bias)

    def _split(self, x: torch.Tensor) -> torch.Tensor:
        n, d = x.shape
        return x.reshape(n, self.heads, d // self.heads).transpose(0, 1)

    def _merge(self, x: torch.Tensor) -> torch.Tensor:
        h, n, dh = x.shape
        return x.transpose(0, 1).reshape(n, h * dh)

    def forward(self, x: torch.Tensor, text: torch.Tensor,
                bias: AttentionBias | None, mode: str) -> torch.Tensor:
        h = self.ln_self(x)
        q, k, v = self.qkv(h).chunk(3, dim=-1)
        attn = sawca(self._split(q), self._split(k), self._split(v))
        x = x + self.self_out(self._merge(attn))

        h = self.ln_cross(x)
        q = self._split(self.q_proj(h))
        k = self._split(self.k_proj(text))
        v = self._split(self.v_proj(text))
        x = x + self.cross_out(self._merge(sawca(q, k, v, bias, mode)))

        h = self.ln_mlp(x)
        return x + self.fc2(torch.nn.functional.gelu(self.fc1(h)))


class VelocityModel(nn.Module):
    """Predicts the flow velocity for one clip's latent token grid."""

    def __init__(self, config: ModelConfig):
        super().__init__()
        self.config = config
        c, d = config.channels, config.dim
        t_l, h_l, w_l = config.latent_dims
        self.in_channels = 3 * c + 2

        self.input_proj = nn.Linear(self.in_channels, d)
        # Heatmap and point-map columns start at zero: the untrained model
        # is invariant to both (channel layout per CHANNEL_ORDER).
        with torch.no_grad():
            self.input_proj.weight[:, 2 * c + 1:] = 0.0
        self.pos = nn.Parameter(_grid_pos_init(t_l, h_l, w_l, d))
        self.t_mlp = nn.Sequential(nn.Linear(d, d), nn.SiLU(),
                                   nn.Linear(d, d))
        self.text_embed = nn.Embedding(config.vocab_size, config.text_dim)
        self.text_pos = nn.Parameter(_axis_embedding(
            torch.arange(config.max_text_tokens), config.text_dim))
        self.text_proj = nn.Linear(config.text_dim, d)
        self.blocks = nn.ModuleList(
            [_Block(d, config.heads) for _ in range(config.depth)])
        self.ln_out = nn.LayerNorm(d)
        self.head = nn.Linear(d, c)

    def forward(self, x_t: torch.Tensor, t: float, bundle: ConditionBundle,
                tokens: list[int],
                bias: AttentionBias | None = None) -> torch.Tensor:
        """Velocity with the same (T_l, H_l, W_l, C) shape as x_t."""
        cfg = self.config
        t_l, h_l, w_l = cfg.latent_dims
        expect = (t_l, h_l, w_l, cfg.channels)
        if tuple(x_t.shape) != expect:
            raise ValueError(f"x_t shape {tuple(x_t.shape)} != {expect}")
        if not tokens:
            tokens = [PAD]  # keep cross-attention well formed
        if len(tokens) > cfg.max_text_tokens:
            raise ValueError(f"{len(tokens)} text tokens exceed budget "
                             f"{cfg.max_text_tokens}")
        dtype = x_t.dtype

        def tt(a: np.ndarray) -> torch.Tensor:
            return torch.from_numpy(a).to(dtype)

        cond = torch.cat(
            [x_t,
             tt(bundle.image_latent), tt(bundle.mask),
             tt(bundle.heatmap), tt(bundle.point_map)],
            dim=-1).reshape(t_l * h_l * w_l, self.in_channels)
        x = self.input_proj(cond) + self.pos
        x = x + self.t_mlp(_timestep_embedding(float(t), cfg.dim, dtype,
                                               x.device))

        ids = torch.tensor(tokens, dtype=torch.long, device=x.device)
        text = self.text_proj(self.text_embed(ids)
                              + self.text_pos[:len(tokens)])
        for block in self.blocks:
            x = block(x, text, bias, cfg.attention_mode)
        v = self.head(self.ln_out(x))
        return v.reshape(expect)


def make_model(config: ModelConfig, seed: int = 0) -> VelocityModel:
    """Deterministically initialized model (zero-init contract included)."""
    torch.manual_seed(seed)
    return VelocityModel(config)


def prepare_conditioning(triplet: MultimodalTriplet, first_frame: np.ndarray,
                         noise: np.ndarray, config: ModelConfig,
                         assets: dict[str, np.ndarray] | None = None,
                         ) -> tuple[ConditionBundle, list[int],
                                    AttentionBias | None]:
    """Bundle + prompt tokens + anchoring bias for one clip."""
    grid = config.grid()
    if triplet.num_frames != grid.num_frames:
        raise ValueError(f"triplet has {triplet.num_frames} frames, model "
                         f"expects {grid.num_frames}")
    if triplet.frame_size != (config.frame_width, config.frame_height):
        raise ValueError(f"triplet frame size {triplet.frame_size} != "
                         f"({config.frame_width}, {config.frame_height})")
    bundle = assemble(triplet, first_frame, noise, assets=assets, grid=grid)
    tokens, spans = caption_spans(triplet.captions,
                                  max_tokens=config.max_text_tokens)
    if not tokens:
        return bundle, [], None
    bias = build_bias(triplet, grid, spans, len(tokens),
                      w=config.attention_weight)
    return bundle, tokens, bias


@torch.no_grad()
def sample(model: VelocityModel, first_frame: np.ndarray,
           triplet: MultimodalTriplet, steps: int = 20, seed: int = 0,
           assets: dict[str, np.ndarray] | None = None,
           return_latent: bool = False, progress=None):
    """Euler integration of the learned flow from noise to video.

    Latent frame 0 is re-clamped to the first-frame latent after every step,
    and the final latent is decoded by block un-pooling to uint8 frames.
    `progress`, when given, is called with the completed fraction after each
    step.
    """
    if steps < 1:
        raise ValueError(f"steps must be >= 1, got {steps}")
    cfg = model.config
    grid = cfg.grid()
    rng = np.random.default_rng(np.random.SeedSequence([seed]))
    noise = rng.standard_normal(grid.latent_shape).astype(np.float32)
    bundle, tokens, bias = prepare_conditioning(
        triplet, first_frame, noise, cfg, assets=assets)

    dtype = next(model.parameters()).dtype
    x = torch.from_numpy(bundle.noise).to(dtype)
    clamp = torch.from_numpy(bundle.image_latent[0]).to(dtype)
    dt = 1.0 / steps
    for k in range(steps):
        v = model(x, k * dt, bundle, tokens, bias)
        x = x + dt * v
        x[0] = clamp
        if progress is not None:
            progress((k + 1) / steps)
    latent = x.cpu().numpy().astype(np.float32)
    if return_latent:
        return latent
    return decode_video(latent, grid)


def save_checkpoint(path, model: VelocityModel) -> None:
    """Versioned container: JSON header + raw little-endian tensor bytes."""
    params = {k: v.detach().cpu().numpy()
              for k, v in model.state_dict().items()}
    index, offset = [], 0
    for name in sorted(params):
        a = params[name]
        code = {np.dtype(np.float32): "f4",
                np.dtype(np.float64): "f8"}[a.dtype]
        nbytes = a.size * a.itemsize
        index.append({"name": name, "shape": list(a.shape), "dtype": code,
                      "offset": offset, "nbytes": nbytes})
        offset += nbytes
    header = {
        "schema_version": CHECKPOINT_SCHEMA_VERSION,
        "kind": "velocity-model",
        "channel_order": CHANNEL_ORDER,
        "config": asdict(model.config),
        "params": index,
    }
    blob = json.dumps(header, sort_keys=True,
                      separators=(",", ":")).encode("utf-8")
    with open(path, "wb") as f:
        f.write(CHECKPOINT_MAGIC)
        f.write(len(blob).to_bytes(8, "little"))
        f.write(blob)
        for name in sorted(params):
            a = np.ascontiguousarray(params[name])
            if a.dtype.byteorder == ">":  # stored little-endian always
                a = a.astype(a.dtype.newbyteorder("<"))
            f.write(a.tobytes())


def load_checkpoint(path) -> VelocityModel:
    """Load a checkpoint, refusing on any contract mismatch."""
    with open(path, "rb") as f:
        raw = f.read()
    buf = io.BytesIO(raw)
    if buf.read(len(CHECKPOINT_MAGIC)) != CHECKPOINT_MAGIC:
        raise ValueError("not a model checkpoint")
    n = int.from_bytes(buf.read(8), "little")
    header = json.loads(buf.read(n).decode("utf-8"))
    if header.get("schema_version") != CHECKPOINT_SCHEMA_VERSION:
        raise ValueError(
            f"unsupported checkpoint version {header.get('schema_version')!r}")
    if header.get("channel_order") != CHANNEL_ORDER:
        raise ValueError(
            f"channel contract mismatch: checkpoint has "
            f"{header.get('channel_order')!r}, expected {CHANNEL_ORDER!r}")
    config = ModelConfig(**header["config"])
    model = make_model(config, seed=0)

    base = len(CHECKPOINT_MAGIC) + 8 + n
    state = {}
    for entry in header["params"]:
        dt = np.dtype(_DTYPES[entry["dtype"]]).newbyteorder("<")
        start = base + entry["offset"]
        a = np.frombuffer(raw, dtype=dt, count=entry["nbytes"] // dt.itemsize,
                          offset=start).reshape(entry["shape"])
        state[entry["name"]] = torch.from_numpy(a.astype(dt.newbyteorder("=")))
    missing = set(model.state_dict()) - set(state)
    extra = set(state) - set(model.state_dict())
    if missing or extra:
        raise ValueError(f"parameter set mismatch: missing {sorted(missing)}, "
                         f"unexpected {sorted(extra)}")
    model.load_state_dict(state)
    return model
