"""Flow-matching training loop over on-disk clip datasets.

The whole dataset is held in memory: toy clips are tiny and the per-clip
conditioning (target latents, prompt tokens, anchoring bias) never changes
across steps, so it is computed once up front. Each step draws a batch of
clips, a fresh noise endpoint and time per clip, and regresses the velocity.

Runs are deterministic: data order, noise, and times come from one seeded
generator, and the model init is seeded, so two runs with the same config
produce identical loss curves.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import torch

from .attention import ATTENTION_MODES
from .conditioning import encode_video
from .model import (ModelConfig, VelocityModel, fm_interpolate, fm_loss,
                    make_model, prepare_conditioning, save_checkpoint)
from .synthgen.dataset import (load_clip, load_reference_images,
                               read_manifest)


@dataclass(frozen=True)
class TrainConfig:
    dataset_dir: str
    steps: int
    batch_size: int = 4
    learning_rate: float = 1e-3
    warmup_steps: int = 100
    seed: int = 0
    attention_mode: str = "weighted"
    attention_weight: float = 30.0
    loss_mode: str = "mse"
    dim: int = 128
    depth: int = 6
    heads: int = 4

    def __post_init__(self):
        if self.steps < 1:
            raise ValueError(f"steps must be >= 1, got {self.steps}")
        # 0 is allowed so the no-op update case stays testable; normal runs
        # use a positive rate.
        if self.learning_rate < 0:
            raise ValueError("learning rate must not be negative")
        if self.batch_size < 1:
            raise ValueError("batch size must be >= 1")
        if self.warmup_steps < 0:
            raise ValueError("warmup steps must not be negative")
        if self.attention_mode not in ATTENTION_MODES:
            raise ValueError(f"unknown attention mode {self.attention_mode!r}")
        if self.loss_mode not in ("mse", "l1"):
            raise ValueError(f"unknown loss mode {self.loss_mode!r}")


@dataclass
class TrainResult:
    model: VelocityModel
    config: ModelConfig
    history: list[tuple[int, float, float]]  # (step, lr, loss)
    checkpoint_path: Path | None = None
    loss_csv_path: Path | None = None


@dataclass
class _ClipBatchItem:
    x1: torch.Tensor
    bundle: object
    tokens: list[int]
    bias: object


def learning_rate_at(step: int, config: TrainConfig) -> float:
    """Linear warmup: lr * step / warmup for 1-indexed steps, then flat."""
    if config.warmup_steps > 0 and step < config.warmup_steps:
        return config.learning_rate * step / config.warmup_steps
    return config.learning_rate


def _load_training_set(config: TrainConfig,
                       ) -> tuple[list[_ClipBatchItem], ModelConfig]:
    manifest = read_manifest(config.dataset_dir)
    entries = manifest["clips"]
    if not entries:
        raise ValueError(f"dataset at {config.dataset_dir} is empty")
    shapes = {(tuple(e["frame_size"]), e["num_frames"]) for e in entries}
    if len(shapes) != 1:
        raise ValueError(f"dataset mixes clip shapes: {sorted(shapes)}")
    (fw, fh), num_frames = next(iter(shapes))

    model_config = ModelConfig(
        dim=config.dim, depth=config.depth, heads=config.heads,
        num_frames=num_frames, frame_height=fh, frame_width=fw,
        attention_mode=config.attention_mode,
        attention_weight=config.attention_weight)
    grid = model_config.grid()

    items = []
    zero_noise = np.zeros(grid.latent_shape, dtype=np.float32)
    for entry in entries:
        frames, triplet = load_clip(config.dataset_dir, entry["clip_id"])
        assets = None
        if triplet.references:
            imgs = load_reference_images(config.dataset_dir,
                                         entry["clip_id"], triplet)
            assets = {r.image_ref: img
                      for r, img in zip(triplet.references, imgs)}
        bundle, tokens, bias = prepare_conditioning(
            triplet, frames[0], zero_noise, model_config, assets=assets)
        x1 = torch.from_numpy(encode_video(frames, grid))
        items.append(_ClipBatchItem(x1=x1, bundle=bundle, tokens=tokens,
                                    bias=bias))
    return items, model_config


def train(config: TrainConfig, out_dir=None) -> TrainResult:
    """Run the loop; optionally write checkpoint + loss CSV under out_dir."""
    items, model_config = _load_training_set(config)
    rng = np.random.default_rng(np.random.SeedSequence([config.seed]))
    model = make_model(model_config, seed=config.seed)
    opt = torch.optim.Adam(model.parameters(), lr=config.learning_rate)
    shape = model_config.grid().latent_shape

    history: list[tuple[int, float, float]] = []
    for step in range(1, config.steps + 1):
        lr = learning_rate_at(step, config)
        for group in opt.param_groups:
            group["lr"] = lr
        picks = rng.integers(0, len(items), size=config.batch_size)
        losses = []
        for i in picks:
            item = items[int(i)]
            t = float(rng.uniform(0.0, 1.0))
            x0 = torch.from_numpy(
                rng.standard_normal(shape, dtype=np.float32))
            fs = fm_interpolate(x0, item.x1, t)
            pred = model(fs.x_t, t, item.bundle, item.tokens, item.bias)
            losses.append(fm_loss(pred, fs.v_t, config.loss_mode))
        loss = torch.stack(losses).mean()
        value = float(loss.item())
        if not math.isfinite(value):
            raise RuntimeError(
                f"loss became non-finite at step {step} (lr={lr}, "
                f"clips={[int(i) for i in picks]})")
        opt.zero_grad()
        loss.backward()
        opt.step()
        history.append((step, lr, value))

    result = TrainResult(model=model, config=model_config, history=history)
    if out_dir is not None:
        out = Path(out_dir)
        out.mkdir(parents=True, exist_ok=True)
        result.checkpoint_path = out / "model.ckpt"
        save_checkpoint(result.checkpoint_path, model)
        result.loss_csv_path = out / "loss.csv"
        rows = ["step,lr,loss"]
        rows += [f"{s},{lr:.10g},{v:.10g}" for s, lr, v in history]
        result.loss_csv_path.write_text("\n".join(rows) + "\n")
    return result
