"""Command line surface: synth, train, generate, eval, serve."""

from __future__ import annotations

import json
from dataclasses import replace
from pathlib import Path

import click
import numpy as np
from PIL import Image

from .attention import ATTENTION_MODES, DEFAULT_ATTENTION_WEIGHT
from .metrics import evaluate
from .model import VelocityModel, load_checkpoint, sample
from .synthgen.dataset import make_dataset
from .training import TrainConfig, train as run_training
from .triplet import parse_triplet

_MODE = click.Choice(ATTENTION_MODES)


def attention_options(f):
    f = click.option("--attention-mode", type=_MODE, default=None,
                     help="Cross-attention mode override.")(f)
    f = click.option("--attention-w", type=float, default=None,
                     help=f"Anchoring weight override "
                          f"(default {DEFAULT_ATTENTION_WEIGHT:g}).")(f)
    return f


def _override_attention(model: VelocityModel, mode: str | None,
                        w: float | None) -> VelocityModel:
    """Mode and weight are runtime knobs, not learned state."""
    cfg = model.config
    model.config = replace(
        cfg,
        attention_mode=mode if mode is not None else cfg.attention_mode,
        attention_weight=w if w is not None else cfg.attention_weight)
    return model


@click.group()
def main():
    """Trajectory/text/reference conditioned toy video generation."""


@main.command()
@click.option("--n", type=int, required=True, help="Clips to generate.")
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@click.option("--num-frames", type=int, default=16, show_default=True)
@click.option("--width", type=int, default=64, show_default=True)
@click.option("--height", type=int, default=64, show_default=True)
@click.option("--threshold", type=float, default=2.0, show_default=True,
              help="Minimum motion score kept by the filter.")
@click.option("--keypoints", type=int, default=1, show_default=True,
              help="Trajectory points per object.")
@click.option("--overlay/--no-overlay", default=False,
              help="Also write trajectory overlay frames.")
def synth(n, seed, out, num_frames, width, height, threshold, keypoints,
          overlay):
    """Generate a filtered synthetic clip dataset."""
    manifest = make_dataset(
        n, seed, out, frame_size=(width, height), num_frames=num_frames,
        threshold=threshold, keypoints_per_object=keypoints, overlay=overlay)
    click.echo(f"wrote {len(manifest['clips'])} clips to {out}")


@main.command(name="train")
@click.option("--config", "config_path", type=click.Path(path_type=Path),
              required=True, help="JSON file of training settings.")
@click.option("--out", type=click.Path(path_type=Path), required=True)
@attention_options
def train_cmd(config_path, out, attention_mode, attention_w):
    """Train a model; writes model.ckpt and loss.csv under --out."""
    fields = json.loads(Path(config_path).read_text())
    if attention_mode is not None:
        fields["attention_mode"] = attention_mode
    if attention_w is not None:
        fields["attention_weight"] = attention_w
    config = TrainConfig(**fields)
    result = run_training(config, out_dir=out)
    final = result.history[-1][2]
    click.echo(f"trained {config.steps} steps, final loss {final:.5f}")
    click.echo(f"checkpoint: {result.checkpoint_path}")


@main.command()
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--triplet", "triplet_path", type=click.Path(path_type=Path),
              required=True, help="Triplet JSON; reference image paths "
              "resolve relative to it.")
@click.option("--first-frame", type=click.Path(path_type=Path),
              required=True, help="PNG first frame.")
@click.option("--steps", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@click.option("--out", type=click.Path(path_type=Path), required=True)
@attention_options
def generate(checkpoint, triplet_path, first_frame, steps, seed, out,
             attention_mode, attention_w):
    """Sample one video from a triplet prompt and a first frame."""
    model = _override_attention(load_checkpoint(checkpoint),
                                attention_mode, attention_w)
    triplet = parse_triplet(Path(triplet_path).read_bytes())
    frame = np.asarray(Image.open(first_frame).convert("RGB"))
    assets = None
    if triplet.references:
        base = Path(triplet_path).parent
        assets = {r.image_ref: np.asarray(
            Image.open(base / r.image_ref).convert("RGBA"))
            for r in triplet.references}
    frames = sample(model, frame, triplet, steps=steps, seed=seed,
                    assets=assets)
    out = Path(out)
    (out / "frames").mkdir(parents=True, exist_ok=True)
    for t in range(frames.shape[0]):
        Image.fromarray(frames[t]).save(out / "frames" / f"{t:04d}.png")
    click.echo(f"wrote {frames.shape[0]} frames to {out / 'frames'}")


@main.command(name="eval")
@click.option("--checkpoint", type=click.Path(path_type=Path), required=True)
@click.option("--benchmark", type=click.Path(path_type=Path), required=True)
@click.option("--out", type=click.Path(path_type=Path), required=True,
              help="Report JSON path.")
@click.option("--steps", type=int, default=20, show_default=True)
@click.option("--seed", type=int, default=0, show_default=True)
@attention_options
def eval_cmd(checkpoint, benchmark, out, steps, seed, attention_mode,
             attention_w):
    """Evaluate a checkpoint on a benchmark dataset."""
    model = _override_attention(load_checkpoint(checkpoint),
                                attention_mode, attention_w)
    report = evaluate(model, benchmark, steps=steps, seed=seed)
    report.save(out)
    agg = report.to_json_obj()["aggregate"]
    for key in ("objmc", "appearance_rate", "subject_consistency",
                "background_consistency"):
        value = agg[key]
        shown = "undefined" if value is None else f"{value:.4f}"
        click.echo(f"{key}: {shown}")
    click.echo(f"report: {out}")


@main.command()
@click.option("--port", type=int, default=8800, show_default=True)
@click.option("--host", default="127.0.0.1", show_default=True)
@click.option("--checkpoint", type=click.Path(path_type=Path), default=None,
              help="Model to serve; untrained default when omitted.")
@click.option("--data-dir", type=click.Path(path_type=Path), default=None,
              help="Store root (default: CANVAS_DATA_DIR or ./canvas-data).")
@click.option("--workers", type=int, default=1, show_default=True,
              help="Generation worker threads.")
@attention_options
def serve(port, host, checkpoint, data_dir, workers, attention_mode,
          attention_w):
    """Run the HTTP job service."""
    import uvicorn

    from .service import create_app
    model = None
    if checkpoint is not None:
        model = _override_attention(load_checkpoint(checkpoint),
                                    attention_mode, attention_w)
    app = create_app(data_dir=data_dir, model=model, workers=workers)
    uvicorn.run(app, host=host, port=port)
