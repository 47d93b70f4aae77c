"""HTTP job service: asset uploads, generation jobs, results.

Persistence is deliberately small-scale: jobs live in one sqlite file and
assets in a content-addressed directory (the id is the sha256 of the bytes,
so identical uploads dedupe and deterministic re-runs produce identical
result ids). Job rows only ever move queued -> running -> done|failed, and a
restart re-queues anything that was running, which is safe because
generation is deterministic per seed.

A background worker thread drains the queue; HTTP handlers never block on
generation.
"""

from __future__ import annotations

import hashlib
import io
import json
import os
import shutil
import sqlite3
import subprocess
import tempfile
import threading
import time
import uuid
import zipfile
from pathlib import Path

import numpy as np
from fastapi import FastAPI, Request, Response
from fastapi.responses import JSONResponse
from PIL import Image

from .model import VelocityModel, load_checkpoint, make_model, sample
from .model import ModelConfig
from .synthgen.scene import BG_DARK, BG_LIGHT, PALETTE, _background_image
from .text import VOCAB, caption_spans
from .triplet import (SCHEMA_VERSION, MultimodalTriplet, TripletError,
                      ValidationReport, parse_triplet, validate_triplet)

SERVICE_SCHEMA_VERSION = "1"
MAX_ASSET_BYTES = 8 * 1024 * 1024
DEFAULT_STEPS = 20
ASSET_KINDS = ("image", "reference")

_MEDIA_TYPES = {"png": "image/png", "zip": "application/zip",
                "mp4": "video/mp4"}


def data_dir_from_env(explicit=None) -> Path:
    if explicit is not None:
        return Path(explicit)
    env = os.environ.get("CANVAS_DATA_DIR")
    return Path(env) if env else Path("canvas-data")


class AssetStore:
    """Content-addressed blobs on disk plus a metadata table."""

    def __init__(self, root: Path, db: "JobStore",
                 max_bytes: int = MAX_ASSET_BYTES):
        self.root = Path(root)
        self.root.mkdir(parents=True, exist_ok=True)
        self.db = db
        self.max_bytes = max_bytes

    def put_image(self, data: bytes, kind: str) -> str:
        """Store a user upload; PNG only (lossless), capped size."""
        if kind not in ASSET_KINDS:
            raise ValueError(f"unknown asset kind {kind!r}")
        if len(data) > self.max_bytes:
            raise AssetTooLarge(len(data), self.max_bytes)
        try:
            with Image.open(io.BytesIO(data)) as img:
                fmt = img.format
                img.verify()
        except Exception:
            fmt = None
        if fmt != "PNG":
            raise UnsupportedAsset(fmt)
        return self._put(data, kind, "png")

    def put_blob(self, data: bytes, kind: str, ext: str) -> str:
        """Internal results (frame archives, previews); no format sniffing."""
        return self._put(data, kind, ext)

    def _put(self, data: bytes, kind: str, ext: str) -> str:
        asset_id = hashlib.sha256(data).hexdigest()
        path = self.root / asset_id
        if not path.exists():
            tmp = path.with_suffix(".tmp")
            tmp.write_bytes(data)
            tmp.replace(path)
        self.db.record_asset(asset_id, kind, _MEDIA_TYPES[ext], len(data))
        return asset_id

    def exists(self, asset_id: str) -> bool:
        return (self.root / asset_id).exists() \
            and self.db.asset_meta(asset_id) is not None

    def get(self, asset_id: str) -> tuple[bytes, str]:
        meta = self.db.asset_meta(asset_id)
        path = self.root / asset_id
        if meta is None or not path.exists():
            raise KeyError(asset_id)
        return path.read_bytes(), meta["media_type"]


class AssetTooLarge(Exception):
    def __init__(self, size: int, cap: int):
        super().__init__(f"asset of {size} bytes exceeds cap {cap}")


class UnsupportedAsset(Exception):
    def __init__(self, fmt):
        super().__init__(f"unsupported asset format {fmt!r}; PNG required")


_SCHEMA = """
CREATE TABLE IF NOT EXISTS jobs (
    job_id TEXT PRIMARY KEY,
    idempotency_key TEXT UNIQUE,
    body_hash TEXT NOT NULL,
    request_json TEXT NOT NULL,
    status TEXT NOT NULL,
    progress REAL NOT NULL,
    result_ref TEXT,
    preview_ref TEXT,
    error_msg TEXT,
    created REAL NOT NULL,
    updated REAL NOT NULL
);
CREATE TABLE IF NOT EXISTS assets (
    asset_id TEXT PRIMARY KEY,
    kind TEXT NOT NULL,
    media_type TEXT NOT NULL,
    nbytes INTEGER NOT NULL,
    created REAL NOT NULL
);
"""

_TRANSITIONS = {"queued": {"running"}, "running": {"done", "failed"}}


class JobStore:
    """sqlite-backed job queue; every mutation is one atomic transaction."""

    def __init__(self, path: Path):
        self.path = Path(path)
        self.path.parent.mkdir(parents=True, exist_ok=True)
        with self._conn() as con:
            con.executescript(_SCHEMA)

    def _conn(self) -> sqlite3.Connection:
        con = sqlite3.connect(self.path, timeout=30.0)
        con.row_factory = sqlite3.Row
        return con

    def submit(self, request: dict, idempotency_key: str | None) -> str:
        body_hash = hashlib.sha256(json.dumps(
            request, sort_keys=True, separators=(",", ":")).encode()
        ).hexdigest()
        with self._conn() as con:
            con.execute("BEGIN IMMEDIATE")
            if idempotency_key is not None:
                row = con.execute(
                    "SELECT job_id, body_hash FROM jobs WHERE "
                    "idempotency_key = ?", (idempotency_key,)).fetchone()
                if row is not None:
                    if row["body_hash"] != body_hash:
                        raise IdempotencyConflict(idempotency_key)
                    return row["job_id"]
            job_id = uuid.uuid4().hex
            now = time.time()
            con.execute(
                "INSERT INTO jobs (job_id, idempotency_key, body_hash, "
                "request_json, status, progress, created, updated) "
                "VALUES (?, ?, ?, ?, 'queued', 0.0, ?, ?)",
                (job_id, idempotency_key, body_hash,
                 json.dumps(request, sort_keys=True), now, now))
            return job_id

    def get(self, job_id: str) -> dict | None:
        with self._conn() as con:
            row = con.execute("SELECT * FROM jobs WHERE job_id = ?",
                              (job_id,)).fetchone()
        return dict(row) if row is not None else None

    def claim_next(self) -> dict | None:
        """Atomically move the oldest queued job to running."""
        with self._conn() as con:
            con.execute("BEGIN IMMEDIATE")
            row = con.execute(
                "SELECT * FROM jobs WHERE status = 'queued' "
                "ORDER BY created LIMIT 1").fetchone()
            if row is None:
                return None
            con.execute(
                "UPDATE jobs SET status = 'running', updated = ? "
                "WHERE job_id = ?", (time.time(), row["job_id"]))
            job = dict(row)
            job["status"] = "running"
            return job

    def set_progress(self, job_id: str, fraction: float) -> None:
        with self._conn() as con:
            con.execute(
                "UPDATE jobs SET progress = ?, updated = ? "
                "WHERE job_id = ? AND status = 'running'",
                (float(fraction), time.time(), job_id))

    def finish(self, job_id: str, status: str, result_ref: str | None = None,
               preview_ref: str | None = None,
               error_msg: str | None = None) -> None:
        if status == "failed" and not error_msg:
            raise ValueError("failed jobs need an error message")
        with self._conn() as con:
            con.execute("BEGIN IMMEDIATE")
            row = con.execute("SELECT status FROM jobs WHERE job_id = ?",
                              (job_id,)).fetchone()
            if row is None:
                raise KeyError(job_id)
            if status not in _TRANSITIONS.get(row["status"], set()):
                raise ValueError(
                    f"illegal transition {row['status']} -> {status}")
            con.execute(
                "UPDATE jobs SET status = ?, progress = ?, result_ref = ?, "
                "preview_ref = ?, error_msg = ?, updated = ? "
                "WHERE job_id = ?",
                (status, 1.0 if status == "done" else 0.0, result_ref,
                 preview_ref, error_msg, time.time(), job_id))

    def requeue_running(self) -> int:
        """Recovery after restart: running jobs go back to the queue."""
        with self._conn() as con:
            cur = con.execute(
                "UPDATE jobs SET status = 'queued', progress = 0.0, "
                "updated = ? WHERE status = 'running'", (time.time(),))
            return cur.rowcount

    def counts(self) -> dict[str, int]:
        with self._conn() as con:
            rows = con.execute(
                "SELECT status, COUNT(*) AS n FROM jobs GROUP BY status")
            return {r["status"]: r["n"] for r in rows}

    def record_asset(self, asset_id: str, kind: str, media_type: str,
                     nbytes: int) -> None:
        with self._conn() as con:
            con.execute(
                "INSERT OR IGNORE INTO assets "
                "(asset_id, kind, media_type, nbytes, created) "
                "VALUES (?, ?, ?, ?, ?)",
                (asset_id, kind, media_type, nbytes, time.time()))

    def asset_meta(self, asset_id: str) -> dict | None:
        with self._conn() as con:
            row = con.execute("SELECT * FROM assets WHERE asset_id = ?",
                              (asset_id,)).fetchone()
        return dict(row) if row is not None else None


class IdempotencyConflict(Exception):
    def __init__(self, key: str):
        super().__init__(f"idempotency key {key!r} already used "
                         f"with a different body")


def _job_view(row: dict) -> dict:
    return {
        "job_id": row["job_id"],
        "status": row["status"],
        "progress": row["progress"],
        "result_ref": row["result_ref"],
        "preview_ref": row["preview_ref"],
        "error_msg": row["error_msg"],
        "request": json.loads(row["request_json"]),
        "created": row["created"],
        "updated": row["updated"],
    }


def _frames_archive(frames: np.ndarray, meta: dict) -> bytes:
    """Deterministic zip of lossless frames plus a metadata file."""
    buf = io.BytesIO()
    stamp = (1980, 1, 1, 0, 0, 0)  # fixed so identical runs hash identically
    with zipfile.ZipFile(buf, "w", zipfile.ZIP_STORED) as z:
        for t in range(frames.shape[0]):
            png = io.BytesIO()
            Image.fromarray(frames[t]).save(png, format="PNG")
            z.writestr(zipfile.ZipInfo(f"frames/{t:04d}.png", stamp),
                       png.getvalue())
        z.writestr(zipfile.ZipInfo("metadata.json", stamp),
                   json.dumps(meta, sort_keys=True, separators=(",", ":")))
    return buf.getvalue()


def encode_mp4_preview(frames: np.ndarray) -> bytes | None:
    """Best-effort MP4 via ffmpeg; frames stay canonical either way."""
    if shutil.which("ffmpeg") is None:
        return None
    try:
        with tempfile.TemporaryDirectory() as tmp:
            for t in range(frames.shape[0]):
                Image.fromarray(frames[t]).save(f"{tmp}/{t:04d}.png")
            out = f"{tmp}/preview.mp4"
            subprocess.run(
                ["ffmpeg", "-loglevel", "error", "-y", "-framerate", "8",
                 "-i", f"{tmp}/%04d.png", "-pix_fmt", "yuv420p", out],
                check=True, capture_output=True, timeout=60)
            return Path(out).read_bytes()
    except Exception:
        return None


class GenerationService:
    """Everything behind the HTTP surface; also used directly by the CLI."""

    def __init__(self, data_dir=None, model: VelocityModel | None = None,
                 checkpoint=None, max_asset_bytes: int = MAX_ASSET_BYTES,
                 default_steps: int = DEFAULT_STEPS):
        root = data_dir_from_env(data_dir)
        root.mkdir(parents=True, exist_ok=True)
        self.root = root
        self.jobs = JobStore(root / "jobs.sqlite3")
        self.assets = AssetStore(root / "assets", self.jobs,
                                 max_bytes=max_asset_bytes)
        if model is not None:
            self.model = model
        elif checkpoint is not None:
            self.model = load_checkpoint(checkpoint)
        else:
            # Untrained default keeps the surface usable for UI work.
            self.model = make_model(ModelConfig(), seed=0)
        self.default_steps = default_steps
        requeued = self.jobs.requeue_running()
        self._requeued_on_start = requeued

    # -- request validation ---------------------------------------------

    def parse_request(self, body: dict) -> tuple[MultimodalTriplet, dict]:
        """Returns (triplet, normalized request) or raises a service error."""
        if not isinstance(body, dict):
            raise BadRequest(_report("", "request", "body must be an object"))
        if "triplet" not in body:
            raise BadRequest(_report("", "triplet", "missing triplet"))
        try:
            triplet = parse_triplet(json.dumps(body["triplet"]))
        except TripletError as e:
            report = e.report or _report_obj("", "triplet", str(e))
            raise BadRequest(report.to_json_obj())

        cfg = self.model.config
        problems = ValidationReport()
        if triplet.num_frames != cfg.num_frames:
            problems.add("", "num_frames",
                         f"model generates {cfg.num_frames}-frame clips, "
                         f"got {triplet.num_frames}")
        if triplet.frame_size != (cfg.frame_width, cfg.frame_height):
            problems.add("", "frame_size",
                         f"model frame size is "
                         f"({cfg.frame_width}, {cfg.frame_height}), "
                         f"got {triplet.frame_size}")
        try:
            caption_spans(triplet.captions, max_tokens=cfg.max_text_tokens)
        except ValueError as e:
            problems.add("", "captions", str(e))
        if not problems.ok:
            raise BadRequest(problems.to_json_obj())

        first = body.get("first_frame_asset")
        preset = body.get("scene_preset")
        if (first is None) == (preset is None):
            raise BadRequest(_report(
                "", "first_frame",
                "exactly one of first_frame_asset or scene_preset required"))
        if first is not None:
            if not self.assets.exists(first):
                raise MissingAsset(first)
            frame = self._decode_first_frame(first)
            if frame.shape[:2] != (cfg.frame_height, cfg.frame_width):
                raise BadRequest(_report(
                    "", "first_frame_asset",
                    f"first frame must be {cfg.frame_width}x"
                    f"{cfg.frame_height}, got {frame.shape[1]}x"
                    f"{frame.shape[0]}"))
        for ref in triplet.references:
            if not self.assets.exists(ref.image_ref):
                raise MissingAsset(ref.image_ref)

        steps = int(body.get("steps", self.default_steps))
        if steps < 1:
            raise BadRequest(_report("", "steps", "steps must be >= 1"))
        request = {
            "triplet": body["triplet"],
            "first_frame_asset": first,
            "scene_preset": preset,
            "steps": steps,
            "seed": int(body.get("seed", 0)),
        }
        return triplet, request

    def _decode_first_frame(self, asset_id: str) -> np.ndarray:
        data, _ = self.assets.get(asset_id)
        with Image.open(io.BytesIO(data)) as img:
            return np.asarray(img.convert("RGB"))

    def _preset_frame(self, preset: dict) -> np.ndarray:
        cfg = self.model.config
        kind = preset.get("background", "checker")
        if kind not in ("checker", "solid"):
            raise ValueError(f"unknown preset background {kind!r}")
        return _background_image((kind, BG_LIGHT, BG_DARK),
                                 cfg.frame_width, cfg.frame_height)

    # -- job lifecycle ----------------------------------------------------

    def submit(self, body: dict, idempotency_key: str | None = None) -> str:
        _, request = self.parse_request(body)
        return self.jobs.submit(request, idempotency_key)

    def run_one_job(self) -> str | None:
        """Claim and execute a single queued job; returns its id or None."""
        job = self.jobs.claim_next()
        if job is None:
            return None
        job_id = job["job_id"]
        try:
            request = json.loads(job["request_json"])
            triplet = parse_triplet(json.dumps(request["triplet"]))
            if request.get("first_frame_asset"):
                frame = self._decode_first_frame(
                    request["first_frame_asset"])
            else:
                frame = self._preset_frame(request.get("scene_preset") or {})
            assets = None
            if triplet.references:
                assets = {}
                for ref in triplet.references:
                    data, _ = self.assets.get(ref.image_ref)
                    with Image.open(io.BytesIO(data)) as img:
                        assets[ref.image_ref] = np.asarray(
                            img.convert("RGBA"))
            frames = sample(
                self.model, frame, triplet, steps=request["steps"],
                seed=request["seed"], assets=assets,
                progress=lambda f: self.jobs.set_progress(job_id, 0.9 * f))
            meta = {"steps": request["steps"], "seed": request["seed"],
                    "num_frames": int(frames.shape[0])}
            archive = _frames_archive(frames, meta)
            result_ref = self.assets.put_blob(archive, "video", "zip")
            preview = encode_mp4_preview(frames)
            preview_ref = None
            if preview is not None:
                preview_ref = self.assets.put_blob(preview, "video", "mp4")
            self.jobs.finish(job_id, "done", result_ref=result_ref,
                             preview_ref=preview_ref)
        except Exception as e:  # job must reach a terminal state
            self.jobs.finish(job_id, "failed",
                             error_msg=f"{type(e).__name__}: {e}")
        return job_id

    def config_view(self) -> dict:
        cfg = self.model.config
        return {
            "schema_version": SERVICE_SCHEMA_VERSION,
            "triplet_schema_version": SCHEMA_VERSION,
            "frame_size": [cfg.frame_width, cfg.frame_height],
            "num_frames": cfg.num_frames,
            "attention_mode": cfg.attention_mode,
            "attention_weight": cfg.attention_weight,
            "default_steps": self.default_steps,
            "max_asset_bytes": self.assets.max_bytes,
            "caption_words": sorted(w for w in VOCAB if not
                                    w.startswith("<")),
            "palette": {name: list(rgb) for name, rgb in PALETTE.items()},
        }


class BadRequest(Exception):
    def __init__(self, report_obj: dict):
        super().__init__("invalid request")
        self.report = report_obj


class MissingAsset(Exception):
    def __init__(self, asset_id: str):
        super().__init__(f"asset {asset_id!r} not found")
        self.asset_id = asset_id


def _report_obj(track_id: str, path: str, message: str) -> ValidationReport:
    rep = ValidationReport()
    rep.add(track_id, path, message)
    return rep


def _report(track_id: str, path: str, message: str) -> dict:
    return _report_obj(track_id, path, message).to_json_obj()


def create_app(data_dir=None, model: VelocityModel | None = None,
               checkpoint=None, workers: int = 1,
               max_asset_bytes: int = MAX_ASSET_BYTES,
               default_steps: int = DEFAULT_STEPS) -> FastAPI:
    """FastAPI app plus `workers` background job threads."""
    service = GenerationService(
        data_dir=data_dir, model=model, checkpoint=checkpoint,
        max_asset_bytes=max_asset_bytes, default_steps=default_steps)
    stop = threading.Event()
    threads: list[threading.Thread] = []

    def worker_loop():
        while not stop.is_set():
            if service.run_one_job() is None:
                stop.wait(0.02)

    async def lifespan(app):
        stop.clear()
        for _ in range(workers):
            t = threading.Thread(target=worker_loop, daemon=True)
            t.start()
            threads.append(t)
        yield
        stop.set()
        for t in threads:
            t.join(timeout=5.0)

    app = FastAPI(title="trajectory video service", lifespan=lifespan)
    app.state.service = service

    @app.post("/assets")
    async def upload_asset(request: Request, kind: str = "image"):
        data = await request.body()
        try:
            asset_id = service.assets.put_image(data, kind)
        except AssetTooLarge as e:
            return JSONResponse({"error": str(e)}, status_code=413)
        except (UnsupportedAsset, ValueError) as e:
            return JSONResponse({"error": str(e)}, status_code=415)
        return JSONResponse({"asset_id": asset_id}, status_code=201)

    @app.get("/assets/{asset_id}")
    def get_asset(asset_id: str):
        try:
            data, media_type = service.assets.get(asset_id)
        except KeyError:
            return JSONResponse({"error": "asset not found"},
                                status_code=404)
        return Response(content=data, media_type=media_type)

    @app.post("/jobs/generate")
    async def submit_generation(request: Request):
        try:
            body = await request.json()
        except Exception:
            return JSONResponse({"error": "body must be JSON"},
                                status_code=400)
        key = request.headers.get("Idempotency-Key")
        if key is None and isinstance(body, dict):
            key = body.get("idempotency_key")
        try:
            job_id = service.submit(body, idempotency_key=key)
        except BadRequest as e:
            return JSONResponse(e.report, status_code=400)
        except MissingAsset as e:
            return JSONResponse({"error": str(e)}, status_code=404)
        except IdempotencyConflict as e:
            return JSONResponse({"error": str(e)}, status_code=409)
        return JSONResponse({"job_id": job_id}, status_code=202)

    @app.get("/jobs/{job_id}")
    def job_status(job_id: str):
        row = service.jobs.get(job_id)
        if row is None:
            return JSONResponse({"error": "job not found"}, status_code=404)
        return _job_view(row)

    @app.get("/jobs/{job_id}/result")
    def job_result(job_id: str):
        row = service.jobs.get(job_id)
        if row is None:
            return JSONResponse({"error": "job not found"}, status_code=404)
        if row["status"] != "done":
            return JSONResponse(
                {"error": f"job is {row['status']}, not done"},
                status_code=409)
        data, media_type = service.assets.get(row["result_ref"])
        return Response(content=data, media_type=media_type)

    @app.get("/health")
    def health():
        return {"status": "ok", "jobs": service.jobs.counts(),
                "requeued_on_start": service._requeued_on_start}

    @app.get("/config")
    def config():
        return service.config_view()

    return app
