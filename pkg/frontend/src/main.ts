/** Browser entry point: wires the session, canvas and service together.
 *
 * Layout is a single canvas with a toolbar: upload a first frame, draw
 * trajectories, caption them, drop references, submit, watch playback.
 * All state lives in a CanvasSession; this file is DOM plumbing only.
 */

import { ServiceClient } from "./api.js";
import { renderSession, renderPlaybackOverlay, trackColor } from "./canvas.js";
import { speedReadout } from "./gesture.js";
import { CanvasSession, SessionLockedError } from "./session.js";
import { badgesByTrack, submitAndPoll } from "./workflow.js";
import type { Point } from "./types.js";

const SERVICE_URL = (window as { SERVICE_URL?: string }).SERVICE_URL ?? "http://127.0.0.1:8800";

function byId<T extends HTMLElement>(id: string): T {
  const el = document.getElementById(id);
  if (!el) throw new Error(`missing element #${id}`);
  return el as T;
}

async function pngFromFile(file: File): Promise<Uint8Array> {
  return new Uint8Array(await file.arrayBuffer());
}

function decodePng(bytes: Uint8Array): Promise<HTMLImageElement> {
  return new Promise((resolve, reject) => {
    const img = new Image();
    const url = URL.createObjectURL(new Blob([bytes.buffer as ArrayBuffer], { type: "image/png" }));
    img.onload = () => {
      URL.revokeObjectURL(url);
      resolve(img);
    };
    img.onerror = () => {
      URL.revokeObjectURL(url);
      reject(new Error("could not decode PNG"));
    };
    img.src = url;
  });
}

class App {
  private readonly client = new ServiceClient(SERVICE_URL);
  private session: CanvasSession | null = null;
  private background: HTMLImageElement | null = null;
  private gesture: Point[] = [];
  private drawing = false;
  private selectedTrack: string | null = null;
  private playbackFrames: HTMLImageElement[] = [];
  private playbackTimer: number | null = null;

  private readonly canvas = byId<HTMLCanvasElement>("stage");
  private readonly status = byId<HTMLDivElement>("status");
  private readonly badges = byId<HTMLUListElement>("badges");
  private readonly captionInput = byId<HTMLInputElement>("caption");

  async start(): Promise<void> {
    const cfg = await this.client.getConfig();
    this.canvas.width = cfg.frame_size[0];
    this.canvas.height = cfg.frame_size[1];
    this.session = new CanvasSession(cfg.frame_size[0], cfg.frame_size[1], cfg.num_frames);
    this.say(`ready: ${cfg.frame_size[0]}x${cfg.frame_size[1]}, ${cfg.num_frames} frames`);

    byId<HTMLInputElement>("background-file").addEventListener("change", (e) =>
      this.onBackgroundPicked(e).catch((err) => this.say(String(err))),
    );
    byId<HTMLInputElement>("reference-file").addEventListener("change", (e) =>
      this.onReferencePicked(e).catch((err) => this.say(String(err))),
    );
    byId<HTMLButtonElement>("set-caption").addEventListener("click", () => this.onCaption());
    byId<HTMLButtonElement>("toggle-vis").addEventListener("click", () => this.onToggle());
    byId<HTMLButtonElement>("submit").addEventListener("click", () =>
      this.onSubmit().catch((err) => this.say(String(err))),
    );
    byId<HTMLButtonElement>("save").addEventListener("click", () => this.onSave());
    byId<HTMLInputElement>("session-file").addEventListener("change", (e) =>
      this.onLoad(e).catch((err) => this.say(String(err))),
    );

    this.canvas.addEventListener("pointerdown", (e) => this.onPointerDown(e));
    this.canvas.addEventListener("pointermove", (e) => this.onPointerMove(e));
    this.canvas.addEventListener("pointerup", () => this.onPointerUp());
    this.repaint();
  }

  private say(msg: string): void {
    this.status.textContent = msg;
  }

  /** Swap in an editable copy when the current draft is frozen. */
  private editable(): CanvasSession {
    if (!this.session) throw new Error("no session yet");
    if (this.session.isLocked) {
      this.session = this.session.fork();
      this.say("forked a new draft; the submitted job keeps its inputs");
    }
    return this.session;
  }

  private canvasPoint(e: PointerEvent): Point {
    const rect = this.canvas.getBoundingClientRect();
    return [
      ((e.clientX - rect.left) / rect.width) * this.canvas.width,
      ((e.clientY - rect.top) / rect.height) * this.canvas.height,
    ];
  }

  private async onBackgroundPicked(e: Event): Promise<void> {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file) return;
    const bytes = await pngFromFile(file);
    const assetId = await this.client.uploadAsset(bytes, "first_frame");
    this.background = await decodePng(bytes);
    this.editable().setBackground(assetId);
    this.say(`background ${assetId.slice(0, 12)}...`);
    this.repaint();
  }

  private async onReferencePicked(e: Event): Promise<void> {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file || !this.session) return;
    const bytes = await pngFromFile(file);
    const assetId = await this.client.uploadAsset(bytes, "reference");
    const img = await decodePng(bytes);
    const scale = Number(byId<HTMLInputElement>("ref-scale").value) || 1;
    const rotation = Number(byId<HTMLInputElement>("ref-rotation").value) || 0;
    // Drop at canvas center; the user drags it afterwards.
    this.editable().placeReference(
      assetId,
      [this.canvas.width / 2, this.canvas.height / 2],
      scale,
      rotation,
      img.naturalWidth,
      img.naturalHeight,
    );
    this.repaint();
  }

  private onPointerDown(e: PointerEvent): void {
    if (!this.session?.backgroundAsset) {
      this.say("upload a first frame before drawing");
      return;
    }
    this.drawing = true;
    this.gesture = [this.canvasPoint(e)];
  }

  private onPointerMove(e: PointerEvent): void {
    if (!this.drawing) return;
    this.gesture.push(this.canvasPoint(e));
    this.say(speedReadout(this.gesture));
    this.repaint();
  }

  private onPointerUp(): void {
    if (!this.drawing) return;
    this.drawing = false;
    try {
      const track = this.editable().drawTrack(this.gesture);
      this.selectedTrack = track.trackId;
      this.say(`drew ${track.trackId} (${track.userPoints.length} points); caption it`);
    } catch (err) {
      this.say(err instanceof SessionLockedError ? String(err) : `gesture rejected: ${String(err)}`);
    }
    this.gesture = [];
    this.repaint();
  }

  private onCaption(): void {
    if (!this.selectedTrack) {
      this.say("draw or select a track first");
      return;
    }
    const s = this.editable();
    const text = this.captionInput.value.trim();
    s.setCaption(this.selectedTrack, text);
    const t = s.track(this.selectedTrack);
    // Default subject box around the first visible point; drag to adjust.
    if (!t.bbox) {
      const p = t.userPoints[0]!;
      s.setTrackBBox(this.selectedTrack, { cx: p[0], cy: p[1], w: 16, h: 16 });
    }
    this.say(`caption set on ${this.selectedTrack}`);
  }

  private onToggle(): void {
    if (!this.selectedTrack || !this.session) return;
    const from = Number(byId<HTMLInputElement>("vis-from").value) || 0;
    const to = Number(byId<HTMLInputElement>("vis-to").value) || from + 1;
    this.editable().toggleVisibility(this.selectedTrack, from, to);
    this.repaint();
  }

  private onSave(): void {
    if (!this.session) return;
    const text = this.session.exportSession();
    const blob = new Blob([text], { type: "application/json" });
    const a = document.createElement("a");
    a.href = URL.createObjectURL(blob);
    a.download = "session.json";
    a.click();
    URL.revokeObjectURL(a.href);
  }

  private async onLoad(e: Event): Promise<void> {
    const file = (e.target as HTMLInputElement).files?.[0];
    if (!file) return;
    this.session = CanvasSession.importSession(await file.text());
    this.selectedTrack = null;
    this.say("session loaded");
    this.repaint();
  }

  private async onSubmit(): Promise<void> {
    if (!this.session) return;
    this.badges.replaceChildren();
    this.say("submitting...");
    const outcome = await submitAndPoll(this.client, this.session, {
      steps: 20,
      seed: 0,
      poll: { onUpdate: (j) => this.say(`job ${j.state} ${(j.progress * 100).toFixed(0)}%`) },
    });
    if (outcome.kind === "invalid") {
      for (const [tid, violations] of badgesByTrack(outcome.report)) {
        for (const v of violations) {
          const li = document.createElement("li");
          li.textContent = `${tid || "triplet"}: ${v.path}: ${v.message}`;
          this.badges.appendChild(li);
        }
      }
      this.say("fix the flagged tracks and resubmit");
      return;
    }
    if (outcome.kind === "failed") {
      this.say(`generation failed: ${outcome.job.error_msg ?? "unknown error"}`);
      return;
    }
    this.playbackFrames = await Promise.all(outcome.frames.map(decodePng));
    this.startPlayback();
  }

  private startPlayback(): void {
    if (this.playbackTimer !== null) clearInterval(this.playbackTimer);
    let frame = 0;
    this.playbackTimer = window.setInterval(() => {
      if (!this.session) return;
      this.session.playback = { status: "playing", frame };
      this.repaint();
      frame = (frame + 1) % this.playbackFrames.length;
    }, 125);
  }

  private repaint(): void {
    const ctx = this.canvas.getContext("2d");
    if (!ctx || !this.session) return;
    ctx.clearRect(0, 0, this.canvas.width, this.canvas.height);

    const playing = this.session.playback.status === "playing" && this.playbackFrames.length > 0;
    if (playing) {
      const img = this.playbackFrames[this.session.playback.frame % this.playbackFrames.length]!;
      ctx.drawImage(img, 0, 0);
      if (byId<HTMLInputElement>("overlay").checked) {
        renderPlaybackOverlay(ctx, this.session, this.session.playback.frame);
      }
      return;
    }

    if (this.background) ctx.drawImage(this.background, 0, 0);
    renderSession(ctx, this.session);
    if (this.gesture.length > 1) {
      ctx.strokeStyle = trackColor(this.session.tracks.length);
      ctx.beginPath();
      ctx.moveTo(this.gesture[0]![0], this.gesture[0]![1]);
      for (const p of this.gesture.slice(1)) ctx.lineTo(p[0], p[1]);
      ctx.stroke();
    }
  }
}

window.addEventListener("DOMContentLoaded", () => {
  new App().start().catch((err) => {
    document.body.textContent = `failed to start: ${err}`;
  });
});
