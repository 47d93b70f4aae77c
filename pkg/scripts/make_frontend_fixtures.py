"""Generate the frontend's golden fixtures from the server-side rules.

Writes three JSON files under frontend/tests/fixtures/:
  goldens.json   50 triplet documents (25 valid / 25 invalid) with the
                 verdict the server's parser produces, so the client
                 validator can be held to byte-for-byte agreement
  resample.json  dense tracks computed by the server's resample_track,
                 pinning the client mirror to bit-identical output
  zipcase.json   one stored-only result archive with its expected entries

Rerun after changing the wire schema: python3 scripts/make_frontend_fixtures.py
"""

import base64
import io
import json
import zipfile
from pathlib import Path

import numpy as np
from PIL import Image

from trajvid.synthgen import generate_clips
from trajvid.triplet import TripletError, emit_triplet, parse_triplet, resample_track

ROOT = Path(__file__).resolve().parent.parent
OUT = ROOT / "frontend" / "tests" / "fixtures"

INTERIOR_ONLY = {"interior": 1.0}


def verdict_of(wire_text: str) -> dict:
    """Run the server parser and classify the outcome."""
    try:
        parsed = parse_triplet(wire_text)
    except TripletError as e:
        if e.report is not None:
            return {
                "verdict": "invariant",
                "violation_paths": [v.path for v in e.report.violations],
                "violation_tracks": [v.track_id for v in e.report.violations],
            }
        return {"verdict": "structural"}
    return {"verdict": "valid", "canonical": emit_triplet(parsed).decode()}


def wire(obj) -> str:
    return json.dumps(obj)


def base_doc(w=64, h=64, T=8) -> dict:
    """A small valid document to corrupt; one fg track, one caption, one bbox."""
    xs = np.linspace(10.0, 50.0, T)
    return {
        "schema_version": "1",
        "frame_size": [w, h],
        "num_frames": T,
        "tracks": [{
            "track_id": "track00",
            "is_background": False,
            "points": [[float(np.float32(x)), 32.0] for x in xs],
            "visibility": [1] * T,
        }],
        "bboxes": {"track00": {"cx": 10.0, "cy": 32.0, "w": 12.0, "h": 12.0}},
        "captions": {"track00": {"text": "the red circle moving right",
                                 "subject_hint": "red circle"}},
        "references": [],
    }


def entry_doc() -> dict:
    """Valid doc whose track enters after frame 0 (supports off-screen refs)."""
    doc = base_doc()
    doc["tracks"][0]["visibility"] = [0, 0] + [1] * (doc["num_frames"] - 2)
    return doc


def make_goldens() -> list[dict]:
    cases: list[tuple[str, str]] = []

    # Valid half, first from the synthetic scene generator itself.
    mixes = [
        (3101, {"interior": 0.5, "entry": 0.5}, True),
        (3102, {"exit": 0.6, "cross": 0.4}, True),
        (3103, {"dual_entry": 1.0}, False),
        (3104, {"static": 0.5, "interior": 0.5}, False),
        (3105, None, True),
    ]
    for seed, mix, with_refs in mixes:
        clips = generate_clips(3, seed, frame_size=(64, 64), num_frames=16,
                               kind_mix=mix, with_references=with_refs)
        for j, clip in enumerate(clips):
            cases.append((f"synth_{seed}_{j}", emit_triplet(clip.triplet).decode()))

    # Handcrafted valid edge cases.
    doc = base_doc()
    cases.append(("valid_minimal", wire(doc)))

    doc = entry_doc()
    doc["references"] = [{"image_ref": "ref.png", "rotation": 0.0,
                          "target_bbox": {"cx": -40.0, "cy": 32.0, "w": 16.0, "h": 16.0}}]
    cases.append(("valid_offscreen_ref_with_entry", wire(doc)))

    doc = base_doc()
    doc["tracks"][0]["points"][-1] = [64.0, 64.0]  # closed-rect corner is on-screen
    cases.append(("valid_boundary_point", wire(doc)))

    doc = base_doc()
    doc["tracks"][0]["points"][0] = [-25.0, -30.0]
    doc["tracks"][0]["visibility"][0] = 0  # invisible points may sit anywhere
    cases.append(("valid_invisible_outside", wire(doc)))

    doc = base_doc(T=2)
    cases.append(("valid_two_frames", wire(doc)))

    doc = {
        "schema_version": "1", "frame_size": [64, 64], "num_frames": 8,
        "tracks": [{"track_id": "bg", "is_background": True,
                    "points": [[1.5, 2.5]] * 8, "visibility": [1] * 8}],
        "bboxes": {}, "captions": {}, "references": [],
    }
    cases.append(("valid_background_only", wire(doc)))

    doc = base_doc()
    doc["references"] = [
        {"image_ref": "a.png", "rotation": 37.5,
         "target_bbox": {"cx": 32.0, "cy": 32.0, "w": 20.0, "h": 10.0}},
    ]
    cases.append(("valid_rotated_ref", wire(doc)))

    doc = base_doc()
    # Decimal fractions land between float32 grid points; pins the rounding.
    doc["tracks"][0]["points"] = [[10.1 + 0.3 * t, 31.7] for t in range(8)]
    cases.append(("valid_fractional_coords", wire(doc)))

    # Pathological but legal: no tracks at all.
    doc = {"schema_version": "1", "frame_size": [32, 32], "num_frames": 4,
           "tracks": [], "bboxes": {}, "captions": {}, "references": []}
    cases.append(("valid_empty_tracks", wire(doc)))

    doc = base_doc(w=96, h=48)
    doc["captions"]["track00"]["subject_hint"] = ""
    cases.append(("valid_wide_frame", wire(doc)))

    # Invalid half: invariant violations first.
    doc = base_doc(T=1)
    cases.append(("invalid_one_frame", wire(doc)))

    doc = base_doc()
    doc["tracks"].append(dict(doc["tracks"][0]))
    cases.append(("invalid_duplicate_id", wire(doc)))

    doc = base_doc()
    doc["tracks"][0]["visibility"] = [1] * 5
    cases.append(("invalid_length_mismatch", wire(doc)))

    doc = base_doc()
    doc["tracks"][0]["points"] = doc["tracks"][0]["points"][:4]
    doc["tracks"][0]["visibility"] = [1] * 4
    cases.append(("invalid_wrong_track_length", wire(doc)))

    doc = base_doc()
    doc["tracks"][0]["points"][3] = [200.0, 32.0]
    cases.append(("invalid_visible_outside", wire(doc)))

    doc = base_doc()
    doc["tracks"][0]["is_background"] = True
    doc["captions"] = {}
    cases.append(("invalid_bg_with_bbox", wire(doc)))

    doc = base_doc()
    doc["tracks"][0]["is_background"] = True
    doc["bboxes"] = {}
    cases.append(("invalid_bg_with_caption", wire(doc)))

    doc = base_doc()
    doc["bboxes"] = {}
    cases.append(("invalid_missing_bbox", wire(doc)))

    doc = base_doc()
    doc["captions"] = {}
    cases.append(("invalid_missing_caption", wire(doc)))

    doc = base_doc()
    doc["captions"]["track00"]["text"] = ""
    cases.append(("invalid_empty_caption", wire(doc)))

    doc = base_doc()
    doc["bboxes"]["ghost"] = {"cx": 1.0, "cy": 1.0, "w": 2.0, "h": 2.0}
    cases.append(("invalid_bbox_unknown_track", wire(doc)))

    doc = base_doc()
    doc["bboxes"]["track00"]["w"] = 0.0
    cases.append(("invalid_bbox_zero_width", wire(doc)))

    doc = base_doc()
    doc["bboxes"]["track00"]["h"] = -3.0
    cases.append(("invalid_bbox_negative_height", wire(doc)))

    doc = base_doc()
    doc["captions"]["ghost"] = {"text": "a thing", "subject_hint": ""}
    cases.append(("invalid_caption_unknown_track", wire(doc)))

    doc = base_doc()
    doc["references"] = [{"image_ref": "r.png", "rotation": 0.0,
                          "target_bbox": {"cx": 5.0, "cy": 5.0, "w": 0.0, "h": 4.0}}]
    cases.append(("invalid_ref_zero_bbox", wire(doc)))

    doc = base_doc()  # all-visible track, so nothing enters later
    doc["references"] = [{"image_ref": "r.png", "rotation": 0.0,
                          "target_bbox": {"cx": -90.0, "cy": 32.0, "w": 10.0, "h": 10.0}}]
    cases.append(("invalid_offscreen_ref_no_entry", wire(doc)))

    # Structural rejections.
    cases.append(("invalid_truncated_json", wire(base_doc())[:40]))
    cases.append(("invalid_top_level_array", wire([base_doc()])))

    doc = base_doc()
    doc["schema_version"] = "2"
    cases.append(("invalid_schema_version", wire(doc)))

    doc = base_doc()
    doc["frame_size"] = [64, 64, 64]
    cases.append(("invalid_frame_size_triple", wire(doc)))

    doc = base_doc()
    doc["num_frames"] = True
    cases.append(("invalid_bool_num_frames", wire(doc)))

    doc = base_doc()
    doc["tracks"][0]["points"][2] = ["12", "32"]
    cases.append(("invalid_string_coords", wire(doc)))

    doc = base_doc()
    doc["tracks"][0]["visibility"][1] = 2
    cases.append(("invalid_visibility_two", wire(doc)))

    doc = base_doc()
    doc["captions"]["track00"]["text"] = 7
    cases.append(("invalid_numeric_caption", wire(doc)))

    doc = base_doc()
    doc["references"] = [{"image_ref": "r.png", "rotation": 0.0}]
    cases.append(("invalid_ref_missing_bbox", wire(doc)))

    goldens = []
    for name, text in cases:
        goldens.append({"name": name, "wire_text": text, "expected": verdict_of(text)})

    n_valid = sum(1 for g in goldens if g["expected"]["verdict"] == "valid")
    assert len(goldens) == 50, f"want 50 goldens, got {len(goldens)}"
    assert n_valid == 25, f"want 25 valid, got {n_valid}"
    for g in goldens:  # each intended corruption must actually trip the server
        want_valid = g["name"].startswith(("synth_", "valid_"))
        assert want_valid == (g["expected"]["verdict"] == "valid"), g["name"]
    return goldens


def make_resample_cases() -> list[dict]:
    rng = np.random.default_rng(4242)
    specs = [
        (2, 0, 15, 16, 1, 1),
        (3, 3, 12, 16, 0, 1),
        (5, 0, 7, 8, 1, 0),
        (17, 2, 14, 16, 1, 1),
        (64, 0, 63, 64, 1, 1),
        (7, 1, 10, 12, 0, 0),
        (2, 5, 6, 12, 1, 1),
        (4, 0, 24, 25, 1, 1),
        (2, 0, 1, 2, 1, 1),
        (30, 0, 24, 25, 0, 0),
    ]
    cases = []
    for n_pts, start, end, T, vb, va in specs:
        pts = rng.uniform(-20.0, 84.0, size=(n_pts, 2))
        track = resample_track([tuple(p) for p in pts], start, end, T,
                               visible_before=vb, visible_after=va)
        cases.append({
            "user_points": [[float(x), float(y)] for x, y in pts],
            "start_frame": start, "end_frame": end, "num_frames": T,
            "visible_before": vb, "visible_after": va,
            "points": [[float(x), float(y)] for x, y in track.points],
            "visibility": [int(v) for v in track.visibility],
        })
    return cases


def make_zip_case() -> dict:
    """A result archive exactly as the service writes one: stored, 1980 stamps."""
    rng = np.random.default_rng(7)
    entries = {}
    for t in range(3):
        img = Image.fromarray(rng.integers(0, 255, size=(8, 8, 3), dtype=np.uint8))
        buf = io.BytesIO()
        img.save(buf, format="PNG")
        entries[f"frames/{t:04d}.png"] = buf.getvalue()
    entries["metadata.json"] = json.dumps({"num_frames": 3}, sort_keys=True).encode()

    zbuf = io.BytesIO()
    with zipfile.ZipFile(zbuf, "w", zipfile.ZIP_STORED) as zf:
        for name, data in entries.items():
            info = zipfile.ZipInfo(name, date_time=(1980, 1, 1, 0, 0, 0))
            zf.writestr(info, data)
    return {
        "zip_b64": base64.b64encode(zbuf.getvalue()).decode(),
        "entries": {n: base64.b64encode(d).decode() for n, d in entries.items()},
    }


def main() -> None:
    OUT.mkdir(parents=True, exist_ok=True)
    (OUT / "goldens.json").write_text(json.dumps(make_goldens(), indent=1))
    (OUT / "resample.json").write_text(json.dumps(make_resample_cases(), indent=1))
    (OUT / "zipcase.json").write_text(json.dumps(make_zip_case(), indent=1))
    print(f"fixtures written to {OUT}")


if __name__ == "__main__":
    main()
