"""Corpus curation: transition (cut) detection and camera-motion screening.

Clips are dropped when they contain a hard transition or when their global
motion is mixed or unreliable; everything else is kept. Camera-motion names
follow the content displacement direction (content moving +x means pan_right,
content moving down means tilt_down), and all thresholds are diagonal-relative
so the classification survives uniform rescaling.
"""

from __future__ import annotations

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from . import frame_io
from .flow import FlowField, FlowParams, fit_global_motion, mean_magnitude
from .dynamics import pair_flows
from .quality import HIST_BINS, hist_intersection

CAMERA_MOTIONS = ("static", "pan_left", "pan_right", "tilt_up", "tilt_down",
                  "zoom_in", "zoom_out", "rotate", "mixed", "uncertain")


@dataclass
class CurationParams:
    hist_thresh: float = 0.5
    loss_thresh: float = 0.5       # fraction of interior blocks allowed to lose track
    cost_lost: float = 30.0        # per-pixel SAD above which a block is "lost"
    static_shift: float = 0.002    # |tx|,|ty| below this * diagonal => static
    static_scale: float = 0.001
    static_rot: float = 0.001
    single_shift: float = 0.004    # normalization for the dominant-category test
    single_scale: float = 0.002
    single_rot: float = 0.002
    residual_ratio: float = 0.3    # rms above this * mean magnitude => uncertain
    min_inlier_frac: float = 0.6
    max_dim: int = 512
    flow: FlowParams = field(default_factory=FlowParams)


@dataclass
class CurationVerdict:
    item_id: str
    camera_motion: str
    cuts: list[int]
    keep: bool
    reasons: list[str]

    def __post_init__(self):
        if self.camera_motion not in CAMERA_MOTIONS:
            raise ValueError(f"unknown camera motion {self.camera_motion!r}")
        expected = (not self.cuts) and self.camera_motion not in ("mixed", "uncertain")
        if self.keep != expected:
            raise ValueError("keep flag inconsistent with cuts/camera_motion")

    def to_dict(self) -> dict:
        return {"item_id": self.item_id, "camera_motion": self.camera_motion,
                "cuts": self.cuts, "keep": self.keep, "reasons": self.reasons}


def _frame_hist(luma: np.ndarray) -> np.ndarray:
    counts = np.bincount(luma.ravel() >> 3, minlength=HIST_BINS).astype(np.float64)
    return counts / luma.size


def detect_cuts_from_flows(seq: frame_io.FrameSequence, flows: list[FlowField],
                           params: CurationParams = CurationParams()) -> list[int]:
    cuts = []
    for k, f in enumerate(flows):
        h_sim = hist_intersection(
            _frame_hist(seq.frames[k].luma), _frame_hist(seq.frames[k + 1].luma))
        mask = f.interior_mask()
        lost = float((f.cost[mask] > params.cost_lost).mean())
        if h_sim < params.hist_thresh or lost > params.loss_thresh:
            cuts.append(k)
    return cuts


def detect_cuts(seq: frame_io.FrameSequence,
                params: CurationParams = CurationParams()) -> list[int]:
    """Pair indices whose luma histograms diverge or whose blocks lose track."""
    if len(seq) < 2:
        raise ValueError("need at least 2 frames")
    small = frame_io.downscale_for_flow(seq, params.max_dim)
    return detect_cuts_from_flows(small, pair_flows(small, params.flow), params)


def classify_camera_motion_from_flows(
        flows: list[FlowField], diag: float,
        params: CurationParams = CurationParams()) -> str:
    fits = [fit_global_motion(f, params.flow) for f in flows]
    if any(f.degenerate for f in fits):
        return "uncertain"

    mean_mag = float(np.mean([mean_magnitude(f) for f in flows]))
    mean_rms = float(np.mean([f.residual_rms for f in fits]))
    mean_inlier = float(np.mean([f.inlier_frac for f in fits]))
    if mean_rms > params.residual_ratio * mean_mag or mean_inlier < params.min_inlier_frac:
        return "uncertain"

    tx = float(np.mean([f.tx for f in fits]))
    ty = float(np.mean([f.ty for f in fits]))
    s = float(np.mean([f.k for f in fits])) - 1.0
    th = float(np.mean([f.theta for f in fits]))

    if (abs(tx) < params.static_shift * diag and abs(ty) < params.static_shift * diag
            and abs(s) < params.static_scale and abs(th) < params.static_rot):
        return "static"

    scored = [
        ("pan_right" if tx > 0 else "pan_left", abs(tx) / (params.single_shift * diag)),
        ("tilt_down" if ty > 0 else "tilt_up", abs(ty) / (params.single_shift * diag)),
        ("zoom_in" if s > 0 else "zoom_out", abs(s) / params.single_scale),
        ("rotate", abs(th) / params.single_rot),
    ]
    strong = [(name, mag) for name, mag in scored if mag >= 1.0]
    if not strong:
        return "uncertain"
    if len(strong) > 1:
        return "mixed"
    return strong[0][0]


def classify_camera_motion(seq: frame_io.FrameSequence,
                           params: CurationParams = CurationParams()) -> str:
    """Average per-pair similarity fits into one camera-motion label."""
    if len(seq) < 2:
        raise ValueError("need at least 2 frames")
    small = frame_io.downscale_for_flow(seq, params.max_dim)
    flows = pair_flows(small, params.flow)
    return classify_camera_motion_from_flows(flows, small.diagonal, params)


def curate_item(item_id: str, video_dir: str,
                params: CurationParams = CurationParams()) -> CurationVerdict:
    try:
        seq = frame_io.load_sequence(video_dir)
        if len(seq) < 2:
            raise frame_io.FrameIoError(f"{video_dir}: single-frame clip")
    except frame_io.FrameIoError:
        return CurationVerdict(item_id=item_id, camera_motion="uncertain",
                               cuts=[], keep=False, reasons=["io"])
    small = frame_io.downscale_for_flow(seq, params.max_dim)
    flows = pair_flows(small, params.flow)
    cuts = detect_cuts_from_flows(small, flows, params)
    if cuts:
        return CurationVerdict(item_id=item_id, camera_motion="uncertain",
                               cuts=cuts, keep=False, reasons=["transition"])
    motion = classify_camera_motion_from_flows(flows, small.diagonal, params)
    if motion == "mixed":
        return CurationVerdict(item_id=item_id, camera_motion=motion,
                               cuts=[], keep=False, reasons=["mixed_motion"])
    if motion == "uncertain":
        return CurationVerdict(item_id=item_id, camera_motion=motion,
                               cuts=[], keep=False, reasons=["uncertain_motion"])
    return CurationVerdict(item_id=item_id, camera_motion=motion,
                           cuts=[], keep=True, reasons=[])


def curate(items: list[dict], params: CurationParams = CurationParams(),
           jobs: int = 0) -> list[CurationVerdict]:
    """Verdicts for [{item_id, video_dir}, ...], sorted by item_id."""
    import os
    workers = jobs if jobs > 0 else (os.cpu_count() or 1)
    with ThreadPoolExecutor(max_workers=workers) as pool:
        verdicts = list(pool.map(
            lambda it: curate_item(it["item_id"], it["video_dir"], params), items))
    return sorted(verdicts, key=lambda v: v.item_id)


def write_manifests(verdicts: list[CurationVerdict], out_dir: str | Path) -> tuple[Path, Path]:
    """keep.json / drop.json, each a list of verdicts with a convention header."""
    out = Path(out_dir)
    out.mkdir(parents=True, exist_ok=True)
    header = {"sign_convention": "camera_motion is named for the content "
                                 "displacement direction: content moving +x => "
                                 "pan_right, content moving down => tilt_down"}
    keep_p = out / "keep.json"
    drop_p = out / "drop.json"
    keep_p.write_text(json.dumps(
        {**header, "items": [v.to_dict() for v in verdicts if v.keep]}, indent=2) + "\n")
    drop_p.write_text(json.dumps(
        {**header, "items": [v.to_dict() for v in verdicts if not v.keep]}, indent=2) + "\n")
    return keep_p, drop_p
