"""Per-video dynamic score: normalized motion magnitude mapped into [0, 1]."""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .flow import FlowField, FlowParams, estimate_flow, fit_global_motion, block_centers
from .frame_io import FrameSequence

# A clip moving d_ref of its diagonal per frame pair saturates the score.
D_REF_DEFAULT = 0.02


@dataclass
class DynamicsProfile:
    """Motion summary for one video."""

    per_pair_motion: list[float]  # fraction of frame diagonal per pair
    raw_mean: float
    score: float
    subject_only: bool = False

    def __post_init__(self):
        if not 0.0 <= self.score <= 1.0:
            raise ValueError(f"score {self.score} outside [0, 1]")

    def to_dict(self, item_id: str = "") -> dict:
        return {
            "item_id": item_id,
            "score": self.score,
            "raw_mean": self.raw_mean,
            "per_pair_motion": self.per_pair_motion,
            "subject_only": self.subject_only,
        }


def pair_flows(seq: FrameSequence, params: FlowParams = FlowParams()) -> list[FlowField]:
    """Flow for every consecutive frame pair, in order."""
    if len(seq) < 2:
        raise ValueError("need at least 2 frames")
    return [estimate_flow(seq.frames[k], seq.frames[k + 1], params)
            for k in range(len(seq) - 1)]


def _pair_motion(f: FlowField, diag: float, subject_only: bool) -> float:
    mask = f.interior_mask()
    if subject_only:
        fit = fit_global_motion(f)
        x, y = block_centers(f)
        pu, pv = fit.predict(x, y)
        mags = np.hypot(f.u.ravel() - pu, f.v.ravel() - pv).reshape(f.u.shape)
    else:
        mags = f.magnitudes()
    return float(mags[mask].mean()) / diag


def dynamic_score_from_flows(
    flows: list[FlowField],
    diag: float,
    d_ref: float = D_REF_DEFAULT,
    subject_only: bool = False,
) -> DynamicsProfile:
    per_pair = [_pair_motion(f, diag, subject_only) for f in flows]
    raw_mean = float(np.mean(per_pair))
    score = float(np.clip(raw_mean / d_ref, 0.0, 1.0))
    return DynamicsProfile(per_pair_motion=per_pair, raw_mean=raw_mean,
                           score=score, subject_only=subject_only)


def dynamic_score(
    seq: FrameSequence,
    d_ref: float = D_REF_DEFAULT,
    subject_only: bool = False,
    flow_params: FlowParams = FlowParams(),
) -> DynamicsProfile:
    """Score a sequence already at analysis resolution.

    Motion per pair is the mean interior-block displacement as a fraction of
    the frame diagonal; the score is that mean divided by d_ref, clamped.
    """
    flows = pair_flows(seq, flow_params)
    return dynamic_score_from_flows(flows, seq.diagonal, d_ref, subject_only)


def is_static(profile: DynamicsProfile, eps: float = 1e-4) -> bool:
    return profile.raw_mean < eps
