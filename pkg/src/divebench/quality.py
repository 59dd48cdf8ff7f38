"""Dynamics-based quality: MS/BC/SC/Nat sub-metrics and their composition.

All four sub-metrics are declared proxies built on block flow; the load-bearing
property is that overall quality is gated multiplicatively by the dynamic
score, so a static clip scores exactly zero no matter how clean it looks.
"""

from __future__ import annotations

import warnings
from dataclasses import dataclass, field
from typing import Callable

import numpy as np

from .dynamics import DynamicsProfile
from .flow import FlowField, warp_residual
from .frame_io import FrameSequence

A_REF_DEFAULT = 0.01   # diagonal fraction of accel per pair that zeroes MS
R_REF_DEFAULT = 0.1    # fraction of full luma range that zeroes Nat
HIST_BINS = 32


@dataclass
class QualityProfile:
    ms: float
    bc: float
    sc: float
    nat: float
    q: float              # 0..100
    dbq_contrib: float    # score-gated quality, 0..100
    nat_source: str = "proxy"
    flags: list[str] = field(default_factory=list)

    def to_dict(self) -> dict:
        return {
            "ms": self.ms, "bc": self.bc, "sc": self.sc, "nat": self.nat,
            "q": self.q, "dbq_contrib": self.dbq_contrib,
            "nat_source": self.nat_source, "flags": self.flags,
        }


def motion_smoothness(flows: list[FlowField], diag: float,
                      a_ref: float = A_REF_DEFAULT) -> tuple[float, bool]:
    """1 minus normalized mean acceleration of interior blocks.

    Returns (ms, flagged); with fewer than two fields there is no acceleration
    evidence, so ms = 1 with the flag set.
    """
    if len(flows) < 2:
        return 1.0, True
    mask = flows[0].interior_mask()
    accels = []
    for k in range(len(flows) - 1):
        du = flows[k + 1].u - flows[k].u
        dv = flows[k + 1].v - flows[k].v
        accels.append(float(np.hypot(du, dv)[mask].mean()) / diag)
    ms = 1.0 - float(np.clip(np.mean(accels) / a_ref, 0.0, 1.0))
    return ms, False


def _block_hist(luma: np.ndarray) -> np.ndarray:
    counts = np.bincount((luma.ravel() >> 3), minlength=HIST_BINS).astype(np.float64)
    return counts / luma.size


def hist_intersection(h1: np.ndarray, h2: np.ndarray) -> float:
    return float(np.minimum(h1, h2).sum())


def region_consistency(seq: FrameSequence, flows: list[FlowField],
                       region: str) -> float:
    """Histogram stability of the least-moving (background) or most-moving
    (subject) quartile of interior blocks.

    Background blocks are compared at the same location in the next frame;
    subject blocks are compared at their flow-displaced location.
    """
    if region not in ("background", "subject"):
        raise ValueError(f"region must be background|subject, got {region!r}")
    f0 = flows[0]
    mask = f0.interior_mask()
    idx = np.argwhere(mask)
    if idx.shape[0] < 4:
        raise ValueError(f"grid {f0.grid_h}x{f0.grid_w} has fewer than 4 "
                         "interior blocks")

    avg_mag = np.mean([f.magnitudes() for f in flows], axis=0)
    mags = avg_mag[mask.nonzero()]
    order = np.argsort(mags, kind="stable")
    quart = max(1, idx.shape[0] // 4)
    chosen = idx[order[:quart]] if region == "background" else idx[order[-quart:]]

    bs = f0.block
    h, w = seq.height, seq.width
    sims = []
    for k, f in enumerate(flows):
        la = seq.frames[k].luma
        lb = seq.frames[k + 1].luma
        for i, j in chosen:
            y0, x0 = i * bs, j * bs
            if region == "background":
                yb, xb = y0, x0
            else:
                yb = int(np.clip(y0 + round(f.v[i, j]), 0, h - bs))
                xb = int(np.clip(x0 + round(f.u[i, j]), 0, w - bs))
            sims.append(hist_intersection(
                _block_hist(la[y0:y0 + bs, x0:x0 + bs]),
                _block_hist(lb[yb:yb + bs, xb:xb + bs]),
            ))
    return float(np.mean(sims))


NaturalnessScorer = Callable[[FrameSequence], float]


def naturalness(seq: FrameSequence, flows: list[FlowField],
                scorer: NaturalnessScorer | None = None,
                r_ref: float = R_REF_DEFAULT) -> tuple[float, str]:
    """Motion-compensated residual proxy, or an external [0, 1] verdict.

    External scorer failures fall back to the proxy with a warning; the
    second element names the source actually used.
    """
    if scorer is not None:
        try:
            verdict = float(scorer(seq))
            if not 0.0 <= verdict <= 1.0:
                raise ValueError(f"external naturalness verdict {verdict} "
                                 "outside [0, 1]")
            return verdict, "external"
        except Exception as exc:  # scorer is arbitrary third-party code
            warnings.warn(f"external naturalness scorer failed ({exc}); "
                          "using residual proxy")
    residuals = [warp_residual(seq.frames[k], seq.frames[k + 1], f, interior_only=True)
                 for k, f in enumerate(flows)]
    nat = 1.0 - float(np.clip((np.mean(residuals) / 255.0) / r_ref, 0.0, 1.0))
    return nat, "proxy"


def quality_profile(
    seq: FrameSequence,
    flows: list[FlowField] | None,
    dyn: DynamicsProfile,
    a_ref: float = A_REF_DEFAULT,
    r_ref: float = R_REF_DEFAULT,
    gamma: float = 1.0,
    scorer: NaturalnessScorer | None = None,
) -> QualityProfile:
    if flows is None:
        from .dynamics import pair_flows
        flows = pair_flows(seq)
    ms, ms_flagged = motion_smoothness(flows, seq.diagonal, a_ref)
    bc = region_consistency(seq, flows, "background")
    sc = region_consistency(seq, flows, "subject")
    nat, nat_source = naturalness(seq, flows, scorer, r_ref)
    q = 100.0 * float(np.mean([ms, bc, sc, nat]))
    flags = ["ms_no_accel_evidence"] if ms_flagged else []
    return QualityProfile(
        ms=ms, bc=bc, sc=sc, nat=nat, q=q,
        dbq_contrib=(dyn.score ** gamma) * q,
        nat_source=nat_source, flags=flags,
    )
