"""Pyramidal block-matching optical flow and robust global-motion fitting.

Flow is estimated with exhaustive SAD block matching on a factor-2 luma
pyramid: full search at the coarsest level, then the displacement is doubled
and refined with a small search at each finer level. Everything is integer
and deterministic: SAD ties are broken by smallest ``|u|+|v|``, then smallest
``u``, then smallest ``v``, so identical inputs always produce bit-identical
fields. Sub-pixel accuracy is explicitly not a goal; block-level statistics
are all the downstream metrics need.
"""

from __future__ import annotations

import json
import math
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np

from .frame_io import Frame

# Tie-break packing bound: |u|,|v| never exceed this at any pyramid level.
_U0 = 1 << 14


@dataclass(frozen=True)
class FlowParams:
    block: int = 16
    levels: int = 3
    search_coarse: int = 4
    search_refine: int = 2
    # Global-motion trimming: drop residual > max(trim_ratio*median, trim_floor).
    trim_ratio: float = 2.0
    trim_floor: float = 0.5
    trim_passes: int = 2


@dataclass
class FlowField:
    """Per-block displacement grid for one frame pair."""

    grid_w: int
    grid_h: int
    block: int
    frame_w: int
    frame_h: int
    u: np.ndarray  # (grid_h, grid_w) float64, pixels at analysis resolution
    v: np.ndarray
    cost: np.ndarray  # mean SAD per pixel, [0, 255]

    def __post_init__(self):
        for name in ("u", "v", "cost"):
            arr = getattr(self, name)
            if arr.shape != (self.grid_h, self.grid_w):
                raise ValueError(f"{name} has shape {arr.shape}, expected "
                                 f"({self.grid_h}, {self.grid_w})")

    def interior_mask(self) -> np.ndarray:
        """True for blocks not on the outermost ring (all True on tiny grids)."""
        m = np.zeros((self.grid_h, self.grid_w), dtype=bool)
        if self.grid_h > 2 and self.grid_w > 2:
            m[1:-1, 1:-1] = True
        else:
            m[:] = True
        return m

    def magnitudes(self) -> np.ndarray:
        return np.hypot(self.u, self.v)


@dataclass
class GlobalMotion:
    """4-parameter similarity fit of a flow field (camera-motion proxy)."""

    tx: float
    ty: float
    k: float  # isotropic scale, 1 = none
    theta: float  # radians
    residual_rms: float
    inlier_frac: float
    degenerate: bool = False

    def predict(self, x: np.ndarray, y: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Predicted (du, dv) at frame-centered block coordinates."""
        s = self.k - 1.0
        return (self.tx + s * x - self.theta * y,
                self.ty + self.theta * x + s * y)


def _downsample2(img: np.ndarray) -> np.ndarray:
    h2, w2 = img.shape[0] // 2, img.shape[1] // 2
    v = img[: h2 * 2, : w2 * 2]
    return 0.25 * (v[0::2, 0::2] + v[1::2, 0::2] + v[0::2, 1::2] + v[1::2, 1::2])


def _effective_levels(w: int, h: int, params: FlowParams) -> int:
    floor_dim = max(32, params.block)
    levels = 1
    while (levels < params.levels
           and min(w, h) // (2 ** levels) >= floor_dim):
        levels += 1
    return levels


def _search_level(
    a: np.ndarray,
    b: np.ndarray,
    block: int,
    init_u: np.ndarray,
    init_v: np.ndarray,
    radius: int,
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """Exhaustive SAD search of +-radius around per-block init vectors.

    Returns integer (u, v) and the winning SAD sum per block. b is sampled
    with replicated edges so every candidate displacement is defined.
    """
    gh, gw = init_u.shape
    pad = int(max(np.abs(init_u).max(), np.abs(init_v).max())) + radius
    bp = np.pad(b, pad, mode="edge") if pad > 0 else b

    a_blocks = (a[: gh * block, : gw * block]
                .reshape(gh, block, gw, block).transpose(0, 2, 1, 3))
    ys = (np.arange(gh) * block)[:, None]
    xs = (np.arange(gw) * block)[None, :]
    off = np.arange(block)
    y_base = ys + init_v + pad
    x_base = xs + init_u + pad

    best_sad = np.full((gh, gw), np.inf)
    best_tie = np.full((gh, gw), np.iinfo(np.int64).max, dtype=np.int64)
    best_u = np.zeros((gh, gw), dtype=np.int64)
    best_v = np.zeros((gh, gw), dtype=np.int64)
    for cv in range(-radius, radius + 1):
        y_idx = (y_base + cv)[:, :, None, None] + off[None, None, :, None]
        for cu in range(-radius, radius + 1):
            x_idx = (x_base + cu)[:, :, None, None] + off[None, None, None, :]
            sad = np.abs(a_blocks - bp[y_idx, x_idx]).sum(axis=(2, 3))
            uu = init_u + cu
            vv = init_v + cv
            tie = ((np.abs(uu) + np.abs(vv)).astype(np.int64) * (2 * _U0 + 1) ** 2
                   + (uu + _U0) * (2 * _U0 + 1) + (vv + _U0))
            better = (sad < best_sad) | ((sad == best_sad) & (tie < best_tie))
            best_sad = np.where(better, sad, best_sad)
            best_tie = np.where(better, tie, best_tie)
            best_u = np.where(better, uu, best_u)
            best_v = np.where(better, vv, best_v)
    return best_u, best_v, best_sad


def estimate_flow(a: Frame, b: Frame, params: FlowParams = FlowParams()) -> FlowField:
    """Coarse-to-fine block flow from frame a to frame b."""
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError(f"frame dimensions differ: {a.width}x{a.height} "
                         f"vs {b.width}x{b.height}")
    if min(a.width, a.height) < params.block:
        raise ValueError(f"frame {a.width}x{a.height} smaller than one "
                         f"{params.block}px block")

    pyr_a = [a.luma.astype(np.float64)]
    pyr_b = [b.luma.astype(np.float64)]
    for _ in range(_effective_levels(a.width, a.height, params) - 1):
        pyr_a.append(_downsample2(pyr_a[-1]))
        pyr_b.append(_downsample2(pyr_b[-1]))

    u = v = sad = None
    prev_shape: tuple[int, int] | None = None
    for level in reversed(range(len(pyr_a))):
        la, lb = pyr_a[level], pyr_b[level]
        gh, gw = la.shape[0] // params.block, la.shape[1] // params.block
        if u is None:
            init_u = np.zeros((gh, gw), dtype=np.int64)
            init_v = np.zeros((gh, gw), dtype=np.int64)
            radius = params.search_coarse
        else:
            iy = np.minimum(np.arange(gh) // 2, prev_shape[0] - 1)
            ix = np.minimum(np.arange(gw) // 2, prev_shape[1] - 1)
            init_u = 2 * u[np.ix_(iy, ix)]
            init_v = 2 * v[np.ix_(iy, ix)]
            radius = params.search_refine
        u, v, sad = _search_level(la, lb, params.block, init_u, init_v, radius)
        prev_shape = (gh, gw)

    return FlowField(
        grid_w=u.shape[1], grid_h=u.shape[0], block=params.block,
        frame_w=a.width, frame_h=a.height,
        u=u.astype(np.float64), v=v.astype(np.float64),
        cost=sad / float(params.block ** 2),
    )


def mean_magnitude(f: FlowField, interior_only: bool = False) -> float:
    """Mean per-block displacement magnitude in pixels."""
    mags = f.magnitudes()
    if interior_only:
        mags = mags[f.interior_mask()]
    return float(mags.mean())


def warp_residual(a: Frame, b: Frame, f: FlowField, interior_only: bool = False) -> float:
    """Mean absolute luma difference after displacing each block by its flow.

    Displaced block positions are clamped to the frame, so the residual is
    defined for any field; exact integer translation with correct flow gives
    zero on interior blocks.
    """
    if (a.width, a.height) != (b.width, b.height):
        raise ValueError("frame dimensions differ")
    la = a.luma.astype(np.float64)
    lb = b.luma.astype(np.float64)
    bs = f.block
    mask = f.interior_mask() if interior_only else np.ones((f.grid_h, f.grid_w), bool)
    total = 0.0
    count = 0
    for i in range(f.grid_h):
        for j in range(f.grid_w):
            if not mask[i, j]:
                continue
            y0, x0 = i * bs, j * bs
            yb = int(np.clip(y0 + round(f.v[i, j]), 0, a.height - bs))
            xb = int(np.clip(x0 + round(f.u[i, j]), 0, a.width - bs))
            diff = np.abs(la[y0:y0 + bs, x0:x0 + bs] - lb[yb:yb + bs, xb:xb + bs])
            total += diff.mean()
            count += 1
    return total / count


def block_centers(f: FlowField) -> tuple[np.ndarray, np.ndarray]:
    """Frame-centered (x, y) coordinates of every block center."""
    xs = (np.arange(f.grid_w) + 0.5) * f.block - f.frame_w / 2.0
    ys = (np.arange(f.grid_h) + 0.5) * f.block - f.frame_h / 2.0
    gx, gy = np.meshgrid(xs, ys)
    return gx.ravel(), gy.ravel()


def _solve_similarity(x, y, du, dv):
    n = x.size
    rows = np.zeros((2 * n, 4))
    rows[0::2, 0] = 1.0
    rows[0::2, 2] = x
    rows[0::2, 3] = -y
    rows[1::2, 1] = 1.0
    rows[1::2, 2] = y
    rows[1::2, 3] = x
    rhs = np.empty(2 * n)
    rhs[0::2] = du
    rhs[1::2] = dv
    sol, _, rank, _ = np.linalg.lstsq(rows, rhs, rcond=None)
    return sol, rank


def fit_global_motion(f: FlowField, params: FlowParams = FlowParams()) -> GlobalMotion:
    """Trimmed least-squares similarity fit over block displacements.

    The displacement model is du = tx + (k-1)x - theta*y,
    dv = ty + theta*x + (k-1)y at frame-centered block coordinates. After each
    solve, blocks with residual above max(trim_ratio * median, trim_floor) are
    dropped and the fit repeated; rms and inlier fraction are reported over
    the original block set. Degenerate systems are flagged, not raised.
    """
    x, y = block_centers(f)
    du, dv = f.u.ravel(), f.v.ravel()
    n = x.size
    if n < 8:
        raise ValueError(f"need >= 8 blocks to fit global motion, got {n}")

    keep = np.ones(n, dtype=bool)
    sol = None
    degenerate = False
    for pass_idx in range(params.trim_passes + 1):
        sol, rank = _solve_similarity(x[keep], y[keep], du[keep], dv[keep])
        if rank < 4:
            degenerate = True
            break
        if pass_idx == params.trim_passes:
            break
        pu = sol[0] + sol[2] * x - sol[3] * y
        pv = sol[1] + sol[3] * x + sol[2] * y
        res = np.hypot(pu - du, pv - dv)
        thresh = max(params.trim_ratio * float(np.median(res[keep])), params.trim_floor)
        new_keep = res <= thresh
        if new_keep.sum() < 4:
            degenerate = True
            break
        keep = new_keep

    tx, ty, s, theta = (float(c) for c in sol)
    pu = sol[0] + sol[2] * x - sol[3] * y
    pv = sol[1] + sol[3] * x + sol[2] * y
    res_all = np.hypot(pu - du, pv - dv)
    return GlobalMotion(
        tx=tx, ty=ty, k=1.0 + s, theta=theta,
        residual_rms=float(np.sqrt(np.mean(res_all ** 2))),
        inlier_frac=float(keep.sum()) / n,
        degenerate=degenerate,
    )


def flow_to_dict(f: FlowField) -> dict:
    """JSON-ready dump with flat row-major arrays (debug interface)."""
    return {
        "grid_w": f.grid_w,
        "grid_h": f.grid_h,
        "block": f.block,
        "frame_w": f.frame_w,
        "frame_h": f.frame_h,
        "u": f.u.ravel().tolist(),
        "v": f.v.ravel().tolist(),
        "cost": f.cost.ravel().tolist(),
    }


def dump_flows(flows: list[FlowField], directory: str | Path) -> None:
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for k, f in enumerate(flows):
        (d / f"flow_{k:04d}.json").write_text(json.dumps(flow_to_dict(f)))
