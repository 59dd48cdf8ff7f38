"""Frame-sequence loading, writing, and synthetic clip generation.

This is the only module that touches pixel files. Sequences live on disk as
numbered image files (``frame_00000.png`` / ``.ppm``) plus an optional
``meta.json`` carrying ``{width, height, fps, count}``. Container formats are
deliberately unsupported: image directories keep the toolkit free of codec
dependencies and make every fixture byte-reproducible.
"""

from __future__ import annotations

import json
import math
import re
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
from PIL import Image
from scipy.ndimage import uniform_filter

DEFAULT_FPS = 8.0

_FRAME_RE = re.compile(r"^frame_(\d+)\.(png|ppm)$")

# Rec.601 luma weights; fixed so golden files stay bit-stable.
_LUMA_W = (0.299, 0.587, 0.114)


class FrameIoError(Exception):
    """Base class for sequence I/O failures."""


class MissingDirectoryError(FrameIoError):
    pass


class NoFramesError(FrameIoError):
    pass


class DimensionMismatchError(FrameIoError):
    def __init__(self, path: str, expected: tuple[int, int], got: tuple[int, int]):
        self.path = str(path)
        super().__init__(
            f"{path}: frame is {got[0]}x{got[1]}, expected {expected[0]}x{expected[1]}"
        )


class ShapeExitsFrameError(FrameIoError):
    pass


def derive_luma(rgb: np.ndarray) -> np.ndarray:
    """8-bit luma from (h, w, 3) uint8 RGB, round-half-up then clamped."""
    r, g, b = (rgb[..., i].astype(np.float64) for i in range(3))
    y = _LUMA_W[0] * r + _LUMA_W[1] * g + _LUMA_W[2] * b
    return np.clip(np.floor(y + 0.5), 0, 255).astype(np.uint8)


@dataclass
class Frame:
    """One decoded frame: uint8 RGB plus derived luma."""

    rgb: np.ndarray
    luma: np.ndarray = field(default=None, repr=False)  # type: ignore[assignment]

    def __post_init__(self):
        self.rgb = np.ascontiguousarray(self.rgb, dtype=np.uint8)
        if self.rgb.ndim != 3 or self.rgb.shape[2] != 3:
            raise ValueError(f"rgb must be (h, w, 3), got {self.rgb.shape}")
        if self.luma is None:
            self.luma = derive_luma(self.rgb)

    @property
    def width(self) -> int:
        return self.rgb.shape[1]

    @property
    def height(self) -> int:
        return self.rgb.shape[0]

    @classmethod
    def from_gray(cls, gray: np.ndarray) -> "Frame":
        g = np.ascontiguousarray(gray, dtype=np.uint8)
        return cls(rgb=np.repeat(g[:, :, None], 3, axis=2))

    @classmethod
    def solid(cls, width: int, height: int, value: int) -> "Frame":
        return cls.from_gray(np.full((height, width), value, dtype=np.uint8))


@dataclass
class FrameSequence:
    """Ordered frames sharing one geometry, with fps and provenance."""

    frames: list[Frame]
    fps: float = DEFAULT_FPS
    source: str = ""
    item_id: str = ""

    def __post_init__(self):
        if not self.frames:
            raise NoFramesError(f"sequence {self.source or self.item_id!r} has no frames")
        if self.fps <= 0:
            raise ValueError(f"fps must be > 0, got {self.fps}")
        w, h = self.frames[0].width, self.frames[0].height
        for i, f in enumerate(self.frames):
            if (f.width, f.height) != (w, h):
                raise DimensionMismatchError(f"frame[{i}]", (w, h), (f.width, f.height))

    def __len__(self) -> int:
        return len(self.frames)

    def __iter__(self):
        return iter(self.frames)

    @property
    def width(self) -> int:
        return self.frames[0].width

    @property
    def height(self) -> int:
        return self.frames[0].height

    @property
    def diagonal(self) -> float:
        return math.hypot(self.width, self.height)


# ---------------------------------------------------------------------------
# Disk I/O


def _read_ppm(path: Path) -> np.ndarray:
    data = path.read_bytes()
    # Binary P6 with single-whitespace separated header tokens.
    m = re.match(rb"P6\s+(\d+)\s+(\d+)\s+(\d+)\s", data)
    if not m:
        raise FrameIoError(f"{path}: not a binary P6 PPM")
    w, h, maxval = (int(m.group(i)) for i in (1, 2, 3))
    if maxval != 255:
        raise FrameIoError(f"{path}: unsupported maxval {maxval}")
    pixels = np.frombuffer(data, dtype=np.uint8, count=w * h * 3, offset=m.end())
    if pixels.size != w * h * 3:
        raise FrameIoError(f"{path}: truncated pixel data")
    return pixels.reshape(h, w, 3).copy()


def _write_ppm(path: Path, rgb: np.ndarray) -> None:
    h, w = rgb.shape[:2]
    with open(path, "wb") as fh:
        fh.write(f"P6\n{w} {h}\n255\n".encode("ascii"))
        fh.write(np.ascontiguousarray(rgb, dtype=np.uint8).tobytes())


def _read_image(path: Path) -> np.ndarray:
    if path.suffix == ".ppm":
        return _read_ppm(path)
    with Image.open(path) as im:
        return np.asarray(im.convert("RGB"), dtype=np.uint8).copy()


def load_image(path: str | Path) -> Frame:
    p = Path(path)
    if not p.is_file():
        raise MissingDirectoryError(f"image file not found: {p}")
    return Frame(rgb=_read_image(p))


def load_sequence(directory: str | Path) -> FrameSequence:
    """Load ``frame_%05d.png|ppm`` files from a directory, sorted by index.

    fps comes from ``meta.json`` when present, else 8.
    """
    d = Path(directory)
    if not d.is_dir():
        raise MissingDirectoryError(f"sequence directory not found: {d}")

    indexed: list[tuple[int, Path]] = []
    for p in d.iterdir():
        m = _FRAME_RE.match(p.name)
        if m:
            indexed.append((int(m.group(1)), p))
    indexed.sort()
    if not indexed:
        raise NoFramesError(f"no decodable frame_*.png/.ppm files in {d}")

    fps = DEFAULT_FPS
    meta_path = d / "meta.json"
    if meta_path.is_file():
        try:
            meta = json.loads(meta_path.read_text())
        except json.JSONDecodeError as exc:
            raise FrameIoError(f"{meta_path}: invalid JSON ({exc})") from exc
        if "fps" in meta:
            fps = float(meta["fps"])

    frames: list[Frame] = []
    dims: tuple[int, int] | None = None
    for _, p in indexed:
        rgb = _read_image(p)
        if dims is None:
            dims = (rgb.shape[1], rgb.shape[0])
        elif (rgb.shape[1], rgb.shape[0]) != dims:
            raise DimensionMismatchError(p, dims, (rgb.shape[1], rgb.shape[0]))
        frames.append(Frame(rgb=rgb))

    return FrameSequence(frames=frames, fps=fps, source=str(d), item_id=d.name)


def write_sequence(seq: FrameSequence, directory: str | Path, fmt: str = "png") -> Path:
    """Write a sequence as ``frame_%05d.<fmt>`` plus meta.json."""
    if fmt not in ("png", "ppm"):
        raise ValueError(f"unsupported format {fmt!r}")
    d = Path(directory)
    d.mkdir(parents=True, exist_ok=True)
    for i, frame in enumerate(seq.frames):
        path = d / f"frame_{i:05d}.{fmt}"
        if fmt == "ppm":
            _write_ppm(path, frame.rgb)
        else:
            Image.fromarray(frame.rgb).save(path)
    meta = {
        "width": seq.width,
        "height": seq.height,
        "fps": seq.fps,
        "count": len(seq),
    }
    (d / "meta.json").write_text(json.dumps(meta, indent=2) + "\n")
    return d


# ---------------------------------------------------------------------------
# Downscaling


def downscale_for_flow(seq: FrameSequence, max_dim: int = 512) -> FrameSequence:
    """Integer-factor box downscale so max(width, height) <= max_dim.

    Returns the input unchanged when already small enough; flow analysis runs
    on the reduced resolution for speed.
    """
    if max_dim < 32:
        raise ValueError(f"max_dim must be >= 32, got {max_dim}")
    side = max(seq.width, seq.height)
    if side <= max_dim:
        return seq
    factor = math.ceil(side / max_dim)
    frames = []
    for f in seq.frames:
        h2, w2 = f.height // factor, f.width // factor
        v = f.rgb[: h2 * factor, : w2 * factor].astype(np.float64)
        v = v.reshape(h2, factor, w2, factor, 3).mean(axis=(1, 3))
        frames.append(Frame(rgb=np.clip(np.floor(v + 0.5), 0, 255).astype(np.uint8)))
    return FrameSequence(frames=frames, fps=seq.fps, source=seq.source, item_id=seq.item_id)


# ---------------------------------------------------------------------------
# Synthetic clips


def synthesize_static(frame: Frame, n: int = 49, fps: float = DEFAULT_FPS) -> FrameSequence:
    """Duplicate one frame n times: the canonical zero-motion clip."""
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    return FrameSequence(frames=[frame] * n, fps=fps, source="static", item_id="static")


@dataclass(frozen=True)
class Translate:
    dx: int
    dy: int


@dataclass(frozen=True)
class Zoom:
    factor: float


@dataclass(frozen=True)
class Rotate:
    angle: float  # radians per frame


@dataclass(frozen=True)
class CutAt:
    index: int  # first frame of the second sub-clip
    frame_a: Frame
    frame_b: Frame


Motion = Translate | Zoom | Rotate | CutAt


def texture(rng: np.random.Generator, height: int, width: int) -> np.ndarray:
    """Seeded non-repeating gray texture with both coarse and fine structure.

    The smoothed field is rank-normalized to a uniform marginal so two
    independent textures differ strongly (mean |diff| near 85), which keeps
    block matching discriminative at every pyramid level.
    """
    coarse = uniform_filter(rng.uniform(0.0, 255.0, (height, width)), size=5, mode="nearest")
    ranks = np.empty(coarse.size, dtype=np.float64)
    ranks[np.argsort(coarse, axis=None, kind="stable")] = np.arange(coarse.size)
    coarse = (ranks / max(coarse.size - 1, 1) * 255.0).reshape(height, width)
    fine = rng.uniform(-20.0, 20.0, (height, width))
    return np.clip(np.floor(0.9 * coarse + fine + 0.5), 0, 255).astype(np.uint8)


def _noise_square(rng: np.random.Generator, side: int) -> np.ndarray:
    return (rng.integers(0, 2, (side, side)) * 255).astype(np.uint8)


def synthesize_warp(
    width: int,
    height: int,
    n: int,
    *,
    dx: float = 0.0,
    dy: float = 0.0,
    scale: float = 1.0,
    angle: float = 0.0,
    seed: int = 0,
    fps: float = DEFAULT_FPS,
    square_side: int | None = None,
) -> FrameSequence:
    """Clip whose frame j is the base image advanced by j similarity steps.

    One step moves content by (dx, dy), scales by ``scale`` and rotates by
    ``angle`` about the frame center, sampled nearest-neighbor with edge
    clamping. A high-contrast noise square is stamped on the base so block
    matching always has unambiguous structure; for pure translation the
    square's path must stay inside the frame.
    """
    if n < 1:
        raise ValueError(f"n must be >= 1, got {n}")
    rng = np.random.default_rng(seed)
    base = texture(rng, height, width)

    side = square_side if square_side is not None else min(width, height) // 3
    cx, cy = (width - 1) / 2.0, (height - 1) / 2.0
    travel_x, travel_y = (n - 1) * dx, (n - 1) * dy
    # Start the square offset against the motion so it traverses the center.
    sx = int(round(cx - travel_x / 2.0 - side / 2.0))
    sy = int(round(cy - travel_y / 2.0 - side / 2.0))
    if side > 0:
        if sx < 0 or sy < 0 or sx + side > width or sy + side > height:
            raise ShapeExitsFrameError(
                f"square (side {side}) cannot start inside a {width}x{height} frame"
            )
        base[sy : sy + side, sx : sx + side] = _noise_square(rng, side)

    # Inverse one-step map: p -> center + R(-angle) * (p - center - d) / scale
    cosr, sinr = math.cos(-angle), math.sin(-angle)
    inv_lin = np.array([[cosr, -sinr], [sinr, cosr]]) / scale
    yy, xx = np.mgrid[0:height, 0:width]
    pts = np.stack([xx.ravel() - cx, yy.ravel() - cy])  # frame-centered (x, y)

    frames = []
    src = pts.copy()
    corners = np.array(
        [[sx - cx, sy - cy], [sx + side - 1 - cx, sy - cy],
         [sx - cx, sy + side - 1 - cy], [sx + side - 1 - cx, sy + side - 1 - cy]],
        dtype=np.float64,
    ).T
    fwd_lin = np.array([[math.cos(angle), -math.sin(angle)],
                        [math.sin(angle), math.cos(angle)]]) * scale
    fwd_corners = corners.copy()
    for j in range(n):
        if j > 0:
            src = inv_lin @ (src - np.array([[dx], [dy]]))
            fwd_corners = fwd_lin @ fwd_corners + np.array([[dx], [dy]])
        if side > 0 and (dx or dy) and scale == 1.0 and angle == 0.0:
            fx, fy = fwd_corners[0] + cx, fwd_corners[1] + cy
            if fx.min() < 0 or fy.min() < 0 or fx.max() >= width or fy.max() >= height:
                raise ShapeExitsFrameError(
                    f"square leaves the {width}x{height} frame at step {j}"
                )
        ix = np.clip(np.floor(src[0] + cx + 0.5), 0, width - 1).astype(np.intp)
        iy = np.clip(np.floor(src[1] + cy + 0.5), 0, height - 1).astype(np.intp)
        frames.append(Frame.from_gray(base[iy, ix].reshape(height, width)))
    return FrameSequence(frames=frames, fps=fps, source="warp", item_id="warp")


def synthesize_moving(
    width: int,
    height: int,
    n: int,
    motion: Motion,
    *,
    seed: int = 0,
    fps: float = DEFAULT_FPS,
    square_side: int | None = None,
) -> FrameSequence:
    """Deterministic motion fixture: translation, zoom, rotation, or a hard cut."""
    if isinstance(motion, Translate):
        return synthesize_warp(
            width, height, n, dx=motion.dx, dy=motion.dy, seed=seed, fps=fps,
            square_side=square_side,
        )
    if isinstance(motion, Zoom):
        return synthesize_warp(
            width, height, n, scale=motion.factor, seed=seed, fps=fps,
            square_side=square_side,
        )
    if isinstance(motion, Rotate):
        return synthesize_warp(
            width, height, n, angle=motion.angle, seed=seed, fps=fps,
            square_side=square_side,
        )
    if isinstance(motion, CutAt):
        if not 0 < motion.index < n:
            raise ValueError(f"cut index {motion.index} outside (0, {n})")
        frames = [motion.frame_a] * motion.index + [motion.frame_b] * (n - motion.index)
        return FrameSequence(frames=frames, fps=fps, source="cut", item_id="cut")
    raise TypeError(f"unknown motion spec: {motion!r}")
