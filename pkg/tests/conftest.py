from __future__ import annotations

import numpy as np
import pytest

from divebench import frame_io as fio


def textured_frame(seed: int, width: int = 64, height: int = 64) -> fio.Frame:
    return fio.Frame.from_gray(fio.texture(np.random.default_rng(seed), height, width))


def square_over_static(width: int, height: int, n: int, dx: int, dy: int = 0,
                       side: int = 32, seed: int = 0) -> fio.FrameSequence:
    """Moving high-contrast square over a static textured background."""
    rng = np.random.default_rng(seed)
    background = fio.texture(rng, height, width)
    patch = (rng.integers(0, 2, (side, side)) * 255).astype(np.uint8)
    x0 = (width - side) // 2 - (n - 1) * dx // 2
    y0 = (height - side) // 2 - (n - 1) * dy // 2
    frames = []
    for k in range(n):
        img = background.copy()
        x, y = x0 + k * dx, y0 + k * dy
        assert 0 <= x and x + side <= width and 0 <= y and y + side <= height
        img[y:y + side, x:x + side] = patch
        frames.append(fio.Frame.from_gray(img))
    return fio.FrameSequence(frames=frames, fps=8.0, source="square", item_id="square")


def noise_subject(width: int, height: int, n: int, side: int = 32,
                  seed: int = 0) -> fio.FrameSequence:
    """Static background with a region of fresh noise per frame.

    Consecutive frames alternate between dark and bright noise so the region's
    luma histograms barely overlap: a decorrelated "subject".
    """
    rng = np.random.default_rng(seed)
    background = fio.texture(rng, height, width)
    x0, y0 = (width - side) // 2, (height - side) // 2
    frames = []
    for k in range(n):
        img = background.copy()
        mean = (60.0 if k % 2 == 0 else 195.0) + rng.uniform(-10.0, 10.0)
        block = np.clip(rng.normal(mean, 12.0, (side, side)), 0, 255)
        img[y0:y0 + side, x0:x0 + side] = block.astype(np.uint8)
        frames.append(fio.Frame.from_gray(img))
    return fio.FrameSequence(frames=frames, fps=8.0, source="noise", item_id="noise")


def noise_clip(width: int, height: int, n: int, seed: int = 0) -> fio.FrameSequence:
    """Every frame fully independent uniform noise."""
    rng = np.random.default_rng(seed)
    frames = [fio.Frame.from_gray(rng.integers(0, 256, (height, width)).astype(np.uint8))
              for _ in range(n)]
    return fio.FrameSequence(frames=frames, fps=8.0, source="noise", item_id="noise")


@pytest.fixture
def tmp_video_dir(tmp_path):
    def _write(seq: fio.FrameSequence, name: str = "clip", fmt: str = "png"):
        d = tmp_path / name
        fio.write_sequence(seq, d, fmt=fmt)
        return d
    return _write
