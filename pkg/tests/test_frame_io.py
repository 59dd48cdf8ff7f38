import json

import numpy as np
import pytest

from divebench import frame_io as fio

from conftest import textured_frame


def test_luma_weights_known_values():
    rgb = np.zeros((1, 3, 3), dtype=np.uint8)
    rgb[0, 0] = (255, 0, 0)
    rgb[0, 1] = (0, 255, 0)
    rgb[0, 2] = (0, 0, 255)
    frame = fio.Frame(rgb=rgb)
    assert frame.luma.tolist() == [[76, 150, 29]]  # round(0.299/0.587/0.114 * 255)


def test_luma_of_gray_is_identity_and_idempotent():
    gray = np.arange(256, dtype=np.uint8).reshape(16, 16)
    frame = fio.Frame.from_gray(gray)
    assert np.array_equal(frame.luma, gray)
    assert np.array_equal(fio.derive_luma(frame.rgb), frame.luma)


def test_ppm_round_trip_byte_exact(tmp_path):
    seq = fio.FrameSequence(frames=[textured_frame(s) for s in range(3)], fps=8.0)
    d = fio.write_sequence(seq, tmp_path / "clip", fmt="ppm")
    loaded = fio.load_sequence(d)
    assert len(loaded) == 3
    for a, b in zip(seq.frames, loaded.frames):
        assert a.rgb.tobytes() == b.rgb.tobytes()


def test_png_round_trip_pixel_exact(tmp_path):
    seq = fio.FrameSequence(frames=[textured_frame(s) for s in range(2)], fps=8.0)
    d = fio.write_sequence(seq, tmp_path / "clip", fmt="png")
    loaded = fio.load_sequence(d)
    for a, b in zip(seq.frames, loaded.frames):
        assert np.array_equal(a.rgb, b.rgb)


def test_load_49_identical_ppms(tmp_path):
    frame = textured_frame(1)
    seq = fio.synthesize_static(frame, 49)
    d = fio.write_sequence(seq, tmp_path / "static", fmt="ppm")
    loaded = fio.load_sequence(d)
    assert len(loaded) == 49
    first = loaded.frames[0].rgb.tobytes()
    assert all(f.rgb.tobytes() == first for f in loaded.frames)


def test_load_mixed_sizes_names_offending_file(tmp_path):
    d = tmp_path / "clip"
    fio.write_sequence(fio.synthesize_static(textured_frame(0, 64, 64), 2), d)
    bad = textured_frame(0, 32, 32)
    from PIL import Image
    Image.fromarray(bad.rgb).save(d / "frame_00002.png")
    with pytest.raises(fio.DimensionMismatchError) as exc:
        fio.load_sequence(d)
    assert "frame_00002.png" in str(exc.value)


def test_load_meta_fps(tmp_path):
    seq = fio.FrameSequence(frames=[textured_frame(s) for s in range(8)], fps=16.0)
    d = fio.write_sequence(seq, tmp_path / "clip", fmt="png")
    meta = json.loads((d / "meta.json").read_text())
    assert meta["fps"] == 16.0 and meta["count"] == 8
    loaded = fio.load_sequence(d)
    assert loaded.fps == 16.0
    assert len(loaded) == 8


def test_load_default_fps_without_meta(tmp_path):
    d = tmp_path / "clip"
    fio.write_sequence(fio.synthesize_static(textured_frame(0), 2), d)
    (d / "meta.json").unlink()
    assert fio.load_sequence(d).fps == 8.0


def test_load_missing_dir_and_empty_dir(tmp_path):
    with pytest.raises(fio.MissingDirectoryError):
        fio.load_sequence(tmp_path / "nope")
    empty = tmp_path / "empty"
    empty.mkdir()
    with pytest.raises(fio.NoFramesError):
        fio.load_sequence(empty)


@pytest.mark.parametrize("w,h,max_dim,out_w,out_h", [
    (64, 64, 512, 64, 64),
    (720, 480, 512, 360, 240),
    (2048, 2048, 512, 512, 512),
])
def test_downscale_factors(w, h, max_dim, out_w, out_h):
    seq = fio.FrameSequence(frames=[textured_frame(0, w, h)], fps=8.0)
    small = fio.downscale_for_flow(seq, max_dim)
    assert (small.width, small.height) == (out_w, out_h)
    if (w, h) == (out_w, out_h):
        assert small is seq  # no-op branch returns the input


def test_downscale_rejects_tiny_max_dim():
    seq = fio.FrameSequence(frames=[textured_frame(0)], fps=8.0)
    with pytest.raises(ValueError):
        fio.downscale_for_flow(seq, 16)


def test_synthesize_static_properties():
    frame = textured_frame(3)
    seq = fio.synthesize_static(frame, 49)
    assert len(seq) == 49
    base = seq.frames[0].rgb
    for f in seq.frames[1:]:
        assert np.array_equal(f.rgb, base)
        assert int(np.abs(f.rgb.astype(int) - base.astype(int)).max()) == 0
    assert len(fio.synthesize_static(frame, 1)) == 1
    with pytest.raises(ValueError):
        fio.synthesize_static(frame, 0)


def test_synthesize_moving_cut():
    black = fio.Frame.solid(64, 64, 0)
    white = fio.Frame.solid(64, 64, 255)
    seq = fio.synthesize_moving(64, 64, 10, fio.CutAt(5, black, white))
    for k, f in enumerate(seq.frames):
        expected = 0 if k < 5 else 255
        assert int(f.luma[0, 0]) == expected


def test_synthesize_translate_shape_exit():
    with pytest.raises(fio.ShapeExitsFrameError):
        fio.synthesize_moving(64, 64, 30, fio.Translate(3, 0))


def test_synthesize_deterministic_given_seed():
    a = fio.synthesize_warp(64, 64, 5, dx=2, scale=1.01, seed=11)
    b = fio.synthesize_warp(64, 64, 5, dx=2, scale=1.01, seed=11)
    for fa, fb in zip(a.frames, b.frames):
        assert fa.rgb.tobytes() == fb.rgb.tobytes()


def test_sequence_rejects_inconsistent_frames():
    with pytest.raises(fio.DimensionMismatchError):
        fio.FrameSequence(frames=[textured_frame(0, 64, 64),
                                  textured_frame(0, 32, 32)], fps=8.0)
    with pytest.raises(fio.NoFramesError):
        fio.FrameSequence(frames=[], fps=8.0)
