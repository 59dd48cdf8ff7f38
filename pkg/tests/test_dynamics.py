import math

import numpy as np
import pytest

from divebench import frame_io as fio
from divebench.dynamics import (DynamicsProfile, dynamic_score, is_static,
                                pair_flows)

from conftest import textured_frame


def test_static_clip_scores_exactly_zero():
    seq = fio.synthesize_static(textured_frame(1), 49)
    prof = dynamic_score(seq)
    assert prof.score == 0.0
    assert prof.raw_mean == 0.0
    assert len(prof.per_pair_motion) == 48


def test_translate3_on_64_saturates():
    # m = 3 / sqrt(64^2 + 64^2) = 0.03315 per pair; 0.03315 / 0.02 clamps to 1.
    seq = fio.synthesize_warp(64, 64, 4, dx=3, seed=1)
    prof = dynamic_score(seq)
    diag = math.hypot(64, 64)
    assert prof.per_pair_motion == pytest.approx([3 / diag] * 3)
    assert prof.score == 1.0


def test_translate1_on_256_hand_value():
    seq = fio.synthesize_warp(256, 256, 4, dx=1, seed=5)
    prof = dynamic_score(seq)
    assert prof.score == pytest.approx(0.1381, abs=0.005)


def test_monotone_in_speed():
    scores = []
    for dx in (0, 1, 2, 3):
        if dx == 0:
            seq = fio.synthesize_static(textured_frame(3, 256, 256), 4)
        else:
            seq = fio.synthesize_warp(256, 256, 4, dx=dx, seed=3)
        scores.append(dynamic_score(seq).score)
    assert scores == sorted(scores)
    assert all(b > a for a, b in zip(scores, scores[1:]))


def test_saturation_bound():
    seq = fio.synthesize_warp(64, 64, 3, dx=5, dy=5, seed=9)
    prof = dynamic_score(seq)
    assert prof.score == 1.0
    assert prof.raw_mean >= 0.02


def test_reversal_leaves_score_unchanged():
    seq = fio.synthesize_warp(96, 96, 5, dx=2, seed=4)
    rev = fio.FrameSequence(frames=list(reversed(seq.frames)), fps=seq.fps)
    assert dynamic_score(seq).score == dynamic_score(rev).score


def test_single_frame_rejected():
    seq = fio.synthesize_static(textured_frame(1), 1)
    with pytest.raises(ValueError):
        dynamic_score(seq)


def test_is_static_flags():
    static = fio.synthesize_static(textured_frame(2), 9)
    assert is_static(dynamic_score(static))
    moving = fio.synthesize_warp(64, 64, 4, dx=3, seed=1)
    assert not is_static(dynamic_score(moving))


def test_is_static_one_moving_pair_among_many():
    # 48 still pairs plus one shifted pair keeps raw_mean above eps.
    moving = fio.synthesize_warp(64, 64, 2, dx=3, seed=7)
    frames = [moving.frames[0]] * 49 + [moving.frames[1]]
    seq = fio.FrameSequence(frames=frames, fps=8.0)
    prof = dynamic_score(seq)
    assert prof.raw_mean >= 1e-4
    assert not is_static(prof)


def test_subject_only_cancels_camera_pan():
    pan = fio.synthesize_warp(128, 128, 5, dx=4, seed=6)
    full = dynamic_score(pan)
    compensated = dynamic_score(pan, subject_only=True)
    assert full.score == 1.0
    assert compensated.score < 0.01
    assert compensated.subject_only


def test_profile_invariants():
    with pytest.raises(ValueError):
        DynamicsProfile(per_pair_motion=[0.1], raw_mean=0.1, score=1.5)
    seq = fio.synthesize_warp(64, 64, 6, dx=1, seed=8)
    prof = dynamic_score(seq)
    assert len(prof.per_pair_motion) == len(seq) - 1
    assert prof.raw_mean == pytest.approx(np.mean(prof.per_pair_motion))
    assert 0.0 <= prof.score <= 1.0
