"""Block-matching flow and per-shot averaging."""

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from shotmatch.errors import DataError
from shotmatch.flow import (
    FlowField,
    FrameGray,
    average_flow,
    block_matching_flow,
    shot_flow_summary,
)


def textured_frame(rng, h=16, w=16):
    return FrameGray(rng.random((h, w)))


def translate(frame: FrameGray, dx: int, dy: int) -> FrameGray:
    """Wrap-around translation keeps the frame fully textured."""
    return FrameGray(np.roll(np.roll(frame.pixels, dy, axis=0), dx, axis=1))


def test_identical_frames_zero_flow():
    rng = np.random.default_rng(0)
    f = textured_frame(rng)
    field = block_matching_flow(f, f, block=4, search_radius=3)
    assert np.array_equal(field.field, np.zeros((16, 16, 2)))


def test_translated_square_recovered():
    rng = np.random.default_rng(3)
    base = np.zeros((16, 16))
    base[4:8, 5:9] = 0.25 + 0.75 * rng.random((4, 4))
    shifted = np.zeros((16, 16))
    shifted[5:9, 7:11] = base[4:8, 5:9]
    field = block_matching_flow(FrameGray(base), FrameGray(shifted), block=4, search_radius=3)
    # the block fully covering the square reports exactly (dx=2, dy=1)
    assert np.array_equal(field.field[4:8, 4:8], np.broadcast_to([2.0, 1.0], (4, 4, 2)))


def test_translated_square_sad_enumeration_oracle():
    rng = np.random.default_rng(7)
    base = np.zeros((8, 8))
    base[0:4, 0:4] = rng.random((4, 4)) * 0.5 + 0.5
    moved = np.zeros((8, 8))
    moved[2:6, 1:5] = base[0:4, 0:4]
    field = block_matching_flow(FrameGray(base), FrameGray(moved), block=4, search_radius=2)

    # independent SAD enumeration for the top-left block
    best = None
    for dy in range(-2, 3):
        for dx in range(-2, 3):
            if not (0 <= dy and dy + 4 <= 8 and 0 <= dx and dx + 4 <= 8):
                continue
            sad = np.abs(base[0:4, 0:4] - moved[dy : dy + 4, dx : dx + 4]).sum()
            key = (sad, dx * dx + dy * dy, dy, dx)
            if best is None or key < best:
                best = key
    assert tuple(field.field[0, 0]) == (best[3], best[2])


def test_uniform_frames_tie_break_to_zero():
    flat = FrameGray(np.full((8, 8), 0.5))
    field = block_matching_flow(flat, flat, block=4, search_radius=2)
    assert np.array_equal(field.field, np.zeros((8, 8, 2)))


def test_block_must_divide_dimensions():
    f = FrameGray(np.zeros((8, 8)))
    with pytest.raises(DataError, match="divide"):
        block_matching_flow(f, f, block=3, search_radius=1)


def test_dimension_mismatch():
    with pytest.raises(DataError, match="differ"):
        block_matching_flow(
            FrameGray(np.zeros((8, 8))), FrameGray(np.zeros((8, 12))), 4, 1
        )


def test_full_texture_translation_recovery_property():
    rng = np.random.default_rng(11)
    for _ in range(10):
        f = textured_frame(rng, 12, 12)
        dx, dy = int(rng.integers(-2, 3)), int(rng.integers(-2, 3))
        g = translate(f, dx, dy)
        field = block_matching_flow(f, g, block=4, search_radius=3)
        # interior blocks (not affected by wrap-around) recover the shift
        assert tuple(field.field[4, 4]) == (dx, dy)


def test_average_flow_linear():
    a = FlowField(np.stack([np.ones((2, 2)), np.zeros((2, 2))], axis=2))
    b = FlowField(np.stack([np.zeros((2, 2)), np.ones((2, 2))], axis=2))
    mean = average_flow([a, b])
    assert np.array_equal(mean.field, np.full((2, 2, 2), 0.5))


def test_average_flow_single():
    rng = np.random.default_rng(2)
    f = FlowField(rng.normal(size=(3, 3, 2)))
    assert np.array_equal(average_flow([f]).field, f.field)


def test_average_flow_random_oracle():
    rng = np.random.default_rng(4)
    fields = [FlowField(rng.normal(size=(2, 2, 2))) for _ in range(3)]
    got = average_flow(fields).field
    expected = (fields[0].field + fields[1].field + fields[2].field) / 3.0
    np.testing.assert_allclose(got, expected, rtol=0, atol=1e-15)


def test_average_flow_errors():
    with pytest.raises(DataError):
        average_flow([])
    with pytest.raises(DataError):
        average_flow([FlowField(np.zeros((2, 2, 2))), FlowField(np.zeros((3, 3, 2)))])


@settings(max_examples=20, deadline=None)
@given(st.integers(0, 10**6), st.integers(1, 5))
def test_average_flow_permutation_invariant_and_bounded(seed, count):
    rng = np.random.default_rng(seed)
    fields = [FlowField(rng.normal(size=(2, 3, 2))) for _ in range(count)]
    mean = average_flow(fields).field
    perm = [fields[i] for i in rng.permutation(count)]
    np.testing.assert_allclose(average_flow(perm).field, mean, atol=1e-12)
    assert np.abs(mean).max() <= max(np.abs(f.field).max() for f in fields) + 1e-12


def test_shot_flow_summary_stride_one():
    rng = np.random.default_rng(5)
    frames = [textured_frame(rng, 8, 8) for _ in range(3)]
    summary = shot_flow_summary(frames, stride=1, block=4, search_radius=2)
    f01 = block_matching_flow(frames[0], frames[1], 4, 2)
    f12 = block_matching_flow(frames[1], frames[2], 4, 2)
    np.testing.assert_array_equal(summary.field, average_flow([f01, f12]).field)


def test_shot_flow_summary_stride_four_uses_two_pairs():
    rng = np.random.default_rng(6)
    frames = [textured_frame(rng, 8, 8) for _ in range(9)]
    summary = shot_flow_summary(frames, stride=4, block=4, search_radius=2)
    f04 = block_matching_flow(frames[0], frames[4], 4, 2)
    f48 = block_matching_flow(frames[4], frames[8], 4, 2)
    np.testing.assert_array_equal(summary.field, average_flow([f04, f48]).field)


def test_shot_flow_summary_constant_motion():
    # x-periodic pattern (period = block size) rolling right 1 px per frame:
    # every frame pair yields the identical field, so the mean equals it
    xs = np.arange(12)
    frames = [
        FrameGray(np.tile(0.5 + 0.4 * np.sin(2 * np.pi * (xs - k) / 4), (12, 1)))
        for k in range(4)
    ]
    per_pair = [
        block_matching_flow(frames[k], frames[k + 1], 4, 2).field for k in range(3)
    ]
    for field in per_pair[1:]:
        np.testing.assert_array_equal(field, per_pair[0])
    summary = shot_flow_summary(frames, stride=1, block=4, search_radius=2)
    np.testing.assert_array_equal(summary.field, per_pair[0])


def test_shot_flow_summary_too_few_frames():
    rng = np.random.default_rng(9)
    with pytest.raises(DataError, match="frames"):
        shot_flow_summary([textured_frame(rng)], stride=1)


def test_frame_value_range_enforced():
    with pytest.raises(DataError):
        FrameGray(np.full((2, 2), 1.5))
