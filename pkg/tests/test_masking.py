import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import iou, random_mask, solid_frame
from remaster.errors import DimensionMismatchError
from remaster.masking import (
    build_median_model,
    classical_mask,
    merge_masks,
)
from remaster.model import Frame, Mask
from remaster.synthgen import SceneSpec, generate_scene, linear_sprite, pan_path


def _static_scene(n=8, seed=1):
    frames, _ = generate_scene(
        SceneSpec(width=96, height=72, frame_count=n, pattern="noise", seed=seed)
    )
    return frames


class TestClassicalMask:
    def test_static_scene_all_zero(self):
        frames = _static_scene()
        model = build_median_model(frames)
        for frame in frames:
            assert classical_mask(frame, model).set_count == 0

    def test_single_noisy_pixel_removed(self):
        frames = _static_scene()
        model = build_median_model(frames)
        noisy = frames[3].pixels.copy()
        noisy[40, 40] = (255, 255, 255)
        mask = classical_mask(Frame(noisy, index=3), model)
        assert mask.set_count == 0

    def test_moving_sprite_iou(self):
        # dwell time per pixel (2r / v = 4 frames of 12) keeps the median clean
        sprite = linear_sprite("circle", (250, 40, 40), 10.0, (24.0, 36.0), (5.0, 0.0), 12)
        frames, gt = generate_scene(
            SceneSpec(width=96, height=72, frame_count=12, pattern="noise", seed=3, sprites=(sprite,))
        )
        model = build_median_model(frames)
        for frame, truth in zip(frames, gt.true_sprite_masks):
            mask = classical_mask(frame, model)
            assert iou(mask.values, truth.values) >= 0.7

    def test_masks_binary_and_dimensioned(self):
        sprite = linear_sprite("box", (0, 255, 255), 9.0, (20.0, 30.0), (2.0, 1.0), 6)
        frames, _ = generate_scene(
            SceneSpec(width=80, height=60, frame_count=6, pattern="noise", seed=4, sprites=(sprite,))
        )
        model = build_median_model(frames)
        for frame in frames:
            mask = classical_mask(frame, model)
            assert (mask.height, mask.width) == (60, 80)
            assert set(np.unique(mask.values)) <= {0, 255}

    def test_panning_scene_aligned_median(self):
        frames, _ = generate_scene(
            SceneSpec(
                width=96, height=72, frame_count=10, pattern="noise", seed=5,
                camera_path=tuple(pan_path(10, 3, 0)),
            )
        )
        model = build_median_model(frames)
        assert model.mode == "median"
        assert model.shifts[3] == (9, 0)
        # aligned median means the pan itself is not flagged as foreground
        for frame in frames:
            assert classical_mask(frame, model).set_count == 0

    def test_unalignable_scene_falls_back_to_frame_diff(self):
        rng = np.random.default_rng(6)
        frames = [
            Frame(rng.integers(0, 256, (64, 64, 3), dtype=np.uint8), index=i) for i in range(4)
        ]
        model = build_median_model(frames)
        assert model.mode == "frame-diff"
        mask = classical_mask(frames[2], model)
        assert (mask.height, mask.width) == (64, 64)

    def test_extra_background_frame_keeps_masks(self):
        frames = _static_scene(n=7)
        extended = frames + [Frame(frames[0].pixels.copy(), index=7)]
        model_a = build_median_model(frames)
        model_b = build_median_model(extended)
        assert np.array_equal(model_a.aligned_median, model_b.aligned_median)
        for frame in frames:
            assert np.array_equal(
                classical_mask(frame, model_a).values, classical_mask(frame, model_b).values
            )

    def test_dimension_mismatch(self):
        model = build_median_model(_static_scene())
        with pytest.raises(DimensionMismatchError):
            classical_mask(solid_frame(10, 10, (0, 0, 0)), model)


class TestMergeMasks:
    def test_empty_list_needs_dims(self):
        assert merge_masks([], width=8, height=6).set_count == 0
        with pytest.raises(ValueError):
            merge_masks([])

    def test_disjoint_union(self):
        a = np.zeros((10, 10), dtype=np.uint8)
        a[:3, :3] = 255
        b = np.zeros((10, 10), dtype=np.uint8)
        b[6:, 6:] = 255
        merged = merge_masks([Mask(a), Mask(b)])
        assert merged.set_count == 9 + 16
        assert np.array_equal(merged.values, a | b)

    def test_idempotent(self):
        mask = random_mask(np.random.default_rng(0), 12, 9)
        assert np.array_equal(merge_masks([mask, mask]).values, mask.values)

    @settings(max_examples=25)
    @given(seed=st.integers(0, 2**31))
    def test_algebraic_properties(self, seed):
        rng = np.random.default_rng(seed)
        a, b, c = (random_mask(rng, 10, 8) for _ in range(3))
        ab = merge_masks([a, b]).values
        ba = merge_masks([b, a]).values
        assert np.array_equal(ab, ba)
        left = merge_masks([Mask(ab), c]).values
        right = merge_masks([a, Mask(merge_masks([b, c]).values)]).values
        assert np.array_equal(left, right)

    def test_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            merge_masks([Mask.zeros(4, 4), Mask.zeros(5, 4)])
        with pytest.raises(DimensionMismatchError):
            merge_masks([Mask.zeros(4, 4)], width=5, height=4)
