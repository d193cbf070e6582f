import numpy as np
import pytest

from remaster.errors import DimensionMismatchError, InvariantViolation, OutpaintError
from remaster.model import Affine2D, Mask, PixelRect, TargetSpec
from remaster.outpainting import (
    ClassicalOutpainter,
    OutpaintRequest,
    classical_outpaint,
    commit_generated,
    outpaint_scene,
    select_outpaint_region,
)
from remaster.stitching import Coverage, expanded_frame_rect, stitch_scene
from remaster.synthgen import SceneSpec, generate_scene, pan_path


def _pan_canvas(dx=0, n=1, w=320, h=240, seed=20, target=TargetSpec(16, 9)):
    frames, _ = generate_scene(
        SceneSpec(width=w, height=h, frame_count=n, pattern="noise", seed=seed,
                  camera_path=tuple(pan_path(n, dx, 0)))
    )
    chain = [Affine2D.translation(dx * i, 0) for i in range(n)]
    return frames, stitch_scene(frames, None, target, transforms=chain)


class TestSelectRegion:
    def test_static_pillars_640(self):
        frames, _ = generate_scene(
            SceneSpec(width=640, height=480, frame_count=1, pattern="noise", seed=21)
        )
        canvas = stitch_scene(frames, None, TargetSpec(16, 9))
        mask = select_outpaint_region(canvas, 0, TargetSpec(16, 9))
        assert mask.set_count == 2 * 107 * 480
        assert (mask.values[:, :107] == 255).all()
        assert (mask.values[:, 747:] == 255).all()
        assert (mask.values[:, 107:747] == 0).all()

    def test_fully_covered_rect_selects_nothing(self):
        # frame rect entirely inside ORIGINAL coverage: sample and return
        frames, canvas = _pan_canvas(target=TargetSpec(4, 3))
        assert select_outpaint_region(canvas, 0, TargetSpec(4, 3)).set_count == 0

    def test_pan_second_frame_selects_only_new_sliver(self):
        target = TargetSpec(16, 9)
        frames, canvas = _pan_canvas(dx=30, n=2, target=target)
        first = select_outpaint_region(canvas, 0, target)
        # frame 1's content already covers 30 columns of frame 0's right
        # pillar, so frame 0 only selects 54 + (54 - 30) columns
        assert first.set_count == (54 + 24) * 240
        rect0 = expanded_frame_rect(canvas, 0, target)
        commit_generated(canvas, np.zeros((rect0.height, rect0.width, 3), np.uint8), first, rect0)
        second = select_outpaint_region(canvas, 1, target)
        assert second.set_count == 30 * 240
        # the newly exposed sliver is the rightmost strip of frame 1's rect
        assert (second.values[:, -30:] == 255).all()


class TestClassicalOutpaint:
    def test_empty_mask_returns_input_bit_exact(self):
        rng = np.random.default_rng(0)
        patch = rng.integers(0, 256, (20, 30, 3), dtype=np.uint8)
        request = OutpaintRequest(patch=patch, mask=Mask.zeros(30, 20))
        assert np.array_equal(classical_outpaint(request), patch)

    def test_uniform_blue_strip(self):
        patch = np.zeros((16, 24, 3), dtype=np.uint8)
        patch[:] = (10, 20, 200)
        mask = np.zeros((16, 24), dtype=np.uint8)
        mask[:, 16:] = 255
        filled = classical_outpaint(OutpaintRequest(patch=patch, mask=Mask(mask)))
        assert (filled == (10, 20, 200)).all()

    def test_black_seed_propagates_black(self):
        patch = np.zeros((12, 20, 3), dtype=np.uint8)
        mask = np.zeros((12, 20), dtype=np.uint8)
        mask[:, 10:] = 255
        filled = classical_outpaint(OutpaintRequest(patch=patch, mask=Mask(mask)))
        assert (filled == 0).all()

    def test_known_pixels_bit_exact(self):
        rng = np.random.default_rng(1)
        patch = rng.integers(0, 256, (24, 24, 3), dtype=np.uint8)
        mask = np.where(rng.random((24, 24)) < 0.4, 255, 0).astype(np.uint8)
        mask[0, 0] = 0  # at least one seed
        filled = classical_outpaint(OutpaintRequest(patch=patch, mask=Mask(mask)))
        keep = mask == 0
        assert np.array_equal(filled[keep], patch[keep])

    def test_all_unknown_rejected(self):
        patch = np.zeros((8, 8, 3), dtype=np.uint8)
        mask = np.full((8, 8), 255, dtype=np.uint8)
        with pytest.raises(OutpaintError):
            classical_outpaint(OutpaintRequest(patch=patch, mask=Mask(mask)))

    @pytest.mark.parametrize("seed", range(4))
    def test_terminates_and_fills_everything(self, seed):
        rng = np.random.default_rng(seed)
        patch = rng.integers(0, 256, (18, 26, 3), dtype=np.uint8)
        flags = rng.random((18, 26)) < 0.7
        flags[4, 7] = False
        mask = Mask.from_bool(flags)
        sentinel = patch.copy()
        sentinel[flags] = (255, 0, 255)
        filled = classical_outpaint(OutpaintRequest(patch=sentinel, mask=mask))
        # every masked pixel was rewritten away from the sentinel
        assert not (filled[flags] == (255, 0, 255)).all(axis=1).any()

    def test_mask_dimension_mismatch(self):
        with pytest.raises(DimensionMismatchError):
            OutpaintRequest(patch=np.zeros((4, 4, 3), np.uint8), mask=Mask.zeros(5, 4))


class TestCommitGenerated:
    def test_empty_mask_is_noop(self):
        _, canvas = _pan_canvas()
        before = canvas.background.copy()
        rect = expanded_frame_rect(canvas, 0, TargetSpec(16, 9))
        commit_generated(
            canvas, np.zeros((rect.height, rect.width, 3), np.uint8),
            Mask.zeros(rect.width, rect.height), rect,
        )
        assert np.array_equal(canvas.background, before)

    def test_commit_then_reselect_is_empty(self):
        target = TargetSpec(16, 9)
        _, canvas = _pan_canvas(target=target)
        rect = expanded_frame_rect(canvas, 0, target)
        selection = select_outpaint_region(canvas, 0, target)
        filled = np.full((rect.height, rect.width, 3), 9, np.uint8)
        commit_generated(canvas, filled, selection, rect)
        assert select_outpaint_region(canvas, 0, target).set_count == 0

    def test_overlapping_rect_commits_cover_union_once(self):
        target = TargetSpec(16, 9)
        _, canvas = _pan_canvas(dx=30, n=2, target=target)
        unknown_before = canvas.unknown_count()
        for idx in range(2):
            rect = expanded_frame_rect(canvas, idx, target)
            sel = select_outpaint_region(canvas, idx, target)
            commit_generated(canvas, np.zeros((rect.height, rect.width, 3), np.uint8), sel, rect)
        generated = int(np.count_nonzero(canvas.coverage == Coverage.GENERATED))
        assert generated == unknown_before  # union of rects, not the sum of selections
        assert generated == 2 * 54 * 240  # both outer pillars of the panned pair

    def test_regenerating_cells_is_an_invariant_violation(self):
        target = TargetSpec(16, 9)
        _, canvas = _pan_canvas(target=target)
        rect = expanded_frame_rect(canvas, 0, target)
        sel = select_outpaint_region(canvas, 0, target)
        filled = np.zeros((rect.height, rect.width, 3), np.uint8)
        commit_generated(canvas, filled, sel, rect)
        with pytest.raises(InvariantViolation):
            commit_generated(canvas, filled, sel, rect)

    def test_never_overwrites_original(self):
        target = TargetSpec(16, 9)
        frames, canvas = _pan_canvas(target=target)
        original_cells = canvas.coverage == Coverage.ORIGINAL
        before = canvas.background[original_cells].copy()
        outpaint_scene(canvas, target, ClassicalOutpainter())
        assert np.array_equal(canvas.background[original_cells], before)


class _CountingOutpainter:
    """Records, per canvas cell, how many times it was requested."""

    def __init__(self, canvas):
        self.counts = np.zeros((canvas.height, canvas.width), dtype=np.int32)
        self.inner = ClassicalOutpainter()

    def hook(self, rect: PixelRect, mask: Mask) -> None:
        self.counts[rect.as_slices()] += (mask.values != 0).astype(np.int32)

    def outpaint(self, request):
        return self.inner.outpaint(request)


class TestOutpaintScene:
    def test_exactly_once_generation(self):
        target = TargetSpec(16, 9)
        frames, canvas = _pan_canvas(dx=8, n=10, target=target)
        painter = _CountingOutpainter(canvas)
        outpaint_scene(canvas, target, painter, on_request=painter.hook)
        assert painter.counts.max() <= 1
        for idx in range(len(frames)):
            assert select_outpaint_region(canvas, idx, target).set_count == 0

    def test_generated_count_reported(self):
        target = TargetSpec(16, 9)
        _, canvas = _pan_canvas(target=target)
        unknown = canvas.unknown_count()
        generated = outpaint_scene(canvas, target, ClassicalOutpainter())
        assert generated == unknown == 2 * 54 * 240
        assert canvas.unknown_count() == 0

    def test_longer_scene_generates_fewer_than_per_frame_sum(self):
        target = TargetSpec(16, 9)
        _, canvas_multi = _pan_canvas(dx=6, n=12, target=target)
        multi = outpaint_scene(canvas_multi, target, ClassicalOutpainter())
        _, canvas_single = _pan_canvas(n=1, target=target)
        single = outpaint_scene(canvas_single, target, ClassicalOutpainter())
        assert multi <= single * 12
