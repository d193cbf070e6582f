"""Output-frame reconstruction from the completed scene canvas.

Every output pixel is sampled from the canvas through the frame's
transform; the original frame is then overlaid bit-exact in the centered
source rect, which is the pipeline's headline guarantee.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .errors import IncompleteCanvasError
from .model import (
    Frame,
    PixelRect,
    TargetSpec,
    bilinear_values,
    expansion_margins,
    round_half_up,
    target_dimensions,
)
from .stitching import CanvasState, Coverage, expanded_frame_rect

__all__ = ["OutputFrame", "resample_frame", "reconstruct_scene"]


@dataclass(frozen=True)
class OutputFrame:
    pixels: np.ndarray
    source_rect: PixelRect

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


def resample_frame(
    canvas: CanvasState, frame_idx: int, src: Frame, target: TargetSpec
) -> OutputFrame:
    """One expanded output frame; requires the frame's rect fully covered."""
    target_w, target_h = target_dimensions(src.width, src.height, target)
    left, _ = expansion_margins(src.width, target_w)
    rect = expanded_frame_rect(canvas, frame_idx, target)
    cov = canvas.coverage[rect.as_slices()]
    if bool((cov == Coverage.UNKNOWN).any()):
        raise IncompleteCanvasError(
            f"frame {frame_idx}: {int(np.count_nonzero(cov == Coverage.UNKNOWN))} "
            "UNKNOWN cells inside the expanded rect"
        )
    transform = canvas.frame_transforms[frame_idx]
    ys, xs = np.mgrid[0:target_h, 0:target_w].astype(np.float64)
    cx, cy = transform.apply_xy(xs - left, ys)
    # coverage is already validated; extreme transforms clamp to the edge
    cx = np.clip(cx, 0.0, canvas.width - 1.0)
    cy = np.clip(cy, 0.0, canvas.height - 1.0)
    sampled = bilinear_values(canvas.background, cx, cy)
    out = np.clip(round_half_up(sampled), 0, 255).astype(np.uint8)
    out[0 : src.height, left : left + src.width] = src.pixels
    return OutputFrame(pixels=out, source_rect=PixelRect(left, 0, src.width, src.height))


def reconstruct_scene(
    canvas: CanvasState, frames: list[Frame], target: TargetSpec
) -> list[OutputFrame]:
    """Resample every frame of a scene, in order."""
    return [resample_frame(canvas, i, frame, target) for i, frame in enumerate(frames)]
