"""Outpaint-region selection, generation backends, and canvas commits.

Selection walks frames in order and marks the still-UNKNOWN canvas cells
inside each frame's expanded rect; filled pixels are committed back as
GENERATED so no cell is ever generated twice. The classical backend is a
diffusion-free boundary-propagation fill so the pipeline runs standalone;
the remote backend talks to the sidecar over the /outpaint wire protocol.
"""

from __future__ import annotations

from dataclasses import dataclass
from typing import Callable, Protocol

import cv2
import numpy as np
import requests

from .errors import (
    DimensionMismatchError,
    InvariantViolation,
    OutpaintError,
    RemoteOutpainterError,
)
from .masking import RemoteClientConfig, png_b64_decode, png_b64_encode
from .model import Mask, PixelRect, TargetSpec, round_half_up
from .stitching import CanvasState, Coverage, expanded_frame_rect

__all__ = [
    "OutpaintRequest",
    "OutpainterInterface",
    "ClassicalOutpainter",
    "RemoteOutpainter",
    "DEFAULT_PROMPT",
    "CONTEXT_MARGIN",
    "select_outpaint_region",
    "classical_outpaint",
    "remote_outpaint",
    "commit_generated",
    "outpaint_scene",
]

DEFAULT_PROMPT = "animated background"

# Requests crop to the expanded rect plus this margin of surrounding canvas
# so backends see local context without shipping the whole panorama.
CONTEXT_MARGIN = 64


@dataclass(frozen=True)
class OutpaintRequest:
    """A canvas crop plus the mask of pixels to generate.

    The pipeline only issues requests with at least one masked pixel, but
    empty masks are representable: backends must treat them as a no-op
    echo (the sidecar short-circuits them).
    """

    patch: np.ndarray  # (h, w, 3) uint8
    mask: Mask  # 255 = generate
    prompt: str = DEFAULT_PROMPT

    def __post_init__(self) -> None:
        if self.patch.ndim != 3 or self.patch.dtype != np.uint8:
            raise ValueError("patch must be (h, w, 3) uint8")
        if (self.mask.height, self.mask.width) != self.patch.shape[:2]:
            raise DimensionMismatchError("request mask must match patch dimensions")


class OutpainterInterface(Protocol):
    def outpaint(self, request: OutpaintRequest) -> np.ndarray: ...


def select_outpaint_region(
    canvas: CanvasState, frame_idx: int, target: TargetSpec
) -> Mask:
    """UNKNOWN cells inside the frame's expanded rect, as a rect-sized mask.

    Empty when the rect is fully covered, in which case the frame can be
    resampled straight from the canvas.
    """
    rect = expanded_frame_rect(canvas, frame_idx, target)
    cov = canvas.coverage[rect.as_slices()]
    return Mask.from_bool(cov == Coverage.UNKNOWN)


def classical_outpaint(request: OutpaintRequest) -> np.ndarray:
    """Boundary-propagation fill: each round assigns every unknown pixel
    adjacent to known pixels the mean of its known 8-neighbors, then one
    3x3 box blur smooths only the generated pixels.

    Known pixels are returned bit-exact. Raises OutpaintError when the
    mask covers the whole patch (nothing to propagate from).
    """
    fill_flags = request.mask.values != 0
    if not fill_flags.any():
        return request.patch.copy()
    if fill_flags.all():
        raise OutpaintError("mask covers the entire patch; no seed pixels")
    value = request.patch.astype(np.float64)
    known = (~fill_flags).astype(np.float64)
    value *= known[..., None]
    ones = np.ones((3, 3), dtype=np.float64)
    while True:
        unknown = known == 0.0
        if not unknown.any():
            break
        counts = cv2.filter2D(known, -1, ones, borderType=cv2.BORDER_CONSTANT)
        sums = cv2.filter2D(value, -1, ones, borderType=cv2.BORDER_CONSTANT)
        frontier = unknown & (counts > 0.0)
        value[frontier] = round_half_up(sums[frontier] / counts[frontier][:, None])
        known[frontier] = 1.0
    blurred = _box_blur_mean(value)
    value[fill_flags] = round_half_up(blurred[fill_flags])
    out = np.clip(value, 0, 255).astype(np.uint8)
    out[~fill_flags] = request.patch[~fill_flags]
    return out


def _box_blur_mean(value: np.ndarray) -> np.ndarray:
    """3x3 box mean normalized by the in-bounds neighbor count."""
    ones = np.ones((3, 3), dtype=np.float64)
    sums = cv2.filter2D(value, -1, ones, borderType=cv2.BORDER_CONSTANT)
    counts = cv2.filter2D(np.ones(value.shape[:2]), -1, ones, borderType=cv2.BORDER_CONSTANT)
    return sums / counts[..., None]


def remote_outpaint(request: OutpaintRequest, client_cfg: RemoteClientConfig) -> np.ndarray:
    """Sidecar-backed generation; unmasked pixels are restored bit-exact
    client-side regardless of what the backend returns."""
    payload = {
        "image_png_b64": png_b64_encode(request.patch),
        "mask_png_b64": png_b64_encode(request.mask.values),
        "prompt": request.prompt,
    }
    try:
        resp = requests.post(
            f"{client_cfg.endpoint.rstrip('/')}/outpaint",
            json=payload,
            timeout=client_cfg.outpaint_timeout,
        )
    except requests.RequestException as exc:
        raise RemoteOutpainterError(f"outpaint request failed: {exc}") from exc
    if resp.status_code != 200:
        raise RemoteOutpainterError(f"outpaint request returned HTTP {resp.status_code}")
    try:
        result = png_b64_decode(resp.json()["image_png_b64"])
    except (KeyError, ValueError) as exc:
        raise RemoteOutpainterError(f"bad outpaint response payload: {exc}") from exc
    if result.shape != request.patch.shape:
        raise RemoteOutpainterError("outpaint response dimensions differ from request")
    return _recomposite(request, result)


def _recomposite(request: OutpaintRequest, result: np.ndarray) -> np.ndarray:
    keep = request.mask.values == 0
    out = result.copy()
    out[keep] = request.patch[keep]
    return out


class ClassicalOutpainter:
    def outpaint(self, request: OutpaintRequest) -> np.ndarray:
        return classical_outpaint(request)


class RemoteOutpainter:
    """Sidecar client; optionally falls back to the classical fill."""

    def __init__(
        self, client_cfg: RemoteClientConfig, fallback: bool = False
    ) -> None:
        self.client_cfg = client_cfg
        self.fallback = fallback

    def outpaint(self, request: OutpaintRequest) -> np.ndarray:
        try:
            return remote_outpaint(request, self.client_cfg)
        except RemoteOutpainterError:
            if not self.fallback:
                raise
            return classical_outpaint(request)


def commit_generated(
    canvas: CanvasState, filled: np.ndarray, region_mask: Mask, rect: PixelRect
) -> CanvasState:
    """Write generated pixels into the canvas and mark them GENERATED.

    Every masked cell must still be UNKNOWN; anything else means the
    selection bookkeeping is broken and the scene must abort.
    """
    if (region_mask.height, region_mask.width) != (rect.height, rect.width):
        raise DimensionMismatchError("region mask must match rect dimensions")
    if filled.shape[:2] != (rect.height, rect.width):
        raise DimensionMismatchError("filled raster must match rect dimensions")
    if not PixelRect(0, 0, canvas.width, canvas.height).contains(rect):
        raise InvariantViolation("commit rect exceeds canvas bounds")
    sel = region_mask.values != 0
    cov = canvas.coverage[rect.as_slices()]
    if bool((cov[sel] != Coverage.UNKNOWN).any()):
        raise InvariantViolation("attempted to regenerate non-UNKNOWN canvas cells")
    canvas.background[rect.as_slices()][sel] = filled[sel]
    cov[sel] = Coverage.GENERATED
    return canvas


def outpaint_scene(
    canvas: CanvasState,
    target: TargetSpec,
    outpainter: OutpainterInterface,
    prompt: str = DEFAULT_PROMPT,
    context_margin: int = CONTEXT_MARGIN,
    on_request: Callable[[PixelRect, Mask], None] | None = None,
) -> int:
    """Fill every frame's uncovered canvas region exactly once, in order.

    The request patch is the expanded rect grown by context_margin; all
    UNKNOWN cells in that crop are masked and committed together so margin
    cells are never re-generated by a later frame. Returns the number of
    generated cells.
    """
    generated = 0
    for frame_idx in range(len(canvas.frame_transforms)):
        selection = select_outpaint_region(canvas, frame_idx, target)
        if selection.set_count == 0:
            continue
        rect = expanded_frame_rect(canvas, frame_idx, target).grow(context_margin).clipped(
            canvas.width, canvas.height
        )
        cov = canvas.coverage[rect.as_slices()]
        request_mask = Mask.from_bool(cov == Coverage.UNKNOWN)
        patch = canvas.background[rect.as_slices()].copy()
        request = OutpaintRequest(patch=patch, mask=request_mask, prompt=prompt)
        if on_request is not None:
            on_request(rect, request_mask)
        filled = outpainter.outpaint(request)
        if filled.shape != patch.shape:
            raise OutpaintError("outpainter returned mismatched dimensions")
        filled = _recomposite(request, filled)
        commit_generated(canvas, filled, request_mask, rect)
        generated += request_mask.set_count
    return generated
