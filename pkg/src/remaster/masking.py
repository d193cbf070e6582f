"""Foreground masking: classical median-subtraction fallback plus the
remote ML-service client.

Only background pixels may enter the stitched canvas, so every frame gets
a binary foreground mask. The classical masker models the background as a
per-pixel temporal median over coarsely aligned frames and thresholds the
per-channel deviation; the remote masker defers to the sidecar service
over the /mask wire protocol.
"""

from __future__ import annotations

import base64
import io
from dataclasses import dataclass, field
from typing import Protocol

import cv2
import numpy as np
import requests
from PIL import Image

from .errors import DimensionMismatchError, RemoteMaskerError
from .model import Frame, Mask
from .stitching import estimate_translation

__all__ = [
    "MaskerInterface",
    "MedianBackgroundModel",
    "RemoteClientConfig",
    "ClassicalMasker",
    "RemoteMasker",
    "build_median_model",
    "classical_mask",
    "remote_mask",
    "merge_masks",
]

# Scenes whose translation-only alignment scores below this are treated as
# non-translational (e.g. rotation); the model falls back to differencing
# against the previous frame.
ALIGNMENT_CONFIDENCE = 0.5

# Cap on frames entering the median stack; evenly spaced sampling.
MEDIAN_SAMPLE_CAP = 15

_MORPH_KERNEL = np.ones((3, 3), dtype=np.uint8)


class MaskerInterface(Protocol):
    def mask(self, frame: Frame, scene_context: "MedianBackgroundModel") -> Mask: ...


@dataclass
class MedianBackgroundModel:
    """Temporal-median background in frame-0 coordinates.

    shifts[i] is frame i's integer offset relative to frame 0; lookups
    outside the median extent carry no evidence and are not flagged. When
    alignment confidence is too low, mode switches to per-frame
    differencing and the scene's frames are kept for reference.
    """

    aligned_median: np.ndarray  # (h, w, 3) uint8, frame dims
    delta_threshold: int = 25
    shifts: list[tuple[int, int]] = field(default_factory=list)
    mode: str = "median"  # "median" | "frame-diff"
    frames: list[Frame] = field(default_factory=list, repr=False)


def build_median_model(frames: list[Frame], delta_threshold: int = 25) -> MedianBackgroundModel:
    """Model a scene's background for classical masking.

    Coarse alignment reuses the stitching module's translation-only NCC
    pass; frames are shifted into frame-0 coordinates before the per-pixel
    median. Static scenes reduce to a plain temporal median.
    """
    if not frames:
        raise ValueError("cannot model an empty scene")
    grays = [cv2.cvtColor(f.pixels, cv2.COLOR_RGB2GRAY) for f in frames]
    shifts: list[tuple[int, int]] = [(0, 0)]
    worst_score = 1.0
    for i in range(1, len(frames)):
        step, score = estimate_translation(grays[i], grays[i - 1])
        worst_score = min(worst_score, score)
        prev = shifts[i - 1]
        shifts.append((prev[0] + int(step.tx), prev[1] + int(step.ty)))
    if len(frames) > 1 and worst_score < ALIGNMENT_CONFIDENCE:
        median = frames[0].pixels.copy()
        return MedianBackgroundModel(
            aligned_median=median,
            delta_threshold=delta_threshold,
            shifts=shifts,
            mode="frame-diff",
            frames=list(frames),
        )
    h, w = frames[0].height, frames[0].width
    picks = np.unique(np.linspace(0, len(frames) - 1, MEDIAN_SAMPLE_CAP).astype(int))
    stack = np.full((len(picks), h, w, 3), np.nan, dtype=np.float32)
    for row, i in enumerate(picks):
        sx, sy = shifts[i]
        # frame i pixel (p) lives at frame-0 coords (p + shift)
        dst_x0, dst_x1 = max(sx, 0), min(w + sx, w)
        dst_y0, dst_y1 = max(sy, 0), min(h + sy, h)
        if dst_x0 >= dst_x1 or dst_y0 >= dst_y1:
            continue
        src_x0, src_y0 = dst_x0 - sx, dst_y0 - sy
        stack[row, dst_y0:dst_y1, dst_x0:dst_x1] = frames[i].pixels[
            src_y0 : src_y0 + (dst_y1 - dst_y0), src_x0 : src_x0 + (dst_x1 - dst_x0)
        ]
    with np.errstate(all="ignore"):
        median = np.nanmedian(stack, axis=0)
    median = np.where(np.isnan(median), frames[0].pixels, np.floor(median + 0.5))
    return MedianBackgroundModel(
        aligned_median=np.clip(median, 0, 255).astype(np.uint8),
        delta_threshold=delta_threshold,
        shifts=shifts,
        mode="median",
        frames=list(frames),
    )


def classical_mask(frame: Frame, model: MedianBackgroundModel) -> Mask:
    """Threshold max-channel deviation from the background reference, then
    clean up with one morphological open and close (3x3).

    Pixels without a reference (a panning frame's leading edge falls off
    the median extent) are treated as background: no evidence, no flag.
    """
    if model.aligned_median.shape[:2] != (frame.height, frame.width):
        raise DimensionMismatchError("frame does not match the background model")
    reference, valid = _reference_for(frame, model)
    delta = cv2.absdiff(frame.pixels, reference).max(axis=2)
    delta[~valid] = 0
    raw = np.where(delta > model.delta_threshold, 255, 0).astype(np.uint8)
    opened = cv2.morphologyEx(raw, cv2.MORPH_OPEN, _MORPH_KERNEL)
    cleaned = cv2.morphologyEx(opened, cv2.MORPH_CLOSE, _MORPH_KERNEL)
    return Mask(cleaned)


def _reference_for(frame: Frame, model: MedianBackgroundModel) -> tuple[np.ndarray, np.ndarray]:
    h, w = frame.height, frame.width
    if model.mode == "frame-diff":
        idx = frame.index
        ref_idx = idx - 1 if idx > 0 else min(1, len(model.frames) - 1)
        return model.frames[ref_idx].pixels, np.ones((h, w), dtype=bool)
    sx, sy = model.shifts[frame.index] if frame.index < len(model.shifts) else (0, 0)
    if (sx, sy) == (0, 0):
        return model.aligned_median, np.ones((h, w), dtype=bool)
    xs = np.arange(w) + sx
    ys = np.arange(h) + sy
    valid = ((ys >= 0) & (ys < h))[:, None] & ((xs >= 0) & (xs < w))[None, :]
    reference = model.aligned_median[np.ix_(np.clip(ys, 0, h - 1), np.clip(xs, 0, w - 1))]
    return reference, valid


@dataclass(frozen=True)
class RemoteClientConfig:
    endpoint: str
    mask_timeout: float = 30.0
    outpaint_timeout: float = 120.0


class ClassicalMasker:
    def mask(self, frame: Frame, scene_context: MedianBackgroundModel) -> Mask:
        return classical_mask(frame, scene_context)


class RemoteMasker:
    """Sidecar client; optionally falls back to the classical masker.

    Safe to call from multiple scene workers (each call is an independent
    request).
    """

    def __init__(self, client_cfg: RemoteClientConfig, fallback: bool = False) -> None:
        self.client_cfg = client_cfg
        self.fallback = fallback

    def mask(self, frame: Frame, scene_context: MedianBackgroundModel) -> Mask:
        try:
            return remote_mask(frame, self.client_cfg)
        except RemoteMaskerError:
            if not self.fallback:
                raise
            return classical_mask(frame, scene_context)


def remote_mask(frame: Frame, client_cfg: RemoteClientConfig) -> Mask:
    """Fetch a foreground mask from the sidecar; binarize at 128."""
    payload = {"image_png_b64": png_b64_encode(frame.pixels)}
    try:
        resp = requests.post(
            f"{client_cfg.endpoint.rstrip('/')}/mask",
            json=payload,
            timeout=client_cfg.mask_timeout,
        )
    except requests.RequestException as exc:
        raise RemoteMaskerError(f"mask request failed: {exc}") from exc
    if resp.status_code != 200:
        raise RemoteMaskerError(f"mask request returned HTTP {resp.status_code}")
    try:
        raw = png_b64_decode(resp.json()["mask_png_b64"], grayscale=True)
    except (KeyError, ValueError) as exc:
        raise RemoteMaskerError(f"bad mask response payload: {exc}") from exc
    if raw.shape != (frame.height, frame.width):
        raise RemoteMaskerError(
            f"mask dimensions {raw.shape[::-1]} do not match frame {frame.width}x{frame.height}"
        )
    return Mask(np.where(raw >= 128, 255, 0).astype(np.uint8))


def merge_masks(
    masks: list[Mask], width: int | None = None, height: int | None = None
) -> Mask:
    """Per-pixel union; an empty list needs reference dimensions."""
    if not masks:
        if width is None or height is None:
            raise ValueError("empty mask list requires reference dimensions")
        return Mask.zeros(width, height)
    ref = (masks[0].height, masks[0].width)
    if width is not None and height is not None and ref != (height, width):
        raise DimensionMismatchError("masks do not match reference dimensions")
    union = np.zeros(ref, dtype=np.uint8)
    for m in masks:
        if (m.height, m.width) != ref:
            raise DimensionMismatchError("masks must share dimensions")
        union |= m.values
    return Mask(union)


def png_b64_encode(raster: np.ndarray) -> str:
    """Base64 PNG of an RGB or single-channel uint8 raster."""
    image = Image.fromarray(raster)
    buf = io.BytesIO()
    image.save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def png_b64_decode(data: str, grayscale: bool = False) -> np.ndarray:
    try:
        image = Image.open(io.BytesIO(base64.b64decode(data)))
        image.load()
    except Exception as exc:
        raise ValueError(f"undecodable PNG payload: {exc}") from exc
    if grayscale:
        if image.mode != "L":
            image = image.convert("L")
    elif image.mode != "RGB":
        image = image.convert("RGB")
    return np.asarray(image, dtype=np.uint8)
