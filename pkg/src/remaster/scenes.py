"""Scene detection by thresholding HSV frame-to-frame deltas."""

from __future__ import annotations

from dataclasses import dataclass, field, replace

import cv2
import numpy as np

from .errors import InputError
from .model import Frame, require_same_dims

__all__ = ["SceneClip", "SceneDetectConfig", "content_score", "detect_scenes"]


@dataclass(frozen=True)
class SceneDetectConfig:
    threshold: float = 27.0
    min_scene_len: int = 15

    def __post_init__(self) -> None:
        if self.threshold <= 0:
            raise ValueError("threshold must be positive")
        if self.min_scene_len < 1:
            raise ValueError("min_scene_len must be >= 1")


@dataclass(frozen=True)
class SceneClip:
    """Contiguous [start, end) frame range; frames are re-indexed 0-based."""

    start: int
    end: int
    frames: list[Frame] = field(repr=False)

    def __len__(self) -> int:
        return self.end - self.start


def content_score(prev: Frame, next: Frame) -> float:
    """Mean per-pixel (|dH| + |dS| + |dV|) / 3, with H scaled to [0, 255]."""
    require_same_dims(prev.pixels.shape, next.pixels.shape, "content_score frames")
    hsv_a = cv2.cvtColor(prev.pixels, cv2.COLOR_RGB2HSV_FULL)
    hsv_b = cv2.cvtColor(next.pixels, cv2.COLOR_RGB2HSV_FULL)
    return float(np.mean(cv2.absdiff(hsv_a, hsv_b)))


def detect_scenes(frames: list[Frame], cfg: SceneDetectConfig | None = None) -> list[SceneClip]:
    """Split frames into clips at HSV-delta cuts.

    A cut lands before frame i when its score against frame i-1 exceeds the
    threshold and the running clip already holds min_scene_len frames. The
    clips partition the input in order; the trailing clip may be shorter
    than min_scene_len when the remainder after the last cut is short.
    """
    cfg = cfg or SceneDetectConfig()
    if not frames:
        raise InputError("scene detection needs at least one frame")
    cuts: list[int] = []
    last_cut = 0
    for i in range(1, len(frames)):
        if i - last_cut < cfg.min_scene_len:
            continue
        if content_score(frames[i - 1], frames[i]) > cfg.threshold:
            cuts.append(i)
            last_cut = i
    bounds = [0, *cuts, len(frames)]
    clips = []
    for start, end in zip(bounds[:-1], bounds[1:]):
        local = [replace(f, index=j) for j, f in enumerate(frames[start:end])]
        clips.append(SceneClip(start=start, end=end, frames=local))
    return clips
