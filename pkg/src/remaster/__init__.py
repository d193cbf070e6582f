"""Aspect-ratio expansion for animated video.

Per scene: estimate frame-to-frame camera transforms, composite observed
background pixels into a panoramic canvas, generate only the never-seen
pixels once, then resample every frame at the target aspect while keeping
all source pixels bit-exact.
"""

from .model import (
    Affine2D,
    Frame,
    Mask,
    PixelRect,
    TargetSpec,
    compose,
    invert,
    sample_bilinear,
    target_dimensions,
)
from .pipeline import PipelineConfig, expand_video, run_scene
from .scenes import SceneClip, SceneDetectConfig, content_score, detect_scenes
from .stitching import CanvasState, Coverage, RansacConfig, stitch_scene

__all__ = [
    "Affine2D",
    "Frame",
    "Mask",
    "PixelRect",
    "TargetSpec",
    "compose",
    "invert",
    "sample_bilinear",
    "target_dimensions",
    "PipelineConfig",
    "expand_video",
    "run_scene",
    "SceneClip",
    "SceneDetectConfig",
    "content_score",
    "detect_scenes",
    "CanvasState",
    "Coverage",
    "RansacConfig",
    "stitch_scene",
]

__version__ = "0.1.0"
