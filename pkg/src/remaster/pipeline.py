"""End-to-end orchestration: decode, detect scenes, run each scene
through mask / stitch / outpaint / resample, then encode and write the
episode manifest.

Scenes are independent: a bounded worker pool processes them in parallel
and a scene that fails in an unrecoverable way degrades to plain
pillarboxing instead of aborting the episode.
"""

from __future__ import annotations

import json
import time
from concurrent.futures import ThreadPoolExecutor
from dataclasses import asdict, dataclass, field
from pathlib import Path

import numpy as np

from . import frames_io
from .errors import RemasterError
from .masking import (
    ClassicalMasker,
    MaskerInterface,
    RemoteClientConfig,
    RemoteMasker,
    build_median_model,
)
from .model import Frame, TargetSpec, expansion_margins, target_dimensions
from .outpainting import (
    DEFAULT_PROMPT,
    ClassicalOutpainter,
    OutpainterInterface,
    RemoteOutpainter,
    outpaint_scene,
)
from .resample import reconstruct_scene
from .scenes import SceneClip, SceneDetectConfig, detect_scenes
from .stitching import CanvasState, RansacConfig, stitch_scene

__all__ = [
    "PipelineConfig",
    "SceneManifest",
    "run_scene",
    "expand_video",
    "decode_video",
    "MANIFEST_VERSION",
]

MANIFEST_VERSION = 1

BACKENDS = ("classical", "remote", "remote-fallback")

decode_video = frames_io.decode_video


@dataclass(frozen=True)
class PipelineConfig:
    input: Path
    output: Path
    aspect: TargetSpec = TargetSpec(16, 9)
    scene: SceneDetectConfig = field(default_factory=SceneDetectConfig)
    ransac: RansacConfig = field(default_factory=RansacConfig)
    masker: str = "classical"
    outpainter: str = "classical"
    sidecar_url: str = "http://127.0.0.1:8765"
    prompt: str = DEFAULT_PROMPT
    workers: int = 1
    work_dir: Path | None = None
    dump_canvas: bool = False

    def __post_init__(self) -> None:
        if self.workers < 1:
            raise ValueError("worker count must be >= 1")
        if self.masker not in BACKENDS:
            raise ValueError(f"masker backend must be one of {BACKENDS}")
        if self.outpainter not in BACKENDS:
            raise ValueError(f"outpainter backend must be one of {BACKENDS}")


@dataclass
class SceneManifest:
    scene_id: int
    start: int
    end: int
    frame_transforms: list[list[float]] = field(default_factory=list)
    generated_pixels: int = 0
    canvas_width: int = 0
    canvas_height: int = 0
    timings_ms: dict[str, float] = field(default_factory=dict)
    fallback: str | None = None
    error: str | None = None

    def to_json(self) -> dict:
        return asdict(self)

    @classmethod
    def from_json(cls, data: dict) -> "SceneManifest":
        return cls(**data)


def _make_masker(cfg: PipelineConfig) -> MaskerInterface:
    if cfg.masker == "classical":
        return ClassicalMasker()
    client = RemoteClientConfig(endpoint=cfg.sidecar_url)
    return RemoteMasker(client, fallback=cfg.masker == "remote-fallback")


def _make_outpainter(cfg: PipelineConfig) -> OutpainterInterface:
    if cfg.outpainter == "classical":
        return ClassicalOutpainter()
    client = RemoteClientConfig(endpoint=cfg.sidecar_url)
    return RemoteOutpainter(client, fallback=cfg.outpainter == "remote-fallback")


def _pillarbox(frame: Frame, target: TargetSpec) -> np.ndarray:
    tw, th = target_dimensions(frame.width, frame.height, target)
    left, _ = expansion_margins(frame.width, tw)
    out = np.zeros((th, tw, 3), dtype=np.uint8)
    out[0 : frame.height, left : left + frame.width] = frame.pixels
    return out


def run_scene(
    clip: SceneClip, cfg: PipelineConfig
) -> tuple[list[np.ndarray], SceneManifest]:
    """Process one scene; a pure function of (clip, cfg) with classical
    backends. Unrecoverable stage errors degrade to pillarboxed output."""
    manifest = SceneManifest(scene_id=clip.start, start=clip.start, end=clip.end)
    timings = manifest.timings_ms
    try:
        t0 = time.perf_counter()
        model = build_median_model(clip.frames)
        masker = _make_masker(cfg)
        masks = [masker.mask(frame, model) for frame in clip.frames]
        timings["mask"] = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        canvas = stitch_scene(clip.frames, masks, cfg.aspect, cfg.ransac)
        timings["stitch"] = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        generated = outpaint_scene(canvas, cfg.aspect, _make_outpainter(cfg), cfg.prompt)
        timings["outpaint"] = (time.perf_counter() - t0) * 1000.0

        t0 = time.perf_counter()
        outputs = reconstruct_scene(canvas, clip.frames, cfg.aspect)
        timings["resample"] = (time.perf_counter() - t0) * 1000.0

        manifest.frame_transforms = [list(t.coeffs()) for t in canvas.frame_transforms]
        manifest.generated_pixels = generated
        manifest.canvas_width = canvas.width
        manifest.canvas_height = canvas.height
        _dump_scene_artifacts(clip, cfg, canvas)
        return [o.pixels for o in outputs], manifest
    except RemasterError as exc:
        manifest.fallback = "pillarbox"
        manifest.error = f"{type(exc).__name__}: {exc}"
        return [_pillarbox(f, cfg.aspect) for f in clip.frames], manifest


def _dump_scene_artifacts(clip: SceneClip, cfg: PipelineConfig, canvas: CanvasState) -> None:
    if not cfg.dump_canvas or cfg.work_dir is None:
        return
    scene_dir = Path(cfg.work_dir) / f"scene_{clip.start:06d}"
    frames_io.save_png(canvas.background, scene_dir / "canvas.png")
    coverage_vis = (canvas.coverage * 127).clip(0, 255).astype(np.uint8)
    frames_io.save_png(
        np.repeat(coverage_vis[..., None], 3, axis=2), scene_dir / "coverage.png"
    )


def expand_video(cfg: PipelineConfig) -> dict:
    """Run the whole pipeline and write the output plus episode manifest.

    Returns the episode manifest as a dict. Output format follows the
    output path: a directory receives numbered PNGs, a file goes through
    the transcoder at the source fps.
    """
    frames, fps = frames_io.decode_video(Path(cfg.input))
    clips = detect_scenes(frames, cfg.scene)

    if cfg.workers == 1:
        results = [run_scene(clip, cfg) for clip in clips]
    else:
        with ThreadPoolExecutor(max_workers=cfg.workers) as pool:
            results = list(pool.map(lambda clip: run_scene(clip, cfg), clips))

    rasters: list[np.ndarray] = []
    manifests: list[SceneManifest] = []
    for outputs, manifest in results:
        rasters.extend(outputs)
        manifests.append(manifest)
    assert len(rasters) == len(frames), "frame count must be preserved"

    out_path = Path(cfg.output)
    out_fps = fps or frames_io.DEFAULT_FPS
    if out_path.suffix.lower() in (".mp4", ".mkv", ".mov", ".webm", ".avi"):
        source = Path(cfg.input) if Path(cfg.input).is_file() else None
        frames_io.encode_video(rasters, out_fps, out_path, audio_source=source)
    else:
        frames_io.save_frames_dir(rasters, out_path, fps=out_fps)

    episode = {
        "version": MANIFEST_VERSION,
        "input": str(cfg.input),
        "scenes": [m.to_json() for m in manifests],
    }
    manifest_path = Path(f"{cfg.output}.manifest.json")
    manifest_path.parent.mkdir(parents=True, exist_ok=True)
    manifest_path.write_text(json.dumps(episode, indent=2))
    return episode
