"""Deterministic synthetic scenes with exact ground truth.

Each scene is rendered from a procedural background raster through a known
per-frame camera transform, with optional moving sprites drawn on top. The
returned ground truth (true background, true transforms, true sprite masks,
planted cuts) is the oracle for the geometric tests: integer-translation
camera paths reproduce frames bit-exactly.
"""

from __future__ import annotations

from dataclasses import dataclass, replace

import cv2
import numpy as np

from .errors import SceneSpecError
from .model import Affine2D, Frame, Mask, bilinear_values, compose, round_half_up
from .scenes import content_score

__all__ = [
    "SpriteSpec",
    "SceneSpec",
    "SceneGroundTruth",
    "EpisodeGroundTruth",
    "generate_scene",
    "generate_episode",
    "pan_path",
    "static_path",
    "linear_sprite",
    "scene_spec_from_json",
    "episode_specs_from_json",
    "PATTERNS",
]

PATTERNS = ("noise", "gradient", "checkerboard", "stripes")

# (low, high) RGB anchors. Dark and bright-saturated families alternate by
# index so cycling palettes between adjacent scenes guarantees planted cuts
# clear the detection threshold by a wide margin.
PALETTES: tuple[tuple[tuple[int, int, int], tuple[int, int, int]], ...] = (
    ((6, 10, 22), (64, 76, 96)),  # dark slate
    ((0, 160, 20), (50, 255, 80)),  # bright green
    ((48, 32, 20), (112, 82, 52)),  # dark brown
    ((180, 0, 190), (255, 90, 255)),  # bright magenta
)


@dataclass(frozen=True)
class SpriteSpec:
    shape: str  # "circle" or "box"
    color: tuple[int, int, int]
    size: float
    positions: tuple[tuple[float, float], ...]

    def __post_init__(self) -> None:
        if self.shape not in ("circle", "box"):
            raise SceneSpecError(f"unknown sprite shape {self.shape!r}")
        if self.size <= 0:
            raise SceneSpecError("sprite size must be positive")


def linear_sprite(
    shape: str,
    color: tuple[int, int, int],
    size: float,
    start: tuple[float, float],
    velocity: tuple[float, float],
    frame_count: int,
) -> SpriteSpec:
    positions = tuple(
        (start[0] + velocity[0] * i, start[1] + velocity[1] * i) for i in range(frame_count)
    )
    return SpriteSpec(shape=shape, color=color, size=size, positions=positions)


def static_path(frame_count: int) -> list[Affine2D]:
    return [Affine2D.identity() for _ in range(frame_count)]


def pan_path(
    frame_count: int, dx: float, dy: float = 0.0, start: tuple[float, float] = (0.0, 0.0)
) -> list[Affine2D]:
    """Linear pan: frame i samples the background at start + i * (dx, dy)."""
    return [
        Affine2D.translation(start[0] + dx * i, start[1] + dy * i) for i in range(frame_count)
    ]


@dataclass(frozen=True)
class SceneSpec:
    width: int
    height: int
    frame_count: int
    pattern: str = "noise"
    seed: int = 0
    palette: int | None = None
    camera_path: tuple[Affine2D, ...] | None = None
    sprites: tuple[SpriteSpec, ...] = ()
    bg_width: int | None = None
    bg_height: int | None = None

    def __post_init__(self) -> None:
        if self.width < 8 or self.height < 8:
            raise SceneSpecError("frame dimensions must be at least 8x8")
        if self.frame_count < 1:
            raise SceneSpecError("frame_count must be >= 1")
        if self.pattern not in PATTERNS:
            raise SceneSpecError(f"unknown pattern {self.pattern!r}")
        if self.camera_path is not None and len(self.camera_path) != self.frame_count:
            raise SceneSpecError("camera_path length must equal frame_count")
        for sprite in self.sprites:
            if len(sprite.positions) != self.frame_count:
                raise SceneSpecError("sprite positions length must equal frame_count")

    @property
    def palette_index(self) -> int:
        return self.palette if self.palette is not None else self.seed % len(PALETTES)


@dataclass(frozen=True)
class SceneGroundTruth:
    true_background: np.ndarray
    true_transforms: tuple[Affine2D, ...]  # frame coords -> background coords
    true_sprite_masks: tuple[Mask, ...]
    cut_indices: tuple[int, ...] = ()


@dataclass(frozen=True)
class EpisodeGroundTruth:
    scenes: tuple[SceneGroundTruth, ...]
    cut_indices: tuple[int, ...]


def _render_pattern(spec: SceneSpec, bg_w: int, bg_h: int) -> np.ndarray:
    rng = np.random.default_rng(spec.seed)
    ys, xs = np.mgrid[0:bg_h, 0:bg_w].astype(np.float64)
    if spec.pattern == "noise":
        field_ = rng.random((bg_h, bg_w))
        field_ = cv2.GaussianBlur(field_, ksize=(0, 0), sigmaX=1.5)
        lo, hi = field_.min(), field_.max()
        field_ = (field_ - lo) / (hi - lo) if hi > lo else np.zeros_like(field_)
    elif spec.pattern == "gradient":
        angle = rng.uniform(0, np.pi)
        ramp = xs * np.cos(angle) + ys * np.sin(angle)
        lo, hi = ramp.min(), ramp.max()
        ramp = (ramp - lo) / (hi - lo) if hi > lo else np.zeros_like(ramp)
        field_ = np.clip(ramp + 0.08 * np.sin(xs / 9.0) * np.sin(ys / 7.0), 0.0, 1.0)
    elif spec.pattern == "checkerboard":
        cell = 16
        cx = (xs // cell).astype(np.int64)
        cy = (ys // cell).astype(np.int64)
        checker = ((cx + cy) % 2).astype(np.float64)
        # per-cell jitter keeps cells distinguishable for descriptor matching
        jitter_grid = rng.uniform(-0.1, 0.1, size=(bg_h // cell + 2, bg_w // cell + 2))
        field_ = np.clip(0.14 + 0.72 * checker + jitter_grid[cy, cx], 0.0, 1.0)
    elif spec.pattern == "stripes":
        period = 12
        field_ = ((xs.astype(np.int64) // period) % 2).astype(np.float64)
    else:  # pragma: no cover - guarded by SceneSpec validation
        raise SceneSpecError(spec.pattern)
    lo_rgb, hi_rgb = PALETTES[spec.palette_index % len(PALETTES)]
    lo_arr = np.asarray(lo_rgb, dtype=np.float64)
    hi_arr = np.asarray(hi_rgb, dtype=np.float64)
    rgb = lo_arr + field_[..., None] * (hi_arr - lo_arr)
    return np.clip(round_half_up(rgb), 0, 255).astype(np.uint8)


def _integer_translation(t: Affine2D) -> tuple[int, int] | None:
    if (t.a, t.b, t.c, t.d) != (1.0, 0.0, 0.0, 1.0):
        return None
    if t.tx != round(t.tx) or t.ty != round(t.ty):
        return None
    return int(t.tx), int(t.ty)


def _frame_corners(w: int, h: int) -> np.ndarray:
    return np.array(
        [[0.0, 0.0], [w - 1.0, 0.0], [0.0, h - 1.0], [w - 1.0, h - 1.0]], dtype=np.float64
    )


def _resolve_extent(spec: SceneSpec, path: list[Affine2D]) -> tuple[int, int, list[Affine2D]]:
    """Background extent plus transforms shifted into raster coordinates."""
    corners = _frame_corners(spec.width, spec.height)
    mapped = np.concatenate([t.apply(corners) for t in path], axis=0)
    if spec.bg_width is not None and spec.bg_height is not None:
        if (
            mapped[:, 0].min() < 0
            or mapped[:, 1].min() < 0
            or mapped[:, 0].max() > spec.bg_width - 1
            or mapped[:, 1].max() > spec.bg_height - 1
        ):
            raise SceneSpecError("camera path exits the declared background extent")
        return spec.bg_width, spec.bg_height, list(path)
    x0 = int(np.floor(mapped[:, 0].min()))
    y0 = int(np.floor(mapped[:, 1].min()))
    x1 = int(np.ceil(mapped[:, 0].max()))
    y1 = int(np.ceil(mapped[:, 1].max()))
    shift = Affine2D.translation(-x0, -y0)
    return x1 - x0 + 1, y1 - y0 + 1, [compose(t, shift) for t in path]


def _draw_sprite(raster: np.ndarray, mask: np.ndarray, sprite: SpriteSpec, idx: int) -> None:
    h, w = raster.shape[:2]
    cx, cy = sprite.positions[idx]
    ys, xs = np.mgrid[0:h, 0:w].astype(np.float64)
    if sprite.shape == "circle":
        inside = (xs - cx) ** 2 + (ys - cy) ** 2 <= sprite.size**2
    else:
        inside = (np.abs(xs - cx) <= sprite.size) & (np.abs(ys - cy) <= sprite.size)
    raster[inside] = np.asarray(sprite.color, dtype=np.uint8)
    mask[inside] = 255


def generate_scene(spec: SceneSpec) -> tuple[list[Frame], SceneGroundTruth]:
    """Render frames exactly per the ground-truth model; deterministic per seed."""
    path = list(spec.camera_path) if spec.camera_path is not None else static_path(spec.frame_count)
    bg_w, bg_h, transforms = _resolve_extent(spec, path)
    background = _render_pattern(spec, bg_w, bg_h)
    frames: list[Frame] = []
    masks: list[Mask] = []
    for i, t in enumerate(transforms):
        shift = _integer_translation(t)
        if shift is not None:
            ox, oy = shift
            raster = background[oy : oy + spec.height, ox : ox + spec.width].copy()
        else:
            ys, xs = np.mgrid[0 : spec.height, 0 : spec.width].astype(np.float64)
            bx, by = t.apply_xy(xs, ys)
            raster = np.clip(round_half_up(bilinear_values(background, bx, by)), 0, 255).astype(
                np.uint8
            )
        mask = np.zeros((spec.height, spec.width), dtype=np.uint8)
        for sprite in spec.sprites:
            _draw_sprite(raster, mask, sprite, i)
        frames.append(Frame(pixels=raster, index=i))
        masks.append(Mask(mask))
    gt = SceneGroundTruth(
        true_background=background,
        true_transforms=tuple(transforms),
        true_sprite_masks=tuple(masks),
    )
    return frames, gt


# Planted cuts must be unambiguous: adjacent scenes have to clear this score,
# three times the default detection threshold.
MIN_CUT_SCORE = 81.0


def generate_episode(specs: list[SceneSpec]) -> tuple[list[Frame], EpisodeGroundTruth]:
    """Concatenate scenes with hard cuts at recorded indices.

    Rejects spec lists whose adjacent scenes would be visually too similar
    for the planted cut to be detectable (identical consecutive specs are
    the degenerate case).
    """
    if not specs:
        raise SceneSpecError("episode needs at least one scene spec")
    dims = {(s.width, s.height) for s in specs}
    if len(dims) != 1:
        raise SceneSpecError("all scene specs must share frame dimensions")
    frames: list[Frame] = []
    truths: list[SceneGroundTruth] = []
    cuts: list[int] = []
    prev_last: Frame | None = None
    for spec in specs:
        scene_frames, gt = generate_scene(spec)
        if prev_last is not None:
            score = content_score(prev_last, scene_frames[0])
            if score <= MIN_CUT_SCORE:
                raise SceneSpecError(
                    f"adjacent scenes too similar for a detectable cut (score {score:.1f})"
                )
            cuts.append(len(frames))
        frames.extend(scene_frames)
        truths.append(gt)
        prev_last = scene_frames[-1]
    episode_frames = [replace(f, index=i) for i, f in enumerate(frames)]
    return episode_frames, EpisodeGroundTruth(scenes=tuple(truths), cut_indices=tuple(cuts))


def _camera_from_json(data: dict | None, frame_count: int) -> tuple[Affine2D, ...] | None:
    if data is None:
        return None
    kind = data.get("kind", "static")
    if kind == "static":
        return None
    if kind == "pan":
        start = tuple(data.get("start", (0.0, 0.0)))
        return tuple(
            pan_path(frame_count, data.get("dx", 0.0), data.get("dy", 0.0), start=start)
        )
    if kind == "path":
        return tuple(Affine2D(*coeffs) for coeffs in data["transforms"])
    raise SceneSpecError(f"unknown camera kind {kind!r}")


def _sprite_from_json(data: dict, frame_count: int) -> SpriteSpec:
    if "positions" in data:
        positions = tuple((float(x), float(y)) for x, y in data["positions"])
    else:
        positions = linear_sprite(
            data.get("shape", "circle"),
            tuple(data.get("color", (255, 64, 64))),
            float(data.get("size", 12.0)),
            tuple(data.get("start", (0.0, 0.0))),
            tuple(data.get("velocity", (0.0, 0.0))),
            frame_count,
        ).positions
    return SpriteSpec(
        shape=data.get("shape", "circle"),
        color=tuple(data.get("color", (255, 64, 64))),
        size=float(data.get("size", 12.0)),
        positions=positions,
    )


def scene_spec_from_json(data: dict) -> SceneSpec:
    """Build a SceneSpec from the CLI's JSON spec format."""
    try:
        frame_count = int(data.get("frames", 30))
        return SceneSpec(
            width=int(data["width"]),
            height=int(data["height"]),
            frame_count=frame_count,
            pattern=data.get("pattern", "noise"),
            seed=int(data.get("seed", 0)),
            palette=data.get("palette"),
            camera_path=_camera_from_json(data.get("camera"), frame_count),
            sprites=tuple(_sprite_from_json(s, frame_count) for s in data.get("sprites", [])),
            bg_width=data.get("bg_width"),
            bg_height=data.get("bg_height"),
        )
    except KeyError as exc:
        raise SceneSpecError(f"scene spec missing required field {exc}") from exc


def episode_specs_from_json(data: dict | list) -> list[SceneSpec]:
    """Accepts {"scenes": [...]}, a bare list, or a single scene object."""
    if isinstance(data, list):
        return [scene_spec_from_json(s) for s in data]
    if "scenes" in data:
        return [scene_spec_from_json(s) for s in data["scenes"]]
    return [scene_spec_from_json(data)]
