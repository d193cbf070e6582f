"""Core domain types and affine/geometry arithmetic.

Conventions used everywhere downstream:

* Rasters are numpy arrays of shape (h, w, 3) (RGB8) or (h, w) (masks),
  dtype uint8, row-major, with pixel centers at integer coordinates.
* Points are (x, y) with x along columns and y along rows.
* An affine transform maps (x, y) -> (a*x + b*y + tx, c*x + d*y + ty).
* Bilinear output is quantized with round-half-up so results are
  deterministic across platforms.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import (
    DimensionMismatchError,
    SamplingBoundsError,
    SingularTransformError,
    UnsupportedAspectError,
)

__all__ = [
    "Frame",
    "Mask",
    "Affine2D",
    "PixelRect",
    "TargetSpec",
    "target_dimensions",
    "expansion_margins",
    "compose",
    "invert",
    "sample_bilinear",
    "bilinear_values",
    "round_half_up",
]

# |det| below this is treated as non-invertible.
SINGULAR_EPS = 1e-12


def round_half_up(values: np.ndarray | float) -> np.ndarray | float:
    """Quantize with ties away from the floor (0.5 -> 1), elementwise."""
    return np.floor(np.asarray(values, dtype=np.float64) + 0.5)


@dataclass(frozen=True)
class Frame:
    """One RGB frame plus its ordinal within the scene it belongs to."""

    pixels: np.ndarray
    index: int = 0

    def __post_init__(self) -> None:
        px = self.pixels
        if px.ndim != 3 or px.shape[2] != 3 or px.dtype != np.uint8:
            raise ValueError(f"frame pixels must be (h, w, 3) uint8, got {px.shape} {px.dtype}")
        if px.shape[0] < 1 or px.shape[1] < 1:
            raise ValueError("frame dimensions must be positive")
        if self.index < 0:
            raise ValueError("frame index must be >= 0")
        px.setflags(write=False)

    @property
    def width(self) -> int:
        return self.pixels.shape[1]

    @property
    def height(self) -> int:
        return self.pixels.shape[0]


@dataclass(frozen=True)
class Mask:
    """Binary per-pixel mask; 255 marks foreground / selected pixels."""

    values: np.ndarray

    def __post_init__(self) -> None:
        v = self.values
        if v.ndim != 2 or v.dtype != np.uint8:
            raise ValueError(f"mask must be (h, w) uint8, got {v.shape} {v.dtype}")
        if not bool(np.all((v == 0) | (v == 255))):
            raise ValueError("mask values must be 0 or 255")
        v.setflags(write=False)

    @property
    def width(self) -> int:
        return self.values.shape[1]

    @property
    def height(self) -> int:
        return self.values.shape[0]

    @property
    def set_count(self) -> int:
        return int(np.count_nonzero(self.values))

    @classmethod
    def zeros(cls, width: int, height: int) -> "Mask":
        return cls(np.zeros((height, width), dtype=np.uint8))

    @classmethod
    def from_bool(cls, flags: np.ndarray) -> "Mask":
        return cls(np.where(flags, 255, 0).astype(np.uint8))


@dataclass(frozen=True)
class Affine2D:
    """2x3 affine map (x, y) -> (a*x + b*y + tx, c*x + d*y + ty)."""

    a: float
    b: float
    c: float
    d: float
    tx: float
    ty: float

    @classmethod
    def identity(cls) -> "Affine2D":
        return cls(1.0, 0.0, 0.0, 1.0, 0.0, 0.0)

    @classmethod
    def translation(cls, dx: float, dy: float) -> "Affine2D":
        return cls(1.0, 0.0, 0.0, 1.0, float(dx), float(dy))

    @classmethod
    def scaling(cls, sx: float, sy: float | None = None) -> "Affine2D":
        sy = sx if sy is None else sy
        return cls(float(sx), 0.0, 0.0, float(sy), 0.0, 0.0)

    @classmethod
    def rotation(cls, radians: float, center: tuple[float, float] = (0.0, 0.0)) -> "Affine2D":
        cx, cy = center
        ca, sa = math.cos(radians), math.sin(radians)
        tx = cx - ca * cx + sa * cy
        ty = cy - sa * cx - ca * cy
        return cls(ca, -sa, sa, ca, tx, ty)

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Affine2D":
        m = np.asarray(m, dtype=np.float64)
        return cls(m[0, 0], m[0, 1], m[1, 0], m[1, 1], m[0, 2], m[1, 2])

    def as_matrix(self) -> np.ndarray:
        return np.array(
            [[self.a, self.b, self.tx], [self.c, self.d, self.ty]], dtype=np.float64
        )

    @property
    def det(self) -> float:
        return self.a * self.d - self.b * self.c

    def apply(self, points: np.ndarray) -> np.ndarray:
        """Map points of shape (..., 2); returns float64 of the same shape."""
        pts = np.asarray(points, dtype=np.float64)
        x, y = pts[..., 0], pts[..., 1]
        out = np.empty_like(pts)
        out[..., 0] = self.a * x + self.b * y + self.tx
        out[..., 1] = self.c * x + self.d * y + self.ty
        return out

    def apply_xy(self, xs: np.ndarray, ys: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """Map coordinate grids without stacking them into point arrays."""
        xs = np.asarray(xs, dtype=np.float64)
        ys = np.asarray(ys, dtype=np.float64)
        return self.a * xs + self.b * ys + self.tx, self.c * xs + self.d * ys + self.ty

    def coeffs(self) -> tuple[float, float, float, float, float, float]:
        return (self.a, self.b, self.c, self.d, self.tx, self.ty)


def compose(first: Affine2D, second: Affine2D) -> Affine2D:
    """Transform applying ``first`` then ``second``: result(p) = second(first(p))."""
    return Affine2D(
        a=second.a * first.a + second.b * first.c,
        b=second.a * first.b + second.b * first.d,
        c=second.c * first.a + second.d * first.c,
        d=second.c * first.b + second.d * first.d,
        tx=second.a * first.tx + second.b * first.ty + second.tx,
        ty=second.c * first.tx + second.d * first.ty + second.ty,
    )


def invert(t: Affine2D) -> Affine2D:
    det = t.det
    if abs(det) < SINGULAR_EPS:
        raise SingularTransformError(f"transform determinant {det!r} is singular")
    ia = t.d / det
    ib = -t.b / det
    ic = -t.c / det
    id_ = t.a / det
    return Affine2D(
        a=ia,
        b=ib,
        c=ic,
        d=id_,
        tx=-(ia * t.tx + ib * t.ty),
        ty=-(ic * t.tx + id_ * t.ty),
    )


@dataclass(frozen=True)
class PixelRect:
    """Axis-aligned rect of canvas cells; (x0, y0) inclusive, width/height > 0."""

    x0: int
    y0: int
    width: int
    height: int

    def __post_init__(self) -> None:
        if self.width <= 0 or self.height <= 0:
            raise ValueError("rect dimensions must be positive")

    @property
    def x1(self) -> int:
        """Exclusive right edge."""
        return self.x0 + self.width

    @property
    def y1(self) -> int:
        """Exclusive bottom edge."""
        return self.y0 + self.height

    @property
    def area(self) -> int:
        return self.width * self.height

    def as_slices(self) -> tuple[slice, slice]:
        """(row_slice, col_slice) for indexing a canvas-shaped array."""
        return slice(self.y0, self.y1), slice(self.x0, self.x1)

    def grow(self, margin: int) -> "PixelRect":
        return PixelRect(
            self.x0 - margin, self.y0 - margin, self.width + 2 * margin, self.height + 2 * margin
        )

    def clipped(self, width: int, height: int) -> "PixelRect":
        x0 = max(self.x0, 0)
        y0 = max(self.y0, 0)
        x1 = min(self.x1, width)
        y1 = min(self.y1, height)
        return PixelRect(x0, y0, x1 - x0, y1 - y0)

    def contains(self, other: "PixelRect") -> bool:
        return (
            self.x0 <= other.x0
            and self.y0 <= other.y0
            and self.x1 >= other.x1
            and self.y1 >= other.y1
        )

    @classmethod
    def covering_points(cls, points: np.ndarray) -> "PixelRect":
        """Smallest integer cell rect covering all (x, y) sample points."""
        pts = np.asarray(points, dtype=np.float64)
        x0 = int(math.floor(pts[..., 0].min()))
        y0 = int(math.floor(pts[..., 1].min()))
        x1 = int(math.ceil(pts[..., 0].max()))
        y1 = int(math.ceil(pts[..., 1].max()))
        return cls(x0, y0, x1 - x0 + 1, y1 - y0 + 1)


@dataclass(frozen=True)
class TargetSpec:
    """Target aspect ratio, e.g. 16:9. Only horizontal expansion is supported."""

    aspect_w: int = 16
    aspect_h: int = 9

    def __post_init__(self) -> None:
        if self.aspect_w <= 0 or self.aspect_h <= 0:
            raise ValueError("aspect terms must be positive integers")

    @classmethod
    def parse(cls, text: str) -> "TargetSpec":
        parts = text.split(":")
        if len(parts) != 2:
            raise ValueError(f"aspect must look like '16:9', got {text!r}")
        return cls(int(parts[0]), int(parts[1]))

    def __str__(self) -> str:
        return f"{self.aspect_w}:{self.aspect_h}"


def target_dimensions(src_w: int, src_h: int, spec: TargetSpec) -> tuple[int, int]:
    """Output dimensions for a source frame under ``spec``.

    Height is preserved; width is src_h * aspect rounded up to the next even
    integer. Raises UnsupportedAspectError when the requested aspect is
    narrower than the source (vertical expansion is out of scope).
    """
    if src_w <= 0 or src_h <= 0:
        raise ValueError("source dimensions must be positive")
    width = -(-src_h * spec.aspect_w // spec.aspect_h)  # ceil division
    width += width & 1
    # the even-rounding slack must stay acceptable, otherwise feeding the
    # output dimensions back in would not be idempotent
    if width < src_w:
        raise UnsupportedAspectError(
            f"target aspect {spec} is narrower than source {src_w}x{src_h}"
        )
    return width, src_h


def expansion_margins(src_w: int, target_w: int) -> tuple[int, int]:
    """(left, right) pillar widths; an odd leftover pixel goes to the right."""
    total = target_w - src_w
    if total < 0:
        raise ValueError("target width below source width")
    left = total // 2
    return left, total - left


def bilinear_values(raster: np.ndarray, xs: np.ndarray, ys: np.ndarray) -> np.ndarray:
    """Un-quantized bilinear samples at float coordinates.

    Coordinates are expected inside [0, w-1] x [0, h-1]; neighbor indices are
    clipped so exact upper-edge coordinates stay valid. Returns float64 with
    a trailing channel axis when the raster has one.
    """
    h, w = raster.shape[:2]
    xs = np.asarray(xs, dtype=np.float64)
    ys = np.asarray(ys, dtype=np.float64)
    x0 = np.floor(xs).astype(np.int64)
    y0 = np.floor(ys).astype(np.int64)
    fx = xs - x0
    fy = ys - y0
    x0c = np.clip(x0, 0, w - 1)
    x1c = np.clip(x0 + 1, 0, w - 1)
    y0c = np.clip(y0, 0, h - 1)
    y1c = np.clip(y0 + 1, 0, h - 1)
    data = raster.astype(np.float64)
    if data.ndim == 3:
        fx = fx[..., None]
        fy = fy[..., None]
    p00 = data[y0c, x0c]
    p10 = data[y0c, x1c]
    p01 = data[y1c, x0c]
    p11 = data[y1c, x1c]
    top = p00 * (1.0 - fx) + p10 * fx
    bot = p01 * (1.0 - fx) + p11 * fx
    return top * (1.0 - fy) + bot * fy


def sample_bilinear(frame_or_canvas: Frame | np.ndarray, x: float, y: float) -> np.ndarray:
    """Bilinear sample of a raster at (x, y), quantized round-half-up.

    Integer coordinates return the exact stored pixel. Out-of-bounds
    coordinates raise SamplingBoundsError.
    """
    raster = frame_or_canvas.pixels if isinstance(frame_or_canvas, Frame) else frame_or_canvas
    h, w = raster.shape[:2]
    if not (0.0 <= x <= w - 1 and 0.0 <= y <= h - 1):
        raise SamplingBoundsError(f"sample ({x}, {y}) outside raster {w}x{h}")
    value = bilinear_values(raster, np.float64(x), np.float64(y))
    return np.clip(round_half_up(value), 0, 255).astype(np.uint8)


def require_same_dims(a_shape: tuple[int, ...], b_shape: tuple[int, ...], what: str) -> None:
    if a_shape[:2] != b_shape[:2]:
        raise DimensionMismatchError(f"{what}: {a_shape[:2]} vs {b_shape[:2]}")
