"""PNG payload helpers and the builtin mask/outpaint backends."""

from __future__ import annotations

import base64
import io

import cv2
import numpy as np
from PIL import Image


def decode_png_b64(data: str, grayscale: bool = False) -> np.ndarray:
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


def encode_png_b64(raster: np.ndarray) -> str:
    buf = io.BytesIO()
    Image.fromarray(raster).save(buf, format="PNG")
    return base64.b64encode(buf.getvalue()).decode("ascii")


def saliency_mask(image: np.ndarray) -> np.ndarray:
    """Foreground blobs by contrast against a border color model.

    Frame edges are assumed to show background; pixels far from the
    border's median color are foreground. Detected blobs are merged by
    union into a single binary mask.
    """
    h, w = image.shape[:2]
    band = max(2, min(h, w) // 10)
    border = np.concatenate(
        [
            image[:band].reshape(-1, 3),
            image[-band:].reshape(-1, 3),
            image[:, :band].reshape(-1, 3),
            image[:, -band:].reshape(-1, 3),
        ]
    )
    reference = np.median(border, axis=0).astype(np.int16)
    distance = np.abs(image.astype(np.int16) - reference).max(axis=2)
    raw = np.where(distance > 40, 255, 0).astype(np.uint8)
    kernel = np.ones((3, 3), dtype=np.uint8)
    cleaned = cv2.morphologyEx(raw, cv2.MORPH_OPEN, kernel)
    return cv2.morphologyEx(cleaned, cv2.MORPH_CLOSE, kernel)


def propagation_fill(
    image: np.ndarray,
    mask: np.ndarray,
    working_resolution: int = 512,
    dither: float = 6.0,
    rng: np.random.Generator | None = None,
) -> np.ndarray:
    """Fill masked pixels by boundary propagation at a working resolution.

    Oversize inputs are filled downscaled and upsampled back; a light
    seeded dither keeps generated regions textured. Every masked pixel is
    rewritten; unmasked pixels are approximately preserved (the client
    restores them exactly).
    """
    if not (mask != 0).any():
        return image.copy()
    h, w = image.shape[:2]
    scale = max(h, w) / working_resolution
    if scale > 1.0:
        small = cv2.resize(image, (round(w / scale), round(h / scale)), interpolation=cv2.INTER_AREA)
        small_mask = cv2.resize(mask, (small.shape[1], small.shape[0]), interpolation=cv2.INTER_NEAREST)
        filled = _propagate(small, small_mask)
        filled = cv2.resize(filled, (w, h), interpolation=cv2.INTER_LINEAR)
    else:
        filled = _propagate(image, mask)
    out = image.copy()
    fill = mask != 0
    values = filled[fill].astype(np.float64)
    if dither > 0.0:
        rng = rng or np.random.default_rng()
        values = values + rng.uniform(-dither, dither, size=values.shape)
    out[fill] = np.clip(np.floor(values + 0.5), 0, 255).astype(np.uint8)
    return out


def _propagate(image: np.ndarray, mask: np.ndarray) -> np.ndarray:
    fill = mask != 0
    if fill.all():
        # nothing known: flat mid-gray is the only defensible fill
        return np.full_like(image, 127)
    value = image.astype(np.float64) * (~fill)[..., None]
    known = (~fill).astype(np.float64)
    ones = np.ones((3, 3), dtype=np.float64)
    while True:
        unknown = known == 0.0
        if not unknown.any():
            break
        counts = cv2.filter2D(known, -1, ones, borderType=cv2.BORDER_CONSTANT)
        sums = cv2.filter2D(value, -1, ones, borderType=cv2.BORDER_CONSTANT)
        frontier = unknown & (counts > 0.0)
        value[frontier] = sums[frontier] / counts[frontier][:, None]
        known[frontier] = 1.0
    blur = cv2.blur(value, (5, 5), borderType=cv2.BORDER_REFLECT)
    value[fill] = blur[fill]
    return np.clip(np.floor(value + 0.5), 0, 255).astype(np.uint8)
