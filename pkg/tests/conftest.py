import numpy as np

from remaster.model import Frame, Mask


def solid_frame(width: int, height: int, color, index: int = 0) -> Frame:
    raster = np.empty((height, width, 3), dtype=np.uint8)
    raster[:] = np.asarray(color, dtype=np.uint8)
    return Frame(pixels=raster, index=index)


def random_frame(rng: np.random.Generator, width: int, height: int, index: int = 0) -> Frame:
    return Frame(pixels=rng.integers(0, 256, (height, width, 3), dtype=np.uint8), index=index)


def random_mask(rng: np.random.Generator, width: int, height: int) -> Mask:
    return Mask(np.where(rng.random((height, width)) < 0.3, 255, 0).astype(np.uint8))


def psnr(a: np.ndarray, b: np.ndarray) -> float:
    mse = float(np.mean((a.astype(np.float64) - b.astype(np.float64)) ** 2))
    if mse == 0.0:
        return float("inf")
    return 10.0 * np.log10(255.0**2 / mse)


def iou(a: np.ndarray, b: np.ndarray) -> float:
    a = a != 0
    b = b != 0
    union = np.count_nonzero(a | b)
    if union == 0:
        return 1.0
    return np.count_nonzero(a & b) / union
