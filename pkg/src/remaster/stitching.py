"""Per-scene transform estimation and panoramic background compositing.

Frame-to-frame transforms are estimated from corner keypoints with a Lowe
ratio test and RANSAC affine fitting, chained into a scene coordinate
system anchored at frame 0, then background pixels are composited into a
canvas with first-write-wins semantics. The canvas tracks a per-cell
coverage state (UNKNOWN / ORIGINAL / GENERATED) that the outpainting and
resampling stages rely on.

The keypoint detector is a minimum-eigenvalue (Shi-Tomasi) corner detector
with quadratic sub-pixel refinement and normalized intensity-patch
descriptors: deterministic, and responsive on checkerboard junctions where
segment-test detectors stay silent.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import cv2
import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionMismatchError, StitchingFailure
from .model import (
    Affine2D,
    Frame,
    Mask,
    PixelRect,
    TargetSpec,
    bilinear_values,
    compose,
    expansion_margins,
    invert,
    round_half_up,
    target_dimensions,
)

__all__ = [
    "Keypoint",
    "MatchPair",
    "RansacConfig",
    "CanvasState",
    "Coverage",
    "detect_keypoints",
    "match_descriptors",
    "estimate_affine_ransac",
    "estimate_translation",
    "stitch_scene",
    "expanded_frame_rect",
]


class Coverage:
    """Canvas coverage codes. Cells never regress toward UNKNOWN."""

    UNKNOWN = 0
    ORIGINAL = 1
    GENERATED = 2


# Scene transforms with |det| outside this window are degenerate scale
# estimates and rejected in favor of the fallbacks.
DET_RANGE = (0.25, 4.0)

PATCH_RADIUS = 6  # 13x13 descriptor patches
_BORDER = PATCH_RADIUS + 2


@dataclass(frozen=True)
class Keypoint:
    x: float
    y: float
    response: float
    descriptor: np.ndarray = field(repr=False)


@dataclass(frozen=True)
class MatchPair:
    src_idx: int
    dst_idx: int
    distance: float


@dataclass(frozen=True)
class RansacConfig:
    inlier_threshold: float = 2.0
    max_iterations: int = 1000
    ratio_test: float = 0.75
    min_inliers: int = 12
    seed: int = 0  # internal sampling seed; fixed for reproducible pipelines

    def __post_init__(self) -> None:
        if self.inlier_threshold <= 0:
            raise ValueError("inlier_threshold must be positive")
        if not 0.0 < self.ratio_test < 1.0:
            raise ValueError("ratio_test must be in (0, 1)")


@dataclass
class CanvasState:
    """Panoramic background plus coverage bookkeeping for one scene."""

    background: np.ndarray  # (H, W, 3) uint8
    coverage: np.ndarray  # (H, W) uint8 of Coverage codes
    origin_offset: tuple[int, int]  # canvas coords of frame 0's top-left
    frame_transforms: list[Affine2D]  # frame coords -> canvas coords
    frame_width: int
    frame_height: int

    @property
    def width(self) -> int:
        return self.background.shape[1]

    @property
    def height(self) -> int:
        return self.background.shape[0]

    def unknown_count(self) -> int:
        return int(np.count_nonzero(self.coverage == Coverage.UNKNOWN))


def _grayscale(frame: Frame) -> np.ndarray:
    return cv2.cvtColor(frame.pixels, cv2.COLOR_RGB2GRAY)


def detect_keypoints(frame: Frame, max_count: int = 500) -> list[Keypoint]:
    """Up to max_count corners ordered by response, with patch descriptors.

    Deterministic for identical inputs; featureless frames give an empty
    list. Corner positions are refined to sub-pixel by a quadratic fit.
    """
    gray = _grayscale(frame)
    response = cv2.cornerMinEigenVal(gray, blockSize=3, ksize=3)
    h, w = response.shape
    if h <= 2 * _BORDER or w <= 2 * _BORDER:
        return []
    # non-max suppression over 3x3; the absolute floor kills flat frames
    # (cornerMinEigenVal responses are normalized, ~1e-3 on textured input)
    local_max = cv2.dilate(response, np.ones((3, 3), dtype=np.uint8))
    floor = max(1e-5, 0.01 * float(response.max()))
    peaks = (response >= local_max) & (response > floor)
    peaks[:_BORDER, :] = False
    peaks[-_BORDER:, :] = False
    peaks[:, :_BORDER] = False
    peaks[:, -_BORDER:] = False
    ys, xs = np.nonzero(peaks)
    if len(xs) == 0:
        return []
    resp = response[ys, xs]
    order = np.lexsort((xs, ys, -resp))[:max_count]
    ys, xs, resp = ys[order], xs[order], resp[order]

    gray_f = gray.astype(np.float32)
    keypoints: list[Keypoint] = []
    for x, y, r in zip(xs, ys, resp):
        # 1-D quadratic peak fit per axis, clamped to half a pixel
        dx = _subpixel_offset(response[y, x - 1], response[y, x], response[y, x + 1])
        dy = _subpixel_offset(response[y - 1, x], response[y, x], response[y + 1, x])
        patch = gray_f[
            y - PATCH_RADIUS : y + PATCH_RADIUS + 1, x - PATCH_RADIUS : x + PATCH_RADIUS + 1
        ].reshape(-1)
        patch = patch - patch.mean()
        norm = float(np.linalg.norm(patch))
        if norm < 1e-6:
            continue
        keypoints.append(
            Keypoint(
                x=float(x) + dx,
                y=float(y) + dy,
                response=float(r),
                descriptor=(patch / norm).astype(np.float32),
            )
        )
    return keypoints


def _subpixel_offset(left: float, center: float, right: float) -> float:
    denom = left - 2.0 * center + right
    if abs(denom) < 1e-12:
        return 0.0
    offset = 0.5 * (left - right) / denom
    return float(np.clip(offset, -0.5, 0.5))


def match_descriptors(
    a: list[Keypoint], b: list[Keypoint], ratio: float = 0.75
) -> list[MatchPair]:
    """Nearest-neighbor matches from a into b passing the Lowe ratio test."""
    if not a or len(b) < 2:
        return []
    da = np.stack([kp.descriptor for kp in a]).astype(np.float64)
    db = np.stack([kp.descriptor for kp in b]).astype(np.float64)
    dist = cdist(da, db)  # exact pairwise L2: identical descriptors give 0
    order = np.argsort(dist, axis=1)
    best = order[:, 0]
    d1 = dist[np.arange(len(a)), best]
    d2 = dist[np.arange(len(a)), order[:, 1]]
    matches = []
    for i, (j, nearest, second) in enumerate(zip(best, d1, d2)):
        if nearest < ratio * second:
            matches.append(MatchPair(src_idx=i, dst_idx=int(j), distance=float(nearest)))
    return matches


def _fit_affine_lstsq(src: np.ndarray, dst: np.ndarray) -> Affine2D:
    design = np.column_stack([src, np.ones(len(src))])
    sol, *_ = np.linalg.lstsq(design, dst, rcond=None)
    return Affine2D(
        a=sol[0, 0], b=sol[1, 0], tx=sol[2, 0], c=sol[0, 1], d=sol[1, 1], ty=sol[2, 1]
    )


def estimate_affine_ransac(
    src_pts: np.ndarray, dst_pts: np.ndarray, cfg: RansacConfig | None = None
) -> tuple[Affine2D, np.ndarray]:
    """RANSAC 6-dof affine fit mapping src points onto dst points.

    Samples 3 non-collinear correspondences per iteration, scores inliers by
    reprojection distance, then least-squares refits on the best consensus
    set. Returns the refit transform and the consensus inlier flags.
    Raises StitchingFailure when under 3 matches or min_inliers is not met.
    """
    cfg = cfg or RansacConfig()
    src = np.asarray(src_pts, dtype=np.float64).reshape(-1, 2)
    dst = np.asarray(dst_pts, dtype=np.float64).reshape(-1, 2)
    if src.shape != dst.shape:
        raise ValueError("src/dst point counts differ")
    n = len(src)
    if n < 3:
        raise StitchingFailure(f"need at least 3 correspondences, got {n}")
    rng = np.random.default_rng(cfg.seed)
    # all iterations batched; samples with repeated indices or collinear
    # source triples are degenerate and score nothing
    picks = rng.integers(0, n, size=(cfg.max_iterations, 3))
    distinct = (
        (picks[:, 0] != picks[:, 1]) & (picks[:, 0] != picks[:, 2]) & (picks[:, 1] != picks[:, 2])
    )
    design = np.concatenate(
        [src[picks], np.ones((cfg.max_iterations, 3, 1))], axis=2
    )
    dets = np.abs(np.linalg.det(design))
    valid = distinct & (dets > 1e-9)
    if not valid.any():
        raise StitchingFailure("no usable minimal samples")
    sols = np.linalg.solve(design[valid], dst[picks[valid]])  # (v, 3, 2)
    mapped_x = src[:, 0:1] * sols[None, :, 0, 0] + src[:, 1:2] * sols[None, :, 1, 0] + sols[None, :, 2, 0]
    mapped_y = src[:, 0:1] * sols[None, :, 0, 1] + src[:, 1:2] * sols[None, :, 1, 1] + sols[None, :, 2, 1]
    err2 = (mapped_x - dst[:, 0:1]) ** 2 + (mapped_y - dst[:, 1:2]) ** 2  # (n, v)
    inliers = err2 < cfg.inlier_threshold**2
    counts = inliers.sum(axis=0)
    best = int(np.argmax(counts))  # earliest maximal sample, deterministic
    best_count = int(counts[best])
    if best_count < max(3, cfg.min_inliers):
        raise StitchingFailure(f"consensus too small ({best_count} inliers)")
    best_flags = inliers[:, best]
    transform = _fit_affine_lstsq(src[best_flags], dst[best_flags])
    return transform, best_flags


def estimate_translation(
    src_gray: np.ndarray, dst_gray: np.ndarray, max_shift: int = 32
) -> tuple[Affine2D, float]:
    """Integer-grid translation (src frame -> dst frame) by NCC search.

    Center-crops the source by max_shift on every side and slides it over
    the destination with normalized cross-correlation; the peak location
    gives the shift. Returns (translation, peak score in [-1, 1]).
    """
    if src_gray.shape != dst_gray.shape:
        raise DimensionMismatchError("translation estimation needs equal dims")
    h, w = src_gray.shape
    # keep the template a substantial crop or the correlation peak is noise
    shift = min(max_shift, h // 4, w // 4)
    if shift < 1:
        return Affine2D.identity(), -1.0
    template = src_gray[shift : h - shift, shift : w - shift]
    scores = cv2.matchTemplate(dst_gray, template, cv2.TM_CCOEFF_NORMED)
    _, peak, _, loc = cv2.minMaxLoc(scores)
    dx = float(loc[0] - shift)
    dy = float(loc[1] - shift)
    return Affine2D.translation(dx, dy), float(peak)


def expanded_frame_rect(canvas: CanvasState, frame_idx: int, target: TargetSpec) -> PixelRect:
    """Canvas-cell rect covering frame_idx's output lattice at target dims."""
    t = canvas.frame_transforms[frame_idx]
    return _expanded_rect_for(t, canvas.frame_width, canvas.frame_height, target)


def _expanded_rect_for(t: Affine2D, frame_w: int, frame_h: int, target: TargetSpec) -> PixelRect:
    target_w, target_h = target_dimensions(frame_w, frame_h, target)
    left, _ = expansion_margins(frame_w, target_w)
    corners = np.array(
        [
            [-left, 0.0],
            [-left + target_w - 1.0, 0.0],
            [-left, target_h - 1.0],
            [-left + target_w - 1.0, target_h - 1.0],
        ]
    )
    return PixelRect.covering_points(t.apply(corners))


@dataclass(frozen=True)
class _PairEstimate:
    transform: Affine2D
    inliers: int
    method: str  # "ransac" | "ncc" | "carry"


def _estimate_pair(
    kps_src: list[Keypoint],
    kps_dst: list[Keypoint],
    gray_src: np.ndarray,
    gray_dst: np.ndarray,
    cfg: RansacConfig,
    prev: Affine2D,
) -> _PairEstimate:
    """Transform mapping src-frame coords into dst-frame coords."""
    try:
        matches = match_descriptors(kps_src, kps_dst, cfg.ratio_test)
        if len(matches) < 3:
            raise StitchingFailure(f"{len(matches)} matches")
        src = np.array([[kps_src[m.src_idx].x, kps_src[m.src_idx].y] for m in matches])
        dst = np.array([[kps_dst[m.dst_idx].x, kps_dst[m.dst_idx].y] for m in matches])
        transform, flags = estimate_affine_ransac(src, dst, cfg)
        if not DET_RANGE[0] <= abs(transform.det) <= DET_RANGE[1]:
            raise StitchingFailure(f"degenerate determinant {transform.det:.3f}")
        return _PairEstimate(transform, int(np.count_nonzero(flags)), "ransac")
    except StitchingFailure:
        pass
    translation, score = estimate_translation(gray_src, gray_dst)
    if score >= 0.3:
        return _PairEstimate(translation, 0, "ncc")
    return _PairEstimate(prev, 0, "carry")


REANCHOR_EVERY = 30

# Least-squares refits on exact correspondences leave ~1e-14 arithmetic
# fuzz; snapping keeps static scenes exactly static and canvas rects tight.
_SNAP_EPS = 1e-9


def _snap_near_integers(t: Affine2D) -> Affine2D:
    snapped = [round(c) if abs(c - round(c)) < _SNAP_EPS else c for c in t.coeffs()]
    return Affine2D(*[float(c) for c in snapped])


def estimate_scene_transforms(
    frames: list[Frame], fg_masks: list[Mask] | None, cfg: RansacConfig | None = None
) -> tuple[list[Affine2D], list[str]]:
    """Chain pairwise estimates into frame -> frame-0 transforms.

    Consecutive-pair composition accumulates drift, so every REANCHOR_EVERY
    frames the transform is also estimated directly against frame 0 and
    adopted when its consensus is at least as strong as the pairwise one.
    Foreground-masked keypoints are excluded on both sides of each pair.
    """
    cfg = cfg or RansacConfig()
    grays = [_grayscale(f) for f in frames]
    dilated = _dilated_masks(fg_masks, frames)
    keypoints = [
        _background_keypoints(frame, mask) for frame, mask in zip(frames, dilated)
    ]
    chain: list[Affine2D] = [Affine2D.identity()]
    methods: list[str] = ["anchor"]
    prev_pair = Affine2D.identity()
    for i in range(1, len(frames)):
        pair = _estimate_pair(
            keypoints[i], keypoints[i - 1], grays[i], grays[i - 1], cfg, prev_pair
        )
        prev_pair = pair.transform
        chained = compose(pair.transform, chain[i - 1])
        method = pair.method
        if i % REANCHOR_EVERY == 0:
            direct = _direct_anchor(keypoints[i], keypoints[0], cfg)
            if direct is not None and direct.inliers >= pair.inliers:
                chained = direct.transform
                method = "reanchor"
        chain.append(_snap_near_integers(chained))
        methods.append(method)
    return chain, methods


def _direct_anchor(
    kps: list[Keypoint], kps0: list[Keypoint], cfg: RansacConfig
) -> _PairEstimate | None:
    try:
        matches = match_descriptors(kps, kps0, cfg.ratio_test)
        if len(matches) < 3:
            return None
        src = np.array([[kps[m.src_idx].x, kps[m.src_idx].y] for m in matches])
        dst = np.array([[kps0[m.dst_idx].x, kps0[m.dst_idx].y] for m in matches])
        transform, flags = estimate_affine_ransac(src, dst, cfg)
        if not DET_RANGE[0] <= abs(transform.det) <= DET_RANGE[1]:
            return None
        return _PairEstimate(transform, int(np.count_nonzero(flags)), "reanchor")
    except StitchingFailure:
        return None


def _dilated_masks(fg_masks: list[Mask] | None, frames: list[Frame]) -> list[np.ndarray]:
    # 2 px dilation absorbs slightly-off mask boundaries before exclusion
    if fg_masks is None:
        return [np.zeros((f.height, f.width), dtype=np.uint8) for f in frames]
    if len(fg_masks) != len(frames):
        raise DimensionMismatchError("one foreground mask per frame required")
    kernel = np.ones((5, 5), dtype=np.uint8)
    out = []
    for frame, mask in zip(frames, fg_masks):
        if (mask.height, mask.width) != (frame.height, frame.width):
            raise DimensionMismatchError("mask dimensions must match frame")
        out.append(cv2.dilate(mask.values, kernel))
    return out


def _background_keypoints(frame: Frame, dilated_mask: np.ndarray) -> list[Keypoint]:
    kps = detect_keypoints(frame)
    if not dilated_mask.any():
        return kps
    return [
        kp
        for kp in kps
        if dilated_mask[int(round(kp.y)), int(round(kp.x))] == 0
    ]


def stitch_scene(
    frames: list[Frame],
    fg_masks: list[Mask] | None,
    target: TargetSpec,
    cfg: RansacConfig | None = None,
    transforms: list[Affine2D] | None = None,
) -> CanvasState:
    """Composite a scene's background pixels into a panoramic canvas.

    Canvas extent is the bounding box of every frame's expanded rect in
    frame-0 coordinates. Compositing walks frames in order and writes each
    background pixel only into still-UNKNOWN cells (first-write-wins), so
    early frames are the reference and later frames only fill new ground.

    ``transforms`` (frame -> frame-0 coords, one per frame) skips the
    estimation pass, e.g. to rebuild a canvas from manifest coefficients.
    """
    if not frames:
        raise ValueError("cannot stitch an empty scene")
    cfg = cfg or RansacConfig()
    if transforms is not None:
        if len(transforms) != len(frames):
            raise ValueError("one transform per frame required")
        chain = list(transforms)
    else:
        chain, _ = estimate_scene_transforms(frames, fg_masks, cfg)
    frame_w, frame_h = frames[0].width, frames[0].height

    rects = [_expanded_rect_for(t, frame_w, frame_h, target) for t in chain]
    x0 = min(r.x0 for r in rects)
    y0 = min(r.y0 for r in rects)
    x1 = max(r.x1 for r in rects)
    y1 = max(r.y1 for r in rects)
    origin = (-x0, -y0)
    shift = Affine2D.translation(*origin)
    transforms = [compose(t, shift) for t in chain]

    canvas = CanvasState(
        background=np.zeros((y1 - y0, x1 - x0, 3), dtype=np.uint8),
        coverage=np.zeros((y1 - y0, x1 - x0), dtype=np.uint8),
        origin_offset=origin,
        frame_transforms=transforms,
        frame_width=frame_w,
        frame_height=frame_h,
    )
    dilated = _dilated_masks(fg_masks, frames)
    for frame, transform, fg in zip(frames, transforms, dilated):
        _composite_frame(canvas, frame, transform, fg)
    return canvas


def _composite_frame(
    canvas: CanvasState, frame: Frame, transform: Affine2D, dilated_fg: np.ndarray
) -> None:
    corners = _frame_corner_points(frame.width, frame.height)
    rect = PixelRect.covering_points(transform.apply(corners)).clipped(
        canvas.width, canvas.height
    )
    inv = invert(transform)
    ys, xs = np.mgrid[rect.y0 : rect.y1, rect.x0 : rect.x1].astype(np.float64)
    fx, fy = inv.apply_xy(xs, ys)
    valid = (fx >= 0.0) & (fx <= frame.width - 1.0) & (fy >= 0.0) & (fy <= frame.height - 1.0)
    cov_slice = canvas.coverage[rect.as_slices()]
    write = valid & (cov_slice == Coverage.UNKNOWN)
    if dilated_fg.any():
        fg_level = np.zeros_like(fx)
        fg_level[valid] = bilinear_values(dilated_fg, fx[valid], fy[valid])
        write &= fg_level == 0.0
    if not write.any():
        return
    samples = bilinear_values(frame.pixels, fx[write], fy[write])
    samples = np.clip(round_half_up(samples), 0, 255).astype(np.uint8)
    canvas.background[rect.as_slices()][write] = samples
    cov_slice[write] = Coverage.ORIGINAL


def _frame_corner_points(w: int, h: int) -> np.ndarray:
    return np.array(
        [[0.0, 0.0], [w - 1.0, 0.0], [0.0, h - 1.0], [w - 1.0, h - 1.0]], dtype=np.float64
    )
