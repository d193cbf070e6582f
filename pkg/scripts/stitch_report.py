#!/usr/bin/env python3
"""Stitching accuracy sweep: pan speed vs transform error, coverage, time.

Each row stitches a 320x240 noise-texture scene with a planted random-walk
camera path and compares estimated transforms against the planted ones.
"""

import argparse
import time

import numpy as np

from remaster.model import Affine2D, TargetSpec, compose, invert
from remaster.stitching import Coverage, stitch_scene
from remaster.synthgen import SceneSpec, generate_scene

CORNERS = np.array([[0.0, 0.0], [319.0, 0.0], [0.0, 239.0], [319.0, 239.0]])


def run_case(max_step: int, frames: int, seed: int) -> dict:
    rng = np.random.default_rng(seed)
    offsets = [(0.0, 0.0)]
    for _ in range(frames - 1):
        offsets.append(
            (
                offsets[-1][0] + float(rng.integers(-max_step, max_step + 1)),
                offsets[-1][1] + float(rng.integers(-3, 4)),
            )
        )
    path = tuple(Affine2D.translation(ox, oy) for ox, oy in offsets)
    spec = SceneSpec(width=320, height=240, frame_count=frames, pattern="noise",
                     seed=seed, camera_path=path)
    scene_frames, gt = generate_scene(spec)
    start = time.perf_counter()
    canvas = stitch_scene(scene_frames, None, TargetSpec(16, 9))
    elapsed = time.perf_counter() - start

    shift = Affine2D.translation(*canvas.origin_offset)
    anchor_inv = invert(gt.true_transforms[0])
    err2 = []
    for est, true in zip(canvas.frame_transforms, gt.true_transforms):
        ref = compose(compose(true, anchor_inv), shift)
        err2.append(((est.apply(CORNERS) - ref.apply(CORNERS)) ** 2).sum(axis=1))
    rms = float(np.sqrt(np.mean(err2)))
    original = int(np.count_nonzero(canvas.coverage == Coverage.ORIGINAL))
    return {
        "rms_px": rms,
        "canvas": f"{canvas.width}x{canvas.height}",
        "original_frac": original / canvas.coverage.size,
        "seconds": elapsed,
    }


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--frames", type=int, default=60)
    parser.add_argument("--seeds", type=int, default=3)
    parser.add_argument("--steps", type=int, nargs="+", default=[2, 8, 20])
    args = parser.parse_args()

    print(f"{'step':>5} {'seed':>5} {'rms_px':>9} {'canvas':>10} {'orig%':>7} {'sec':>6}")
    for step in args.steps:
        for seed in range(args.seeds):
            r = run_case(step, args.frames, seed)
            print(
                f"{step:>5} {seed:>5} {r['rms_px']:>9.4f} {r['canvas']:>10}"
                f" {100 * r['original_frac']:>6.1f} {r['seconds']:>6.2f}"
            )


if __name__ == "__main__":
    main()
