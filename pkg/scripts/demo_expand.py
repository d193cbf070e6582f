#!/usr/bin/env python3
"""Generate a synthetic episode, expand it 4:3 -> 16:9, and report stats.

Writes input frames, expanded frames, and the episode manifest under the
chosen output directory; everything runs with classical backends.
"""

import argparse
import json
import time
from pathlib import Path

from remaster import frames_io
from remaster.model import TargetSpec
from remaster.pipeline import PipelineConfig, expand_video
from remaster.synthgen import SceneSpec, generate_episode, linear_sprite, pan_path


def build_specs(width: int, height: int, frames_per_scene: int) -> list[SceneSpec]:
    n = frames_per_scene
    sprite = linear_sprite(
        "circle", (245, 70, 40), 0.05 * width, (0.2 * width, 0.5 * height), (0.018 * width, 0.0), n
    )
    return [
        SceneSpec(width=width, height=height, frame_count=n, pattern="noise", seed=11,
                  palette=0, camera_path=tuple(pan_path(n, 3, 0)), sprites=(sprite,)),
        SceneSpec(width=width, height=height, frame_count=n, pattern="checkerboard", seed=12,
                  palette=1),
        SceneSpec(width=width, height=height, frame_count=n, pattern="gradient", seed=13,
                  palette=2, camera_path=tuple(pan_path(n, 0, 1))),
    ]


def main() -> None:
    parser = argparse.ArgumentParser(description=__doc__)
    parser.add_argument("--out", default="demo_out", help="output directory")
    parser.add_argument("--width", type=int, default=320)
    parser.add_argument("--height", type=int, default=240)
    parser.add_argument("--frames-per-scene", type=int, default=40)
    parser.add_argument("--workers", type=int, default=2)
    parser.add_argument("--aspect", default="16:9")
    args = parser.parse_args()

    out = Path(args.out)
    episode_frames, truth = generate_episode(build_specs(args.width, args.height, args.frames_per_scene))
    inp = out / "input_frames"
    frames_io.save_frames_dir([f.pixels for f in episode_frames], inp, fps=24.0)
    print(f"generated {len(episode_frames)} frames, planted cuts at {list(truth.cut_indices)}")

    cfg = PipelineConfig(
        input=inp,
        output=out / "expanded_frames",
        aspect=TargetSpec.parse(args.aspect),
        workers=args.workers,
        work_dir=out / "work",
        dump_canvas=True,
    )
    start = time.perf_counter()
    manifest = expand_video(cfg)
    elapsed = time.perf_counter() - start

    print(f"expanded in {elapsed:.1f}s ({len(episode_frames) / elapsed:.1f} frames/s)")
    for scene in manifest["scenes"]:
        status = scene["fallback"] or "ok"
        timings = ", ".join(f"{k} {v:.0f}ms" for k, v in scene["timings_ms"].items())
        print(
            f"  scene {scene['start']:4d}..{scene['end']:4d}  {status:9s}"
            f"  canvas {scene['canvas_width']}x{scene['canvas_height']}"
            f"  generated {scene['generated_pixels']:7d} px  ({timings})"
        )
    print(f"manifest: {out / 'expanded_frames.manifest.json'}")
    print(json.dumps({"frames": len(episode_frames), "seconds": round(elapsed, 2)}))


if __name__ == "__main__":
    main()
