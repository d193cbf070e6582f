"""Command-line entry point.

Subcommands: expand (full pipeline), scenes (cut detection only), synth
(synthetic test scenes), stitch-debug (dump one scene's canvas/coverage).
Exit codes: 0 success, 1 input error, 2 environment error, 3 internal
invariant violation.
"""

from __future__ import annotations

import argparse
import json
import sys
from pathlib import Path

import numpy as np

from . import frames_io
from .errors import InputError, InvariantViolation, MissingToolError
from .masking import build_median_model, classical_mask
from .model import TargetSpec
from .pipeline import BACKENDS, PipelineConfig, expand_video
from .scenes import SceneDetectConfig, detect_scenes
from .stitching import RansacConfig, stitch_scene
from .synthgen import episode_specs_from_json, generate_episode

EXIT_OK = 0
EXIT_INPUT = 1
EXIT_ENVIRONMENT = 2
EXIT_INVARIANT = 3


def _parse_aspect(text: str) -> TargetSpec:
    try:
        return TargetSpec.parse(text)
    except ValueError as exc:
        raise InputError(str(exc)) from exc


def _add_scene_flags(parser: argparse.ArgumentParser) -> None:
    parser.add_argument("--scene-threshold", type=float, default=27.0)
    parser.add_argument("--min-scene-len", type=int, default=15)


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="remaster", description=__doc__)
    sub = parser.add_subparsers(dest="command", required=True)

    expand = sub.add_parser("expand", help="expand a video or frame directory")
    expand.add_argument("--input", required=True, help="video file or PNG frame directory")
    expand.add_argument("--output", required=True, help="output file or directory")
    expand.add_argument("--aspect", default="16:9")
    _add_scene_flags(expand)
    expand.add_argument("--masker", choices=BACKENDS, default="classical")
    expand.add_argument("--outpainter", choices=BACKENDS, default="classical")
    expand.add_argument("--sidecar-url", default="http://127.0.0.1:8765")
    expand.add_argument("--prompt", default="animated background")
    expand.add_argument("--workers", type=int, default=1)
    expand.add_argument("--work-dir", default=None)
    expand.add_argument("--dump-canvas", action="store_true")

    scenes = sub.add_parser("scenes", help="print detected scene cuts")
    scenes.add_argument("--input", required=True)
    _add_scene_flags(scenes)

    synth = sub.add_parser("synth", help="generate a synthetic test scene")
    synth.add_argument("--spec", required=True, help="scene/episode spec JSON file")
    synth.add_argument("--out", required=True, help="output directory")

    debug = sub.add_parser("stitch-debug", help="dump canvas and coverage for one scene")
    debug.add_argument("--input", required=True)
    debug.add_argument("--out", required=True)
    debug.add_argument("--scene-index", type=int, default=0)
    debug.add_argument("--aspect", default="16:9")
    _add_scene_flags(debug)

    return parser


def _cmd_expand(args: argparse.Namespace) -> int:
    cfg = PipelineConfig(
        input=Path(args.input),
        output=Path(args.output),
        aspect=_parse_aspect(args.aspect),
        scene=SceneDetectConfig(threshold=args.scene_threshold, min_scene_len=args.min_scene_len),
        masker=args.masker,
        outpainter=args.outpainter,
        sidecar_url=args.sidecar_url,
        prompt=args.prompt,
        workers=args.workers,
        work_dir=Path(args.work_dir) if args.work_dir else None,
        dump_canvas=args.dump_canvas,
    )
    episode = expand_video(cfg)
    fallbacks = sum(1 for s in episode["scenes"] if s["fallback"])
    print(
        f"expanded {len(episode['scenes'])} scenes -> {args.output}"
        + (f" ({fallbacks} pillarboxed)" if fallbacks else "")
    )
    return EXIT_OK


def _cmd_scenes(args: argparse.Namespace) -> int:
    frames, _ = frames_io.decode_video(Path(args.input))
    cfg = SceneDetectConfig(threshold=args.scene_threshold, min_scene_len=args.min_scene_len)
    clips = detect_scenes(frames, cfg)
    for clip in clips:
        print(f"scene {clip.start:6d} .. {clip.end:6d}  ({len(clip)} frames)")
    return EXIT_OK


def _cmd_synth(args: argparse.Namespace) -> int:
    spec_path = Path(args.spec)
    if not spec_path.exists():
        raise InputError(f"spec file {spec_path} does not exist")
    specs = episode_specs_from_json(json.loads(spec_path.read_text()))
    frames, truth = generate_episode(specs)
    out = Path(args.out)
    frames_io.save_frames_dir([f.pixels for f in frames], out / "frames")
    gt: dict = {"cut_indices": list(truth.cut_indices), "scenes": []}
    for k, scene in enumerate(truth.scenes):
        mask_dir = out / "masks" / f"scene_{k:03d}"
        for i, mask in enumerate(scene.true_sprite_masks):
            frames_io.save_png(mask.values, mask_dir / f"{i:06d}.png")
        frames_io.save_png(scene.true_background, out / f"background_{k:03d}.png")
        gt["scenes"].append(
            {
                "background": f"background_{k:03d}.png",
                "transforms": [list(t.coeffs()) for t in scene.true_transforms],
                "mask_dir": str(mask_dir.relative_to(out)),
            }
        )
    (out / "ground_truth.json").write_text(json.dumps(gt, indent=2))
    print(f"wrote {len(frames)} frames and ground truth to {out}")
    return EXIT_OK


def _cmd_stitch_debug(args: argparse.Namespace) -> int:
    frames, _ = frames_io.decode_video(Path(args.input))
    cfg = SceneDetectConfig(threshold=args.scene_threshold, min_scene_len=args.min_scene_len)
    clips = detect_scenes(frames, cfg)
    if not 0 <= args.scene_index < len(clips):
        raise InputError(f"scene index {args.scene_index} out of range ({len(clips)} scenes)")
    clip = clips[args.scene_index]
    model = build_median_model(clip.frames)
    masks = [classical_mask(f, model) for f in clip.frames]
    canvas = stitch_scene(clip.frames, masks, _parse_aspect(args.aspect), RansacConfig())
    out = Path(args.out)
    frames_io.save_png(canvas.background, out / "canvas.png")
    frames_io.save_png(
        np.repeat((canvas.coverage * 127)[..., None].astype(np.uint8), 3, axis=2),
        out / "coverage.png",
    )
    print(
        f"scene {clip.start}..{clip.end}: canvas {canvas.width}x{canvas.height}, "
        f"{canvas.unknown_count()} unknown cells -> {out}"
    )
    return EXIT_OK


def main(argv: list[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    handlers = {
        "expand": _cmd_expand,
        "scenes": _cmd_scenes,
        "synth": _cmd_synth,
        "stitch-debug": _cmd_stitch_debug,
    }
    try:
        return handlers[args.command](args)
    except InputError as exc:
        print(f"input error: {exc}", file=sys.stderr)
        return EXIT_INPUT
    except MissingToolError as exc:
        print(f"environment error: {exc}", file=sys.stderr)
        return EXIT_ENVIRONMENT
    except InvariantViolation as exc:
        print(f"internal invariant violation: {exc}", file=sys.stderr)
        return EXIT_INVARIANT


if __name__ == "__main__":
    sys.exit(main())
