"""Frame I/O: numbered-PNG directories and the ffmpeg subprocess edge.

The pipeline's intermediates are always PNG frames (bit-exact,
restartable); ffmpeg is touched only to decode/encode real video files
and to copy the audio stream through.
"""

from __future__ import annotations

import json
import re
import shutil
import subprocess
from pathlib import Path

import numpy as np
from PIL import Image

from .errors import InputError, MissingToolError
from .model import Frame

__all__ = [
    "load_frames_dir",
    "save_frames_dir",
    "load_png",
    "save_png",
    "decode_video",
    "encode_video",
    "DEFAULT_FPS",
]

DEFAULT_FPS = 30.0

_INSTALL_HINT = "install ffmpeg and ensure it is on PATH (e.g. apt install ffmpeg)"


def load_png(path: Path) -> np.ndarray:
    try:
        with Image.open(path) as img:
            return np.asarray(img.convert("RGB"), dtype=np.uint8)
    except (OSError, ValueError) as exc:
        raise InputError(f"cannot decode {path}: {exc}") from exc


def save_png(raster: np.ndarray, path: Path) -> None:
    path.parent.mkdir(parents=True, exist_ok=True)
    Image.fromarray(raster).save(path, format="PNG")


def _numeric_key(path: Path) -> tuple:
    digits = re.findall(r"\d+", path.stem)
    return (int(digits[-1]),) if digits else (float("inf"), path.stem)


def load_frames_dir(path: Path) -> tuple[list[Frame], float | None]:
    """Frames from a directory of numbered PNGs, in numeric order.

    fps is read from a frame-rate sidecar (meta.json with {"fps": ...})
    when present, else None.
    """
    files = sorted(path.glob("*.png"), key=_numeric_key)
    if not files:
        raise InputError(f"no PNG frames found in {path}")
    rasters = [load_png(f) for f in files]
    dims = {r.shape for r in rasters}
    if len(dims) != 1:
        raise InputError(f"frames in {path} have mixed dimensions: {sorted(dims)}")
    fps = None
    meta = path / "meta.json"
    if meta.exists():
        try:
            fps = float(json.loads(meta.read_text()).get("fps"))
        except (ValueError, TypeError, json.JSONDecodeError):
            fps = None
    return [Frame(pixels=r, index=i) for i, r in enumerate(rasters)], fps


def save_frames_dir(rasters: list[np.ndarray], path: Path, fps: float | None = None) -> None:
    path.mkdir(parents=True, exist_ok=True)
    for i, raster in enumerate(rasters):
        save_png(raster, path / f"{i:06d}.png")
    if fps is not None:
        (path / "meta.json").write_text(json.dumps({"fps": fps}))


def _require_ffmpeg() -> str:
    binary = shutil.which("ffmpeg")
    if binary is None:
        raise MissingToolError(f"ffmpeg not found; {_INSTALL_HINT}")
    return binary


def _probe_video(path: Path) -> tuple[int, int, float]:
    ffprobe = shutil.which("ffprobe")
    if ffprobe is None:
        raise MissingToolError(f"ffprobe not found; {_INSTALL_HINT}")
    cmd = [
        ffprobe,
        "-v",
        "error",
        "-select_streams",
        "v:0",
        "-show_entries",
        "stream=width,height,r_frame_rate",
        "-of",
        "json",
        str(path),
    ]
    proc = subprocess.run(cmd, capture_output=True, text=True)
    if proc.returncode != 0:
        raise InputError(f"ffprobe failed on {path}: {proc.stderr.strip()}")
    try:
        stream = json.loads(proc.stdout)["streams"][0]
        width, height = int(stream["width"]), int(stream["height"])
        num, den = stream["r_frame_rate"].split("/")
        fps = float(num) / float(den)
    except (KeyError, IndexError, ValueError, ZeroDivisionError) as exc:
        raise InputError(f"cannot parse stream info for {path}") from exc
    return width, height, fps


def decode_video(path: Path) -> tuple[list[Frame], float | None]:
    """Decode an input into RGB frames plus fps metadata.

    Directories are read as numbered PNG frames; files go through ffmpeg
    as raw RGB24.
    """
    path = Path(path)
    if not path.exists():
        raise InputError(f"input {path} does not exist")
    if path.is_dir():
        return load_frames_dir(path)
    ffmpeg = _require_ffmpeg()
    width, height, fps = _probe_video(path)
    cmd = [
        ffmpeg,
        "-v",
        "error",
        "-i",
        str(path),
        "-f",
        "rawvideo",
        "-pix_fmt",
        "rgb24",
        "-",
    ]
    proc = subprocess.run(cmd, capture_output=True)
    if proc.returncode != 0:
        raise InputError(f"ffmpeg decode failed on {path}: {proc.stderr.decode().strip()}")
    frame_bytes = width * height * 3
    total = len(proc.stdout)
    if total == 0 or total % frame_bytes != 0:
        raise InputError(f"unexpected decoded payload size {total} for {path}")
    count = total // frame_bytes
    data = np.frombuffer(proc.stdout, dtype=np.uint8).reshape(count, height, width, 3)
    return [Frame(pixels=data[i].copy(), index=i) for i in range(count)], fps


def encode_video(
    rasters: list[np.ndarray], fps: float, path: Path, audio_source: Path | None = None
) -> None:
    """Encode rasters to a video file, copying audio from the source when
    present."""
    ffmpeg = _require_ffmpeg()
    h, w = rasters[0].shape[:2]
    cmd = [
        ffmpeg,
        "-v",
        "error",
        "-y",
        "-f",
        "rawvideo",
        "-pix_fmt",
        "rgb24",
        "-s",
        f"{w}x{h}",
        "-r",
        f"{fps}",
        "-i",
        "-",
    ]
    if audio_source is not None:
        cmd += ["-i", str(audio_source), "-map", "0:v", "-map", "1:a?", "-c:a", "copy"]
    cmd += ["-pix_fmt", "yuv420p", str(path)]
    payload = b"".join(np.ascontiguousarray(r).tobytes() for r in rasters)
    proc = subprocess.run(cmd, input=payload, capture_output=True)
    if proc.returncode != 0:
        raise InputError(f"ffmpeg encode failed: {proc.stderr.decode().strip()}")
