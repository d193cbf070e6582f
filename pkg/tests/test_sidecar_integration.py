"""Integration against a live sidecar process ([SECONDARY] conformance).

Spawns `python -m sidecar` on a free port and exercises the primary's
remote clients plus a full remote-backend scene run. Skips when the
sidecar package is not installed.
"""

import socket
import subprocess
import sys
import time
from pathlib import Path

import numpy as np
import pytest
import requests

pytest.importorskip("sidecar", reason="sidecar package not installed")

from remaster.masking import RemoteClientConfig, png_b64_decode, png_b64_encode, remote_mask
from remaster.model import Frame, Mask
from remaster.outpainting import OutpaintRequest, remote_outpaint
from remaster.pipeline import PipelineConfig, run_scene
from remaster.scenes import SceneClip
from remaster.synthgen import SceneSpec, generate_scene, linear_sprite


def _free_port() -> int:
    with socket.socket() as s:
        s.bind(("127.0.0.1", 0))
        return s.getsockname()[1]


@pytest.fixture(scope="module")
def sidecar_url():
    port = _free_port()
    proc = subprocess.Popen(
        [sys.executable, "-m", "sidecar", "--port", str(port)],
        stdout=subprocess.DEVNULL,
        stderr=subprocess.DEVNULL,
    )
    url = f"http://127.0.0.1:{port}"
    try:
        deadline = time.time() + 30.0
        while True:
            try:
                if requests.get(f"{url}/health", timeout=1.0).status_code == 200:
                    break
            except requests.RequestException:
                pass
            if time.time() > deadline:
                proc.terminate()
                pytest.fail("sidecar did not become healthy in 30s")
            time.sleep(0.2)
        yield url
    finally:
        proc.terminate()
        proc.wait(timeout=10)


@pytest.fixture
def client_cfg(sidecar_url):
    return RemoteClientConfig(endpoint=sidecar_url, mask_timeout=10.0, outpaint_timeout=30.0)


def test_health_reports_models(sidecar_url):
    data = requests.get(f"{sidecar_url}/health", timeout=5.0).json()
    assert data["status"] == "ok"
    assert data["models"] == {"mask": True, "outpaint": True}


def test_remote_mask_conformance(client_cfg):
    blank = Frame(np.full((48, 64, 3), 60, dtype=np.uint8))
    mask = remote_mask(blank, client_cfg)
    assert (mask.height, mask.width) == (48, 64)
    assert mask.set_count == 0


def test_remote_outpaint_empty_mask_bit_exact(client_cfg):
    rng = np.random.default_rng(0)
    patch = rng.integers(0, 256, (40, 56, 3), dtype=np.uint8)
    request = OutpaintRequest(patch=patch, mask=Mask.zeros(56, 40))
    assert np.array_equal(remote_outpaint(request, client_cfg), patch)


def test_remote_outpaint_fills_masked_region(client_cfg):
    rng = np.random.default_rng(1)
    patch = rng.integers(20, 90, (48, 72, 3), dtype=np.uint8)
    sentinel = np.array((255, 0, 255), dtype=np.uint8)
    patch[:, 56:] = sentinel
    mask = np.zeros((48, 72), dtype=np.uint8)
    mask[:, 56:] = 255
    result = remote_outpaint(OutpaintRequest(patch=patch, mask=Mask(mask)), client_cfg)
    keep = mask == 0
    assert np.array_equal(result[keep], patch[keep])  # client re-composite
    filled = result[:, 56:]
    assert not (filled == sentinel).all(axis=2).any()  # full fill


def test_wire_dimension_contract(sidecar_url):
    image = np.zeros((31, 45, 3), dtype=np.uint8)
    resp = requests.post(
        f"{sidecar_url}/mask", json={"image_png_b64": png_b64_encode(image)}, timeout=10.0
    )
    mask = png_b64_decode(resp.json()["mask_png_b64"], grayscale=True)
    assert mask.shape == (31, 45)


def test_scene_with_remote_backends(sidecar_url, tmp_path):
    sprite = linear_sprite("circle", (245, 215, 180), 9.0, (40.0, 60.0), (4.0, 0.0), 8)
    frames, _ = generate_scene(
        SceneSpec(width=160, height=120, frame_count=8, pattern="noise", seed=42, sprites=(sprite,))
    )
    clip = SceneClip(start=0, end=8, frames=frames)
    cfg = PipelineConfig(
        input=Path("unused"),
        output=Path("unused"),
        masker="remote-fallback",
        outpainter="remote-fallback",
        sidecar_url=sidecar_url,
    )
    outputs, manifest = run_scene(clip, cfg)
    assert manifest.fallback is None
    assert len(outputs) == 8
    tw = outputs[0].shape[1]
    left = (tw - 160) // 2
    for frame, out in zip(frames, outputs):
        assert np.array_equal(out[:, left : left + 160], frame.pixels)
