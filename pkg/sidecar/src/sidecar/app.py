"""FastAPI service exposing /health, /mask, and /outpaint.

Model backends are pluggable by identifier and loaded at startup;
inference is serialized by an internal lock (one request per device).
The wire contract: base64 PNG payloads, dimensions always preserved.
"""

from __future__ import annotations

import threading
from contextlib import asynccontextmanager
from typing import Callable

import numpy as np
from fastapi import FastAPI, HTTPException
from pydantic import BaseModel

from .config import SidecarConfig
from .imaging import decode_png_b64, encode_png_b64, propagation_fill, saliency_mask

MaskFn = Callable[[np.ndarray], np.ndarray]
OutpaintFn = Callable[[np.ndarray, np.ndarray, str, np.random.Generator | None], np.ndarray]


class MaskRequest(BaseModel):
    image_png_b64: str


class MaskResponse(BaseModel):
    mask_png_b64: str


class OutpaintRequest(BaseModel):
    image_png_b64: str
    mask_png_b64: str
    prompt: str = "animated background"
    seed: int | None = None


class OutpaintResponse(BaseModel):
    image_png_b64: str


class ModelRegistry:
    def __init__(self, cfg: SidecarConfig) -> None:
        self.cfg = cfg
        self.ready = False
        self.mask_fn: MaskFn | None = None
        self.outpaint_fn: OutpaintFn | None = None
        self.lock = threading.Lock()

    def load(self) -> None:
        self.mask_fn = self._load_masker(self.cfg.mask_model)
        self.outpaint_fn = self._load_outpainter(self.cfg.outpaint_model)
        self.ready = True

    def _load_masker(self, identifier: str) -> MaskFn | None:
        if identifier == "disabled":
            return None
        if identifier == "builtin-saliency":
            return saliency_mask
        if identifier == "torchvision-maskrcnn":
            return _try_load_maskrcnn(self.cfg.device)
        return None

    def _load_outpainter(self, identifier: str) -> OutpaintFn | None:
        if identifier == "disabled":
            return None
        if identifier == "builtin-propagation":
            resolution = self.cfg.native_resolution

            def fill(image, mask, prompt, rng):
                return propagation_fill(image, mask, working_resolution=resolution, rng=rng)

            return fill
        return None


def _try_load_maskrcnn(device: str) -> MaskFn | None:
    """Learned masker; returns None when weights are unavailable."""
    try:
        import torch
        import torchvision

        weights = torchvision.models.detection.MaskRCNN_ResNet50_FPN_Weights.DEFAULT
        model = torchvision.models.detection.maskrcnn_resnet50_fpn(weights=weights)
        model.eval().to(device)
    except Exception:
        return None

    def run(image: np.ndarray) -> np.ndarray:
        tensor = torch.from_numpy(image.transpose(2, 0, 1)).float().div(255.0).to(device)
        with torch.no_grad():
            output = model([tensor])[0]
        union = np.zeros(image.shape[:2], dtype=np.uint8)
        for mask, score in zip(output["masks"], output["scores"]):
            if float(score) < 0.5:
                continue
            union |= (mask[0].cpu().numpy() > 0.5).astype(np.uint8) * 255
        return union

    return run


def create_app(cfg: SidecarConfig | None = None) -> FastAPI:
    cfg = cfg or SidecarConfig()
    registry = ModelRegistry(cfg)

    @asynccontextmanager
    async def lifespan(app: FastAPI):
        registry.load()
        yield

    app = FastAPI(title="remaster-sidecar", lifespan=lifespan)
    app.state.registry = registry

    @app.get("/health")
    def health():
        if not registry.ready:
            raise HTTPException(status_code=503, detail="service starting")
        return {
            "status": "ok",
            "models": {
                "mask": registry.mask_fn is not None,
                "outpaint": registry.outpaint_fn is not None,
            },
            "settings": {
                "mask_model": cfg.mask_model,
                "outpaint_model": cfg.outpaint_model,
                "device": cfg.device,
                "max_dim": cfg.max_dim,
                "native_resolution": cfg.native_resolution,
                "dither": 6.0,
            },
        }

    def _decode_image(data: str, grayscale: bool = False) -> np.ndarray:
        try:
            return decode_png_b64(data, grayscale=grayscale)
        except ValueError as exc:
            raise HTTPException(status_code=400, detail=str(exc)) from exc

    def _check_size(image: np.ndarray) -> None:
        if max(image.shape[:2]) > cfg.max_dim:
            raise HTTPException(
                status_code=413,
                detail=f"image exceeds max dimension {cfg.max_dim}",
            )

    @app.post("/mask", response_model=MaskResponse)
    def mask(request: MaskRequest):
        if not registry.ready or registry.mask_fn is None:
            raise HTTPException(status_code=503, detail="masker not available")
        image = _decode_image(request.image_png_b64)
        _check_size(image)
        try:
            with registry.lock:
                result = registry.mask_fn(image)
        except Exception as exc:  # model failure
            raise HTTPException(status_code=500, detail=f"masker failed: {exc}") from exc
        if result.shape != image.shape[:2]:
            raise HTTPException(status_code=500, detail="masker changed dimensions")
        return MaskResponse(mask_png_b64=encode_png_b64(result))

    @app.post("/outpaint", response_model=OutpaintResponse)
    def outpaint(request: OutpaintRequest):
        if not registry.ready or registry.outpaint_fn is None:
            raise HTTPException(status_code=503, detail="outpainter not available")
        image = _decode_image(request.image_png_b64)
        mask_values = _decode_image(request.mask_png_b64, grayscale=True)
        _check_size(image)
        if mask_values.shape != image.shape[:2]:
            raise HTTPException(status_code=400, detail="mask dimensions differ from image")
        binary = np.where(mask_values >= 128, 255, 0).astype(np.uint8)
        if not binary.any():
            return OutpaintResponse(image_png_b64=request.image_png_b64)  # short-circuit
        rng = np.random.default_rng(request.seed) if request.seed is not None else None
        try:
            with registry.lock:
                result = registry.outpaint_fn(image, binary, request.prompt, rng)
        except Exception as exc:
            raise HTTPException(status_code=500, detail=f"outpainter failed: {exc}") from exc
        if result.shape != image.shape:
            raise HTTPException(status_code=500, detail="outpainter changed dimensions")
        return OutpaintResponse(image_png_b64=encode_png_b64(result))

    return app
