import numpy as np
import pytest
from fastapi.testclient import TestClient

from sidecar import SidecarConfig, create_app
from sidecar.imaging import decode_png_b64, encode_png_b64


@pytest.fixture
def client():
    with TestClient(create_app(SidecarConfig(max_dim=256))) as c:
        yield c


def _texture(w=96, h=64, seed=0):
    rng = np.random.default_rng(seed)
    base = rng.integers(20, 90, (h, w, 3), dtype=np.uint8)
    return base


def _figure_fixture(w=96, h=96):
    """Person-ish blob: round head over a rectangular body, distinct color."""
    image = _texture(w, h, seed=1)
    truth = np.zeros((h, w), dtype=np.uint8)
    ys, xs = np.mgrid[0:h, 0:w]
    head = (xs - 48) ** 2 + (ys - 30) ** 2 <= 10**2
    body = (np.abs(xs - 48) <= 12) & (ys >= 40) & (ys <= 78)
    for part in (head, body):
        image[part] = (235, 200, 160)
        truth[part] = 255
    return image, truth


class TestHealth:
    def test_ok_with_models_loaded(self, client):
        data = client.get("/health").json()
        assert data["status"] == "ok"
        assert data["models"] == {"mask": True, "outpaint": True}
        assert "native_resolution" in data["settings"]

    def test_outpainter_disabled_by_config(self):
        cfg = SidecarConfig(outpaint_model="disabled")
        with TestClient(create_app(cfg)) as client:
            data = client.get("/health").json()
            assert data["models"] == {"mask": True, "outpaint": False}

    def test_starting_service_returns_503(self):
        app = create_app()
        # no lifespan: models not loaded yet
        assert TestClient(app).get("/health").status_code == 503


class TestMask:
    def test_blank_image_gives_empty_mask(self, client):
        blank = np.full((48, 64, 3), 70, dtype=np.uint8)
        resp = client.post("/mask", json={"image_png_b64": encode_png_b64(blank)})
        assert resp.status_code == 200
        mask = decode_png_b64(resp.json()["mask_png_b64"], grayscale=True)
        assert mask.shape == (48, 64)
        assert (mask == 0).all()

    def test_figure_detected_with_iou(self, client):
        image, truth = _figure_fixture()
        resp = client.post("/mask", json={"image_png_b64": encode_png_b64(image)})
        mask = decode_png_b64(resp.json()["mask_png_b64"], grayscale=True)
        a, b = mask != 0, truth != 0
        iou = np.count_nonzero(a & b) / np.count_nonzero(a | b)
        assert iou >= 0.5

    def test_dimension_roundtrip(self, client):
        for w, h in ((33, 17), (128, 96)):
            image = _texture(w, h)
            resp = client.post("/mask", json={"image_png_b64": encode_png_b64(image)})
            mask = decode_png_b64(resp.json()["mask_png_b64"], grayscale=True)
            assert mask.shape == (h, w)

    def test_bad_payload_400(self, client):
        assert client.post("/mask", json={"image_png_b64": "junk"}).status_code == 400

    def test_oversize_413(self, client):
        big = np.zeros((300, 300, 3), dtype=np.uint8)
        assert client.post("/mask", json={"image_png_b64": encode_png_b64(big)}).status_code == 413

    def test_disabled_mask_model_503(self):
        with TestClient(create_app(SidecarConfig(mask_model="disabled"))) as client:
            resp = client.post(
                "/mask", json={"image_png_b64": encode_png_b64(np.zeros((8, 8, 3), np.uint8))}
            )
            assert resp.status_code == 503


class TestOutpaint:
    def _payload(self, image, mask, **extra):
        return {
            "image_png_b64": encode_png_b64(image),
            "mask_png_b64": encode_png_b64(mask),
            **extra,
        }

    def test_empty_mask_short_circuits_bit_exact(self, client):
        image = _texture()
        mask = np.zeros(image.shape[:2], dtype=np.uint8)
        resp = client.post("/outpaint", json=self._payload(image, mask))
        assert resp.status_code == 200
        out = decode_png_b64(resp.json()["image_png_b64"])
        assert np.array_equal(out, image)

    def test_pillar_strip_fully_filled(self, client):
        image = _texture(96, 64, seed=2)
        sentinel = (255, 0, 255)
        image[:, 72:] = sentinel
        mask = np.zeros((64, 96), dtype=np.uint8)
        mask[:, 72:] = 255
        resp = client.post("/outpaint", json=self._payload(image, mask, prompt="animated background"))
        out = decode_png_b64(resp.json()["image_png_b64"])
        assert out.shape == image.shape
        filled = out[:, 72:]
        assert not (filled == sentinel).all(axis=2).any()

    def test_dimension_mismatch_400(self, client):
        image = _texture(32, 24)
        mask = np.zeros((24, 30), dtype=np.uint8)
        assert client.post("/outpaint", json=self._payload(image, mask)).status_code == 400

    def test_seed_reproducible(self, client):
        image = _texture(48, 32, seed=3)
        mask = np.zeros((32, 48), dtype=np.uint8)
        mask[:, 32:] = 255
        a = client.post("/outpaint", json=self._payload(image, mask, seed=7)).json()
        b = client.post("/outpaint", json=self._payload(image, mask, seed=7)).json()
        assert a["image_png_b64"] == b["image_png_b64"]

    def test_oversize_input_resized_internally(self):
        # working resolution below input size exercises the resize path
        cfg = SidecarConfig(max_dim=1024, native_resolution=64)
        with TestClient(create_app(cfg)) as client:
            image = _texture(200, 150, seed=4)
            mask = np.zeros((150, 200), dtype=np.uint8)
            mask[:, 160:] = 255
            resp = client.post("/outpaint", json=self._payload(image, mask))
            out = decode_png_b64(resp.json()["image_png_b64"])
            assert out.shape == (150, 200, 3)
            assert not np.array_equal(out[:, 160:], image[:, 160:])
