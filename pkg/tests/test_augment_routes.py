"""
Test the HTTP surface
- health endpoints
- catalog listing
- intensity lookups
- text and image augmentation
"""
import io
import json

import numpy as np
import pytest
from fastapi.testclient import TestClient
from PIL import Image

from conftest import make_raster
from routes.augment_routes import METADATA_HEADER
from server import app


@pytest.fixture
def client():
    return TestClient(app)


def png_bytes(raster):
    buffer = io.BytesIO()
    raster.to_pil().save(buffer, format="PNG")
    return buffer.getvalue()


class TestHealth:
    def test_health(self, client):
        for path in ("/health", "/api/health"):
            response = client.get(path)
            assert response.status_code == 200
            data = response.json()
            assert data["status"] == "healthy"
            assert data["catalog"]["image"] == 35
        print("✓ /health and /api/health report catalog sizes")


class TestCatalogRoutes:
    def test_list(self, client):
        response = client.get("/api/catalog/text")
        assert response.status_code == 200
        entries = {entry["name"]: entry for entry in response.json()}
        assert len(entries) == 17
        assert "aug_word_p" in entries["simulate_typos"]["params"]
        print("✓ Catalog entries carry their param schema")

    def test_unknown_modality(self, client):
        assert client.get("/api/catalog/smell").status_code == 404
        print("✓ Unknown modality is 404")


class TestIntensityRoute:
    def test_rotate(self, client):
        response = client.post("/api/intensity", json={"name": "rotate", "params": {"degrees": 90}})
        assert response.status_code == 200
        assert response.json()["intensity"] == 50.0
        print("✓ rotate(90) intensity 50")

    def test_errors(self, client):
        assert client.post("/api/intensity", json={"name": "nope"}).status_code == 404
        response = client.post("/api/intensity", json={"name": "rotate", "params": {"degrees": "lots"}})
        assert response.status_code == 422
        print("✓ Unknown op 404, bad params 422")


class TestAugmentRoutes:
    def test_text(self, client):
        body = {"text": "ab cd", "pipeline": [{"op": "change_case", "params": {"case": "upper"}}], "seed": 3}
        response = client.post("/api/augment/text", json=body)
        assert response.status_code == 200
        data = response.json()
        assert data["text"] == "AB CD"
        assert data["metadata"][0]["name"] == "change_case"
        print("✓ Text augmentation returns text and metadata")

    def test_text_bad_pipeline(self, client):
        response = client.post("/api/augment/text", json={"text": "x", "pipeline": [{"op": "hflip"}]})
        assert response.status_code == 404
        print("✓ Image op in a text pipeline is rejected")

    def test_image(self, client):
        image = make_raster(20, 10)
        response = client.post(
            "/api/augment/image",
            files={"file": ("in.png", png_bytes(image), "image/png")},
            data={"pipeline": json.dumps([{"op": "hflip"}]), "seed": "1"},
        )
        assert response.status_code == 200
        assert response.headers["content-type"] == "image/png"
        result = np.array(Image.open(io.BytesIO(response.content)))
        assert np.array_equal(result, image.pixels[:, ::-1])
        metadata = json.loads(response.headers[METADATA_HEADER])
        assert metadata[0]["applied"] is True
        print("✓ Image augmentation returns PNG bytes and a metadata header")

    def test_image_errors(self, client):
        files = {"file": ("in.png", png_bytes(make_raster()), "image/png")}
        assert client.post("/api/augment/image", files=files, data={"pipeline": "[{oops"}).status_code == 422
        bad = {"file": ("in.png", b"not an image", "image/png")}
        assert client.post("/api/augment/image", files=bad, data={"pipeline": "[]"}).status_code == 400
        print("✓ Bad pipeline JSON 422, unreadable upload 400")
