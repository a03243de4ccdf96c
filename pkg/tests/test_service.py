"""HTTP render service contracts."""

import base64
import math
from concurrent.futures import ThreadPoolExecutor

import pytest
import torch
from fastapi.testclient import TestClient

from blendfield.rendering import image_to_png_bytes
from blendfield.service.app import ModelSnapshot, create_app


@pytest.fixture(scope="module")
def client(tiny_checkpoint):
    snapshot = ModelSnapshot.from_checkpoint(tiny_checkpoint)
    app = create_app(snapshot)
    with TestClient(app, raise_server_exceptions=False) as c:
        yield c


def test_health(client):
    res = client.get("/health")
    assert res.status_code == 200
    assert res.json() == {"status": "ok"}


def test_model_info_echoes_configuration(client):
    info = client.get("/model/info").json()
    assert info["split_index_max"] == 11
    assert info["n_sites"] == 11
    assert info["style_code_dim"] == 512
    assert len(info["pitch_range"]) == 2
    assert info["pitch_range"][0] == pytest.approx(math.pi / 2 - 0.2)
    assert info["yaw_range"][1] == pytest.approx(math.pi / 2 + 0.4)


def test_render_returns_png(client):
    res = client.post("/render", json={"seed": 5, "split_index": 11})
    assert res.status_code == 200
    assert res.headers["content-type"] == "image/png"
    assert res.content[:8] == b"\x89PNG\r\n\x1a\n"


def test_render_deterministic(client):
    body = {"seed": 9, "split_index": 11, "pitch": math.pi / 2, "yaw": math.pi / 2}
    a = client.post("/render", json=body)
    b = client.post("/render", json=body)
    assert a.content == b.content


def test_render_with_style_seed_differs_from_natural(client):
    natural = client.post("/render", json={"seed": 1, "split_index": 0})
    styled = client.post("/render", json={"seed": 1, "split_index": 0, "style_seed": 4})
    assert natural.status_code == styled.status_code == 200
    assert natural.content != styled.content


def test_render_style_seed_deterministic(client):
    body = {"seed": 2, "split_index": 0, "style_seed": 17}
    assert client.post("/render", json=body).content == \
        client.post("/render", json=body).content


def test_render_with_uploaded_style_image(client):
    img = torch.rand(3, 32, 32) * 2 - 1
    payload = base64.b64encode(image_to_png_bytes(img)).decode()
    res = client.post("/render", json={"seed": 0, "split_index": 0,
                                       "style_b64": payload})
    assert res.status_code == 200


def test_split_index_out_of_range_is_400(client):
    res = client.post("/render", json={"seed": 0, "split_index": 12})
    assert res.status_code == 400
    assert "split_index" in res.json()["error"]


def test_pose_out_of_bounds_is_400(client):
    res = client.post("/render", json={"seed": 0, "split_index": 5, "yaw": 0.2})
    assert res.status_code == 400
    assert "yaw" in res.json()["error"]


def test_malformed_json_field_named(client):
    res = client.post("/render", json={"seed": "not-an-int", "split_index": 3})
    assert res.status_code == 400
    assert "seed" in res.json()["fields"]


def test_invalid_base64_style_is_400(client):
    res = client.post("/render", json={"seed": 0, "split_index": 0,
                                       "style_b64": "@@@not-base64@@@"})
    assert res.status_code == 400


def test_style_encode_returns_512_dims(client):
    img = torch.rand(3, 32, 32) * 2 - 1
    payload = base64.b64encode(image_to_png_bytes(img)).decode()
    res = client.post("/style/encode", json={"image_b64": payload})
    assert res.status_code == 200
    body = res.json()
    assert body["dim"] == 512
    assert len(body["code"]) == 512


def test_concurrent_identical_requests_return_identical_bytes(client):
    body = {"seed": 3, "split_index": 11}

    def fetch(_):
        return client.post("/render", json=body).content

    with ThreadPoolExecutor(max_workers=8) as pool:
        results = list(pool.map(fetch, range(8)))
    assert all(r == results[0] for r in results)
    assert results[0][:8] == b"\x89PNG\r\n\x1a\n"


def test_literally_malformed_json_body_is_400(client):
    res = client.post("/render", content=b"{not json at all",
                      headers={"Content-Type": "application/json"})
    assert res.status_code == 400
    assert "error" in res.json()


def test_render_failure_returns_500_with_opaque_id(tiny_checkpoint, monkeypatch):
    snapshot = ModelSnapshot.from_checkpoint(tiny_checkpoint)

    def explode(req):
        raise RuntimeError("synthetic failure")

    monkeypatch.setattr(snapshot, "render_png", explode)
    app = create_app(snapshot)
    with TestClient(app, raise_server_exceptions=False) as c:
        res = c.post("/render", json={"seed": 0, "split_index": 1})
    assert res.status_code == 500
    body = res.json()
    assert body["error"] == "internal failure"
    assert len(body["id"]) == 12
    assert "synthetic failure" not in res.text
