"""Protocol conformance for the deterministic-mode adapter.

The fixture requests mirror what the pipeline's embedding client sends to
POST /v1/embed; every response must match the shape that client parses.
"""

import numpy as np
import pytest
from fastapi.testclient import TestClient

from embed_adapter.app import create_app
from embed_adapter.config import AdapterConfig
from embed_adapter.vectors import deterministic_vector

DIM = 16

PROTOCOL_FIXTURES = [
    {"items": [{"id": "a1", "text": "Valentine chocolate hearts"}], "modality": "text"},
    {"items": [{"id": "a1", "text": "x"}, {"id": "a2", "text": "y"}], "modality": "text"},
    {"items": [{"id": "a1", "image_ref": "img-001"}], "modality": "image"},
    {"items": [], "modality": "text"},
]


@pytest.fixture(scope="module")
def client():
    app = create_app(AdapterConfig(mode="deterministic", dim=DIM))
    return TestClient(app)


class TestProtocol:
    def test_healthz(self, client):
        resp = client.get("/healthz")
        assert resp.status_code == 200
        assert resp.json()["status"] == "ok"

    @pytest.mark.parametrize("fixture", PROTOCOL_FIXTURES)
    def test_response_shape(self, client, fixture):
        resp = client.post("/v1/embed", json=fixture)
        assert resp.status_code == 200
        body = resp.json()
        assert set(body) == {"vectors"}
        vectors = body["vectors"]
        assert [v["id"] for v in vectors] == [item["id"] for item in fixture["items"]]
        for vec in vectors:
            assert set(vec) == {"id", "values"}
            assert len(vec["values"]) == DIM
            assert all(isinstance(v, float) for v in vec["values"])

    def test_unit_norm(self, client):
        resp = client.post(
            "/v1/embed",
            json={"items": [{"id": "a", "text": "anything"}], "modality": "text"},
        )
        values = np.array(resp.json()["vectors"][0]["values"])
        assert abs(np.linalg.norm(values) - 1.0) <= 1e-6

    def test_same_text_twice_identical(self, client):
        request = {"items": [{"id": "a", "text": "same input"}], "modality": "text"}
        first = client.post("/v1/embed", json=request).json()
        second = client.post("/v1/embed", json=request).json()
        assert first == second

    def test_matches_library_function(self, client):
        resp = client.post(
            "/v1/embed", json={"items": [{"id": "a", "text": "hello"}], "modality": "text"}
        )
        values = np.array(resp.json()["vectors"][0]["values"])
        expected = deterministic_vector("hello", DIM, "det-hash-v1:text")
        assert np.allclose(values, expected, atol=1e-12)

    def test_thousand_distinct_texts_distinct_vectors(self, client):
        seen = set()
        for i in range(0, 1000, 100):  # batched for speed
            items = [{"id": f"t{j}", "text": f"fixture text {j}"} for j in range(i, i + 100)]
            resp = client.post("/v1/embed", json={"items": items, "modality": "text"})
            for vec in resp.json()["vectors"]:
                seen.add(tuple(round(v, 12) for v in vec["values"]))
        assert len(seen) == 1000

    def test_modalities_use_distinct_namespaces(self, client):
        text = client.post(
            "/v1/embed", json={"items": [{"id": "a", "text": "ref-1"}], "modality": "text"}
        ).json()["vectors"][0]["values"]
        image = client.post(
            "/v1/embed", json={"items": [{"id": "a", "image_ref": "ref-1"}], "modality": "image"}
        ).json()["vectors"][0]["values"]
        assert text != image

    def test_malformed_body_is_4xx_and_service_stays_up(self, client):
        assert client.post("/v1/embed", json={"modality": "text"}).status_code == 422
        assert client.post("/v1/embed", json={"items": [], "modality": "audio"}).status_code == 422
        missing = client.post(
            "/v1/embed", json={"items": [{"id": "a"}], "modality": "text"}
        )
        assert missing.status_code == 400
        assert client.get("/healthz").status_code == 200

    def test_restart_reproducibility(self):
        fresh = TestClient(create_app(AdapterConfig(mode="deterministic", dim=DIM)))
        request = {"items": [{"id": "a", "text": "restart me"}], "modality": "text"}
        first = fresh.post("/v1/embed", json=request).json()
        again = TestClient(create_app(AdapterConfig(mode="deterministic", dim=DIM)))
        second = again.post("/v1/embed", json=request).json()
        assert first == second


class TestConfig:
    def test_dim_floor(self):
        with pytest.raises(ValueError):
            AdapterConfig(mode="deterministic", dim=4)

    def test_unknown_mode(self):
        with pytest.raises(ValueError):
            AdapterConfig(mode="magic")
