from __future__ import annotations

import numpy as np
import pytest
from fastapi.testclient import TestClient

from nrsfm.main import app


@pytest.fixture
def client():
    return TestClient(app)


@pytest.fixture
def payload(small_scene):
    return {
        "tracks": small_scene.tracks.data.tolist(),
        "rotations": small_scene.rotations.blocks.tolist(),
        "grid": {"rows": small_scene.topology.rows, "cols": small_scene.topology.cols},
        "method": "temporal",
    }


def test_health(client):
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_reconstruct(client, payload, small_scene):
    response = client.post("/reconstruct", json=payload)
    assert response.status_code == 200
    body = response.json()
    assert np.asarray(body["shape"]).shape == small_scene.shape.data.shape
    assert body["report"]["method"] == "temporal"
    assert body["rotation_mode"] == "provided"


def test_reconstruct_with_solver_overrides(client, payload):
    payload.update(method="st-l1", solver={"lambda2": 0.5, "irls_max_iters": 3})
    response = client.post("/reconstruct", json=payload)
    assert response.status_code == 200
    assert len(response.json()["report"]["objective_trace"]) >= 2


def test_degenerate_rotation_is_unprocessable(client, payload):
    payload["rotations"][2][1] = payload["rotations"][2][0]
    response = client.post("/reconstruct", json=payload)
    assert response.status_code == 422
    assert response.json()["error"] == "DegenerateRotationError"
    assert response.json()["frame"] == 2


def test_missing_rotations_is_unprocessable(client, payload):
    del payload["rotations"]
    response = client.post("/reconstruct", json=payload)
    assert response.status_code == 422
    assert response.json()["error"] == "RotationValidityError"


def test_invalid_solver_override_is_unprocessable(client, payload):
    payload["solver"] = {"lambda1": -1.0}
    assert client.post("/reconstruct", json=payload).status_code == 422


def test_evaluate(client, small_scene):
    shape = small_scene.shape.data.tolist()
    response = client.post("/evaluate", json={"estimate": shape, "ground_truth": shape})
    assert response.status_code == 200
    assert response.json()["mean_error"] == pytest.approx(0.0, abs=1e-12)


def test_evaluate_size_mismatch(client, small_scene):
    shape = small_scene.shape.data
    response = client.post("/evaluate", json={"estimate": shape[:3].tolist(), "ground_truth": shape.tolist()})
    assert response.status_code == 422
