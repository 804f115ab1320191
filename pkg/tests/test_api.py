import math

import numpy as np
import pytest
from fastapi.testclient import TestClient

from src import __version__
from src.api import app

client = TestClient(app)


@pytest.fixture
def units(dataset):
    return [
        {
            "treatment": int(a),
            "covariates": [float(v) for v in x[1:]],
            "outcome": float(theta),
        }
        for a, x, theta in zip(dataset.treatment, dataset.covariates, dataset.theta)
    ]


def test_health():
    response = client.get("/api/v1/health")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "healthy"
    assert body["package_version"] == __version__


def test_root():
    response = client.get("/")
    assert response.status_code == 200
    assert response.json()["status"] == "running"


def test_effects(units):
    response = client.post("/api/v1/effects", json={"units": units})
    assert response.status_code == 200
    assert response.headers["X-Request-ID"].startswith("REQ")

    body = response.json()
    assert body["status"] == "success"
    data = body["data"]
    assert data["n_used"] == len(units)
    assert data["design_columns"] == ["(intercept)", "x1", "x2"]
    ht, hajek = data["results"]
    assert ht["scheme"] == "HT" and hajek["scheme"] == "Hajek"
    assert ht["tau"] == pytest.approx(hajek["tau"], abs=1e-12)
    assert hajek["se_tau"] > 0


def test_effects_clock_times():
    times = ["23:10", "23:40", "00:20", "22:50", "23:55", "00:05", "23:30", "22:40"]
    units = [
        {"treatment": i % 2, "covariates": [], "outcome": t}
        for i, t in enumerate(times)
    ]
    response = client.post(
        "/api/v1/effects", json={"units": units, "outcome_kind": "clock24", "scheme": "Hajek"}
    )
    assert response.status_code == 200
    (result,) = response.json()["data"]["results"]
    assert result["tau_minutes"] == round(result["tau"] * 1440 / (2 * math.pi), 3)


def test_effects_single_arm(units):
    for unit in units:
        unit["treatment"] = 1
    response = client.post("/api/v1/effects", json={"units": units})
    assert response.status_code == 422
    body = response.json()
    assert body["status"] == "error"
    assert body["error_code"] == "SingleArmError"


def test_effects_ragged_covariates(units):
    units[0]["covariates"] = units[0]["covariates"][:1]
    response = client.post("/api/v1/effects", json={"units": units})
    assert response.status_code == 422


def test_effects_bad_scheme(units):
    response = client.post("/api/v1/effects", json={"units": units, "scheme": "raking"})
    assert response.status_code == 422


def test_simulate():
    response = client.post(
        "/api/v1/simulate", json={"scenario": 2, "n": 50, "replications": 3, "seed": 5}
    )
    assert response.status_code == 200
    data = response.json()["data"]
    assert data["true_tau"] == pytest.approx(1.0, abs=1e-9)
    assert data["true_xi"] == pytest.approx(1 / 6, abs=1e-9)
    assert len(data["rows"]) == 4
    assert all(np.isfinite(row["BIAS"]) for row in data["rows"] if row["BIAS"] is not None)


def test_simulate_too_many_replications():
    response = client.post("/api/v1/simulate", json={"scenario": 1, "replications": 201})
    assert response.status_code == 422
    assert response.json()["status"] == "error"
