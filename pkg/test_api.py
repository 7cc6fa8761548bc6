#!/usr/bin/env python3
"""
Test script for the QSL Toolkit API
"""
import json
import os
import sys

import pytest
from fastapi.testclient import TestClient

sys.path.append(os.path.dirname(os.path.abspath(__file__)))

from main import app

client = TestClient(app)


def _sweep_job(tmp_path):
    return {
        "kind": "circuit_sweep",
        "seed": 2,
        "output_dir": str(tmp_path / "sweep"),
        "sweep": {
            "algorithms": ["QFT"],
            "platforms": ["superconducting"],
            "models": ["SGM", "PM"],
            "gate_sets": ["SGS", "QGS"],
            "N_values": [3, 4],
        },
    }


def test_root_and_health():
    assert client.get("/").json() == {"message": "QSL Toolkit API is running"}
    response = client.get("/health")
    assert response.status_code == 200
    assert response.json()["status"] == "healthy"


def test_submit_circuit_sweep(tmp_path):
    response = client.post("/jobs", json=_sweep_job(tmp_path))
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "completed"
    assert body["output_dir"] == str(tmp_path / "sweep")
    assert body["result"]["rows"] == 8
    assert {f["name"] for f in body["manifest"]["files"]} == {"sweep.csv", "reduction.csv"}
    assert (tmp_path / "sweep" / "manifest.json").exists()


def test_invalid_config_is_unprocessable(tmp_path):
    job = _sweep_job(tmp_path)
    job["sweep"]["N_values"] = [2]
    response = client.post("/jobs", json=job)
    assert response.status_code == 422

    scan = {
        "kind": "qsl_scan", "seed": 1, "atoms": {}, "gate": {"name": "CZ"},
        "field_configuration": "atoms_phase", "scan": {"T_values_ns": [100.0, 200.0]},
    }
    assert client.post("/jobs", json=scan).status_code == 422


def test_job_errors_are_bad_requests(tmp_path):
    job = {"kind": "entangling_power", "seed": 1, "output_dir": str(tmp_path), "gate": {"name": "ZZZ"}}
    response = client.post("/jobs", json=job)
    assert response.status_code == 400
    assert "gamma" in response.json()["detail"]


def test_upload_job(tmp_path):
    job = {
        "kind": "entangling_power", "seed": 1, "output_dir": str(tmp_path),
        "gate": {"name": "CNOT"}, "epower": {"n_samples": 200},
    }
    files = {"file": ("job.json", json.dumps(job), "application/json")}
    response = client.post("/jobs/upload", files=files, params={"seed": 9})
    assert response.status_code == 200
    body = response.json()
    assert body["manifest"]["seed"] == 9
    assert body["result"]["gate"] == "CNOT"


def test_upload_rejects_bad_json():
    files = {"file": ("job.json", "{not json", "application/json")}
    assert client.post("/jobs/upload", files=files).status_code == 400
    files = {"file": ("job.json", json.dumps({"kind": "report", "seed": 0}), "application/json")}
    assert client.post("/jobs/upload", files=files).status_code == 400


if __name__ == "__main__":
    sys.exit(pytest.main([__file__, "-v"]))
