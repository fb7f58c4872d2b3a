import json

import pytest
from fastapi.testclient import TestClient

from app.backend.main import app
from app.spidercert import config

client = TestClient(app)

TRIANGLE = {"n": 3, "edges": [[0, 1, 1, -1], [1, 2, 1, -1], [0, 2, 1, -1]]}


def test_health():
    r = client.get("/health")
    assert r.status_code == 200
    assert r.json() == {"status": "ok", "version": config.VERSION}


def test_spider_check():
    r = client.post("/spider-check", json={"k": 3, "ell": 1})
    assert r.status_code == 200
    body = r.json()
    assert body["passed"]
    assert body["inner"][0] == pytest.approx(1.5)


def test_spider_check_rejects_alpha_one():
    r = client.post("/spider-check", json={"k": 4, "ell": 2, "alpha": 1.0})
    assert r.status_code == 400


def test_certify_with_verification():
    r = client.post("/certify", json={"graph": TRIANGLE, "k": 3, "ell": 1, "verify": "exhaustive"})
    assert r.status_code == 200
    body = r.json()
    assert body["kind"] == "maxcut"
    assert body["verification"]["passed"]


def test_certify_needs_parameters():
    r = client.post("/certify", json={"graph": TRIANGLE})
    assert r.status_code == 400
    r = client.post("/certify", json={"graph": TRIANGLE, "kind": "2xor", "epsilon": 0.5})
    assert r.status_code == 400
    assert "premise" in r.json()["detail"]


def test_certify_rejects_bad_graphs():
    r = client.post("/certify", json={"graph": {"n": 3, "edges": [[0, 1, 1, -1]]}, "k": 3, "ell": 1})
    assert r.status_code == 400
    assert "isolated" in r.json()["detail"]
    r = client.post("/certify", json={"graph": {"n": 2, "edges": []}, "k": 3, "ell": 1})
    assert r.status_code == 422


def test_lowerbound():
    r = client.post("/lowerbound", json={"graph": TRIANGLE, "rounds": 2})
    assert r.status_code == 200
    body = r.json()
    assert body["r"] == 7
    assert body["meets_guarantee"]


def test_graph_summary_upload():
    files = {"file": ("triangle.json", json.dumps(TRIANGLE).encode(), "application/json")}
    r = client.post("/graph/summary", files=files)
    assert r.status_code == 200
    body = r.json()
    assert body["rho_centered"] == pytest.approx(0.5)
    assert body["rho_signed"] == pytest.approx(1.0)
    assert body["eig"]["walk_bound"] == pytest.approx(0.75)


def test_graph_summary_rejects_other_files():
    r = client.post("/graph/summary", files={"file": ("g.txt", b"x", "text/plain")})
    assert r.status_code == 400
    files = {"file": ("g.json", json.dumps({"n": 2, "edges": [[0, 1, 1, 3]]}).encode(), "application/json")}
    assert client.post("/graph/summary", files=files).status_code == 400


def test_refute_xor():
    instance = {"n": 4, "k": 2, "terms": [[[0, 1], 1], [[1, 2], -1], [[2, 3], 1], [[0, 3], 1]]}
    r = client.post("/refute-xor", json={"instance": instance, "k": 3, "ell": 1})
    assert r.status_code == 200
    assert r.json()["reduction"] == "identity"
    csp = {"n": 3, "k": 2, "predicate": "0110", "clauses": [[[0, 1], [1, 1]]]}
    assert client.post("/refute-xor", json={"instance": csp, "k": 3, "ell": 1}).status_code == 400
