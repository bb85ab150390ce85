
import pytest
from fastapi.testclient import TestClient

from lgae_app import api


@pytest.fixture
def client(tmp_path, monkeypatch):
    monkeypatch.setattr(api, "RUNS_DIR", tmp_path / "runs")
    monkeypatch.setattr(api, "CACHE_DIR", tmp_path / "cache")
    monkeypatch.setattr(api, "DATA_ROOT", tmp_path)
    try:
        from sse_starlette.sse import AppStatus
    except ImportError:
        AppStatus = None
    if AppStatus is not None and hasattr(AppStatus, "should_exit_event"):
        monkeypatch.setattr(AppStatus, "should_exit_event", None)
    return TestClient(api.app)


def test_health(client):
    assert client.get("/health").json() == {"status": "ok"}


def test_params(client):
    body = client.get("/params", params={"feature_dim": 1433}).json()
    assert body["rows"]["L-GAE"]["1"] == 46416
    assert body["rows"]["VGAE"]["7"] == 2166784


def test_params_rejects_unknown_variant(client):
    response = client.get("/params", params={"feature_dim": 10, "variant": "gcn"})
    assert response.status_code == 400


def test_unknown_run_is_404(client):
    assert client.get("/status/nope").status_code == 404


def test_background_run_reports_success(client, cliques_dir, tmp_path):
    response = client.post(
        "/train",
        json={"dataset": cliques_dir.name, "variant": "lgae", "epochs": 5, "return_run_id_only": True},
    )
    assert response.status_code == 200
    run_id = response.json()["run_id"]
    assert response.json()["status_url"] == f"/status/{run_id}"

    status = client.get(f"/status/{run_id}").json()
    assert status["status"] == "SUCCESS"
    assert 0.0 <= status["result"]["test"]["auc"] <= 1.0
    assert (tmp_path / "runs" / run_id / "params.bin").exists()


def test_background_run_rejects_bad_request(client, cliques_dir):
    response = client.post("/train", json={"dataset": cliques_dir.name, "variant": "gcn", "return_run_id_only": True})
    assert response.status_code == 400
    for dataset in ("missing", "/no/such/dir", "../cliques", str(cliques_dir)):
        response = client.post("/train", json={"dataset": dataset, "return_run_id_only": True})
        assert response.status_code == 400, dataset


def test_streamed_run_ends_with_completed_event(client, cliques_dir):
    response = client.post(
        "/train",
        json={"dataset": cliques_dir.name, "variant": "vgae", "epochs": 10, "eval_every": 5},
    )
    assert response.status_code == 200
    text = response.text
    assert "event: queued" in text
    assert text.count("event: epoch") == 2
    assert "event: completed" in text
