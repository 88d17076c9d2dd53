import json
import time

import pytest
from fastapi.testclient import TestClient

from reasonforge.pipeline import PipelineConfig, run_pipeline
from reasonforge.service import create_app

from worlds import build_world


@pytest.fixture
def client():
    with TestClient(create_app()) as c:
        yield c


@pytest.fixture(scope="module")
def exported_world(tmp_path_factory):
    root = tmp_path_factory.mktemp("svc")
    paths = build_world(root)
    result = run_pipeline(PipelineConfig.from_file(str(paths["config"])))
    return paths, result


def test_healthz(client):
    response = client.get("/healthz")
    assert response.status_code == 200
    body = response.json()
    assert body["status"] == "ok"
    assert body["version"]


class TestRuns:
    def test_wait_run_completes_inline(self, client, tmp_path):
        paths = build_world(tmp_path)
        response = client.post("/runs", json={"config_path": str(paths["config"])})
        assert response.status_code == 200
        info = response.json()
        assert info["state"] == "done"
        assert info["export"]["count"] == 15
        assert info["stages_run"][0] == "ingest"

        listing = client.get("/runs").json()
        assert [r["run_id"] for r in listing["runs"]] == [info["run_id"]]

    def test_background_run_pollable(self, client, tmp_path):
        paths = build_world(tmp_path)
        response = client.post(
            "/runs", json={"config_path": str(paths["config"]), "wait": False}
        )
        assert response.status_code == 200
        info = response.json()
        assert info["state"] == "queued"
        deadline = time.monotonic() + 30
        while time.monotonic() < deadline:
            info = client.get(f"/runs/{info['run_id']}").json()
            if info["state"] in ("done", "failed"):
                break
            time.sleep(0.1)
        assert info["state"] == "done"
        assert info["export"]["count"] == 15

    def test_inline_config_dict(self, client, tmp_path):
        paths = build_world(tmp_path)
        config = json.loads(paths["config"].read_text())
        response = client.post(
            "/runs", json={"config": config, "stages": ["ingest"]}
        )
        assert response.status_code == 200
        assert response.json()["state"] == "done"

    def test_both_config_forms_rejected(self, client):
        response = client.post(
            "/runs", json={"config_path": "x.json", "config": {"corpus_path": "c"}}
        )
        assert response.status_code == 400
        response = client.post("/runs", json={})
        assert response.status_code == 400

    def test_bad_config_rejected(self, client):
        response = client.post(
            "/runs",
            json={"config": {"corpus_path": "c", "output_dir": "o", "zzz": 1}},
        )
        assert response.status_code == 400
        assert "unknown config keys" in response.json()["detail"]

    def test_failed_run_reports_error(self, client, tmp_path):
        config = {
            "corpus_path": str(tmp_path / "missing.jsonl"),
            "output_dir": str(tmp_path / "out"),
        }
        response = client.post("/runs", json={"config": config})
        assert response.status_code == 200
        info = response.json()
        assert info["state"] == "failed"
        assert "ConfigurationError" in info["error"]

    def test_unknown_run_404(self, client):
        assert client.get("/runs/nope").status_code == 404


class TestSample:
    def test_sample_total_n(self, client, exported_world):
        _, result = exported_world
        response = client.post(
            "/sample",
            json={"dataset_path": result.export.path, "mode": "total_n",
                  "amount": 4, "seed": 0},
        )
        assert response.status_code == 200
        body = response.json()
        assert body["count"] == 4
        assert len(body["pair_ids_preview"]) == 4
        assert body["checksum"] is None

    def test_sample_writes_subset(self, client, exported_world, tmp_path):
        _, result = exported_world
        out = tmp_path / "subset.jsonl"
        response = client.post(
            "/sample",
            json={"dataset_path": result.export.path, "mode": "case_fraction",
                  "amount": 1.0, "seed": 3, "output_path": str(out)},
        )
        body = response.json()
        assert body["count"] == 15
        assert body["checksum"]
        assert out.exists()
        assert len(out.read_text().splitlines()) == 15

    def test_sample_missing_dataset_404(self, client):
        response = client.post(
            "/sample",
            json={"dataset_path": "/nope.jsonl", "mode": "total_n", "amount": 1},
        )
        assert response.status_code == 404

    def test_sample_bad_amount_400(self, client, exported_world):
        _, result = exported_world
        response = client.post(
            "/sample",
            json={"dataset_path": result.export.path, "mode": "total_n",
                  "amount": 9999},
        )
        assert response.status_code == 400

    def test_sample_bad_mode_422(self, client, exported_world):
        _, result = exported_world
        response = client.post(
            "/sample",
            json={"dataset_path": result.export.path, "mode": "zigzag", "amount": 1},
        )
        assert response.status_code == 422  # pydantic enum guard


class TestValidate:
    def test_clean_corpus(self, client, exported_world):
        paths, _ = exported_world
        response = client.post("/validate", json={"corpus_path": str(paths["corpus"])})
        assert response.status_code == 200
        body = response.json()
        assert body["count"] == 3
        assert body["issues"] == []

    def test_issues_reported(self, client, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text('{"title": "no statement"}\nnot json\n', encoding="utf-8")
        response = client.post("/validate", json={"corpus_path": str(corpus)})
        assert response.status_code == 200
        body = response.json()
        assert body["count"] == 0
        reasons = {issue["reason"] for issue in body["issues"]}
        assert "invalid json" in reasons
        assert "invalid record" in reasons

    def test_strict_mode_422(self, client, tmp_path):
        corpus = tmp_path / "corpus.jsonl"
        corpus.write_text("not json\n", encoding="utf-8")
        response = client.post(
            "/validate", json={"corpus_path": str(corpus), "strict": True}
        )
        assert response.status_code == 422

    def test_missing_corpus_404(self, client):
        response = client.post("/validate", json={"corpus_path": "/nope.jsonl"})
        assert response.status_code == 404


class TestStats:
    def test_funnel_from_artifacts(self, client, exported_world):
        paths, _ = exported_world
        response = client.get("/stats", params={"output_dir": str(paths["output"])})
        assert response.status_code == 200
        body = response.json()
        assert "pipeline funnel" in body["report"]
        assert body["ledger"]["stages"]["synth_reasoning"]["passed"] == 15

    def test_missing_dir_404(self, client):
        assert client.get("/stats", params={"output_dir": "/no/such"}).status_code == 404
