import json
import socket
import threading
import time

import httpx
import pytest
import uvicorn

from reasonforge.cli import build_parser, main
from reasonforge.pipeline import PipelineConfig, run_pipeline
from reasonforge.service import create_app

from worlds import build_world


def _free_port():
    sock = socket.socket()
    sock.bind(("127.0.0.1", 0))
    port = sock.getsockname()[1]
    sock.close()
    return port


@pytest.fixture(scope="module")
def server():
    port = _free_port()
    config = uvicorn.Config(
        create_app(), host="127.0.0.1", port=port, log_level="error"
    )
    srv = uvicorn.Server(config)
    thread = threading.Thread(target=srv.run, daemon=True)
    thread.start()
    url = f"http://127.0.0.1:{port}"
    deadline = time.monotonic() + 15
    while time.monotonic() < deadline:
        try:
            httpx.get(url + "/healthz", timeout=1.0).raise_for_status()
            break
        except httpx.HTTPError:
            time.sleep(0.05)
    else:
        raise RuntimeError("test server did not come up")
    yield url
    srv.should_exit = True
    thread.join(timeout=5)


@pytest.fixture(scope="module")
def exported_world(tmp_path_factory):
    root = tmp_path_factory.mktemp("cli")
    paths = build_world(root)
    result = run_pipeline(PipelineConfig.from_file(str(paths["config"])))
    return paths, result


def invoke(server, *args):
    return main(["--server", server, *args])


def last_json(capsys):
    return json.loads(capsys.readouterr().out)


class TestRun:
    def test_run_wait(self, server, tmp_path, capsys):
        paths = build_world(tmp_path)
        rc = invoke(server, "run", "--config", str(paths["config"]))
        info = last_json(capsys)
        assert rc == 0
        assert info["state"] == "done"
        assert info["export"]["count"] == 15

    def test_run_stage_subset(self, server, tmp_path, capsys):
        paths = build_world(tmp_path)
        rc = invoke(
            server, "run", "--config", str(paths["config"]),
            "--stages", "ingest,gen_cases",
        )
        info = last_json(capsys)
        assert rc == 0
        assert info["stages_run"] == ["ingest", "gen_cases"]
        assert info["export"] is None

    def test_run_no_wait_then_status(self, server, tmp_path, capsys):
        paths = build_world(tmp_path)
        rc = invoke(server, "run", "--config", str(paths["config"]), "--no-wait")
        info = last_json(capsys)
        assert rc == 0
        assert info["state"] in ("queued", "running", "done")

        deadline = time.monotonic() + 30
        while time.monotonic() < deadline:
            assert invoke(server, "status", info["run_id"]) == 0
            polled = last_json(capsys)
            if polled["state"] in ("done", "failed"):
                break
            time.sleep(0.1)
        assert polled["state"] == "done"

    def test_run_no_wait_follow(self, server, tmp_path, capsys):
        paths = build_world(tmp_path)
        rc = invoke(
            server, "run", "--config", str(paths["config"]),
            "--no-wait", "--follow", "--poll-interval", "0.1",
        )
        info = last_json(capsys)
        assert rc == 0
        assert info["state"] == "done"

    def test_failed_run_exit_code(self, server, tmp_path, capsys):
        config = tmp_path / "config.json"
        config.write_text(
            json.dumps(
                {
                    "corpus_path": str(tmp_path / "missing.jsonl"),
                    "output_dir": str(tmp_path / "out"),
                }
            ),
            encoding="utf-8",
        )
        rc = invoke(server, "run", "--config", str(config))
        info = last_json(capsys)
        assert rc == 1
        assert info["state"] == "failed"

    def test_unknown_status_exit_code(self, server, capsys):
        rc = invoke(server, "status", "doesnotexist")
        assert rc == 1
        assert "error (404)" in capsys.readouterr().err


class TestValidate:
    def test_clean(self, server, exported_world, capsys):
        paths, _ = exported_world
        rc = invoke(server, "validate", "--corpus", str(paths["corpus"]))
        assert rc == 0
        assert last_json(capsys)["count"] == 3

    def test_with_issues(self, server, tmp_path, capsys):
        corpus = tmp_path / "bad.jsonl"
        corpus.write_text("not json\n", encoding="utf-8")
        rc = invoke(server, "validate", "--corpus", str(corpus))
        assert rc == 1
        assert last_json(capsys)["issues"]

    def test_strict(self, server, tmp_path, capsys):
        corpus = tmp_path / "bad.jsonl"
        corpus.write_text("not json\n", encoding="utf-8")
        rc = invoke(server, "validate", "--corpus", str(corpus), "--strict")
        assert rc == 1
        assert "error (422)" in capsys.readouterr().err


class TestSample:
    def test_sample_to_file(self, server, exported_world, tmp_path, capsys):
        _, result = exported_world
        out = tmp_path / "subset.jsonl"
        rc = invoke(
            server, "sample", "--dataset", result.export.path,
            "--mode", "total_n", "--amount", "5", "--seed", "1",
            "--out", str(out),
        )
        body = last_json(capsys)
        assert rc == 0
        assert body["count"] == 5
        assert len(out.read_text().splitlines()) == 5

    def test_sample_bad_amount(self, server, exported_world, capsys):
        _, result = exported_world
        rc = invoke(
            server, "sample", "--dataset", result.export.path,
            "--mode", "total_n", "--amount", "0",
        )
        assert rc == 1
        assert "error (400)" in capsys.readouterr().err


class TestStats:
    def test_report_text(self, server, exported_world, capsys):
        paths, _ = exported_world
        rc = invoke(server, "stats", "--output-dir", str(paths["output"]))
        assert rc == 0
        assert "pipeline funnel" in capsys.readouterr().out

    def test_json(self, server, exported_world, capsys):
        paths, _ = exported_world
        rc = invoke(server, "stats", "--output-dir", str(paths["output"]), "--json")
        body = last_json(capsys)
        assert rc == 0
        assert body["ledger"]["stages"]["synth_reasoning"]["passed"] == 15


def test_unreachable_server_exit_2(capsys):
    rc = main(["--server", "http://127.0.0.1:1", "status", "x"])
    assert rc == 2
    assert "cannot reach service" in capsys.readouterr().err


def test_parser_rejects_unknown_mode():
    with pytest.raises(SystemExit):
        build_parser().parse_args(
            ["sample", "--dataset", "d", "--mode", "zigzag", "--amount", "1"]
        )


def test_parser_requires_subcommand():
    with pytest.raises(SystemExit):
        build_parser().parse_args([])
