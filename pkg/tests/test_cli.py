"""Command-line interface tests via click's test runner."""

from __future__ import annotations

import json

import httpx
import pytest
from click.testing import CliRunner

from chainforge.cli import main
from test_pipeline import write_dump


@pytest.fixture()
def runner():
    return CliRunner()


@pytest.fixture()
def workspace(tmp_path, runner):
    """Dump + db + graph built through the CLI itself."""
    write_dump(tmp_path / "dump.jsonl")
    paths = {
        "dir": tmp_path,
        "dump": str(tmp_path / "dump.jsonl"),
        "db": str(tmp_path / "deps.sqlite"),
        "graph": str(tmp_path / "graph.json"),
    }
    result = runner.invoke(main, ["ingest-db", "--input", paths["dump"],
                                  "--db", paths["db"]])
    assert result.exit_code == 0, result.output
    result = runner.invoke(main, ["build-sc", "--db", paths["db"],
                                  "--seeds", "core", "--out", paths["graph"],
                                  "--stable"])
    assert result.exit_code == 0, result.output
    return paths


def test_help_lists_subcommands(runner):
    result = runner.invoke(main, ["--help"])
    assert result.exit_code == 0
    for name in ("ingest-db", "build-sc", "clusters", "disengagement",
                 "report", "export", "serve"):
        assert name in result.output


def test_ingest_prints_manifest(tmp_path, runner):
    write_dump(tmp_path / "dump.jsonl")
    result = runner.invoke(main, ["ingest-db",
                                  "--input", str(tmp_path / "dump.jsonl"),
                                  "--db", str(tmp_path / "deps.sqlite")])
    assert result.exit_code == 0
    manifest = json.loads(result.stdout)
    assert manifest["packages"] == 5


def test_build_sc_prints_stats(workspace, runner):
    result = runner.invoke(main, ["build-sc", "--db", workspace["db"],
                                  "--seeds", "core",
                                  "--out", str(workspace["dir"] / "g2.json")])
    assert result.exit_code == 0
    assert json.loads(result.stdout) == {
        "packages": 5, "versions": 6, "edges": 5,
    }


def test_seeds_accepts_comma_list(workspace, runner):
    out = str(workspace["dir"] / "multi.json")
    result = runner.invoke(main, ["build-sc", "--db", workspace["db"],
                                  "--seeds", "core, lone", "--out", out])
    assert result.exit_code == 0
    payload = json.loads(open(out).read())
    assert payload["seeds"] == ["core", "lone"]


def test_full_pipeline_through_cli(workspace, runner):
    clusters = str(workspace["dir"] / "clusters.json")
    dis = str(workspace["dir"] / "dis.json")
    summary = str(workspace["dir"] / "summary.json")

    result = runner.invoke(main, ["clusters", "--input", workspace["graph"],
                                  "--out", clusters])
    assert result.exit_code == 0
    assert json.loads(result.stdout)["isolated"]["members"] == ["lone"]

    result = runner.invoke(main, ["disengagement",
                                  "--input", workspace["graph"],
                                  "--db", workspace["db"], "--out", dis])
    assert result.exit_code == 0
    assert json.loads(result.stdout)["trend"] == {"2021Q2": 1}

    result = runner.invoke(main, ["report", "--input", workspace["graph"],
                                  "--clusters", clusters,
                                  "--disengagement", dis,
                                  "--out", summary, "--stable"])
    assert result.exit_code == 0
    assert json.loads(result.stdout)["disengagement"]["count"] == 1

    result = runner.invoke(main, ["export", "--input", workspace["graph"],
                                  "--out", str(workspace["dir"] / "g.dot"),
                                  "--format", "dot"])
    assert result.exit_code == 0
    assert json.loads(result.stdout)["format"] == "dot"


def test_stable_artifacts_identical_across_runs(workspace, runner):
    first = workspace["dir"] / "r1.json"
    second = workspace["dir"] / "r2.json"
    for out in (first, second):
        result = runner.invoke(main, ["build-sc", "--db", workspace["db"],
                                      "--seeds", "core", "--out", str(out),
                                      "--stable"])
        assert result.exit_code == 0
    assert first.read_bytes() == second.read_bytes()


def test_unknown_seed_exits_1(workspace, runner):
    result = runner.invoke(main, ["build-sc", "--db", workspace["db"],
                                  "--seeds", "ghost",
                                  "--out", str(workspace["dir"] / "x.json")])
    assert result.exit_code == 1
    assert "UnknownSeed" in result.stderr
    assert "ghost" in result.stderr


def test_missing_file_exits_1(tmp_path, runner):
    result = runner.invoke(main, ["clusters",
                                  "--input", str(tmp_path / "absent.json"),
                                  "--out", str(tmp_path / "c.json")])
    assert result.exit_code == 1
    assert "FileNotFoundError" in result.stderr


def test_missing_required_option_exits_2(runner):
    result = runner.invoke(main, ["build-sc", "--seeds", "core",
                                  "--out", "x.json"])
    assert result.exit_code == 2


def test_empty_seeds_exits_2(workspace, runner):
    result = runner.invoke(main, ["build-sc", "--db", workspace["db"],
                                  "--seeds", " , ",
                                  "--out", str(workspace["dir"] / "x.json")])
    assert result.exit_code == 2
    assert "--seeds" in result.stderr


def test_bad_export_format_exits_2(workspace, runner):
    result = runner.invoke(main, ["export", "--input", workspace["graph"],
                                  "--out", "x.bin", "--format", "pdf"])
    assert result.exit_code == 2


def test_log_env_var_smoke(workspace, runner, monkeypatch):
    monkeypatch.setenv("CHAINFORGE_LOG", "DEBUG")
    result = runner.invoke(main, ["export", "--input", workspace["graph"],
                                  "--out", str(workspace["dir"] / "log.dot"),
                                  "--format", "dot"])
    assert result.exit_code == 0


def test_server_option_posts_to_remote(runner, monkeypatch):
    seen = {}

    def fake_post(url, json=None, timeout=None):
        seen["url"] = url
        seen["payload"] = json
        return httpx.Response(200, json={"format": "dot", "out": "o", "bytes": 3},
                              request=httpx.Request("POST", url))

    monkeypatch.setattr(httpx, "post", fake_post)
    result = runner.invoke(main, ["--server", "http://example.test:9000/",
                                  "export", "--input", "g.json",
                                  "--out", "o", "--format", "dot"])
    assert result.exit_code == 0
    assert seen["url"] == "http://example.test:9000/export"
    assert seen["payload"]["format"] == "dot"


def test_server_option_surfaces_remote_error(runner, monkeypatch):
    def fake_post(url, json=None, timeout=None):
        return httpx.Response(
            404, json={"error": "FileNotFoundError", "detail": "g.json"},
            request=httpx.Request("POST", url),
        )

    monkeypatch.setattr(httpx, "post", fake_post)
    result = runner.invoke(main, ["--server", "http://example.test",
                                  "export", "--input", "g.json",
                                  "--out", "o", "--format", "dot"])
    assert result.exit_code == 1
    assert "FileNotFoundError" in result.stderr
