"""
Author: KGForge contributors

The code is part of the KGForge project and is licensed under the MIT License.
"""
from pathlib import Path

import numpy as np
import orjson
import pytest

from lib.core.core_gateway import ChatRequest
from lib.core.core_schemas_errors import TransportError
from lib.interfaces.terminal.terminal_app import TerminalApp
from lib.interfaces.terminal.terminal_errors import (
    EXIT_DATA_ERROR,
    EXIT_SUCCESS,
    EXIT_UPSTREAM_ERROR,
    EXIT_USAGE_ERROR,
)
from lib.utils import check_python_version


class UnreachableGateway:
    """Gateway whose every call fails at the transport level."""

    def chat(self, request: ChatRequest) -> str:
        raise TransportError("connection refused")

    def embed(self, texts: list[str]) -> list[np.ndarray]:
        raise TransportError("connection refused")

    def token_count(self, text: str) -> int:
        return len(text.split())


@pytest.fixture
def config_args(fixtures_dir: Path) -> list[str]:
    return ["--config", str(fixtures_dir / "config.yaml")]


def _run_stages(run: Path, config_args: list[str], corpus: Path | None = None) -> None:
    """Take a run folder through the pipeline, starting with extraction when a corpus is given."""
    app = TerminalApp()
    if corpus is not None:
        assert app.run([*config_args, "extract", str(corpus), "--run", str(run)]) == EXIT_SUCCESS
    for command in ("build-graph", "induce", "index"):
        assert app.run([*config_args, command, "--run", str(run)]) == EXIT_SUCCESS


def _artifact_hashes(run: Path) -> dict[str, str]:
    return orjson.loads((run / "manifest.json").read_bytes())["files"]


@pytest.fixture
def built_run(tmp_path: Path, fixtures_dir: Path, config_args: list[str]) -> Path:
    """Run folder taken through every pipeline stage with the mock gateway."""
    _run_stages(tmp_path / "run", config_args, fixtures_dir / "corpus.jsonl")
    return tmp_path / "run"


##################################################################################################################
#   PIPELINE
##################################################################################################################

def test_pipeline_writes_the_run_folder(built_run: Path) -> None:
    manifest = orjson.loads((built_run / "manifest.json").read_bytes())

    assert manifest["stages"] == {"extract": True, "build": True, "induce": True, "index": True}
    assert manifest["completed_batches"] == [0, 1, 2]
    assert {"graph_base.kgfg", "graph.kgfg", "concepts.csv", "index/nodes.kgfv"} <= manifest["files"].keys()


def test_extract_resumes_completed_batches(
    built_run: Path, fixtures_dir: Path, config_args: list[str], capsys: pytest.CaptureFixture[str]
) -> None:
    capsys.readouterr()

    code = TerminalApp().run([*config_args, "extract", str(fixtures_dir / "corpus.jsonl"), "--run", str(built_run)])

    assert code == EXIT_SUCCESS
    assert "in 3 batches (3 already done)" in capsys.readouterr().out
    assert orjson.loads((built_run / "manifest.json").read_bytes())["stages"]["index"]


def test_fresh_runs_produce_identical_artifacts(
    built_run: Path, fixtures_dir: Path, config_args: list[str], tmp_path: Path
) -> None:
    second = tmp_path / "second"

    _run_stages(second, config_args, fixtures_dir / "corpus.jsonl")

    assert _artifact_hashes(second) == _artifact_hashes(built_run)
    assert (second / "graph.kgfg").read_bytes() == (built_run / "graph.kgfg").read_bytes()


def test_interrupted_extraction_resumes_to_the_same_artifacts(
    built_run: Path, fixtures_dir: Path, config_args: list[str], tmp_path: Path
) -> None:
    corpus = fixtures_dir / "corpus.jsonl"
    resumed = tmp_path / "resumed"
    assert TerminalApp().run([*config_args, "extract", str(corpus), "--run", str(resumed)]) == EXIT_SUCCESS

    manifest = orjson.loads((resumed / "manifest.json").read_bytes())
    manifest["completed_batches"] = [0, 1]
    manifest["stages"]["extract"] = False
    (resumed / "manifest.json").write_bytes(orjson.dumps(manifest))
    for stage_dir in (resumed / "batches").iterdir():
        (stage_dir / "2.jsonl").unlink()

    _run_stages(resumed, config_args, corpus)

    assert orjson.loads((resumed / "manifest.json").read_bytes())["completed_batches"] == [0, 1, 2]
    assert _artifact_hashes(resumed) == _artifact_hashes(built_run)


def test_stats(built_run: Path, config_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
    capsys.readouterr()

    assert TerminalApp().run([*config_args, "stats", "--run", str(built_run)]) == EXIT_SUCCESS

    assert "Structure check: ok" in capsys.readouterr().out


@pytest.mark.parametrize("method", ["tog", "ppr", "large"])
def test_retrieve_prints_json_results(
    built_run: Path, config_args: list[str], capsys: pytest.CaptureFixture[str], method: str
) -> None:
    capsys.readouterr()

    code = TerminalApp().run(
        [*config_args, "retrieve", "--run", str(built_run), "--method", method, "-q", "Who founded AcmeCorp?"]
    )

    assert code == EXIT_SUCCESS
    result = orjson.loads(capsys.readouterr().out.splitlines()[-1])
    assert result["method"] == method
    assert result["question"] == "Who founded AcmeCorp?"
    if method != "tog":
        assert len(result["passages"]) <= 3


def test_retrieve_questions_file_is_deterministic(
    built_run: Path, fixtures_dir: Path, config_args: list[str], tmp_path: Path
) -> None:
    outputs = [tmp_path / "first.jsonl", tmp_path / "second.jsonl"]
    for output in outputs:
        code = TerminalApp().run(
            [
                *config_args, "retrieve", "--run", str(built_run), "--method", "ppr",
                "--questions", str(fixtures_dir / "questions.jsonl"), "--output", str(output),
            ]
        )
        assert code == EXIT_SUCCESS

    assert outputs[0].read_bytes() == outputs[1].read_bytes()
    assert outputs[0].read_bytes()


@pytest.mark.parametrize("view", ["entity", "entity_event", "full"])
def test_retrieve_over_each_graph_view(
    built_run: Path, config_args: list[str], capsys: pytest.CaptureFixture[str], view: str
) -> None:
    capsys.readouterr()

    code = TerminalApp().run(
        [*config_args, "retrieve", "--run", str(built_run), "--graph-view", view, "-q", "Who founded AcmeCorp?"]
    )

    assert code == EXIT_SUCCESS
    result = orjson.loads(capsys.readouterr().out.splitlines()[-1])
    assert result["method"] == "ppr"
    assert len(result["passages"]) <= 3


def test_mcq_eval_over_the_run(built_run: Path, config_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
    capsys.readouterr()

    code = TerminalApp().run(
        [*config_args, "eval", "mcq", "--run", str(built_run), "--conditions", "none", "passage", "--json"]
    )

    assert code == EXIT_SUCCESS
    report = orjson.loads(capsys.readouterr().out)
    assert report["metrics"]["accuracy[passage]"] == pytest.approx(1.0)
    assert report["metrics"]["accuracy[none]"] < 1.0


def test_changed_config_refuses_the_run(built_run: Path, config_args: list[str]) -> None:
    assert TerminalApp().run([*config_args, "--seed", "8", "induce", "--run", str(built_run)]) == EXIT_USAGE_ERROR


def test_stage_order_is_enforced(tmp_path: Path, config_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
    code = TerminalApp().run([*config_args, "build-graph", "--run", str(tmp_path / "empty")])

    assert code == EXIT_USAGE_ERROR
    assert "needs stage 'extract'" in capsys.readouterr().err


##################################################################################################################
#   EVALUATION
##################################################################################################################

def test_eval_qa(fixtures_dir: Path, config_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
    code = TerminalApp().run([*config_args, "eval", "qa", "--input", str(fixtures_dir / "qa_predictions.jsonl"), "--json"])

    assert code == EXIT_SUCCESS
    report = orjson.loads(capsys.readouterr().out)
    assert report["metrics"]["em"] == pytest.approx(2 / 3)
    assert report["metrics"]["pr@2"] == pytest.approx(0.75)


def test_eval_felm_as_text(fixtures_dir: Path, config_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
    code = TerminalApp().run([*config_args, "eval", "felm", "--input", str(fixtures_dir / "felm.jsonl")])

    assert code == EXIT_SUCCESS
    assert "0.6250" in capsys.readouterr().out


def test_malformed_input_is_a_data_error(tmp_path: Path, config_args: list[str]) -> None:
    path = tmp_path / "felm.jsonl"
    path.write_text('{"id": "r1", "segments": ["a"]\n', encoding="utf-8")

    assert TerminalApp().run([*config_args, "eval", "felm", "--input", str(path)]) == EXIT_DATA_ERROR


def test_gateway_failure_is_an_upstream_error(fixtures_dir: Path, config_args: list[str]) -> None:
    app = TerminalApp(gateway=UnreachableGateway())

    code = app.run([*config_args, "eval", "schema", "--input", str(fixtures_dir / "schema.jsonl")])

    assert code == EXIT_UPSTREAM_ERROR


##################################################################################################################
#   ARGUMENTS
##################################################################################################################

def test_version(capsys: pytest.CaptureFixture[str]) -> None:
    assert TerminalApp().run(["--version"]) == EXIT_SUCCESS

    payload = orjson.loads(capsys.readouterr().out)
    assert payload["name"] == "kgforge"
    assert {"version", "graph_format", "index_format"} <= payload.keys()


def test_config_prints_the_hash(config_args: list[str], capsys: pytest.CaptureFixture[str]) -> None:
    assert TerminalApp().run([*config_args, "--seed", "11", "config"]) == EXIT_SUCCESS

    payload = orjson.loads(capsys.readouterr().out)
    assert len(payload["config_hash"]) == 64
    assert payload["config"]["induce"]["rng_seed"] == 11
    assert payload["config"]["gateway"]["mock_seed"] == 11
    assert "api_key" not in payload["config"]["gateway"]


@pytest.mark.parametrize(
    "argv",
    [
        [],
        ["frobnicate"],
        ["eval", "qa"],
        ["eval", "mcq", "--input", "items.jsonl"],
        ["retrieve", "--run", "runs/x"],
        ["retrieve", "--run", "runs/x", "-q", "Who?", "--depth", "-1"],
        ["retrieve", "--run", "runs/x", "-q", "Who?", "--graph-view", "concepts"],
        ["extract", "missing-corpus.jsonl", "--run", "runs/x"],
        ["--config", "absent.yaml", "config"],
    ],
)
def test_usage_errors(argv: list[str], tmp_path: Path, monkeypatch: pytest.MonkeyPatch) -> None:
    monkeypatch.chdir(tmp_path)

    assert TerminalApp().run(argv) == EXIT_USAGE_ERROR


def test_help_exits_cleanly(capsys: pytest.CaptureFixture[str]) -> None:
    assert TerminalApp().run(["--help"]) == EXIT_SUCCESS
    assert "kgforge" in capsys.readouterr().out


def test_old_interpreters_are_refused(capsys: pytest.CaptureFixture[str]) -> None:
    with pytest.raises(SystemExit) as info:
        check_python_version((99, 0))

    assert info.value.code == 1
    assert "requires Python 99.0" in capsys.readouterr().err
