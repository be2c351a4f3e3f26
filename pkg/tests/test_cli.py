import json

import pytest

from clarifyir import cli, synthetic
from clarifyir.cli import cli_dispatch

from conftest import BENCH_SEED


@pytest.fixture(scope="module")
def cli_bench(tmp_path_factory):
    """A fresh benchmark driven entirely through the CLI."""
    root = tmp_path_factory.mktemp("cli_bench")
    paths = synthetic.write_benchmark(root / "data", seed=BENCH_SEED)
    config_path = synthetic.write_config(root / "run", paths, mode="gen_rerank_text_only", eval_split="train")
    return {"root": root, "paths": paths, "config": config_path}


def test_subcommands_listed():
    assert set(cli.COMMANDS) == {
        "split", "index", "identifiers", "train-scorer", "weak-label",
        "train-classifier", "retrieve", "evaluate", "stats", "compare", "run",
    }


def test_missing_subcommand_usage_error(capsys):
    assert cli_dispatch([]) == 2


def test_unknown_flag_usage_error(capsys):
    rc = cli_dispatch(["stats", "--config", "x.json", "--frobnicate"])
    assert rc == 2


def test_run_without_config_flag_is_usage_error():
    assert cli_dispatch(["run"]) == 2


def test_missing_config_file_is_runtime_error(tmp_path, capsys):
    rc = cli_dispatch(["run", "--config", str(tmp_path / "none.json")])
    captured = capsys.readouterr()
    assert rc == 1
    assert captured.err.startswith("error: config:")


def test_full_pipeline_through_cli(cli_bench, capsys):
    config = str(cli_bench["config"])
    for command in ("split", "index", "identifiers", "train-scorer"):
        assert cli_dispatch([command, "--config", config]) == 0, command
    assert cli_dispatch(["retrieve", "--config", config]) == 0
    assert cli_dispatch(["evaluate", "--config", config]) == 0
    out = capsys.readouterr().out
    assert "gen_rerank_text_only" in out
    assert "100.00" in out  # memorized train facets

    assert cli_dispatch(["run", "--config", config]) == 0
    run_dir = cli_bench["root"] / "run"
    assert (run_dir / "report.json").exists()
    assert (run_dir / "metrics.tsv").exists()
    assert (run_dir / "rankings.jsonl").exists()

    for command in ("weak-label", "train-classifier"):
        assert cli_dispatch([command, "--config", config]) == 0, command
    assert (run_dir / "weak_labels.jsonl").exists()
    assert (run_dir / "classifier.json").exists()


def test_split_deterministic_through_cli(cli_bench, tmp_path):
    config = str(cli_bench["config"])
    split_path = cli_bench["paths"]["split"]
    assert cli_dispatch(["split", "--config", config]) == 0
    first = split_path.read_bytes()
    assert cli_dispatch(["split", "--config", config]) == 0
    assert split_path.read_bytes() == first


def test_stats_output(cli_bench, capsys):
    assert cli_dispatch(["stats", "--config", str(cli_bench["config"])]) == 0
    out = capsys.readouterr().out
    assert "topics: 25" in out
    assert "facets: 50" in out
    assert "yes/no answers" in out
    assert "single-token answer" in out  # the counting-rule footnote


def test_compare_through_cli(cli_bench, capsys):
    config = str(cli_bench["config"])
    report = cli_bench["root"] / "run" / "report.json"
    assert report.exists()
    rc = cli_dispatch(["compare", "--config", config, "--report-a", str(report), "--report-b", str(report)])
    assert rc == 0
    payload = json.loads(capsys.readouterr().out)
    assert payload["mrr"]["p_raw"] == 1.0
    assert payload["mrr"]["significant"] is False


def test_compare_without_baseline_is_error(cli_bench, capsys):
    rc = cli_dispatch(["compare", "--config", str(cli_bench["config"])])
    assert rc == 1
    assert "error:" in capsys.readouterr().err


def test_evaluate_missing_run_file(cli_bench, tmp_path, capsys):
    rc = cli_dispatch(["evaluate", "--config", str(cli_bench["config"]), "--run", str(tmp_path / "no.jsonl")])
    assert rc == 1
    assert "missing-artifact" in capsys.readouterr().err
