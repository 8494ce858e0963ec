import json

import pytest
from click.testing import CliRunner

from app.interface.cli import CLI, cli


@pytest.fixture
def runner():
    return CliRunner()


def test_account_prints_itemised_storage(runner, tmp_path):
    out = tmp_path / "taxi.txt"
    result = runner.invoke(cli, ["account", "--env", "taxi", "--out", str(out)])
    assert result.exit_code == 0, result.output
    assert "Total: 632" in result.output
    assert "Flat Q table: 3000" in result.output
    assert "QNavigateForGet" in out.read_text()


def test_account_without_abstraction(runner):
    result = runner.invoke(cli, ["account", "--env", "taxi", "--no-abstract"])
    assert result.exit_code == 0, result.output
    assert "Total: 14000" in result.output


def test_account_reads_environment_overrides(runner, tmp_path):
    overrides = tmp_path / "overrides.json"
    overrides.write_text(json.dumps({"fuel": True}))
    result = runner.invoke(cli, ["account", "--env", "taxi", "--config", str(overrides)])
    assert result.exit_code == 0, result.output
    assert "Flat Q table: 52500" in result.output

    bad = runner.invoke(cli, ["account", "--config", str(tmp_path / "missing.json")])
    assert bad.exit_code != 0


def test_check_reports_safe_taxi(runner):
    result = runner.invoke(cli, ["check", "--env", "taxi"])
    assert result.exit_code == 0, result.output
    assert "All abstractions safe" in result.output
    assert "max_node_irrelevance" in result.output


def test_check_reports_fickle_navigation_violation():
    result = CLI.check("taxi-fickle", {})
    assert result["success"]
    assert result["valid"]
    assert not result["safe"]
    assert any(v["node"] == "Navigate" for v in result["violations"])


def test_invalid_override_is_reported():
    result = CLI.account("taxi", {"fickle": "maybe"}, abstract=True)
    assert not result["success"]
    assert result["error"]


def test_unknown_environment_is_rejected(runner):
    result = runner.invoke(cli, ["account", "--env", "chess"])
    assert result.exit_code == 2


def test_run_writes_curves(runner, tmp_path):
    result = CLI.run(None, "two-rooms", "maxq-abs", 1, 2, 3, str(tmp_path))
    assert result["success"], result.get("error")
    assert result["trials"] == 2
    assert result["label"] == "two-rooms-maxq-abs"
    assert (tmp_path / "two-rooms-maxq-abs.curves.csv").exists()


def test_run_reports_invalid_budgets():
    result = CLI.run(None, "two-rooms", None, None, None, 0, None)
    assert not result["success"]
