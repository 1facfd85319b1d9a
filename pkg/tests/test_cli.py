"""Test suite for the qgl command line"""

import json

import pytest
import yaml
from click.testing import CliRunner

from src.config import settings
from src.experiments import EXPERIMENTS
from src.main import EXIT_CHECK_FAILED, EXIT_CONFIG, EXIT_INSTANCE, EXIT_OK, cli
from tests.conftest import instance_data


@pytest.fixture
def runner() -> CliRunner:
    return CliRunner()


def _write_config(path, experiment="parseval", **fields):
    data = {"experiment": experiment, "instance": instance_data(), "seed": 11, **fields}
    path.write_text(yaml.safe_dump(data), encoding="utf-8")
    return path


def test_every_experiment_has_a_command(runner):
    for name in EXPERIMENTS:
        assert name in cli.commands, f"missing subcommand {name}"
    assert len(EXPERIMENTS) == 14
    result = runner.invoke(cli, ["list-experiments"])
    assert result.exit_code == EXIT_OK, result.output


def test_parseval_writes_csv(runner, tmp_path):
    """A passing run exits 0 and writes the stamped CSV report"""
    print("\n" + "=" * 60)
    print("TEST: CLI - parseval")
    print("=" * 60)

    config = _write_config(tmp_path / "parseval.yaml")
    out = tmp_path / "report.csv"
    result = runner.invoke(cli, ["parseval", "--config", str(config), "--out", str(out)])
    assert result.exit_code == EXIT_OK, result.output

    lines = out.read_text(encoding="utf-8").splitlines()
    assert lines[0].startswith("# qgl parseval seed=11 generated ")
    assert lines[1] == "check_name,measured,bound,pass,runtime_s"
    assert lines[2].startswith("parseval,") and ",true," in lines[2]
    print("  ✓ report written with stamp and header")


def test_json_format(runner, tmp_path):
    config = _write_config(tmp_path / "parseval.yaml")
    out = tmp_path / "report.json"
    result = runner.invoke(
        cli, ["parseval", "--config", str(config), "--out", str(out), "--format", "json"]
    )
    assert result.exit_code == EXIT_OK, result.output
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["seed"] == 11
    assert payload["columns"][0] == "check_name"


def test_exit_codes(runner, tmp_path):
    """Config problems exit 2, unbuildable instances 3, failing checks 1"""
    print("\n" + "=" * 60)
    print("TEST: CLI - Exit codes")
    print("=" * 60)

    broken = tmp_path / "broken.yaml"
    broken.write_text("experiment: parseval\ninstance: {hamiltonian: [\n", encoding="utf-8")
    result = runner.invoke(cli, ["parseval", "--config", str(broken)])
    assert result.exit_code == EXIT_CONFIG, result.output
    print("  ✓ malformed YAML -> 2")

    oversized = tmp_path / "oversized.yaml"
    data = {"experiment": "parseval", "instance": instance_data(hamiltonian={"n": 6})}
    oversized.write_text(yaml.safe_dump(data), encoding="utf-8")
    result = runner.invoke(
        cli, ["parseval", "--config", str(oversized), "--out", str(tmp_path / "x.csv")]
    )
    assert result.exit_code == EXIT_INSTANCE, result.output
    print("  ✓ six-qubit instance -> 3")

    strict = _write_config(
        tmp_path / "strict.yaml", experiment="davies-exactness", tolerances={"residual": 0.0}
    )
    out = tmp_path / "strict.csv"
    result = runner.invoke(cli, ["davies-exactness", "--config", str(strict), "--out", str(out)])
    assert result.exit_code == EXIT_CHECK_FAILED, result.output
    assert out.exists(), "the report is written even when checks fail"
    assert ",false," in out.read_text(encoding="utf-8")
    print("  ✓ failing check -> 1 with report written")


@pytest.mark.parametrize(
    "experiment, fields",
    [
        ("parseval", {}),
        ("davies-exactness", {"sweep": {"param": "beta", "values": [0.5, 1.0, 2.0]}}),
        ("oft-tails", {"sweep": {"param": "mu", "values": [0.5, 1.0]}}),
    ],
)
def test_reports_are_reproducible(runner, tmp_path, experiment, fields):
    """Two runs with default settings agree byte for byte below the stamp line"""
    assert settings.record_runtime is False
    config = _write_config(tmp_path / f"{experiment}.yaml", experiment=experiment, **fields)
    bodies = []
    for name in ("a.csv", "b.csv"):
        out = tmp_path / name
        result = runner.invoke(cli, [experiment, "--config", str(config), "--out", str(out)])
        assert result.exit_code == EXIT_OK, result.output
        bodies.append(out.read_text(encoding="utf-8").split("\n", 1)[1])
    assert bodies[0] == bodies[1]
    assert ",0.0\n" in bodies[0], "runtime_s is zero unless runtimes are recorded"


def test_validate_config(runner, tmp_path):
    config = _write_config(tmp_path / "parseval.yaml")
    result = runner.invoke(cli, ["validate-config", "--config", str(config)])
    assert result.exit_code == EXIT_OK, result.output
    assert "Configuration is valid" in result.output

    result = runner.invoke(cli, ["validate-config", "--config", str(tmp_path / "none.yaml")])
    assert result.exit_code == EXIT_CONFIG
