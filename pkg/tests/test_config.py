"""Test suite for experiment documents, sweeps and report writing"""

import json

import pytest
import yaml

from src.exceptions import ConfigError, InstanceError
from src.instance_config import ExperimentDocument, Tolerances, apply_sweep, build_instance
from src.models import InstanceSpec
from src.workflow import ExperimentRunner, render_csv, write_atomic
from tests.conftest import EXPERIMENTS_DIR, instance_data


def _document(**fields) -> ExperimentDocument:
    data = {"experiment": "parseval", "instance": instance_data(), **fields}
    return ExperimentDocument(data=data)


def test_document_loading_errors(tmp_path):
    """Missing files, malformed YAML and unknown tolerances are configuration errors"""
    print("\n" + "=" * 60)
    print("TEST: Config - Document loading")
    print("=" * 60)

    with pytest.raises(ConfigError):
        ExperimentDocument(tmp_path / "missing.yaml")
    print("  ✓ missing file rejected")

    broken = tmp_path / "broken.yaml"
    broken.write_text("experiment: parseval\ninstance: [unclosed\n", encoding="utf-8")
    with pytest.raises(ConfigError):
        ExperimentDocument(broken)
    print("  ✓ malformed YAML rejected")

    with pytest.raises(ConfigError):
        _document(tolerances={"blocks": 1e-9})
    with pytest.raises(ConfigError):
        ExperimentDocument(data={"experiment": "parseval"})
    with pytest.raises(ConfigError):
        Tolerances.merged({"unknown": 1.0})
    print("  ✓ schema violations rejected")


def test_tolerance_overrides():
    doc = _document(tolerances={"block": 1e-6})
    assert doc.tolerances.block == 1e-6
    assert doc.tolerances.residual == Tolerances().residual


def test_instance_errors():
    oversized = InstanceSpec(**instance_data(hamiltonian={"n": 6}))
    with pytest.raises(InstanceError):
        build_instance(oversized)


def test_apply_sweep():
    """Swept values land in the right section of the instance"""
    spec = InstanceSpec(**instance_data(grid={"N": 64, "omega0": 0.2}))

    resized = apply_sweep(spec, "N", 128.0)
    assert resized.grid.N == 128 and resized.grid.omega0 is None
    assert apply_sweep(spec, "sigma_t", 3.0).filter.param == 3.0
    assert apply_sweep(spec, "beta", 2.0).beta == 2.0

    timed = apply_sweep(spec, "T", 8.0)
    assert timed.T == 8.0 and timed.filter.param == 5.0, "gaussian filters keep sigma_t"
    uniform = InstanceSpec(**instance_data(filter={"kind": "uniform", "param": 4.0}))
    assert apply_sweep(uniform, "T", 8.0).filter.param == 8.0

    assert apply_sweep(spec, "mu", 0.4) == spec
    with pytest.raises(ConfigError):
        apply_sweep(spec, "sigma_t", -1.0)


def test_runner_validation():
    with pytest.raises(ConfigError):
        ExperimentRunner(_document(sweep={"param": "N", "values": [8, 16]}))
    with pytest.raises(ConfigError):
        ExperimentRunner(_document(), experiment="no-such-experiment")
    with pytest.raises(ConfigError):
        ExperimentRunner(_document(), fmt="xml")

    doc = ExperimentDocument(
        data={
            "experiment": "davies-exactness",
            "instance": instance_data(),
            "sweep": {"param": "sigma_t", "values": [2.0]},
        }
    )
    with pytest.raises(ConfigError):
        ExperimentRunner(doc)


def test_point_seeds_follow_base_seed():
    doc = ExperimentDocument(
        data={
            "experiment": "oft-tails",
            "instance": instance_data(),
            "sweep": {"param": "mu", "values": [0.5, 1.0, 2.0]},
            "seed": 40,
        }
    )
    points = ExperimentRunner(doc)._points()
    assert [p.seed for p in points] == [40, 41, 42]
    assert [p.value for p in points] == [0.5, 1.0, 2.0]
    assert ExperimentRunner(doc, seed=7)._points()[2].seed == 9


def test_render_csv():
    rows = [{"a": 0.1, "b": True, "c": None}, {"a": float("inf"), "b": False, "c": "x"}]
    text = render_csv(["a", "b", "c"], rows, stamp="qgl test")
    assert text.splitlines() == ["# qgl test", "a,b,c", "0.1,true,", "inf,false,x"]


def test_write_atomic(tmp_path):
    path = write_atomic(tmp_path / "nested" / "report.csv", "a\n1\n")
    assert path.read_text(encoding="utf-8") == "a\n1\n"
    write_atomic(path, "b\n")
    assert path.read_text(encoding="utf-8") == "b\n"
    assert sorted(p.name for p in path.parent.iterdir()) == ["report.csv"]


def test_runner_writes_report(tmp_path):
    """A document runs end to end and writes JSON with its own configuration"""
    out = tmp_path / "parseval.json"
    result = ExperimentRunner(_document(), out=out, fmt="json").run()
    assert result.passed and result.path == out
    payload = json.loads(out.read_text(encoding="utf-8"))
    assert payload["experiment"] == "parseval"
    assert payload["rows"][0]["pass"] is True
    assert payload["config"]["instance"]["grid"]["N"] == 64


@pytest.mark.parametrize("path", sorted(EXPERIMENTS_DIR.glob("*.yaml")), ids=lambda p: p.stem)
def test_bundled_documents_load(path):
    """Every shipped document validates and fits its experiment"""
    document = ExperimentDocument(path)
    runner = ExperimentRunner(document)
    assert runner.experiment.name == document.config.experiment
    with open(path, encoding="utf-8") as f:
        assert yaml.safe_load(f)["experiment"] == runner.experiment.name
