"""Test suite for the registered experiments at desk scale"""

import numpy as np
import pytest

from src.exceptions import CheckFailed
from src.experiments import get_experiment
from src.instance_config import ExperimentDocument, Tolerances
from src.quantum.circuits import AnnealPoint, AnnealReport
from src.workflow import ExperimentRunner
from tests.conftest import EXPERIMENTS_DIR, instance_data


def _runner(experiment: str, sweep=None, options=None, **overrides) -> ExperimentRunner:
    data = {"experiment": experiment, "instance": instance_data(**overrides), "seed": 5}
    if sweep:
        data["sweep"] = {"param": sweep[0], "values": list(sweep[1])}
    if options:
        data["options"] = options
    return ExperimentRunner(ExperimentDocument(data=data))


def _rows(runner: ExperimentRunner) -> list[dict]:
    return [row for point in runner._points() for row in runner.experiment.point(point)]


def _strictly_decreasing(values: list[float]) -> bool:
    return all(b < a for a, b in zip(values, values[1:]))


def test_fixed_point_improves_with_filter_width():
    """Wider Gaussian filters give fixed points closer to rho_beta"""
    print("\n" + "=" * 60)
    print("TEST: Experiments - fixed-point-scan over sigma_t")
    print("=" * 60)

    sigmas = [2, 4, 8, 16, 32]
    runner = _runner("fixed-point-scan", ("sigma_t", sigmas), {"mixing": False}, grid={"N": 256})
    rows = _rows(runner)
    distances = [r["trace_distance"] for r in rows]
    assert _strictly_decreasing(distances), f"trace distances not decreasing: {distances}"
    assert [r["sigma_t"] for r in rows] == sigmas
    assert all(r["t_mix_lb"] is None for r in rows)
    for row in rows:
        print(f"  ✓ sigma_t={row['sigma_t']}: {row['trace_distance']:.3e}")

    slope = np.polyfit(np.log(sigmas), np.log(distances), 1)[0]
    assert -1.5 <= slope <= -0.6, f"log-log slope {slope:.3f} outside [-1.5, -0.6]"
    assert get_experiment("fixed-point-scan").verify(rows, Tolerances()) == []
    print(f"  ✓ slope {slope:.3f}")


def test_uniform_weight_fixed_point_improves_with_T():
    """Uniform-weight fixed points decay at least as fast as sqrt(beta/T)"""
    runner = _runner(
        "fixed-point-scan",
        ("T", [4, 8, 16, 32]),
        {"variant": "cgme_continuous", "mixing": False},
        T=4.0,
    )
    rows = _rows(runner)
    distances = [r["trace_distance"] for r in rows]
    assert _strictly_decreasing(distances), f"CGME distances not decreasing: {distances}"
    assert [r["T"] for r in rows] == [4, 8, 16, 32] and rows[0]["sigma_t"] is None
    scaled = [r["trace_distance"] * np.sqrt(r["T"] / r["beta"]) for r in rows]
    assert _strictly_decreasing(scaled), f"distance * sqrt(T/beta) grew: {scaled}"
    assert get_experiment("fixed-point-scan").verify(rows, Tolerances()) == []


def test_uniform_weight_verifier_flags_slow_decay():
    verify = get_experiment("fixed-point-scan").verify
    rows = [
        {"sigma_t": None, "T": T, "beta": 1.0, "trace_distance": 0.2 * T**-0.25}
        for T in (4, 8, 16, 32)
    ]
    failing = verify(rows, Tolerances())
    assert len(failing) == 3 and "sqrt(T/beta)" in failing[0]["reason"]


def test_discretization_converges():
    """The discrete generator approaches the continuous one as N grows"""
    print("\n" + "=" * 60)
    print("TEST: Experiments - discretization-convergence")
    print("=" * 60)

    rows = _rows(_runner("discretization-convergence", ("N", [32, 64, 128, 256])))
    distances = [r["distance"] for r in rows]
    assert _strictly_decreasing(distances), f"distances not decreasing: {distances}"
    for row in rows:
        print(f"  ✓ N={row['N']}: {row['distance']:.3e}")


def test_proxy_eigenvector_within_bound():
    rows = _rows(_runner("proxy-eigvec-scan", ("sigma_t", [2, 4, 8, 16]), grid={"N": 256}))
    for row in rows:
        assert row["pass"], f"sigma_t={row['sigma_t']}: {row['eigvec_dist']} > {row['bound']}"
        assert row["hermiticity"] < 1e-12


def test_scaling_verifier_flags_flat_curves():
    verify = get_experiment("fixed-point-scan").verify
    rows = [{"sigma_t": s, "T": None, "trace_distance": 1.0 / s} for s in (2, 4, 8)]
    assert verify(rows, Tolerances()) == []

    flat = [{"sigma_t": s, "T": None, "trace_distance": 1.0 - 0.01 * s} for s in (2, 4, 8)]
    failing = verify(flat, Tolerances())
    assert failing and "slope" in failing[-1]["reason"]


@pytest.mark.parametrize("seed", [1, 14, 18, 27])
def test_weak_measurement_order_holds_across_seeds(seed):
    """Step error is second order in delta whatever the sampled initial state"""
    document = ExperimentDocument(EXPERIMENTS_DIR / "weak-measure-convergence.yaml")
    result = ExperimentRunner(document, seed=seed).run(write=False)
    assert result.passed
    finest = result.rows[-1]
    assert finest["delta"] == 0.01
    assert finest["end_time"] == pytest.approx(1.0)
    assert finest["end_distance"] <= 0.05


def _anneal_report(flag: str | None) -> AnnealReport:
    points = [
        AnnealPoint(beta=0.0, gap=1.0, eigvec_dist=0.01, overlap=0.99),
        AnnealPoint(beta=0.5, gap=0.9, eigvec_dist=0.3, overlap=0.98, flag=flag),
        AnnealPoint(beta=1.0, gap=0.8, eigvec_dist=0.02),
    ]
    return AnnealReport(points=points, constant=0.0, min_overlap=0.98)


def test_anneal_path_passes_with_large_overlaps(monkeypatch):
    monkeypatch.setattr("src.experiments.anneal_path", lambda *a, **k: _anneal_report(None))
    result = _runner("anneal-path").run(write=False)
    assert result.passed and len(result.rows) == 3


def test_anneal_path_fails_on_flagged_node(monkeypatch):
    """A node above eigvec_dist 1/10 voids the overlap guarantee for the run"""
    report = _anneal_report("EigvecDistTooLarge")
    assert report.flagged == 1
    monkeypatch.setattr("src.experiments.anneal_path", lambda *a, **k: report)
    with pytest.raises(CheckFailed) as excinfo:
        _runner("anneal-path").run(write=False)
    assert len(excinfo.value.failing_rows) == 3


def test_checked_experiments_pass():
    """Block-encoding and Davies checks pass on the reference instance"""
    result = _runner("block-encode-verify", ("N", [8]), grid={"N": 8}).run(write=False)
    assert result.passed and result.rows[0]["n_qubits"] == 5

    result = _runner("davies-exactness", ("beta", [0.5, 1.0, 2.0])).run(write=False)
    assert all(row["pass"] for row in result.rows)


def test_failing_rows_are_reported():
    runner = ExperimentRunner(
        ExperimentDocument(
            data={
                "experiment": "davies-exactness",
                "instance": instance_data(),
                "tolerances": {"residual": 0.0},
            }
        )
    )
    with pytest.raises(CheckFailed) as excinfo:
        runner.run(write=False)
    assert len(excinfo.value.failing_rows) == 1
