"""Shared fixtures: the single-qubit reference instance and small helpers."""

from pathlib import Path

import numpy as np
import pytest

from src.config import settings
from src.instance_config import Instance, build_instance
from src.models import InstanceSpec

REPO_ROOT = Path(__file__).resolve().parents[1]
EXPERIMENTS_DIR = REPO_ROOT / "config" / "experiments"


def instance_data(**overrides) -> dict:
    """H = Z, A = {X}, beta = 1, Metropolis weights, Gaussian filter sigma_t = 5."""
    data = {
        "hamiltonian": {"kind": "pauli_z_chain", "n": 1, "params": {"h": 1.0}},
        "beta": 1.0,
        "jumps": [{"pauli": "X"}],
        "filter": {"kind": "gaussian", "param": 5.0},
        "weight": {"kind": "metropolis"},
        "grid": {"N": 64},
    }
    for key, value in overrides.items():
        if isinstance(value, dict) and isinstance(data.get(key), dict):
            data[key] = {**data[key], **value}
        else:
            data[key] = value
    return data


@pytest.fixture
def make_instance():
    """Factory: make_instance(grid={"N": 8}, beta=0.5, ...) -> Instance."""

    def factory(**overrides) -> Instance:
        return build_instance(InstanceSpec(**instance_data(**overrides)))

    return factory


@pytest.fixture
def instance(make_instance) -> Instance:
    return make_instance()


@pytest.fixture
def small_instance(make_instance) -> Instance:
    """Same instance on an N = 8 grid, small enough for circuit simulation."""
    return make_instance(grid={"N": 8})


@pytest.fixture
def rng() -> np.random.Generator:
    return np.random.default_rng(1234)


@pytest.fixture
def fast_sampling(monkeypatch):
    """Cut the sampling effort of 1->1 norms and mixing times."""
    monkeypatch.setattr(settings, "norm_trials", 400)
    monkeypatch.setattr(settings, "refine_steps", 50)
