"""Test suite for gate-level circuit simulation"""

import numpy as np
import pytest

from src.exceptions import NonUnitaryCompletion, TooLarge
from src.quantum.circuits import (
    Register,
    anneal_path,
    block_encoding_residual,
    build_block_encoding,
    build_discriminant_block,
    build_prep,
    build_qft,
    build_uniform_prep_circuit,
    discriminant_block,
    discriminant_block_residual,
    encoded_operators,
    label_involution,
    reject_block,
    reject_residual,
    weak_measure_randomized,
    weak_measure_step,
)
from src.quantum.dynamics import evolve
from src.quantum.generator import build_lindbladian
from src.quantum.model import SpectralGrid, make_filter
from src.quantum.numkit import (
    PAULI_X,
    hermiticity_residual,
    is_unitary,
    random_density,
    trace_distance,
)


@pytest.mark.parametrize("n_grid", [8, 16])
def test_block_encoding_matches_weighted_transform(make_instance, n_grid):
    """<0|U|0> blocks equal sqrt(gamma(w)) A_hat(w) for every label"""
    print("\n" + "=" * 60)
    print(f"TEST: Circuits - Block-encoding at N={n_grid}")
    print("=" * 60)

    inst = make_instance(grid={"N": n_grid})
    program = build_block_encoding(inst.lindblad)
    assert program.is_unitary(), "composite circuit must be unitary"
    residual = block_encoding_residual(program, inst.lindblad)
    assert residual < 1e-9, f"block residual {residual:.2e}"
    print(f"  ✓ residual {residual:.2e} on {program.register.n_qubits} qubits")

    names = [g["gate_name"] for g in program.to_json()]
    assert names == ["prep", "ctrl_ham", "select", "ctrl_ham", "qft", "weight_rot"]


def test_block_encoding_with_uniform_filter(make_instance):
    inst = make_instance(beta=0.0, grid={"N": 8}, filter={"kind": "uniform", "param": None})
    program = build_block_encoding(inst.lindblad)
    assert block_encoding_residual(program, inst.lindblad) < 1e-9


def test_zero_weight_encodes_nothing(make_instance):
    inst = make_instance(grid={"N": 8}, weight={"kind": "custom", "table": [0.0] * 8})
    program = build_block_encoding(inst.lindblad)
    blocks = encoded_operators(program.unitary, 2)
    assert np.allclose(blocks, 0), "gamma = 0 everywhere must leave an empty block"


def test_qft_and_prep():
    assert is_unitary(build_qft(16), 1e-12)
    with pytest.raises(NonUnitaryCompletion):
        build_prep(np.zeros(4))
    with pytest.raises(NonUnitaryCompletion):
        build_prep(np.ones(4))
    with pytest.raises(TooLarge):
        Register([("a", 10), ("b", 4)])


@pytest.mark.parametrize("k", [1, 2])
def test_uniform_prep_circuit_matches_filter(k):
    """GHZ on the top bits and |+> on the rest prepares the half-open window"""
    grid = SpectralGrid(N=16, omega0=0.5)
    program = build_uniform_prep_circuit(4, k)
    filt = make_filter("uniform", grid, T=2**k * grid.t0, window="half_open")
    assert np.allclose(program.unitary[:, 0], filt.values), "prep column differs from filter"
    with pytest.raises(ValueError):
        build_uniform_prep_circuit(4, 4)


def test_discriminant_block(small_instance):
    """The top-left block of U_D is I + D_beta"""
    print("\n" + "=" * 60)
    print("TEST: Circuits - Discriminant block")
    print("=" * 60)

    spec = small_instance.lindblad
    residual = discriminant_block_residual(spec)
    assert residual < 1e-9, f"discriminant block residual {residual:.2e}"
    print(f"  ✓ block = I + D (residual {residual:.2e})")

    encoding = build_block_encoding(spec)
    perm = label_involution(spec.grid, spec.jumps)
    program = build_discriminant_block(encoding, perm, 2)
    block = discriminant_block(program, 2)
    assert hermiticity_residual(block) < 1e-10
    print("  ✓ block is Hermitian")


def test_reject_block_corner():
    """The corner of V is sum_j L_j^dag L_j"""
    d = 2
    # flag stays 0: L = X, corner X^2 = I
    passthrough = np.kron(np.eye(2), PAULI_X)
    assert np.allclose(reject_block(passthrough)[:d, :d], np.eye(d))
    # flag 1 always: nothing encoded, corner 0
    flipped = np.kron(PAULI_X, np.eye(d))
    assert np.allclose(reject_block(flipped)[:d, :d], 0)


def test_reject_residual(small_instance):
    assert reject_residual(small_instance.lindblad) < 1e-10


def test_weak_measurement_is_first_order(make_instance, rng):
    """One gadget equals e^{delta L} up to O(delta^2)"""
    print("\n" + "=" * 60)
    print("TEST: Circuits - Weak measurement convergence")
    print("=" * 60)

    inst = make_instance(grid={"N": 16}, filter={"param": 2.0})
    spec = inst.lindblad
    encoding = build_block_encoding(spec)
    gen = build_lindbladian(spec)
    rho = random_density(2, rng)

    assert np.allclose(weak_measure_step(encoding, 0.0, rho), rho), "delta = 0 must do nothing"

    deltas = np.array([0.1, 0.05, 0.025, 0.0125])
    errors = []
    for delta in deltas:
        step = weak_measure_step(encoding, delta, rho)
        assert np.isclose(np.trace(step), 1.0)
        errors.append(trace_distance(step, evolve(gen, rho, delta)))
    slope = np.polyfit(np.log(deltas), np.log(errors), 1)[0]
    assert slope == pytest.approx(2.0, abs=0.3), f"step error slope {slope:.2f}"
    print(f"  ✓ step error ~ delta^{slope:.2f}")


def test_randomized_weak_measurement(make_instance, rng):
    inst = make_instance(grid={"N": 8})
    first = build_block_encoding(inst.lindblad)
    other = make_instance(grid={"N": 8}, weight={"kind": "glauber"})
    second = build_block_encoding(other.lindblad)
    rho = random_density(2, rng)

    single = weak_measure_randomized([first], [1.0], 0.1, rho, steps=4, trajectories=20)
    assert np.max(single.stderr) < 1e-12
    assert np.max(np.abs(single.mean - single.expected)) < 1e-12
    assert single.max_z == 0.0

    mixed = weak_measure_randomized(
        [first, second], [0.5, 0.5], 0.1, rho, steps=6, trajectories=400, seed=5
    )
    diff = np.max(np.abs(mixed.mean - mixed.expected))
    assert diff < 6 * np.max(mixed.stderr) + 1e-12, f"mean off by {diff:.2e}"
    assert mixed.max_z < 6.0, f"mean is {mixed.max_z:.1f} standard errors off"

    with pytest.raises(ValueError):
        weak_measure_randomized([first], [0.5], 0.1, rho, steps=1)


def test_anneal_path(make_instance):
    """Consecutive top eigenvectors overlap well along a short beta schedule"""
    inst = make_instance(grid={"N": 256}, filter={"param": 16.0})
    report = anneal_path(inst.lindblad, 2)
    assert len(report.points) == 3
    assert report.points[0].beta == 0.0 and report.points[-1].beta == pytest.approx(1.0)
    assert report.min_overlap >= 0.6, f"min overlap {report.min_overlap:.3f}"
    assert report.points[-1].overlap is None
    with pytest.raises(ValueError):
        anneal_path(inst.lindblad, 0)
