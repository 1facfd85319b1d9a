"""Test suite for problem setup: Hamiltonians, Gibbs contexts, grids, filters, weights, jumps"""

import logging

import numpy as np
import pytest

from src.exceptions import InvalidGrid, RangeTooSmall, SymmetryViolation, TooLarge
from src.models import HamiltonianSpec
from src.quantum.model import (
    Hamiltonian,
    JumpSet,
    SpectralGrid,
    build_hamiltonian,
    cluster_values,
    make_context,
    make_filter,
    make_grid,
    make_weight,
    pauli_z_chain,
    round_hamiltonian,
)
from src.quantum.numkit import PAULI_X, PAULI_Z, matrix_power, vec

SIGMA_PLUS = np.array([[0, 1], [0, 0]], dtype=complex)


def test_grid_register_order():
    """Labels follow signed binary: [0, 1, ..., N/2-1, -N/2, ..., -1]"""
    print("\n" + "=" * 60)
    print("TEST: Model - Spectral grid")
    print("=" * 60)

    grid = SpectralGrid(N=8, omega0=0.5)
    assert grid.labels.tolist() == [0, 1, 2, 3, -4, -3, -2, -1], f"got {grid.labels}"
    assert np.isclose(grid.N * grid.omega0 * grid.t0, 2 * np.pi)
    assert grid.paired.tolist() == [True] * 4 + [False] + [True] * 3
    assert np.allclose(grid.frequencies[grid.negation][grid.paired], -grid.frequencies[grid.paired])
    f = grid.dft_matrix()
    assert np.allclose(f @ f.conj().T, np.eye(8)), "DFT matrix must be unitary"
    print("  ✓ labels, negation and unitary DFT")

    with pytest.raises(InvalidGrid):
        SpectralGrid(N=6, omega0=1.0)
    with pytest.raises(InvalidGrid):
        SpectralGrid(N=8, omega0=0.0)


def test_make_grid_covers_required_range():
    ctx = make_context(PAULI_Z, 1.0)
    grid = make_grid(64, ctx)
    assert np.isclose(grid.range, 4 * 1.0 + 2 / 1.0), f"Expected range 6, got {grid.range}"
    assert make_grid(64, ctx, omega0=0.2).omega0 == 0.2
    with pytest.raises(RangeTooSmall):
        make_grid(64, ctx, omega0=0.01)

    hot = make_context(PAULI_Z, 0.0)
    assert np.isclose(make_grid(16, hot).range, 4.0), "beta = 0 range is 4||H||"


def test_round_hamiltonian_ties_toward_zero():
    ham = Hamiltonian.from_matrix(np.diag([0.5, -0.5, 0.7, -1.6]))
    rounded = round_hamiltonian(ham, 1.0)
    assert sorted(rounded.energies.tolist()) == [-2.0, 0.0, 0.0, 1.0], rounded.energies
    assert np.max(np.abs(rounded.matrix - ham.matrix)) <= 0.5 + 1e-12


def test_gibbs_context(caplog):
    """Gibbs state, purification and the beta cap"""
    print("\n" + "=" * 60)
    print("TEST: Model - Gibbs context")
    print("=" * 60)

    ctx = make_context(PAULI_Z, 1.0)
    expected = np.diag([np.exp(-1), np.exp(1)]) / (np.exp(-1) + np.exp(1))
    assert np.allclose(ctx.rho, expected), f"Expected Gibbs state {expected}, got {ctx.rho}"
    assert np.allclose(ctx.purification, vec(matrix_power(ctx.rho, 0.5)))
    assert np.allclose(sorted(ctx.bohr), [-2.0, 0.0, 2.0])
    print("  ✓ rho_beta, vec(sqrt(rho)) and Bohr frequencies")

    with caplog.at_level(logging.WARNING):
        hot = make_context(PAULI_Z, 80.0)
    assert hot.beta == pytest.approx(50.0), f"Expected beta capped to 50, got {hot.beta}"
    assert "capping" in caplog.text
    print("  ✓ beta capped at 50/||H||")

    with pytest.raises(ValueError):
        make_context(PAULI_Z, -1.0)


def test_bohr_decomposition_sums_to_operator():
    ham = pauli_z_chain(2, J=0.5, h=[1.0, 0.3], g=0.2)
    ctx = make_context(ham, 1.0)
    op = np.kron(PAULI_X, np.eye(2))
    bohr, parts = ctx.bohr_decomposition(op)
    assert np.allclose(parts.sum(axis=0), op), "Bohr components must add up to A"
    for nu, part in zip(bohr, parts, strict=True):
        commutator = ctx.hamiltonian.matrix @ part - part @ ctx.hamiltonian.matrix
        assert np.allclose(commutator, nu * part, atol=1e-9), f"[H, A_nu] != nu A_nu at {nu}"


def test_filters():
    """Filters are l2-normalized on the grid with unitary transforms"""
    grid = SpectralGrid(N=32, omega0=0.25)
    gauss = make_filter("gaussian", grid, sigma_t=2.0)
    assert np.isclose(gauss.norm, 1.0) and gauss.real_flag
    assert np.isclose(np.linalg.norm(gauss.hat()), 1.0)

    uniform = make_filter("uniform", grid, T=4 * grid.t0, window="half_open")
    support = np.flatnonzero(np.abs(uniform.values) > 0)
    assert sorted(grid.labels[support].tolist()) == list(range(-4, 4))
    assert uniform.width == pytest.approx(8 * grid.t0)

    t = np.linspace(-40.0, 40.0, 8001)
    for filt in (gauss, uniform):
        mass = np.sum(np.abs(filt.continuous_values(t)) ** 2) * (t[1] - t[0])
        assert mass == pytest.approx(1.0, abs=1e-2), f"{filt.kind} continuum mass {mass:.4f}"

    with pytest.raises(ValueError):
        make_filter("gaussian", grid)
    with pytest.raises(ValueError):
        make_filter("explicit", grid, values=np.zeros(32))


def test_weights_zero_unpaired_label_and_kms():
    grid = SpectralGrid(N=16, omega0=0.5)
    for kind in ("metropolis", "glauber"):
        weight = make_weight(kind, 1.0, grid)
        assert weight.values[grid.index_of(-8)] == 0.0, f"{kind}: -N/2 label must be zero"
        assert weight.kms_residual() < 1e-12, f"{kind} breaks KMS: {weight.kms_residual()}"
    with pytest.raises(ValueError):
        make_weight("custom", 1.0, grid, np.ones(4))


def test_jump_sets():
    """Adjoint detection, normalization and padding"""
    print("\n" + "=" * 60)
    print("TEST: Model - Jump sets")
    print("=" * 60)

    x = JumpSet(["X"], PAULI_X[None])
    assert x.adjoint_permutation.tolist() == [0]

    ladder = JumpSet(["up", "down"], np.stack([SIGMA_PLUS, SIGMA_PLUS.T]))
    assert ladder.adjoint_permutation.tolist() == [1, 0]
    print("  ✓ adjoint involutions detected")

    lonely = JumpSet(["up"], SIGMA_PLUS[None])
    assert lonely.adjoint_permutation is None
    with pytest.raises(SymmetryViolation):
        lonely.require_adjoint_closed()

    pair = JumpSet(["X", "Z"], np.stack([PAULI_X, PAULI_Z]))
    assert np.isclose(pair.normalization, 2.0)
    assert np.isclose(pair.normalized("algorithmic").normalization, 1.0)
    with pytest.raises(ValueError):
        pair.validate()

    padded = ladder.padded(4)
    assert padded.size == 4 and padded.adjoint_permutation.tolist() == [1, 0, 2, 3]
    print("  ✓ normalization and padding")


def test_hamiltonian_builders():
    chain = build_hamiltonian(HamiltonianSpec(kind="pauli_z_chain", n=1, params={"h": 1.0}))
    assert np.allclose(chain.matrix, PAULI_Z)
    assert chain.energies.tolist() == [1.0, -1.0]

    rand = build_hamiltonian(
        HamiltonianSpec(kind="random_hermitian", n=2, params={"seed": 3, "scale": 2.0})
    )
    assert rand.norm == pytest.approx(2.0)

    with pytest.raises(TooLarge):
        build_hamiltonian(HamiltonianSpec(kind="pauli_z_chain", n=5))


def test_cluster_values():
    centers, labels = cluster_values(np.array([1.0, 0.0, 1.0 + 1e-12, -2.0]), 1e-9)
    assert centers.size == 3
    assert labels[0] == labels[2]
