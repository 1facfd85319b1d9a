"""Test suite for discriminants and Hermitian discriminant proxies"""

import numpy as np
import pytest

from src.exceptions import PreconditionBetaMu, SingularState, SymmetryViolation
from src.quantum.discriminant import (
    adb_norm,
    build_proxy,
    build_two_sided_proxy,
    davies_proxy,
    discriminant_report,
    generic_proxy,
    proxy_epsilon,
    similarity_discriminant,
)
from src.quantum.dynamics import top_eigvec_compare
from src.quantum.generator import (
    LindbladSpec,
    boltzmann_targets,
    build_davies,
    metropolis_two_sided,
)
from src.quantum.model import JumpSet, make_filter
from src.quantum.numkit import dagger, hermiticity_residual


def test_generic_proxy_is_hermitian(rng):
    """Any involution on the labels gives a Hermitian proxy"""
    ops = rng.normal(size=(4, 3, 3)) + 1j * rng.normal(size=(4, 3, 3))
    d = generic_proxy(ops, [1, 0, 3, 2])
    assert hermiticity_residual(d) < 1e-12, f"residual {hermiticity_residual(d):.2e}"
    assert generic_proxy(np.zeros((0, 3, 3)), [], dim=3).shape == (9, 9)
    with pytest.raises(ValueError):
        generic_proxy(ops, [1, 2, 3, 0])


def test_davies_proxy_equals_its_discriminant(instance):
    """For the Davies generator the proxy is the (Hermitian) discriminant itself"""
    print("\n" + "=" * 60)
    print("TEST: Discriminant - Davies proxy")
    print("=" * 60)

    ctx = instance.context
    gen = build_davies(instance.jumps, instance.weight, ctx)
    report = discriminant_report(gen, ctx.rho)
    proxy = davies_proxy(instance.jumps, instance.weight, ctx)
    diff = np.max(np.abs(proxy - report.D))
    assert diff < 1e-9, f"Davies proxy differs from its discriminant by {diff:.2e}"
    assert report.adb_norm < 1e-10, f"Davies generator should be exactly DB: {report.adb_norm}"
    print(f"  ✓ proxy = discriminant (diff {diff:.2e}), ||A|| = {report.adb_norm:.2e}")

    comparison = top_eigvec_compare(proxy, ctx)
    assert comparison.distance < 1e-8, f"top eigenvector off by {comparison.distance:.2e}"
    assert abs(comparison.lambda1) < 1e-10
    lambda1, top = report.top_eigpair
    assert abs(lambda1) < 1e-10
    assert abs(np.vdot(top, ctx.purification)) == pytest.approx(1.0, abs=1e-8)
    print("  ✓ top eigenvector is vec(sqrt(rho_beta)) with eigenvalue 0")


def test_discrete_proxy(instance):
    """D_beta is Hermitian with top eigenvector close to the Gibbs purification"""
    proxy = build_proxy(instance.lindblad)
    assert hermiticity_residual(proxy) == 0.0
    comparison = top_eigvec_compare(proxy, instance.context)
    assert comparison.distance < 0.1, f"eigvec_dist {comparison.distance:.3f}"
    assert comparison.gap > 0


def test_proxy_requirements(instance):
    ladder = JumpSet(["up"], np.array([[[0, 1], [0, 0]]], dtype=complex))
    spec = instance.lindblad
    with pytest.raises(SymmetryViolation):
        build_proxy(
            LindbladSpec(ladder, spec.context, spec.weight, "gaussian", spec.filter, spec.grid)
        )
    complex_filter = make_filter(
        "explicit", spec.grid, values=np.exp(1j * spec.grid.times) * spec.filter.values
    )
    with pytest.raises(SymmetryViolation):
        build_proxy(spec.with_filter(complex_filter))


def test_proxy_epsilon(instance):
    """epsilon with mu stays below 132 beta mu ||sum gamma S^dag S||"""
    print("\n" + "=" * 60)
    print("TEST: Discriminant - Approximate detailed balance")
    print("=" * 60)

    spec = instance.lindblad
    plain = proxy_epsilon(spec)
    assert plain.bound is None and plain.passed is None
    print(f"  ✓ untruncated epsilon = {plain.epsilon:.3e}")

    for mu in (0.2, 0.4, 0.8):
        report = proxy_epsilon(spec, mu)
        assert report.passed, f"mu={mu}: epsilon {report.epsilon:.3e} > {report.bound:.3e}"
        print(f"  ✓ mu={mu}: epsilon {report.epsilon:.3e} <= {report.bound:.3e}")

    with pytest.raises(PreconditionBetaMu):
        proxy_epsilon(spec, 2.0)


def test_proxy_epsilon_two_qubits(make_instance):
    """The epsilon bound also holds on a two-qubit chain with X on both sites"""
    inst = make_instance(
        hamiltonian={"n": 2}, jumps=[{"pauli": "X", "site": 0}, {"pauli": "X", "site": 1}]
    )
    assert inst.context.dim == 4
    for mu in (0.2, 0.4, 0.8):
        report = proxy_epsilon(inst.lindblad, mu)
        assert report.passed, f"mu={mu}: epsilon {report.epsilon:.3e} > {report.bound:.3e}"


def test_similarity_discriminant_of_generator(instance):
    gen = build_davies(instance.jumps, instance.weight, instance.context)
    d = similarity_discriminant(gen, instance.context.rho)
    assert d.shape == (4, 4)
    assert adb_norm(gen, instance.context.rho) < 1e-10
    with pytest.raises(SingularState):
        similarity_discriminant(gen, np.diag([1.0, 0.0]))


def test_two_sided_proxy_is_hermitian(small_instance):
    inst = small_instance
    p = boltzmann_targets(inst.grid, inst.context.beta)
    spec = LindbladSpec(
        inst.jumps, inst.context, inst.weight, "two_sided", inst.filter, inst.grid,
        two_sided_weights=metropolis_two_sided(inst.grid, p), target_weights=p,
    )
    proxy = build_two_sided_proxy(spec)
    assert np.allclose(proxy, dagger(proxy))
