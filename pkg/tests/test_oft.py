"""Test suite for operator Fourier transforms"""

import numpy as np
import pytest

from src.exceptions import UnroundedHamiltonian, UnsupportedFilter
from src.quantum.generator import rounded_context, secular_family
from src.quantum.model import make_filter
from src.quantum.oft import (
    gaussian_dft_check,
    oft_continuous,
    oft_direct,
    oft_discrete,
    parseval_report,
    secular_truncate,
    tail_mass,
    two_sided_oft,
    two_sided_parseval_residual,
    uniform_dft_closed_form,
)


def _family(inst):
    return oft_discrete(inst.jumps, inst.filter, inst.grid, inst.hamiltonian)


def test_eigenbasis_transform_matches_time_sum(instance):
    """The Bohr-frequency evaluation equals the explicit sum over e^{iHt} A e^{-iHt}"""
    print("\n" + "=" * 60)
    print("TEST: OFT - Eigenbasis vs direct time sum")
    print("=" * 60)

    fast = _family(instance)
    slow = oft_direct(instance.jumps, instance.filter, instance.grid, instance.hamiltonian)
    diff = np.max(np.abs(fast.operators - slow.operators))
    assert diff < 1e-10, f"Expected agreement to 1e-10, got {diff:.2e}"
    print(f"  ✓ max deviation {diff:.2e}")


def test_parseval_and_symmetry(instance):
    """sum A_hat^dag A_hat matches the time-averaged jump norm; A_hat(w)^dag = A_hat(-w)"""
    print("\n" + "=" * 60)
    print("TEST: OFT - Parseval identity and adjoint symmetry")
    print("=" * 60)

    family = _family(instance)
    report = parseval_report(family)
    assert report.residual_identity < 1e-10, f"Parseval residual {report.residual_identity:.2e}"
    assert report.sum_norm <= report.bound * (1 + 1e-9)
    assert report.as_check().passed
    print(f"  ✓ Parseval residual {report.residual_identity:.2e}")

    residual = family.symmetry_residual()
    assert residual < 1e-12, f"Expected exact adjoint symmetry, got {residual:.2e}"
    print(f"  ✓ symmetry residual {residual:.2e}")


def test_family_indexing(instance):
    family = _family(instance)
    assert family.flat.shape == (64, 2, 2)
    assert np.allclose(family[0, -3], family.operators[0, instance.grid.index_of(-3)])


def test_secular_truncation_is_a_filtered_transform(instance):
    """S^a(w) equals the plain transform with the band-limited filter f_s"""
    spec = instance.lindblad
    mu = 0.6
    family = secular_family(spec, mu)
    plain = oft_discrete(spec.jumps, family.filter, spec.grid, family.hamiltonian)
    assert np.allclose(family.operators, plain.operators, atol=1e-10)
    assert family.secular_mu == mu
    assert not family.filter.normalized
    assert family.band_violation(mu) < 1e-12
    assert _family(instance).band_violation(mu) > 1e-6


def test_secular_truncation_needs_rounded_hamiltonian(instance):
    family = _family(instance)
    with pytest.raises(UnroundedHamiltonian):
        secular_truncate(family, 0.5, instance.hamiltonian)
    with pytest.raises(ValueError):
        secular_truncate(family, -1.0, rounded_context(instance.lindblad).hamiltonian)


def test_uniform_closed_form_and_tail(instance):
    """Geometric-series transform of the half-open window and its tail bound"""
    print("\n" + "=" * 60)
    print("TEST: OFT - Uniform window transform and tail bound")
    print("=" * 60)

    grid = instance.grid
    T = 4 * grid.t0
    filt = make_filter("uniform", grid, T=T, window="half_open")
    closed = uniform_dft_closed_form(grid, T)
    assert np.allclose(closed, filt.hat(), atol=1e-12), "closed form disagrees with the DFT"
    print("  ✓ closed form matches the DFT")

    for m in (2, 4, 8):
        report = tail_mass(filt, grid, m * grid.omega0)
        assert report.passed, f"tail {report.measured:.3e} exceeds bound {report.bound:.3e}"
    print("  ✓ tail mass below pi / (2 mu T)")


def test_gaussian_tail_and_dft(instance):
    report = tail_mass(instance.filter, instance.grid, 0.5)
    assert report.passed, f"tail {report.measured:.3e} exceeds bound {report.bound:.3e}"
    assert report.estimate is not None

    check = gaussian_dft_check(5.0, instance.grid)
    assert check.l2_dev < 1e-3, f"sampled Gaussian DFT deviates by {check.l2_dev:.2e}"


def test_tail_mass_rejects_explicit_filters(instance):
    explicit = make_filter("explicit", instance.grid, values=np.ones(instance.grid.N))
    with pytest.raises(UnsupportedFilter):
        tail_mass(explicit, instance.grid, 0.5)


def test_continuous_transform(instance):
    """Continuous transform at a Bohr frequency is dominated by that component"""
    cont = oft_continuous(instance.jumps, instance.filter, instance.hamiltonian)
    profile = cont.norm_profile(np.array([-2.0, 0.0, 2.0]))
    assert profile[0] > profile[1] and profile[2] > profile[1], f"unexpected profile {profile}"

    explicit = make_filter("explicit", instance.grid, values=np.ones(instance.grid.N))
    with pytest.raises(UnsupportedFilter):
        oft_continuous(instance.jumps, explicit, instance.hamiltonian)


def test_two_sided_parseval(small_instance):
    inst = small_instance
    family = two_sided_oft(inst.jumps, inst.filter, inst.grid, inst.hamiltonian)
    residual = two_sided_parseval_residual(family)
    assert residual < 1e-10, f"two-sided Parseval residual {residual:.2e}"


def test_two_sided_adjoint_symmetry_on_rounded_spectrum(small_instance):
    inst = small_instance
    ham = rounded_context(inst.lindblad).hamiltonian
    family = two_sided_oft(inst.jumps, inst.filter, inst.grid, ham)
    residual = family.skew_residual()
    assert residual < 1e-10, f"A_hat(E2, E1)^dag != A_hat(E1, E2) by {residual:.2e}"
