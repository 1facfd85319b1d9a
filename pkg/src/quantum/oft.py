"""
Operator Fourier transforms.

Every transform is evaluated in the Hamiltonian eigenbasis: a matrix element
<psi_i|A|psi_j> evolves with the Bohr frequency E_i - E_j, so the time sum over
the grid collapses to a scalar filter transform per element.
"""

import logging
from dataclasses import dataclass, field

import numpy as np

from src.constants import RESIDUAL_TOL
from src.exceptions import DimensionMismatch, UnroundedHamiltonian, UnsupportedFilter
from src.models import CheckRecord
from src.quantum.model import FilterFunction, Hamiltonian, JumpSet, SpectralGrid, make_filter
from src.quantum.numkit import dagger, operator_norm

logger = logging.getLogger(__name__)


def _check_dims(jumps: JumpSet, ham: Hamiltonian) -> None:
    if jumps.dim != ham.dim:
        raise DimensionMismatch(f"jumps act on dim {jumps.dim}, Hamiltonian on dim {ham.dim}")


def shifted_hats(filt: FilterFunction, shifts: np.ndarray) -> np.ndarray:
    """
    f_hat(omega_bar - nu) for every grid frequency and every shift nu.

    Uses f_hat(w - nu) = DFT[f(t) e^{i nu t}](w).

    Returns:
        Array of shape (N, len(shifts))
    """
    t = filt.grid.times
    modulated = filt.values[:, None] * np.exp(1j * np.outer(t, shifts))
    return filt.grid.dft_matrix() @ modulated


@dataclass
class OftFamily:
    """Operators A_hat^a(omega_bar) stored as an (|A|, N, d, d) array in the original basis."""

    jumps: JumpSet
    grid: SpectralGrid
    filter: FilterFunction
    hamiltonian: Hamiltonian
    operators: np.ndarray
    secular_mu: float | None = None

    def __getitem__(self, key: tuple[int, int]) -> np.ndarray:
        """family[a, label] with label an integer frequency label."""
        a, label = key
        return self.operators[a, self.grid.index_of(label)]

    @property
    def flat(self) -> np.ndarray:
        """Operators as a (|A| * N, d, d) stack, jump-major."""
        n_a, n, d, _ = self.operators.shape
        return self.operators.reshape(n_a * n, d, d)

    def symmetry_residual(self, adjoint_family: "OftFamily | None" = None) -> float:
        """
        max || A_hat^a(w)^dag - A_hat^{a'}(-w) || over paired labels.

        The right side is the adjoint-jump family built with the conjugate filter;
        for a real filter and adjoint-closed jumps it is this family itself.
        """
        perm = self.jumps.require_adjoint_closed()
        other = adjoint_family if adjoint_family is not None else self
        neg = self.grid.negation
        worst = 0.0
        for a in range(self.jumps.size):
            for w in np.flatnonzero(self.grid.paired):
                diff = dagger(self.operators[a, w]) - other.operators[perm[a], neg[w]]
                worst = max(worst, float(np.max(np.abs(diff))))
        return worst

    def band_violation(self, mu: float) -> float:
        """Largest |<psi_i|S(w)|psi_j>| with |(E_i - E_j) - w| > mu (unwrapped)."""
        ham = self.hamiltonian
        nu = ham.energies[:, None] - ham.energies[None, :]
        worst = 0.0
        for w_idx, w in enumerate(self.grid.frequencies):
            outside = np.abs(nu - w) > mu
            for a in range(self.jumps.size):
                tilde = ham.to_eigenbasis(self.operators[a, w_idx])
                if outside.any():
                    worst = max(worst, float(np.max(np.abs(tilde[outside]))))
        return worst


def oft_discrete(
    jumps: JumpSet, filt: FilterFunction, grid: SpectralGrid, ham: Hamiltonian
) -> OftFamily:
    """
    A_hat^a(w) = (1/sqrt N) sum_t e^{-i w t} f(t) e^{iHt} A^a e^{-iHt}.

    Raises:
        DimensionMismatch: If jumps and Hamiltonian disagree
    """
    _check_dims(jumps, ham)
    if filt.grid.N != grid.N:
        raise DimensionMismatch(f"filter has {filt.grid.N} samples, grid has {grid.N}")
    nu = ham.energies[:, None] - ham.energies[None, :]
    d = ham.dim
    hats = shifted_hats(filt, nu.ravel()).reshape(grid.N, d, d)

    ops = np.empty((jumps.size, grid.N, d, d), dtype=complex)
    for a in range(jumps.size):
        tilde = ham.to_eigenbasis(jumps.operators[a])
        ops[a] = ham.vectors @ (tilde[None] * hats) @ dagger(ham.vectors)
    logger.debug(f"OFT family: {jumps.size} jumps x {grid.N} labels, dim {d}")
    return OftFamily(jumps, grid, filt, ham, ops)


def oft_direct(
    jumps: JumpSet, filt: FilterFunction, grid: SpectralGrid, ham: Hamiltonian
) -> OftFamily:
    """Same family summed over time with explicit e^{iHt}; used as an oracle."""
    _check_dims(jumps, ham)
    d = ham.dim
    ops = np.zeros((jumps.size, grid.N, d, d), dtype=complex)
    f_matrix = grid.dft_matrix()
    for t_idx, t in enumerate(grid.times):
        u = ham.evolution(t)
        heis = u @ jumps.operators @ dagger(u)
        ops += (f_matrix[:, t_idx] * filt.values[t_idx])[None, :, None, None] * heis[:, None]
    return OftFamily(jumps, grid, filt, ham, ops)


# ---------------------------------------------------------------------------
# Continuous transform
# ---------------------------------------------------------------------------


@dataclass
class ContinuousOft:
    """A_hat^a(omega) = sum_nu f_hat(omega - nu) A^a_nu for real omega."""

    jumps: JumpSet
    filter: FilterFunction
    hamiltonian: Hamiltonian
    _tilde: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        if self.filter.kind == "explicit":
            raise UnsupportedFilter("continuous transform needs a closed-form filter")
        _check_dims(self.jumps, self.hamiltonian)
        ham = self.hamiltonian
        self._tilde = np.stack([ham.to_eigenbasis(op) for op in self.jumps.operators])

    @property
    def bohr_matrix(self) -> np.ndarray:
        e = self.hamiltonian.energies
        return e[:, None] - e[None, :]

    def at(self, omega: float) -> np.ndarray:
        """Stack (|A|, d, d) of transforms at a single frequency."""
        weights = self.filter.continuous_hat(omega - self.bohr_matrix)
        ham = self.hamiltonian
        return ham.vectors @ (self._tilde * weights[None]) @ dagger(ham.vectors)

    def norm_profile(self, omegas: np.ndarray) -> np.ndarray:
        """Operator norm of sum over jumps, one value per frequency."""
        return np.array([max(operator_norm(op) for op in self.at(w)) for w in omegas])


def oft_continuous(jumps: JumpSet, filt: FilterFunction, ham: Hamiltonian) -> ContinuousOft:
    """
    Continuous-frequency transform with the closed-form filter transform.

    Raises:
        UnsupportedFilter: For explicit-sample filters
    """
    return ContinuousOft(jumps, filt, ham)


# ---------------------------------------------------------------------------
# Secular truncation
# ---------------------------------------------------------------------------


def bohr_labels_on_grid(ham: Hamiltonian, grid: SpectralGrid, tol: float = 1e-9) -> np.ndarray:
    """
    Integer labels nu / omega0 of every (i, j) Bohr frequency.

    Raises:
        UnroundedHamiltonian: If some Bohr frequency is off the omega0 lattice
    """
    nu = (ham.energies[:, None] - ham.energies[None, :]) / grid.omega0
    labels = np.rint(nu)
    off = float(np.max(np.abs(nu - labels))) if nu.size else 0.0
    if off > tol:
        raise UnroundedHamiltonian(
            f"Bohr frequencies are {off:.2e} off the omega0 lattice; round the Hamiltonian first"
        )
    return labels.astype(int)


def secular_window(grid: SpectralGrid, mu: float) -> np.ndarray:
    """s(w) = 1(|w| < mu) over the grid, with labels in the signed range; ties excluded."""
    return np.abs(grid.labels) < mu / grid.omega0 - 1e-9


def secular_filter(filt: FilterFunction, mu: float) -> FilterFunction:
    """f_s = inverse DFT of f_hat * s; complex in general and not normalized."""
    grid = filt.grid
    hat_s = filt.hat() * secular_window(grid, mu)
    values = dagger(grid.dft_matrix()) @ hat_s
    return FilterFunction("explicit", values, grid, normalized=False)


def secular_truncate(family: OftFamily, mu: float, ham_rounded: Hamiltonian) -> OftFamily:
    """
    S^a(w) = sum_nu f_hat(w - nu) 1(|w - nu| < mu) A^a_nu on a rounded Hamiltonian.

    The difference w - nu is taken modulo N omega0 in the signed range, which makes
    S exactly the plain transform with filter f_s.

    Raises:
        UnroundedHamiltonian: If Bohr frequencies of ham_rounded are off the lattice
    """
    grid = family.grid
    if mu <= 0:
        raise ValueError(f"mu must be positive, got {mu}")
    nu_labels = bohr_labels_on_grid(ham_rounded, grid)
    if not np.allclose(family.hamiltonian.energies, ham_rounded.energies, atol=1e-12):
        family = oft_discrete(family.jumps, family.filter, grid, ham_rounded)

    n = grid.N
    # signed label of (w - nu) mod N for every (w, i, j)
    diff = (grid.labels[:, None, None] - nu_labels[None]) % n
    diff = np.where(diff >= n // 2, diff - n, diff)
    mask = np.abs(diff) < mu / grid.omega0 - 1e-9

    ham = ham_rounded
    ops = np.empty_like(family.operators)
    for a in range(family.jumps.size):
        tilde = np.einsum("ij,wjk,kl->wil", dagger(ham.vectors), family.operators[a], ham.vectors)
        ops[a] = ham.vectors @ (tilde * mask) @ dagger(ham.vectors)

    limit = 0.5 * grid.range - 2 * ham.norm
    if mu >= limit:
        logger.warning(
            f"mu={mu:.4f} >= N*omega0/2 - 2||H|| = {limit:.4f}: wrapped labels may leave the band"
        )
    return OftFamily(family.jumps, grid, secular_filter(family.filter, mu), ham, ops, mu)


# ---------------------------------------------------------------------------
# Two-sided transform
# ---------------------------------------------------------------------------


@dataclass
class TwoSidedFamily:
    """Operators A_hat^a(E2, E1) as an (|A|, N, N, d, d) array; axes 1, 2 index E2, E1."""

    jumps: JumpSet
    grid: SpectralGrid
    filter: FilterFunction
    hamiltonian: Hamiltonian
    operators: np.ndarray

    @property
    def flat(self) -> np.ndarray:
        n_a, n, _, d, _ = self.operators.shape
        return self.operators.reshape(n_a * n * n, d, d)

    def skew_residual(self, adjoint_family: "TwoSidedFamily | None" = None) -> float:
        """
        max || A_hat^a(E2, E1)^dag - A_hat^{a'}(E1, E2) || over all labels.

        Exact when Bohr frequencies lie on the grid or f vanishes at the unpaired time.
        """
        perm = self.jumps.require_adjoint_closed()
        other = adjoint_family if adjoint_family is not None else self
        worst = 0.0
        for a in range(self.jumps.size):
            lhs = np.conj(np.swapaxes(self.operators[a], -1, -2))
            rhs = np.swapaxes(other.operators[perm[a]], 0, 1)
            worst = max(worst, float(np.max(np.abs(lhs - rhs))))
        return worst


def two_sided_oft(
    jumps: JumpSet, filt: FilterFunction, grid: SpectralGrid, ham: Hamiltonian
) -> TwoSidedFamily:
    """
    A_hat(E2, E1) = (1/N) sum_{t2,t1} f(-t2) f(t1) e^{-i(E2 - H)t2} A e^{-i(E1 - H)t1}.

    With negation of time labels modulo N, the matrix element (i, j) is
    A_ij * f_hat_-(E2 - E_i) * f_hat(E1 - E_j).
    """
    _check_dims(jumps, ham)
    e = ham.energies
    neg_filter = FilterFunction(
        "explicit", filt.values[grid.negation], grid, normalized=filt.normalized
    )
    left = shifted_hats(neg_filter, e)  # (N, d): f_hat_-(E2 - E_i)
    right = shifted_hats(filt, e)  # (N, d): f_hat(E1 - E_j)
    weights = left[:, None, :, None] * right[None, :, None, :]  # (N2, N1, i, j)

    d, n = ham.dim, grid.N
    ops = np.empty((jumps.size, n, n, d, d), dtype=complex)
    for a in range(jumps.size):
        tilde = ham.to_eigenbasis(jumps.operators[a])
        ops[a] = ham.vectors @ (tilde * weights) @ dagger(ham.vectors)
    return TwoSidedFamily(jumps, grid, filt, ham, ops)


def two_sided_parseval_residual(family: TwoSidedFamily) -> float:
    """|| sum A_hat^dag A_hat - ||f||^2 sum_t |f(t)|^2 e^{-iHt} (sum A^dag A) e^{iHt} ||."""
    flat = family.flat
    lhs = np.einsum("kji,kjl->il", np.conj(flat), flat)
    ham = family.hamiltonian
    f2 = np.abs(family.filter.values) ** 2
    nu = ham.energies[:, None] - ham.energies[None, :]
    phase = np.exp(-1j * np.multiply.outer(family.grid.times, nu))
    kernel = np.tensordot(f2, phase, axes=1)
    m = np.einsum("aji,ajk->ik", np.conj(family.jumps.operators), family.jumps.operators)
    rhs = ham.from_eigenbasis(ham.to_eigenbasis(m) * kernel) * np.sum(f2)
    return operator_norm(lhs - rhs)


# ---------------------------------------------------------------------------
# Diagnostics
# ---------------------------------------------------------------------------


@dataclass
class ParsevalReport:
    residual_identity: float
    sum_norm: float
    bound: float

    def as_check(self, tol: float = RESIDUAL_TOL) -> CheckRecord:
        return CheckRecord(
            check_name="parseval",
            measured=self.residual_identity,
            bound=tol,
            passed=self.residual_identity < tol and self.sum_norm <= self.bound * (1 + 1e-9),
        )


def parseval_report(family: OftFamily) -> ParsevalReport:
    """Compare sum A_hat^dag A_hat with sum_t |f(t)|^2 e^{iHt} (sum A^dag A) e^{-iHt}."""
    flat = family.flat
    lhs = np.einsum("kji,kjl->il", np.conj(flat), flat)

    ham = family.hamiltonian
    f2 = np.abs(family.filter.values) ** 2
    nu = ham.energies[:, None] - ham.energies[None, :]
    kernel = np.tensordot(f2, np.exp(1j * np.multiply.outer(family.grid.times, nu)), axes=1)
    m = np.einsum("aji,ajk->ik", np.conj(family.jumps.operators), family.jumps.operators)
    rhs = ham.from_eigenbasis(ham.to_eigenbasis(m) * kernel)

    report = ParsevalReport(
        residual_identity=operator_norm(lhs - rhs),
        sum_norm=operator_norm(lhs),
        bound=operator_norm(m) * float(np.sum(f2)),
    )
    logger.debug(f"Parseval residual {report.residual_identity:.2e}, sum norm {report.sum_norm}")
    return report


@dataclass
class TailReport:
    measured: float
    bound: float
    estimate: float | None = None

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound * (1 + 1e-9) + 1e-15


def uniform_dft_closed_form(grid: SpectralGrid, T: float, nu: float = 0.0) -> np.ndarray:
    """
    Geometric-series transform of f(t) = 1(-T <= t < T) e^{i nu t} / sqrt(2T/t0).

    T must be a multiple of t0; labels where the ratio is one use the limit 2T/t0.
    """
    t0 = grid.t0
    x = nu - grid.frequencies
    num = np.exp(1j * x * T) - np.exp(-1j * x * T)
    den = np.exp(1j * x * t0) - 1
    count = 2 * T / t0
    degenerate = np.abs(den) < 1e-12
    safe = np.where(degenerate, 1.0, den)
    values = np.where(degenerate, count, num / safe)
    return values / np.sqrt(count * grid.N)


def gaussian_tail_estimate(grid: SpectralGrid, sigma_t: float, mu: float) -> float:
    """Squared sum of the aliasing and tail terms of the Gaussian tail bound (unit constants)."""
    n, w0, t0 = grid.N, grid.omega0, grid.t0
    a1 = np.exp(-(n**2) * w0**2 * sigma_t**2 / 2) / np.sqrt(n * w0 * sigma_t)
    a2 = np.exp(-(n**2) * t0**2 / (16 * sigma_t**2)) / np.sqrt(n * t0 / sigma_t)
    a3 = np.exp(-(mu**2) * sigma_t**2) / np.sqrt(mu * sigma_t)
    return float((a1 + a2 + a3) ** 2)


def renormalized_gaussian(grid: SpectralGrid, sigma_t: float) -> np.ndarray:
    """e^{-w^2 sigma^2} over the grid frequencies, l2-normalized."""
    g = np.exp(-(grid.frequencies**2) * sigma_t**2)
    return g / np.linalg.norm(g)


def tail_mass(filt: FilterFunction, grid: SpectralGrid, mu: float) -> TailReport:
    """
    Sum of |f_hat(w)|^2 over |w| > mu, with its bound.

    Uniform (half-open window of half-width T, mu = m omega0): pi / (2 m omega0 T).
    Gaussian: (||tail of renormalized Gaussian|| + ||f_hat - Gaussian||)^2, next to the
    unit-constant estimate of the aliasing and tail terms.
    """
    hat = filt.hat()
    outside = np.abs(grid.frequencies) > mu + 1e-12 * grid.omega0
    measured = float(np.sum(np.abs(hat[outside]) ** 2))

    if filt.kind == "uniform":
        m = mu / grid.omega0
        T = filt.width / 2
        bound = np.pi / (2 * m * grid.omega0 * T)
        return TailReport(measured, float(bound))
    if filt.kind == "gaussian":
        g = renormalized_gaussian(grid, filt.sigma_t)
        deviation = float(np.linalg.norm(hat - g))
        tail_g = float(np.linalg.norm(g[outside]))
        bound = (tail_g + deviation) ** 2
        estimate = gaussian_tail_estimate(grid, filt.sigma_t, mu)
        return TailReport(measured, bound, estimate)
    raise UnsupportedFilter("tail bounds are defined for uniform and gaussian filters")


@dataclass
class GaussianDftReport:
    max_dev: float
    l2_dev: float
    tail_bounds: float


def gaussian_dft_check(sigma_t: float, grid: SpectralGrid) -> GaussianDftReport:
    """Deviation of the DFT of the sampled Gaussian from the renormalized Gaussian."""
    filt = make_filter("gaussian", grid, sigma_t=sigma_t)
    diff = filt.hat() - renormalized_gaussian(grid, sigma_t)
    n, w0, t0 = grid.N, grid.omega0, grid.t0
    terms = np.exp(-(n**2) * w0**2 * sigma_t**2 / 2) / (n * t0 * sigma_t) + np.exp(
        -(n**2) * t0**2 / (16 * sigma_t**2)
    ) / (n * t0 / sigma_t)
    return GaussianDftReport(
        max_dev=float(np.max(np.abs(diff))),
        l2_dev=float(np.linalg.norm(diff)),
        tail_bounds=float(terms),
    )
