"""Problem setup: Hamiltonians, Gibbs contexts, Fourier grids, filters, weights, jumps."""

import logging
from dataclasses import dataclass, field
from functools import cached_property
from typing import Literal

import numpy as np
import scipy.special

from src.constants import (
    BETA_CAP_FACTOR,
    DEGENERACY_TOL,
    HERMITIAN_FLAG_TOL,
    MAX_QUBITS_OPERATOR,
    MAX_QUBITS_SUPEROPERATOR,
    REAL_FLAG_TOL,
)
from src.exceptions import (
    DimensionMismatch,
    InvalidGrid,
    RangeTooSmall,
    SymmetryViolation,
    TooLarge,
    UnsupportedFilter,
)
from src.models import HamiltonianSpec, JumpSpec
from src.quantum.numkit import (
    PAULI_I,
    PAULI_X,
    PAULI_Z,
    PAULIS,
    dagger,
    eig_hermitian,
    kron,
    operator_norm,
    pauli_string,
    qubit_count,
)

logger = logging.getLogger(__name__)


def matrix_from_entries(rows: list[list[float | list[float]]]) -> np.ndarray:
    """Complex matrix from YAML rows whose entries are numbers or [re, im] pairs."""
    return np.array(
        [[complex(e[0], e[1]) if isinstance(e, list) else complex(e) for e in row] for row in rows],
        dtype=complex,
    )


def cluster_values(values: np.ndarray, tol: float) -> tuple[np.ndarray, np.ndarray]:
    """
    Group sorted-or-not real values whose neighbours differ by at most tol.

    Returns:
        (centers ascending, label of each input value)
    """
    values = np.asarray(values, dtype=float)
    order = np.argsort(values)
    labels = np.empty(values.size, dtype=int)
    centers: list[float] = []
    members: list[float] = []
    current = -1
    for idx in order:
        if members and values[idx] - members[-1] > tol:
            centers.append(float(np.mean(members)))
            members = []
        if not members:
            current += 1
        members.append(values[idx])
        labels[idx] = current
    if members:
        centers.append(float(np.mean(members)))
    return np.array(centers), labels


# ---------------------------------------------------------------------------
# Hamiltonians
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class Hamiltonian:
    """Hermitian matrix with its cached eigendecomposition (energies descending)."""

    matrix: np.ndarray
    energies: np.ndarray
    vectors: np.ndarray

    @classmethod
    def from_matrix(cls, m: np.ndarray) -> "Hamiltonian":
        m = np.asarray(m, dtype=complex)
        energies, vectors = eig_hermitian(m, tol=HERMITIAN_FLAG_TOL * max(1.0, np.abs(m).max()))
        return cls(0.5 * (m + dagger(m)), energies, vectors)

    @classmethod
    def from_eigensystem(cls, energies: np.ndarray, vectors: np.ndarray) -> "Hamiltonian":
        energies = np.asarray(energies, dtype=float)
        matrix = (vectors * energies) @ dagger(vectors)
        return cls(matrix, energies, vectors)

    @property
    def dim(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_qubits(self) -> int:
        return qubit_count(self.dim)

    @property
    def norm(self) -> float:
        return float(np.max(np.abs(self.energies))) if self.energies.size else 0.0

    def to_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return dagger(self.vectors) @ op @ self.vectors

    def from_eigenbasis(self, op: np.ndarray) -> np.ndarray:
        return self.vectors @ op @ dagger(self.vectors)

    def evolution(self, t: float) -> np.ndarray:
        """e^{iHt} from the eigenbasis."""
        return (self.vectors * np.exp(1j * self.energies * t)) @ dagger(self.vectors)


def _broadcast(value: float | list[float], length: int, name: str) -> np.ndarray:
    arr = np.atleast_1d(np.asarray(value, dtype=float))
    if arr.size == 1:
        return np.full(length, arr[0])
    if arr.size != length:
        raise DimensionMismatch(f"{name} needs {length} entries, got {arr.size}")
    return arr


def _site_operator(op: np.ndarray, site: int, n: int) -> np.ndarray:
    return kron(*([PAULI_I] * site + [op] + [PAULI_I] * (n - site - 1)))


def pauli_z_chain(n: int, J, h, g=0.0) -> np.ndarray:
    """sum_i J_i Z_i Z_{i+1} + sum_i h_i Z_i + sum_i g_i X_i on an open chain."""
    couplings = _broadcast(J, max(n - 1, 0), "J") if n > 1 else np.zeros(0)
    fields = _broadcast(h, n, "h")
    transverse = _broadcast(g, n, "g")
    dim = 2**n
    m = np.zeros((dim, dim), dtype=complex)
    for i, c in enumerate(couplings):
        if c:
            m += c * _site_operator(PAULI_Z, i, n) @ _site_operator(PAULI_Z, i + 1, n)
    for i in range(n):
        if fields[i]:
            m += fields[i] * _site_operator(PAULI_Z, i, n)
        if transverse[i]:
            m += transverse[i] * _site_operator(PAULI_X, i, n)
    return m


def random_hermitian_matrix(n: int, seed: int, scale: float = 1.0) -> np.ndarray:
    """Seeded GUE-like Hermitian matrix rescaled to operator norm `scale`."""
    rng = np.random.default_rng(seed)
    dim = 2**n
    g = rng.normal(size=(dim, dim)) + 1j * rng.normal(size=(dim, dim))
    m = 0.5 * (g + dagger(g))
    return scale * m / operator_norm(m)


def build_hamiltonian(
    spec: HamiltonianSpec, max_qubits: int = MAX_QUBITS_SUPEROPERATOR
) -> Hamiltonian:
    """
    Build a Hamiltonian from its recipe.

    Args:
        spec: Hamiltonian recipe
        max_qubits: Size limit (4 for superoperator work, 5 for operator-only work)

    Raises:
        TooLarge: If spec.n exceeds the limit
    """
    limit = min(max_qubits, MAX_QUBITS_OPERATOR)
    if spec.n > limit:
        raise TooLarge(f"{spec.n} qubits exceeds the dense limit of {limit}")
    p = spec.params
    if spec.kind == "pauli_z_chain":
        m = pauli_z_chain(spec.n, p.J, p.h, p.g)
    elif spec.kind == "random_hermitian":
        m = random_hermitian_matrix(spec.n, p.seed, p.scale)
    else:
        m = matrix_from_entries(p.matrix)
    ham = Hamiltonian.from_matrix(m)
    logger.debug(f"Built {spec.kind} Hamiltonian on {spec.n} qubits, norm {ham.norm:.4f}")
    return ham


def round_hamiltonian(ham: Hamiltonian, omega0: float) -> Hamiltonian:
    """
    Round every eigenvalue to the nearest multiple of omega0, ties toward zero.

    Eigenvectors are unchanged, so ||H - H_rounded|| <= omega0/2.
    """
    x = ham.energies / omega0
    down = np.floor(x)
    frac = x - down
    k = np.where(frac > 0.5, down + 1, down)
    tie = np.isclose(frac, 0.5, rtol=0, atol=1e-12)
    # ties: pick the multiple with the smaller magnitude
    k = np.where(tie, np.where(x > 0, down, down + 1), k)
    return Hamiltonian.from_eigensystem(k * omega0, ham.vectors)


# ---------------------------------------------------------------------------
# Gibbs context
# ---------------------------------------------------------------------------


@dataclass
class GibbsContext:
    """Eigensystem, Gibbs state, purification and Bohr table of (H, beta)."""

    hamiltonian: Hamiltonian
    beta: float
    energies: np.ndarray
    rho: np.ndarray
    weights: np.ndarray
    purification: np.ndarray
    bohr: np.ndarray
    tolerance: float

    @property
    def dim(self) -> int:
        return self.hamiltonian.dim

    @property
    def vectors(self) -> np.ndarray:
        return self.hamiltonian.vectors

    @cached_property
    def bohr_matrix(self) -> np.ndarray:
        """nu_ij = E_i - E_j on clustered energies."""
        return self.energies[:, None] - self.energies[None, :]

    @cached_property
    def bohr_labels(self) -> np.ndarray:
        """Index into self.bohr for every (i, j)."""
        idx = np.searchsorted(self.bohr, self.bohr_matrix - self.tolerance)
        return np.clip(idx, 0, self.bohr.size - 1)

    def bohr_decomposition(self, op: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
        """
        A = sum_nu A_nu with A_nu = sum_{E2 - E1 = nu} P_E2 A P_E1.

        Returns:
            (bohr frequencies, stack of A_nu)
        """
        tilde = self.hamiltonian.to_eigenbasis(op)
        comps = np.zeros((self.bohr.size, self.dim, self.dim), dtype=complex)
        for b in range(self.bohr.size):
            comps[b] = self.hamiltonian.from_eigenbasis(np.where(self.bohr_labels == b, tilde, 0))
        return self.bohr.copy(), comps


def make_context(ham: Hamiltonian | np.ndarray, beta: float) -> GibbsContext:
    """
    Gibbs context of (H, beta).

    Raises:
        ValueError: If beta is negative
    """
    if not isinstance(ham, Hamiltonian):
        ham = Hamiltonian.from_matrix(ham)
    if beta < 0:
        raise ValueError(f"beta must be non-negative, got {beta}")
    norm = ham.norm
    if norm > 0 and beta > BETA_CAP_FACTOR / norm:
        capped = BETA_CAP_FACTOR / norm
        logger.warning(f"beta={beta} exceeds {BETA_CAP_FACTOR}/||H||; capping to {capped:.4f}")
        beta = capped

    tol = DEGENERACY_TOL * (norm if norm > 0 else 1.0)
    centers, labels = cluster_values(ham.energies, tol)
    energies = centers[labels]

    shifted = -beta * (energies - energies.min())
    weights = np.exp(shifted)
    weights /= weights.sum()
    rho = (ham.vectors * weights) @ dagger(ham.vectors)

    # sum_i sqrt(w_i) |psi_i> (x) |psi_i^*>, equal to vec(sqrt(rho))
    purification = np.einsum("i,ai,bi->ab", np.sqrt(weights), ham.vectors, np.conj(ham.vectors))
    purification = purification.reshape(-1)

    bohr, _ = cluster_values((energies[:, None] - energies[None, :]).ravel(), tol)
    return GibbsContext(
        hamiltonian=ham,
        beta=float(beta),
        energies=energies,
        rho=rho,
        weights=weights,
        purification=purification,
        bohr=bohr,
        tolerance=tol,
    )


# ---------------------------------------------------------------------------
# Fourier grid
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class SpectralGrid:
    """
    Discrete labels S_{omega0}, S_{t0} with N * omega0 * t0 = 2 pi.

    Arrays are in signed-binary register order [0, 1, ..., N/2-1, -N/2, ..., -1].
    """

    N: int
    omega0: float

    def __post_init__(self):
        if self.N < 2 or self.N & (self.N - 1):
            raise InvalidGrid(f"N must be a power of two >= 2, got {self.N}")
        if not self.omega0 > 0:
            raise InvalidGrid(f"omega0 must be positive, got {self.omega0}")

    @property
    def t0(self) -> float:
        return 2 * np.pi / (self.N * self.omega0)

    @property
    def labels(self) -> np.ndarray:
        return np.rint(np.fft.fftfreq(self.N) * self.N).astype(int)

    @property
    def frequencies(self) -> np.ndarray:
        return self.labels * self.omega0

    @property
    def times(self) -> np.ndarray:
        return self.labels * self.t0

    @property
    def range(self) -> float:
        return self.N * self.omega0

    @property
    def n_qubits(self) -> int:
        return qubit_count(self.N)

    @property
    def negation(self) -> np.ndarray:
        """Register index of -label (mod N) for every index."""
        return (-np.arange(self.N)) % self.N

    @property
    def paired(self) -> np.ndarray:
        """False only at the self-paired label -N/2."""
        return self.labels != -(self.N // 2)

    def index_of(self, label: int) -> int:
        return int(label % self.N)

    def dft_matrix(self) -> np.ndarray:
        """F[w, t] = e^{-i w t} / sqrt(N) over register order."""
        return np.exp(-1j * np.outer(self.frequencies, self.times)) / np.sqrt(self.N)


def required_range(norm: float, beta: float) -> float:
    """4||H|| + 2/beta; 4||H|| at infinite temperature (1.0 when H = 0)."""
    if beta > 0:
        return 4 * norm + 2 / beta
    return 4 * norm if norm > 0 else 1.0


def make_grid(N: int, context: GibbsContext, omega0: float | None = None) -> SpectralGrid:
    """
    Grid saturating N omega0 = 4||H|| + 2/beta unless omega0 is given.

    Raises:
        RangeTooSmall: If an override violates the range requirement
    """
    if N < 2 or N & (N - 1):
        raise InvalidGrid(f"N must be a power of two >= 2, got {N}")
    needed = required_range(context.hamiltonian.norm, context.beta)
    if omega0 is None:
        omega0 = needed / N
    elif N * omega0 < needed * (1 - 1e-12):
        raise RangeTooSmall(
            f"N*omega0 = {N * omega0:.4f} is below the required range {needed:.4f}"
        )
    return SpectralGrid(N=N, omega0=float(omega0))


# ---------------------------------------------------------------------------
# Filters
# ---------------------------------------------------------------------------

FilterKind = Literal["gaussian", "uniform", "explicit"]


@dataclass(frozen=True)
class FilterFunction:
    """Time-domain weights f(t) over the grid times, in register order."""

    kind: FilterKind
    values: np.ndarray
    grid: SpectralGrid
    sigma_t: float | None = None
    T: float | None = None
    window: Literal["symmetric", "half_open"] = "symmetric"
    normalized: bool = True

    def __post_init__(self):
        if self.values.shape != (self.grid.N,):
            raise DimensionMismatch(
                f"Filter has {self.values.shape} samples for a grid of {self.grid.N}"
            )
        if self.normalized and abs(self.norm - 1.0) > 1e-12:
            raise ValueError(f"Filter is not normalized: ||f||_2 = {self.norm:.15f}")

    @property
    def real_flag(self) -> bool:
        return bool(np.max(np.abs(self.values.imag)) < REAL_FLAG_TOL)

    @property
    def norm(self) -> float:
        return float(np.linalg.norm(self.values))

    @property
    def width(self) -> float | None:
        """Continuous support length of a uniform window."""
        if self.kind != "uniform":
            return None
        return self.T if self.window == "symmetric" else 2 * self.T

    def conjugate(self) -> "FilterFunction":
        return FilterFunction(
            "explicit", np.conj(self.values), self.grid, normalized=self.normalized
        )

    def hat(self) -> np.ndarray:
        """Discrete transform over the grid frequencies (register order)."""
        return self.grid.dft_matrix() @ self.values

    def continuous_hat(self, omega: np.ndarray) -> np.ndarray:
        """
        Unitary continuous transform of the L2-normalized continuum filter.

        Raises:
            UnsupportedFilter: For explicit-sample filters
        """
        omega = np.asarray(omega, dtype=float)
        if self.kind == "gaussian":
            s = self.sigma_t
            return (2 * s**2 / np.pi) ** 0.25 * np.exp(-(omega**2) * s**2)
        if self.kind == "uniform":
            w = self.width
            return np.sqrt(w / (2 * np.pi)) * np.sinc(omega * w / (2 * np.pi))
        raise UnsupportedFilter("Explicit filters have no closed-form transform")

    def continuous_values(self, t: np.ndarray) -> np.ndarray:
        """L2-normalized continuum filter f_cont(t)."""
        t = np.asarray(t, dtype=float)
        if self.kind == "gaussian":
            s = self.sigma_t
            return (2 * np.pi * s**2) ** -0.25 * np.exp(-(t**2) / (4 * s**2))
        if self.kind == "uniform":
            w = self.width
            return np.where(np.abs(t) <= w / 2, 1.0 / np.sqrt(w), 0.0)
        raise UnsupportedFilter("Explicit filters have no continuum counterpart")


def make_filter(
    kind: FilterKind,
    grid: SpectralGrid,
    sigma_t: float | None = None,
    T: float | None = None,
    window: Literal["symmetric", "half_open"] = "symmetric",
    values: np.ndarray | None = None,
) -> FilterFunction:
    """
    Build a filter normalized over the discrete grid.

    Args:
        kind: gaussian (needs sigma_t), uniform (T, defaults to the full window) or explicit
        grid: Spectral grid
        window: symmetric keeps |t| <= T/2; half_open keeps -T <= t < T
        values: Samples in register order for explicit filters
    """
    t = grid.times
    if kind == "gaussian":
        if not sigma_t or sigma_t <= 0:
            raise ValueError("gaussian filter requires sigma_t > 0")
        raw = np.exp(-(t**2) / (4 * sigma_t**2)).astype(complex)
    elif kind == "uniform":
        if T is None:
            T = grid.N * grid.t0 if window == "symmetric" else grid.N * grid.t0 / 2
        eps = 1e-9 * grid.t0
        if window == "symmetric":
            mask = np.abs(t) <= T / 2 + eps
        else:
            mask = (t >= -T - eps) & (t < T - eps)
        if not mask.any():
            raise ValueError(f"uniform window T={T} contains no grid time")
        raw = mask.astype(complex)
    elif kind == "explicit":
        if values is None:
            raise ValueError("explicit filter requires values")
        raw = np.asarray(values, dtype=complex)
    else:
        raise UnsupportedFilter(f"Unknown filter kind: {kind}")
    norm = np.linalg.norm(raw)
    if norm == 0:
        raise ValueError("filter has zero norm")
    return FilterFunction(kind, raw / norm, grid, sigma_t=sigma_t, T=T, window=window)


# ---------------------------------------------------------------------------
# Transition weights
# ---------------------------------------------------------------------------

WeightKind = Literal["metropolis", "glauber", "custom"]


def metropolis(omega: np.ndarray, beta: float) -> np.ndarray:
    """min(1, e^{-beta omega})."""
    return np.exp(-beta * np.maximum(np.asarray(omega, dtype=float), 0.0))


def glauber(omega: np.ndarray, beta: float) -> np.ndarray:
    """1 / (e^{beta omega} + 1)."""
    return scipy.special.expit(-beta * np.asarray(omega, dtype=float))


WEIGHT_FUNCTIONS = {"metropolis": metropolis, "glauber": glauber}


@dataclass(frozen=True)
class TransitionWeight:
    """gamma over the grid labels (register order) and, when known, as a function."""

    kind: WeightKind
    beta: float
    values: np.ndarray
    grid: SpectralGrid | None = None

    def __post_init__(self):
        if np.any(self.values < 0) or np.any(self.values > 1):
            raise ValueError("transition weights must lie in [0, 1]")

    def __call__(self, omega: np.ndarray) -> np.ndarray:
        """Continuous profile gamma(omega)."""
        if self.kind not in WEIGHT_FUNCTIONS:
            raise UnsupportedFilter(f"{self.kind} weights are only defined on the grid")
        return WEIGHT_FUNCTIONS[self.kind](omega, self.beta)

    @property
    def is_constant(self) -> bool:
        return self.kind in WEIGHT_FUNCTIONS and self.beta == 0

    def kms_residual(self) -> float:
        """max |gamma(w) - e^{-beta w} gamma(-w)| over paired labels."""
        g = self.grid
        w = g.frequencies
        residual = np.abs(self.values - np.exp(-self.beta * w) * self.values[g.negation])
        return float(np.max(residual[g.paired]))

    def scaled(self, factor: float) -> "TransitionWeight":
        return TransitionWeight("custom", self.beta, self.values * factor, self.grid)


def make_weight(
    kind: WeightKind, beta: float, grid: SpectralGrid, table: np.ndarray | None = None
) -> TransitionWeight:
    """
    Transition weight on the grid; the self-paired label -N/2 gets gamma = 0.

    Args:
        kind: metropolis, glauber or custom (table in register order)
    """
    if kind in WEIGHT_FUNCTIONS:
        values = WEIGHT_FUNCTIONS[kind](grid.frequencies, beta)
    elif kind == "custom":
        if table is None or np.asarray(table).shape != (grid.N,):
            raise ValueError(f"custom weights need a table of {grid.N} values")
        values = np.asarray(table, dtype=float).copy()
    else:
        raise ValueError(f"Unknown weight kind: {kind}")
    values = np.where(grid.paired, values, 0.0)
    return TransitionWeight(kind, float(beta), values, grid)


# ---------------------------------------------------------------------------
# Jumps
# ---------------------------------------------------------------------------


@dataclass
class JumpSet:
    """Jump operators A^a with an optional adjoint involution a -> a'."""

    labels: list[str]
    operators: np.ndarray
    adjoint_permutation: np.ndarray | None = field(default=None)

    def __post_init__(self):
        self.operators = np.asarray(self.operators, dtype=complex)
        if self.operators.ndim != 3 or len(self.labels) != self.operators.shape[0]:
            raise DimensionMismatch("JumpSet needs one label per (d, d) operator")
        if self.adjoint_permutation is None:
            self.adjoint_permutation = self.detect_adjoint_permutation()

    @property
    def size(self) -> int:
        return self.operators.shape[0]

    @property
    def dim(self) -> int:
        return self.operators.shape[1]

    @property
    def normalization(self) -> float:
        """||sum_a A^a^dag A^a||."""
        return operator_norm(np.einsum("aji,ajk->ik", np.conj(self.operators), self.operators))

    def detect_adjoint_permutation(self, tol: float = 1e-12) -> np.ndarray | None:
        perm = np.full(self.size, -1)
        for a in range(self.size):
            adj = dagger(self.operators[a])
            for b in range(self.size):
                if np.max(np.abs(self.operators[b] - adj)) < tol:
                    perm[a] = b
                    break
            if perm[a] < 0:
                return None
        if np.any(perm[perm] != np.arange(self.size)):
            return None
        return perm

    def require_adjoint_closed(self) -> np.ndarray:
        if self.adjoint_permutation is None:
            raise SymmetryViolation("Jump set is not closed under adjoints")
        return self.adjoint_permutation

    def validate(self, tol: float = 1e-12) -> None:
        if self.normalization > 1 + tol:
            raise ValueError(f"||sum A^dag A|| = {self.normalization:.6f} exceeds 1")

    def normalized(self, mode: Literal["algorithmic", "physical", "none"]) -> "JumpSet":
        """algorithmic: ||sum A^dag A|| = 1; physical: every ||A^a|| = 1."""
        ops = self.operators.copy()
        if mode == "algorithmic":
            norm = self.normalization
            if norm > 0:
                ops /= np.sqrt(norm)
        elif mode == "physical":
            for a in range(self.size):
                n = operator_norm(ops[a])
                if n > 0:
                    ops[a] /= n
        return JumpSet(list(self.labels), ops)

    def padded(self, size: int) -> "JumpSet":
        """Append zero operators up to `size` labels."""
        extra = size - self.size
        if extra <= 0:
            return self
        zeros = np.zeros((extra, self.dim, self.dim), dtype=complex)
        perm = None
        if self.adjoint_permutation is not None:
            perm = np.concatenate([self.adjoint_permutation, np.arange(self.size, size)])
        labels = self.labels + [f"pad{k}" for k in range(extra)]
        return JumpSet(labels, np.concatenate([self.operators, zeros]), perm)


def jump_from_spec(spec: JumpSpec, n: int) -> tuple[str, np.ndarray]:
    if spec.matrix is not None:
        op = matrix_from_entries(spec.matrix)
        if op.shape != (2**n, 2**n):
            raise DimensionMismatch(f"jump matrix shape {op.shape} does not fit {n} qubits")
        return "matrix", spec.scale * op
    word = spec.pauli.upper()
    if len(word) == 1 and n > 1:
        site = spec.site or 0
        if site >= n:
            raise DimensionMismatch(f"site {site} outside {n} qubits")
        return f"{word}{site}", spec.scale * _site_operator(PAULIS[word], site, n)
    if len(word) != n:
        raise DimensionMismatch(f"Pauli word {word} does not fit {n} qubits")
    return word, spec.scale * pauli_string(word)


def build_jumps(
    specs: list[JumpSpec], n: int, mode: Literal["algorithmic", "physical", "none"] = "algorithmic"
) -> JumpSet:
    """Jump set from document entries, normalized per mode."""
    pairs = [jump_from_spec(s, n) for s in specs]
    jumps = JumpSet([p[0] for p in pairs], np.stack([p[1] for p in pairs]))
    return jumps.normalized(mode)
