"""
Dense gate-level simulation of the sampler circuits.

Registers are ordered most-significant first. The frequency register stores
integer labels in signed binary (register index k holds label k for k < N/2
and k - N otherwise), matching SpectralGrid.labels.
"""

import logging
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from functools import cached_property

import numpy as np

from src.constants import BLOCK_TOL, MAX_QUBITS_REGISTER, UNITARY_TOL
from src.exceptions import (
    EigvecDistTooLarge,
    NonUnitaryCompletion,
    NonUnitaryJumps,
    SymmetryViolation,
    TooLarge,
)
from src.quantum.discriminant import build_proxy
from src.quantum.dynamics import top_eigvec_compare
from src.quantum.generator import LindbladSpec
from src.quantum.model import (
    FilterFunction,
    Hamiltonian,
    JumpSet,
    SpectralGrid,
    TransitionWeight,
    make_context,
    make_weight,
)
from src.quantum.numkit import (
    PAULI_Z,
    dagger,
    is_unitary,
    orthonormal_completion,
    unvec,
    vec,
)
from src.quantum.oft import oft_discrete

logger = logging.getLogger(__name__)

COMPLETION_SEED = 7
HADAMARD = np.array([[1, 1], [1, -1]], dtype=complex) / np.sqrt(2)
CNOT = np.array(
    [[1, 0, 0, 0], [0, 1, 0, 0], [0, 0, 0, 1], [0, 0, 1, 0]], dtype=complex
)


def y_rotation(theta: float) -> np.ndarray:
    """Y_theta = [[sqrt(1-theta), -sqrt(theta)], [sqrt(theta), sqrt(1-theta)]]."""
    theta = float(np.clip(theta, 0.0, 1.0))
    c, s = np.sqrt(1 - theta), np.sqrt(theta)
    return np.array([[c, -s], [s, c]], dtype=complex)


# ---------------------------------------------------------------------------
# Registers and programs
# ---------------------------------------------------------------------------


@dataclass
class Register:
    """Ordered named segments of qubits."""

    segments: list[tuple[str, int]]

    def __post_init__(self):
        names = [name for name, _ in self.segments]
        if len(set(names)) != len(names):
            raise ValueError(f"duplicate register segments: {names}")
        if self.n_qubits > MAX_QUBITS_REGISTER:
            raise TooLarge(
                f"register needs {self.n_qubits} qubits, limit is {MAX_QUBITS_REGISTER}"
            )

    @property
    def n_qubits(self) -> int:
        return sum(q for _, q in self.segments)

    @property
    def dims(self) -> list[int]:
        return [2**q for _, q in self.segments]

    @property
    def dim(self) -> int:
        return 2**self.n_qubits

    def axis(self, name: str) -> int:
        for i, (seg, _) in enumerate(self.segments):
            if seg == name:
                return i
        raise KeyError(f"no register segment named {name}")

    def width(self, name: str) -> int:
        return self.segments[self.axis(name)][1]


@dataclass
class Gate:
    name: str
    matrix: np.ndarray
    targets: tuple[str, ...]
    params: dict = field(default_factory=dict)


def _apply(tensor: np.ndarray, gate: np.ndarray, axes: list[int]) -> np.ndarray:
    k = len(axes)
    dims = [tensor.shape[a] for a in axes]
    g = gate.reshape(dims + dims)
    out = np.tensordot(g, tensor, axes=(list(range(k, 2 * k)), axes))
    return np.moveaxis(out, list(range(k)), axes)


@dataclass
class GateProgram:
    """Ordered gate list over a register; the composite unitary is built on demand."""

    register: Register
    gates: list[Gate] = field(default_factory=list)

    def append(
        self, name: str, matrix: np.ndarray, targets: tuple[str, ...] | str, **params
    ) -> "GateProgram":
        targets = (targets,) if isinstance(targets, str) else tuple(targets)
        expected = int(np.prod([2 ** self.register.width(t) for t in targets]))
        if matrix.shape != (expected, expected):
            raise ValueError(f"gate {name} has shape {matrix.shape}, targets need {expected}")
        self.gates.append(Gate(name, np.asarray(matrix, dtype=complex), targets, params))
        self.__dict__.pop("unitary", None)
        return self

    @cached_property
    def unitary(self) -> np.ndarray:
        dims = self.register.dims
        total = self.register.dim
        tensor = np.eye(total, dtype=complex).reshape(dims + [total])
        for gate in self.gates:
            axes = [self.register.axis(t) for t in gate.targets]
            tensor = _apply(tensor, gate.matrix, axes)
        return tensor.reshape(total, total)

    def is_unitary(self, tol: float = UNITARY_TOL) -> bool:
        return is_unitary(self.unitary, tol)

    def to_json(self) -> list[dict]:
        """[{gate_name, params, targets}] in application order."""
        return [
            {"gate_name": g.name, "params": dict(g.params), "targets": list(g.targets)}
            for g in self.gates
        ]


# ---------------------------------------------------------------------------
# Ingredients
# ---------------------------------------------------------------------------


def build_prep(filt: FilterFunction | np.ndarray) -> np.ndarray:
    """
    Unitary whose first column is the filter state sum_t f(t)|t>.

    Raises:
        NonUnitaryCompletion: If the filter column is zero or not normalized
    """
    column = np.asarray(filt.values if isinstance(filt, FilterFunction) else filt, dtype=complex)
    norm = float(np.linalg.norm(column))
    if norm < 1e-14 or abs(norm - 1) > 1e-12:
        raise NonUnitaryCompletion(f"filter column has norm {norm:.3e}; cannot complete")
    return orthonormal_completion(column[:, None], np.random.default_rng(COMPLETION_SEED))


def build_uniform_prep_circuit(n: int, k: int) -> GateProgram:
    """
    Prep for the uniform filter on -T <= t < T with T / t0 = 2^k on n qubits.

    Signed labels in [-2^k, 2^k) have their top n - k bits all equal, so the
    state is a GHZ pair on those bits times |+>^k on the rest.
    """
    if not 0 <= k < n:
        raise ValueError(f"need 0 <= k < n, got k={k}, n={n}")
    program = GateProgram(Register([(f"q{i}", 1) for i in range(n)]))
    program.append("H", HADAMARD, "q0")
    for i in range(1, n - k):
        program.append("CNOT", CNOT, ("q0", f"q{i}"))
    for i in range(n - k, n):
        program.append("H", HADAMARD, f"q{i}")
    return program


def build_qft(N: int) -> np.ndarray:
    """|t> -> N^{-1/2} sum_w e^{-i w t} |w> over signed labels; w t = 2 pi l_w l_t / N."""
    labels = np.rint(np.fft.fftfreq(N) * N)
    return np.exp(-2j * np.pi * np.outer(labels, labels) / N) / np.sqrt(N)


def build_weight_rot(weight: TransitionWeight) -> np.ndarray:
    """sum_w Y_{1-gamma(w)} (x) |w><w| on (boltzmann, frequency)."""
    n = weight.values.size
    out = np.zeros((2 * n, 2 * n), dtype=complex)
    for w, g in enumerate(weight.values):
        y = y_rotation(1 - g)
        for b in range(2):
            for b2 in range(2):
                out[b * n + w, b2 * n + w] = y[b, b2]
    return out


def build_ctrl_ham(ham: Hamiltonian | np.ndarray, grid: SpectralGrid, sign: int = 1) -> np.ndarray:
    """sum_t |t><t| (x) e^{sign i H t} on (frequency, system), exact in the eigenbasis."""
    if not isinstance(ham, Hamiltonian):
        ham = Hamiltonian.from_matrix(ham)
    d, n = ham.dim, grid.N
    out = np.zeros((n * d, n * d), dtype=complex)
    for k, t in enumerate(grid.times):
        out[k * d:(k + 1) * d, k * d:(k + 1) * d] = ham.evolution(sign * t)
    return out


def _jump_register_width(size: int) -> int:
    return int(np.ceil(np.log2(size))) if size > 1 else 0


def _unitary_jumps(jumps: JumpSet) -> np.ndarray:
    """sqrt(|A|) A^a for every jump, checked unitary."""
    scaled = np.sqrt(jumps.size) * jumps.operators
    for a, u in enumerate(scaled):
        if not is_unitary(u, 1e-10):
            raise NonUnitaryJumps(f"sqrt(|A|) A^{jumps.labels[a]} is not unitary")
    return scaled


def build_jump_select(jumps: JumpSet) -> tuple[np.ndarray, np.ndarray]:
    """
    B with B|0> = sum_a |a>/sqrt|A| and select = sum_a |a><a| (x) sqrt|A| A^a.

    Labels past |A| (padding to a power of two) get zero amplitude and identity.
    """
    scaled = _unitary_jumps(jumps)
    size = 2 ** _jump_register_width(jumps.size)
    d = jumps.dim
    column = np.zeros(size, dtype=complex)
    column[: jumps.size] = 1 / np.sqrt(jumps.size)
    b = orthonormal_completion(column[:, None], np.random.default_rng(COMPLETION_SEED))
    select = np.zeros((size * d, size * d), dtype=complex)
    for a in range(size):
        select[a * d:(a + 1) * d, a * d:(a + 1) * d] = scaled[a] if a < jumps.size else np.eye(d)
    return b, select


# ---------------------------------------------------------------------------
# Lindbladian block-encoding
# ---------------------------------------------------------------------------


def block_register(grid: SpectralGrid, n_jumps: int, n_sys: int) -> Register:
    return Register(
        [
            ("boltzmann", 1),
            ("frequency", grid.n_qubits),
            ("jump", _jump_register_width(n_jumps)),
            ("system", n_sys),
        ]
    )


def build_block_encoding(spec: LindbladSpec) -> GateProgram:
    """
    U = W . QFT . ctrl-e^{iHt} . select . ctrl-e^{-iHt} . (Prep (x) B).

    Raises:
        NonUnitaryJumps: If some sqrt(|A|) A^a is not unitary
    """
    grid, ham = spec.grid, spec.context.hamiltonian
    b, select = build_jump_select(spec.jumps)
    register = block_register(grid, spec.jumps.size, ham.n_qubits)
    program = GateProgram(register)
    program.append("prep", build_prep(spec.filter), "frequency", filter=spec.filter.kind)
    if spec.jumps.size > 1:
        program.append("jump_prep", b, "jump", size=spec.jumps.size)
    program.append("ctrl_ham", build_ctrl_ham(ham, grid, -1), ("frequency", "system"), sign=-1)
    program.append("select", select, ("jump", "system"))
    program.append("ctrl_ham", build_ctrl_ham(ham, grid, 1), ("frequency", "system"), sign=1)
    program.append("qft", build_qft(grid.N), "frequency", N=grid.N)
    program.append(
        "weight_rot", build_weight_rot(spec.weight), ("boltzmann", "frequency"),
        kind=spec.weight.kind,
    )
    logger.debug(f"Block-encoding on {register.n_qubits} qubits, {len(program.gates)} gates")
    return program


def encoded_operators(unitary: np.ndarray, sys_dim: int) -> np.ndarray:
    """(<0|_flag (x) I) U (|0...0> (x) I) as a stack of (d, d) blocks over the labels."""
    half = unitary.shape[0] // 2
    block = unitary[:half, :sys_dim]
    return block.reshape(-1, sys_dim, sys_dim)


def expected_encoded_operators(spec: LindbladSpec) -> np.ndarray:
    """sqrt(gamma(w)) A_hat^a(w) in register order (w major, then padded a)."""
    family = oft_discrete(spec.jumps, spec.filter, spec.grid, spec.context.hamiltonian)
    size = 2 ** _jump_register_width(spec.jumps.size)
    d, n = spec.jumps.dim, spec.grid.N
    out = np.zeros((n, size, d, d), dtype=complex)
    out[:, : spec.jumps.size] = np.swapaxes(family.operators, 0, 1)
    out *= np.sqrt(spec.weight.values)[:, None, None, None]
    return out.reshape(-1, d, d)


def block_encoding_residual(program: GateProgram, spec: LindbladSpec) -> float:
    got = encoded_operators(program.unitary, spec.jumps.dim)
    residual = float(np.max(np.abs(got - expected_encoded_operators(spec))))
    if residual > BLOCK_TOL:
        logger.warning(f"Block-encoding residual {residual:.2e} exceeds {BLOCK_TOL}")
    return residual


# ---------------------------------------------------------------------------
# Weak measurement
# ---------------------------------------------------------------------------


def _as_unitary(u: GateProgram | np.ndarray) -> np.ndarray:
    return u.unitary if isinstance(u, GateProgram) else np.asarray(u, dtype=complex)


def weak_measure_kraus(u: GateProgram | np.ndarray, delta: float, sys_dim: int) -> np.ndarray:
    """
    Kraus operators of the four-step gadget: U, Y_delta on a fresh qubit controlled
    on flag 0, U^dag controlled on that qubit being 0, discard ancillas.
    """
    if not 0 <= delta <= 1:
        raise ValueError(f"delta must lie in [0, 1], got {delta}")
    unitary = _as_unitary(u)
    half = unitary.shape[0] // 2
    v = unitary[:, :sys_dim]
    success = np.zeros_like(v)
    success[:half] = v[:half]
    stay = v - success + np.sqrt(1 - delta) * success
    branch0 = dagger(unitary) @ stay
    branch1 = np.sqrt(delta) * success
    stacked = np.concatenate([branch0, branch1])
    return stacked.reshape(-1, sys_dim, sys_dim)


def weak_measure_channel(u: GateProgram | np.ndarray, delta: float, sys_dim: int) -> np.ndarray:
    """Dense superoperator sum_k K (x) K^* of one gadget."""
    kraus = weak_measure_kraus(u, delta, sys_dim)
    d = sys_dim
    return np.einsum("kij,klm->iljm", kraus, np.conj(kraus)).reshape(d * d, d * d)


def weak_measure_step(u: GateProgram | np.ndarray, delta: float, rho: np.ndarray) -> np.ndarray:
    """One gadget applied to rho; close to (I + delta L)[rho] up to O(delta^2)."""
    d = rho.shape[0]
    out = unvec(weak_measure_channel(u, delta, d) @ vec(rho), d)
    return 0.5 * (out + dagger(out))


def weak_measure_evolve(
    u: GateProgram | np.ndarray, delta: float, rho: np.ndarray, steps: int
) -> np.ndarray:
    d = rho.shape[0]
    channel = np.linalg.matrix_power(weak_measure_channel(u, delta, d), steps)
    return unvec(channel @ vec(rho), d)


@dataclass
class RandomizedResult:
    mean: np.ndarray
    stderr: np.ndarray
    expected: np.ndarray
    trajectories: int

    @property
    def max_z(self) -> float:
        """Largest |mean - expected| in units of the standard error, entrywise."""
        diff = np.abs(self.mean - self.expected)
        with np.errstate(divide="ignore", invalid="ignore"):
            z = np.where(self.stderr > 0, diff / self.stderr, np.where(diff > 1e-12, np.inf, 0))
        return float(np.max(z))


def weak_measure_randomized(
    gadgets: list[GateProgram | np.ndarray],
    probabilities: list[float] | np.ndarray,
    delta: float,
    rho: np.ndarray,
    steps: int,
    trajectories: int = 1000,
    seed: int = 0,
) -> RandomizedResult:
    """
    Average over trajectories that apply an independently sampled gadget per step.

    `expected` is the exact average, the per-step mixture sum_i p_i Phi_i applied
    `steps` times.
    """
    p = np.asarray(probabilities, dtype=float)
    if p.shape != (len(gadgets),) or np.any(p < 0) or abs(p.sum() - 1) > 1e-12:
        raise ValueError("probabilities must be non-negative and sum to 1")
    d = rho.shape[0]
    channels = np.stack([weak_measure_channel(g, delta, d) for g in gadgets])
    rng = np.random.default_rng(seed)
    choices = rng.choice(len(gadgets), size=(trajectories, steps), p=p)

    finals = np.empty((trajectories, d * d), dtype=complex)
    start = vec(rho)
    for k in range(trajectories):
        state = start
        for i in choices[k]:
            state = channels[i] @ state
        finals[k] = state

    mixture = np.linalg.matrix_power(np.tensordot(p, channels, axes=1), steps)
    mean = finals.mean(axis=0)
    spread = finals.std(axis=0, ddof=1) if trajectories > 1 else np.zeros(d * d)
    return RandomizedResult(
        mean=unvec(mean, d),
        stderr=unvec(spread / np.sqrt(trajectories), d).real,
        expected=unvec(mixture @ start, d),
        trajectories=trajectories,
    )


# ---------------------------------------------------------------------------
# Discriminant block and reject block
# ---------------------------------------------------------------------------


def _swap_last_two(m: np.ndarray, d: int) -> np.ndarray:
    """Conjugate m by the swap of its last two d-dimensional factors."""
    rest = m.shape[0] // (d * d)
    t = m.reshape(rest, d, d, rest, d, d).transpose(0, 2, 1, 3, 5, 4)
    return t.reshape(m.shape)


def label_involution(grid: SpectralGrid, jumps: JumpSet) -> np.ndarray:
    """F (x) P on the (frequency, jump) labels: |w, a> -> |-w, a'>; padded labels fixed."""
    perm = jumps.require_adjoint_closed()
    size = 2 ** _jump_register_width(jumps.size)
    full = np.concatenate([perm, np.arange(jumps.size, size)])
    n = grid.N
    f = np.zeros((n, n))
    f[grid.negation, np.arange(n)] = 1
    p = np.zeros((size, size))
    p[full, np.arange(size)] = 1
    return np.kron(f, p)


def build_discriminant_block(
    u: GateProgram | np.ndarray, permutation: np.ndarray, sys_dim: int
) -> GateProgram:
    """
    U_D = U'^dag R U' with U' = |+><+| (x) U (x) I + |-><-| (x) I (x) U^*.

    R = I - I (x) Pi + Z (x) |0><0|_flag (x) permutation (x) I (x) I, with the
    flag first in U's ordering and the label registers after it.
    """
    unitary = _as_unitary(u)
    d = sys_dim
    dim_u = unitary.shape[0]
    labels = dim_u // (2 * d)
    if permutation.shape != (labels, labels):
        raise SymmetryViolation(f"label permutation must be {labels}x{labels}")
    if np.any(np.abs(permutation @ permutation - np.eye(labels)) > 1e-12):
        raise SymmetryViolation("label permutation is not an involution")

    eye_d = np.eye(d)
    plus = np.full((2, 2), 0.5, dtype=complex)
    minus = np.array([[0.5, -0.5], [-0.5, 0.5]], dtype=complex)
    on_sys = np.kron(unitary, eye_d)
    on_copy = _swap_last_two(np.kron(np.conj(unitary), eye_d), d)
    u_prime = np.kron(plus, on_sys) + np.kron(minus, on_copy)

    flag0 = np.diag([1.0, 0.0])
    pi = np.kron(flag0, np.eye(labels * d * d))
    r0 = np.kron(PAULI_Z, np.kron(flag0, np.kron(permutation, np.eye(d * d))))
    reflection = np.eye(2 * dim_u * d) - np.kron(np.eye(2), pi) + r0

    flag_qubits = 1
    label_qubits = int(round(np.log2(labels)))
    sys_qubits = int(round(np.log2(d)))
    register = Register(
        [
            ("selector", 1),
            ("boltzmann", flag_qubits),
            ("labels", label_qubits),
            ("system", sys_qubits),
            ("system_prime", sys_qubits),
        ]
    )
    targets = ("selector", "boltzmann", "labels", "system", "system_prime")
    program = GateProgram(register)
    program.append("u_prime", u_prime, targets)
    program.append("reflection", reflection, targets)
    program.append("u_prime_dagger", dagger(u_prime), targets)
    return program


def discriminant_block(program: GateProgram, sys_dim: int) -> np.ndarray:
    """(<0^{c'+1}| (x) I (x) I) U_D (|0^{c'+1}> (x) I (x) I)."""
    n = sys_dim * sys_dim
    return program.unitary[:n, :n]


def discriminant_block_residual(spec: LindbladSpec) -> float:
    """max |block - (I + D_beta)| for the block built from the Lindbladian encoding."""
    encoding = build_block_encoding(spec)
    perm = label_involution(spec.grid, spec.jumps)
    d = spec.jumps.dim
    program = build_discriminant_block(encoding, perm, d)
    target = np.eye(d * d) + build_proxy(spec)
    return float(np.max(np.abs(discriminant_block(program, d) - target)))


def reject_block(u: GateProgram | np.ndarray) -> np.ndarray:
    """
    V = (Y_{1/2} (x) U^dag)(2|0^{b+1}><0^{b+1}| (x) I - I)(Y_{1/2} (x) U).

    Its leading (d, d) corner equals sum_j L_j^dag L_j.
    """
    unitary = _as_unitary(u)
    dim_u = unitary.shape[0]
    y = y_rotation(0.5)
    proj = np.zeros(2 * dim_u)
    proj[: dim_u // 2] = 1
    reflection = np.diag(2 * proj - 1).astype(complex)
    return np.kron(y, dagger(unitary)) @ reflection @ np.kron(y, unitary)


def reject_residual(spec: LindbladSpec) -> float:
    """max |corner(V) - sum gamma A_hat^dag A_hat|."""
    d = spec.jumps.dim
    v = reject_block(build_block_encoding(spec))
    ops = expected_encoded_operators(spec)
    target = np.einsum("kji,kjl->il", np.conj(ops), ops)
    return float(np.max(np.abs(v[:d, :d] - target)))


# ---------------------------------------------------------------------------
# Annealing path
# ---------------------------------------------------------------------------

OVERLAP_TARGET = 0.7
EIGVEC_DIST_LIMIT = 0.1


@dataclass
class AnnealPoint:
    beta: float
    gap: float
    eigvec_dist: float
    overlap: float | None = None
    flag: str | None = None
    vector: np.ndarray | None = field(default=None, repr=False)

    def as_row(self) -> dict:
        return {
            "beta": self.beta,
            "gap": self.gap,
            "overlap": self.overlap,
            "eigvec_dist": self.eigvec_dist,
            "flag": self.flag or "",
        }


@dataclass
class AnnealReport:
    points: list[AnnealPoint]
    constant: float
    min_overlap: float | None

    @property
    def flagged(self) -> int:
        return sum(p.flag is not None for p in self.points)


def _anneal_node(spec: LindbladSpec, beta: float) -> AnnealPoint:
    context = make_context(spec.context.hamiltonian, beta)
    weight = make_weight(spec.weight.kind, beta, spec.grid)
    node = LindbladSpec(spec.jumps, context, weight, "gaussian", spec.filter, spec.grid)
    comparison = top_eigvec_compare(build_proxy(node), context)
    flag = None
    if comparison.distance > EIGVEC_DIST_LIMIT:
        flag = EigvecDistTooLarge.__name__
        logger.warning(
            f"beta={beta:.4f}: top eigenvector distance {comparison.distance:.3f} "
            f"exceeds {EIGVEC_DIST_LIMIT}"
        )
    return AnnealPoint(
        beta=beta, gap=comparison.gap, eigvec_dist=comparison.distance, flag=flag,
        vector=comparison.vector,
    )


def anneal_path(spec: LindbladSpec, k: int, workers: int = 1) -> AnnealReport:
    """
    Proxies along beta_j = j beta / k with consecutive top-eigenvector overlaps.

    The filter and grid of `spec` are reused at every node, so the grid must
    already cover the final beta. Nodes flagged EigvecDistTooLarge are kept in
    the report but excluded from the fitted constant C.
    """
    if k < 1:
        raise ValueError(f"k must be at least 1, got {k}")
    if spec.weight.kind == "custom":
        raise ValueError("annealing needs a weight kind that can be rebuilt per beta")
    beta = spec.context.beta
    betas = [j * beta / k for j in range(k + 1)]
    with ThreadPoolExecutor(max_workers=max(1, workers)) as pool:
        points = list(pool.map(lambda b: _anneal_node(spec, b), betas))

    step = beta / k
    energies = spec.context.hamiltonian.energies
    scale = step**2 * float(np.max(energies**2 * np.exp(-step * energies)))
    constant = 0.0
    for here, there in zip(points, points[1:]):
        here.overlap = float(abs(np.vdot(here.vector, there.vector)) ** 2)
        if here.flag is None and there.flag is None and scale > 0:
            constant = max(constant, (OVERLAP_TARGET - here.overlap) / scale)

    overlaps = [p.overlap for p in points if p.overlap is not None]
    logger.info(
        f"Anneal path: {k} steps to beta={beta}, min overlap {min(overlaps):.4f}, C={constant:.3f}"
    )
    return AnnealReport(points=points, constant=constant, min_overlap=min(overlaps))
