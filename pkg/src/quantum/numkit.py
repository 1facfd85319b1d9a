"""Dense complex linear-algebra kernel.

Vectorization is row-major: vec(X) = X.reshape(-1), so the superoperator
X -> A X B has matrix kron(A, B.T).
"""

import logging
from dataclasses import dataclass, field
from functools import reduce
from typing import Literal

import numpy as np
import scipy.linalg

from src.constants import EIGENVALUE_FLOOR, HERMITIAN_TOL
from src.exceptions import (
    DimensionMismatch,
    MatrixOverflow,
    NonHermitianInput,
    NotPositiveSemidefinite,
    SingularNegativePower,
)

logger = logging.getLogger(__name__)

Picture = Literal["schrodinger", "heisenberg"]

PAULI_I = np.eye(2, dtype=complex)
PAULI_X = np.array([[0, 1], [1, 0]], dtype=complex)
PAULI_Y = np.array([[0, -1j], [1j, 0]], dtype=complex)
PAULI_Z = np.array([[1, 0], [0, -1]], dtype=complex)
PAULIS = {"I": PAULI_I, "X": PAULI_X, "Y": PAULI_Y, "Z": PAULI_Z}


def qubit_count(dim: int) -> int:
    """Number of qubits of a 2^q dimensional space."""
    q = int(round(np.log2(dim))) if dim > 0 else -1
    if q < 0 or 2**q != dim:
        raise DimensionMismatch(f"Dimension {dim} is not a power of two")
    return q


def kron(*ops: np.ndarray) -> np.ndarray:
    """Tensor product of any number of operators (left factor most significant)."""
    if not ops:
        return np.ones((1, 1), dtype=complex)
    return reduce(np.kron, ops)


def pauli_string(word: str) -> np.ndarray:
    """Tensor product of single-qubit Paulis, e.g. "XZ" -> X (x) Z."""
    try:
        return kron(*(PAULIS[c] for c in word.upper()))
    except KeyError as e:
        raise ValueError(f"Invalid Pauli letter in {word!r}") from e


def dagger(m: np.ndarray) -> np.ndarray:
    return np.conj(np.swapaxes(m, -1, -2))


def hermiticity_residual(m: np.ndarray) -> float:
    return float(np.max(np.abs(m - dagger(m)))) if m.size else 0.0


def is_unitary(u: np.ndarray, tol: float = 1e-10) -> bool:
    return bool(np.allclose(dagger(u) @ u, np.eye(u.shape[0]), atol=tol))


# ---------------------------------------------------------------------------
# Eigendecompositions and matrix functions
# ---------------------------------------------------------------------------


def eig_hermitian(m: np.ndarray, tol: float = HERMITIAN_TOL) -> tuple[np.ndarray, np.ndarray]:
    """
    Eigendecomposition of a Hermitian matrix.

    Args:
        m: Square matrix, Hermitian within tol
        tol: Accepted max |M - M^dagger|

    Returns:
        (values, vectors) with values sorted descending and orthonormal columns

    Raises:
        NonHermitianInput: If the symmetry residual exceeds tol
    """
    m = np.asarray(m, dtype=complex)
    if m.ndim != 2 or m.shape[0] != m.shape[1]:
        raise DimensionMismatch(f"Expected a square matrix, got shape {m.shape}")
    residual = hermiticity_residual(m)
    if residual > tol:
        raise NonHermitianInput(f"Hermiticity residual {residual:.3e} exceeds {tol:.1e}")
    values, vectors = scipy.linalg.eigh(0.5 * (m + dagger(m)))
    return values[::-1].copy(), vectors[:, ::-1].copy()


def matrix_exp(m: np.ndarray) -> np.ndarray:
    """Matrix exponential by scaling-and-squaring Pade (scipy.linalg.expm)."""
    m = np.asarray(m)
    if not np.all(np.isfinite(m)):
        raise MatrixOverflow("Matrix exponential of non-finite input")
    with np.errstate(over="ignore", invalid="ignore"):
        result = scipy.linalg.expm(m)
    if not np.all(np.isfinite(result)):
        raise MatrixOverflow(
            f"Matrix exponential overflowed (input norm {np.linalg.norm(m, 2):.3e})"
        )
    return result


def matrix_power(m: np.ndarray, p: float, floor: float = EIGENVALUE_FLOOR) -> np.ndarray:
    """
    Real power of a positive semidefinite matrix via its eigenbasis.

    Raises:
        NotPositiveSemidefinite: If an eigenvalue is clearly negative
        SingularNegativePower: If p < 0 and the smallest eigenvalue is below floor
    """
    values, vectors = eig_hermitian(m)
    scale = max(1.0, float(np.max(np.abs(values)))) if values.size else 1.0
    if values.size and values[-1] < -HERMITIAN_TOL * scale:
        raise NotPositiveSemidefinite(f"Smallest eigenvalue {values[-1]:.3e} is negative")
    values = np.clip(values, 0.0, None)
    if p < 0 and values.size and values[-1] <= floor:
        raise SingularNegativePower(
            f"Cannot raise to power {p}: smallest eigenvalue {values[-1]:.3e} <= {floor:.0e}"
        )
    with np.errstate(divide="ignore"):
        powered = np.where(values > 0, values, 0.0) ** p if p >= 0 else values**p
    return (vectors * powered) @ dagger(vectors)


# ---------------------------------------------------------------------------
# Vectorization and superoperators
# ---------------------------------------------------------------------------


def vec(x: np.ndarray) -> np.ndarray:
    return np.asarray(x).reshape(-1)


def unvec(v: np.ndarray, dim: int | None = None) -> np.ndarray:
    v = np.asarray(v).reshape(-1)
    d = dim or int(round(np.sqrt(v.size)))
    if d * d != v.size:
        raise DimensionMismatch(f"Vector of length {v.size} is not a vectorized square matrix")
    return v.reshape(d, d)


def vectorize(
    coeffs: np.ndarray, lefts: np.ndarray, rights: np.ndarray
) -> np.ndarray:
    """
    Dense matrix of X -> sum_k c_k A_k X B_k, i.e. sum_k c_k kron(A_k, B_k^T).

    Args:
        coeffs: (K,) complex coefficients
        lefts: (K, d, d) left operators
        rights: (K, d, d) right operators
    """
    coeffs = np.asarray(coeffs, dtype=complex).reshape(-1)
    lefts = np.asarray(lefts, dtype=complex)
    rights = np.asarray(rights, dtype=complex)
    if lefts.ndim != 3 or rights.shape != lefts.shape or lefts.shape[0] != coeffs.size:
        raise DimensionMismatch(
            f"Inconsistent term shapes: coeffs {coeffs.shape}, left {lefts.shape}, "
            f"right {rights.shape}"
        )
    k, d, d2 = lefts.shape
    if d != d2:
        raise DimensionMismatch(f"Terms must be square, got {lefts.shape}")
    if k == 0:
        return np.zeros((d * d, d * d), dtype=complex)
    dense = np.einsum("k,kij,kml->iljm", coeffs, lefts, rights, optimize=True)
    return dense.reshape(d * d, d * d)


@dataclass
class Superoperator:
    """
    Linear map X -> sum_k c_k A_k X B_k with a cached dense matrix.

    Attributes:
        coeffs: (K,) coefficients
        lefts: (K, d, d) left operators
        rights: (K, d, d) right operators
        picture: Schrodinger or Heisenberg tag
    """

    coeffs: np.ndarray
    lefts: np.ndarray
    rights: np.ndarray
    picture: Picture = "schrodinger"
    _dense: np.ndarray | None = field(default=None, repr=False)

    def __post_init__(self):
        self.coeffs = np.asarray(self.coeffs, dtype=complex).reshape(-1)
        self.lefts = np.asarray(self.lefts, dtype=complex)
        self.rights = np.asarray(self.rights, dtype=complex)
        if self.lefts.ndim != 3 or self.lefts.shape != self.rights.shape:
            raise DimensionMismatch(
                f"Left/right stacks disagree: {self.lefts.shape} vs {self.rights.shape}"
            )
        if self.lefts.shape[0] != self.coeffs.size:
            raise DimensionMismatch("One coefficient per term is required")

    @classmethod
    def from_terms(
        cls,
        terms: list[tuple[complex, np.ndarray, np.ndarray]],
        dim: int,
        picture: Picture = "schrodinger",
    ) -> "Superoperator":
        if not terms:
            return cls.zero(dim, picture)
        coeffs = np.array([c for c, _, _ in terms], dtype=complex)
        lefts = np.stack([np.asarray(a, dtype=complex) for _, a, _ in terms])
        rights = np.stack([np.asarray(b, dtype=complex) for _, _, b in terms])
        if lefts.shape[1:] != (dim, dim):
            raise DimensionMismatch(f"Terms have shape {lefts.shape[1:]}, expected {dim}")
        return cls(coeffs, lefts, rights, picture)

    @classmethod
    def zero(cls, dim: int, picture: Picture = "schrodinger") -> "Superoperator":
        empty = np.zeros((0, dim, dim), dtype=complex)
        return cls(np.zeros(0, dtype=complex), empty, empty.copy(), picture)

    @classmethod
    def identity(cls, dim: int) -> "Superoperator":
        eye = np.eye(dim, dtype=complex)[None]
        return cls(np.ones(1), eye, eye.copy())

    @property
    def dim(self) -> int:
        return self.lefts.shape[1]

    @property
    def terms(self) -> list[tuple[complex, np.ndarray, np.ndarray]]:
        return list(zip(self.coeffs, self.lefts, self.rights, strict=True))

    @property
    def dense(self) -> np.ndarray:
        if self._dense is None:
            self._dense = vectorize(self.coeffs, self.lefts, self.rights)
        return self._dense

    def apply(self, x: np.ndarray) -> np.ndarray:
        """Apply the term list directly (no dense matrix)."""
        x = np.asarray(x, dtype=complex)
        if x.shape != (self.dim, self.dim):
            raise DimensionMismatch(f"Input shape {x.shape} does not match dim {self.dim}")
        if self.coeffs.size == 0:
            return np.zeros_like(x)
        return np.einsum("k,kij,jm,kml->il", self.coeffs, self.lefts, x, self.rights)

    def adjoint(self) -> "Superoperator":
        """Adjoint w.r.t. the Hilbert-Schmidt product: X -> sum c* A^dag X B^dag."""
        picture: Picture = "heisenberg" if self.picture == "schrodinger" else "schrodinger"
        return Superoperator(
            np.conj(self.coeffs), dagger(self.lefts), dagger(self.rights), picture
        )

    def compose(self, other: "Superoperator") -> "Superoperator":
        """self o other, as a term list of all pairwise products."""
        if other.dim != self.dim:
            raise DimensionMismatch(f"Cannot compose dims {self.dim} and {other.dim}")
        coeffs = np.einsum("a,b->ab", self.coeffs, other.coeffs).reshape(-1)
        lefts = np.einsum("aij,bjk->abik", self.lefts, other.lefts).reshape(-1, self.dim, self.dim)
        rights = np.einsum("bij,ajk->abik", other.rights, self.rights).reshape(
            -1, self.dim, self.dim
        )
        return Superoperator(coeffs, lefts, rights, self.picture)

    def scaled(self, factor: complex) -> "Superoperator":
        return Superoperator(self.coeffs * factor, self.lefts, self.rights, self.picture)

    def __add__(self, other: "Superoperator") -> "Superoperator":
        if other.dim != self.dim:
            raise DimensionMismatch(f"Cannot add dims {self.dim} and {other.dim}")
        return Superoperator(
            np.concatenate([self.coeffs, other.coeffs]),
            np.concatenate([self.lefts, other.lefts]),
            np.concatenate([self.rights, other.rights]),
            self.picture,
        )

    def __sub__(self, other: "Superoperator") -> "Superoperator":
        return self + other.scaled(-1.0)


def gksl_terms(
    ops: np.ndarray, rates: np.ndarray
) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
    """
    Term stacks of sum_k r_k (L_k . L_k^dag - 1/2 {L_k^dag L_k, .}).

    Zero-rate operators are dropped.
    """
    ops = np.asarray(ops, dtype=complex)
    rates = np.asarray(rates, dtype=float).reshape(-1)
    keep = rates != 0
    ops, rates = ops[keep], rates[keep]
    d = ops.shape[-1] if ops.ndim == 3 else 0
    if ops.shape[0] == 0:
        return np.zeros(0), np.zeros((0, d, d)), np.zeros((0, d, d))
    eye = np.broadcast_to(np.eye(d, dtype=complex), ops.shape)
    ldl = dagger(ops) @ ops
    coeffs = np.concatenate([rates, -0.5 * rates, -0.5 * rates])
    lefts = np.concatenate([ops, ldl, eye])
    rights = np.concatenate([dagger(ops), eye, ldl])
    return coeffs, lefts, rights


def gksl_dense(ops: np.ndarray, rates: np.ndarray) -> np.ndarray:
    """Dense GKSL matrix without materializing per-term kron products."""
    ops = np.asarray(ops, dtype=complex)
    rates = np.asarray(rates, dtype=float).reshape(-1)
    d = ops.shape[-1]
    jump = np.einsum("k,kij,klm->iljm", rates, ops, np.conj(ops), optimize=True).reshape(
        d * d, d * d
    )
    r = np.einsum("k,kji,kjl->il", rates, np.conj(ops), ops, optimize=True)
    eye = np.eye(d, dtype=complex)
    return jump - 0.5 * (np.kron(r, eye) + np.kron(eye, r.T))


def choi(dense: np.ndarray) -> np.ndarray:
    """Choi matrix sum_ij |i><j| (x) S[|i><j|] of a dense superoperator."""
    d = int(round(np.sqrt(dense.shape[0])))
    return np.asarray(dense).reshape(d, d, d, d).transpose(2, 0, 3, 1).reshape(d * d, d * d)


# ---------------------------------------------------------------------------
# Norms
# ---------------------------------------------------------------------------


def norms(m: np.ndarray) -> dict[str, float]:
    """Operator (spectral), trace and Frobenius norms."""
    svals = np.linalg.svd(np.asarray(m), compute_uv=False)
    return {
        "operator": float(svals[0]) if svals.size else 0.0,
        "trace": float(np.sum(svals)),
        "frobenius": float(np.sqrt(np.sum(svals**2))),
    }


def operator_norm(m: np.ndarray) -> float:
    return float(np.linalg.norm(m, 2)) if np.asarray(m).size else 0.0


def trace_norm(m: np.ndarray) -> float:
    return float(np.sum(np.linalg.svd(np.asarray(m), compute_uv=False)))


def trace_distance(a: np.ndarray, b: np.ndarray) -> float:
    """Half the trace norm of the difference."""
    return 0.5 * trace_norm(np.asarray(a) - np.asarray(b))


def superop_norm_22(s: Superoperator | np.ndarray) -> float:
    """2->2 norm: operator norm of the vectorized matrix."""
    dense = s.dense if isinstance(s, Superoperator) else np.asarray(s)
    return operator_norm(dense)


def random_orthonormal_pairs(
    d: int, count: int, rng: np.random.Generator
) -> tuple[np.ndarray, np.ndarray]:
    """count pairs (u, v) of orthonormal vectors in C^d."""
    u = rng.normal(size=(count, d)) + 1j * rng.normal(size=(count, d))
    v = rng.normal(size=(count, d)) + 1j * rng.normal(size=(count, d))
    u /= np.linalg.norm(u, axis=1, keepdims=True)
    v -= np.sum(np.conj(u) * v, axis=1, keepdims=True) * u
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    return u, v


def extreme_points(u: np.ndarray, v: np.ndarray) -> np.ndarray:
    """R = (|u><u| - |v><v|)/2 for each row pair; trace norm 1."""
    return 0.5 * (
        np.einsum("ki,kj->kij", u, np.conj(u)) - np.einsum("ki,kj->kij", v, np.conj(v))
    )


def _batched_trace_norm(dense: np.ndarray, r: np.ndarray) -> np.ndarray:
    k, d, _ = r.shape
    out = (r.reshape(k, d * d) @ dense.T).reshape(k, d, d)
    return np.sum(np.linalg.svd(out, compute_uv=False), axis=1)


def max_trace_norm_image(
    dense: np.ndarray,
    trials: int,
    rng: np.random.Generator,
    refine_steps: int = 200,
    batch: int = 2048,
) -> float:
    """
    Sampled lower bound of max ||S[R]||_1 over traceless Hermitian R with ||R||_1 = 1.

    Samples orthogonal pure-state differences, then hill-climbs from the best pair.
    """
    dense = np.asarray(dense)
    d = int(round(np.sqrt(dense.shape[0])))
    if d < 2:
        return 0.0
    best, best_u, best_v = -1.0, None, None
    remaining = trials
    while remaining > 0:
        count = min(batch, remaining)
        u, v = random_orthonormal_pairs(d, count, rng)
        values = _batched_trace_norm(dense, extreme_points(u, v))
        idx = int(np.argmax(values))
        if values[idx] > best:
            best, best_u, best_v = float(values[idx]), u[idx], v[idx]
        remaining -= count

    step = 0.3
    for _ in range(refine_steps):
        du = rng.normal(size=d) + 1j * rng.normal(size=d)
        dv = rng.normal(size=d) + 1j * rng.normal(size=d)
        u = best_u + step * du / np.linalg.norm(du)
        u /= np.linalg.norm(u)
        v = best_v + step * dv / np.linalg.norm(dv)
        v -= np.vdot(u, v) * u
        v /= np.linalg.norm(v)
        value = float(_batched_trace_norm(dense, extreme_points(u[None], v[None]))[0])
        if value > best:
            best, best_u, best_v = value, u, v
        else:
            step *= 0.97
    return best


def superop_norm_11_lb(
    s: Superoperator | np.ndarray,
    trials: int = 10_000,
    rng: np.random.Generator | None = None,
    refine_steps: int = 200,
) -> float:
    """Lower bound of the 1->1 norm restricted to Hermitian inputs."""
    dense = s.dense if isinstance(s, Superoperator) else np.asarray(s)
    rng = rng if rng is not None else np.random.default_rng(0)
    return max_trace_norm_image(dense, trials, rng, refine_steps)


# ---------------------------------------------------------------------------
# Partial traces and random objects
# ---------------------------------------------------------------------------


def partial_trace(
    m: np.ndarray, keep: list[int] | tuple[int, ...] | set[int], dims: list[int] | None = None
) -> np.ndarray | complex:
    """
    Trace out every subsystem not in keep.

    Args:
        m: Operator on the tensor product of dims (qubits when dims is None)
        keep: Indices of subsystems to keep, 0 = leftmost factor
        dims: Local dimensions, defaulting to qubits

    Returns:
        Reduced operator, or the scalar trace when keep is empty
    """
    m = np.asarray(m)
    dims = list(dims) if dims is not None else [2] * qubit_count(m.shape[0])
    total = int(np.prod(dims))
    if m.shape != (total, total):
        raise DimensionMismatch(f"Operator shape {m.shape} does not match dims {dims}")
    keep = sorted(set(keep))
    if any(k < 0 or k >= len(dims) for k in keep):
        raise DimensionMismatch(f"Keep set {keep} outside subsystems 0..{len(dims) - 1}")
    if not keep:
        return complex(np.trace(m))
    n = len(dims)
    tensor = m.reshape(dims + dims)
    traced = [k for k in range(n) if k not in keep]
    for offset, k in enumerate(traced):
        current = n - offset
        axis = k - sum(1 for t in traced[:offset] if t < k)
        tensor = np.trace(tensor, axis1=axis, axis2=axis + current)
    kept_dim = int(np.prod([dims[k] for k in keep]))
    return tensor.reshape(kept_dim, kept_dim)


def random_hermitian(d: int, rng: np.random.Generator) -> np.ndarray:
    g = rng.normal(size=(d, d)) + 1j * rng.normal(size=(d, d))
    return 0.5 * (g + dagger(g))


def random_density(d: int, rng: np.random.Generator, rank: int | None = None) -> np.ndarray:
    g = rng.normal(size=(d, rank or d)) + 1j * rng.normal(size=(d, rank or d))
    rho = g @ dagger(g)
    return rho / np.trace(rho)


def orthonormal_completion(columns: np.ndarray, rng: np.random.Generator) -> np.ndarray:
    """
    Unitary whose leading columns are the given orthonormal columns.

    The remaining columns come from Gram-Schmidt on seeded random vectors.
    """
    columns = np.atleast_2d(np.asarray(columns, dtype=complex))
    if columns.shape[0] < columns.shape[1]:
        columns = columns.T
    d, k = columns.shape
    filler = rng.normal(size=(d, d - k)) + 1j * rng.normal(size=(d, d - k))
    q, r = np.linalg.qr(np.hstack([columns, filler]))
    # undo the phases QR puts on the leading columns
    phases = np.diag(r)[:k] / np.abs(np.diag(r)[:k])
    q[:, :k] = q[:, :k] * phases
    return q
