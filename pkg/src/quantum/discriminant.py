"""Discriminants, detailed-balance defects and Hermitian discriminant proxies."""

import logging
from dataclasses import dataclass

import numpy as np

from src.constants import ADB_CONSTANT, EIGENVALUE_FLOOR, HERMITIAN_FLAG_TOL
from src.exceptions import (
    PreconditionBetaMu,
    SingularNegativePower,
    SingularState,
    SymmetryViolation,
)
from src.quantum.generator import (
    LindbladSpec,
    bohr_components,
    build_lindbladian,
    family_rates,
    lindbladian_from_family,
    rounded_context,
    secular_family,
)
from src.quantum.model import GibbsContext, JumpSet, TransitionWeight
from src.quantum.numkit import (
    Superoperator,
    dagger,
    eig_hermitian,
    matrix_power,
    operator_norm,
)
from src.quantum.oft import OftFamily, oft_discrete, two_sided_oft

logger = logging.getLogger(__name__)


def _dense(gen: Superoperator | np.ndarray) -> np.ndarray:
    return gen.dense if isinstance(gen, Superoperator) else np.asarray(gen)


def similarity_discriminant(gen: Superoperator | np.ndarray, rho: np.ndarray) -> np.ndarray:
    """
    Vectorization of rho^{-1/4} L[rho^{1/4} . rho^{1/4}] rho^{-1/4}.

    Raises:
        SingularState: If rho has an eigenvalue at or below 1e-14
    """
    try:
        r_minus = matrix_power(rho, -0.25, floor=EIGENVALUE_FLOOR)
    except SingularNegativePower as exc:
        raise SingularState(str(exc)) from exc
    r_plus = matrix_power(rho, 0.25)
    outer = np.kron(r_minus, r_minus.T)
    inner = np.kron(r_plus, r_plus.T)
    return outer @ _dense(gen) @ inner


@dataclass
class DiscriminantReport:
    D: np.ndarray
    H_part: np.ndarray
    A_part: np.ndarray
    adb_norm: float
    lambda1: float
    top_vector: np.ndarray
    gap: float

    @property
    def top_eigpair(self) -> tuple[float, np.ndarray]:
        return self.lambda1, self.top_vector


def split_hermitian(d: np.ndarray) -> tuple[np.ndarray, np.ndarray]:
    """D = H + A with H Hermitian and A anti-Hermitian."""
    h = 0.5 * (d + dagger(d))
    return h, d - h


def discriminant_report(gen: Superoperator | np.ndarray, rho: np.ndarray) -> DiscriminantReport:
    d = similarity_discriminant(gen, rho)
    h, a = split_hermitian(d)
    values, vectors = eig_hermitian(h)
    gap = float(values[0] - values[1]) if values.size > 1 else 0.0
    return DiscriminantReport(
        D=d,
        H_part=h,
        A_part=a,
        adb_norm=operator_norm(a),
        lambda1=float(values[0]),
        top_vector=vectors[:, 0],
        gap=gap,
    )


def adb_norm(gen: Superoperator | np.ndarray, rho: np.ndarray) -> float:
    """||(D - D^dag)/2||, the 2->2 norm of the anti-Hermitian part."""
    _, a = split_hermitian(similarity_discriminant(gen, rho))
    return operator_norm(a)


# ---------------------------------------------------------------------------
# Proxies
# ---------------------------------------------------------------------------


def generic_proxy(
    ops: np.ndarray | list[np.ndarray], permutation: np.ndarray | list[int], dim: int = 1
) -> np.ndarray:
    """
    1/2 sum_j L_j (x) L_j'^T + L_j^dag (x) L_j'^* - L_j^dag L_j (x) I - I (x) L_j^T L_j^*.

    Hermitian for any involution j -> j'.

    Args:
        dim: System dimension used only when ops is empty

    Raises:
        ValueError: If permutation is not an involution of the labels
    """
    ops = np.asarray(ops, dtype=complex)
    if ops.size == 0:
        return np.zeros((dim * dim, dim * dim), dtype=complex)
    perm = np.asarray(permutation, dtype=int)
    if perm.shape != (ops.shape[0],) or np.any(perm[perm] != np.arange(perm.size)):
        raise ValueError("permutation must be an involution on the jump labels")
    d = ops.shape[-1]
    partner = ops[perm]

    jump = np.einsum("kij,kml->iljm", ops, partner) + np.einsum(
        "kji,klm->iljm", np.conj(ops), np.conj(partner)
    )
    r = np.einsum("kji,kjl->il", np.conj(ops), ops)
    eye = np.eye(d)
    out = 0.5 * jump.reshape(d * d, d * d) - 0.5 * (np.kron(r, eye) + np.kron(eye, r.T))
    return out


def _hermitian_or_raise(d: np.ndarray, what: str) -> np.ndarray:
    residual = float(np.max(np.abs(d - dagger(d)))) if d.size else 0.0
    scale = max(1.0, float(np.max(np.abs(d)))) if d.size else 1.0
    if residual > HERMITIAN_FLAG_TOL * scale:
        raise SymmetryViolation(f"{what} has Hermiticity residual {residual:.2e}")
    return 0.5 * (d + dagger(d))


def family_involution(family: OftFamily) -> np.ndarray:
    """(a, w) -> (a', -w) on the jump-major flat index."""
    perm = family.jumps.require_adjoint_closed()
    n = family.grid.N
    neg = family.grid.negation
    return (perm[:, None] * n + neg[None, :]).reshape(-1)


def proxy_from_family(family: OftFamily, weight: TransitionWeight) -> np.ndarray:
    """D_beta of a one-sided family: generic proxy of sqrt(gamma) A_hat, (a, w) -> (a', -w)."""
    rates = family_rates(family, weight)
    ops = np.sqrt(rates)[:, None, None] * family.flat
    d = generic_proxy(ops, family_involution(family), dim=family.jumps.dim)
    return _hermitian_or_raise(d, "discriminant proxy")


def build_proxy(spec: LindbladSpec) -> np.ndarray:
    """
    D_beta = sum sqrt(gamma(w) gamma(-w)) A_hat (x) A_hat^*
             - gamma(w)/2 (A_hat^dag A_hat (x) I + I (x) A_hat^T A_hat^*).

    Raises:
        SymmetryViolation: If jumps are not adjoint-closed or the filter is complex
    """
    spec.jumps.require_adjoint_closed()
    if not spec.filter.real_flag:
        raise SymmetryViolation("discriminant proxy needs a real filter")
    family = oft_discrete(spec.jumps, spec.filter, spec.grid, spec.context.hamiltonian)
    return proxy_from_family(family, spec.weight)


def davies_proxy(
    jumps: JumpSet, weight: TransitionWeight, context: GibbsContext
) -> np.ndarray:
    """Proxy over exact Bohr components with sqrt(gamma(nu) gamma(-nu)) weights."""
    perm = jumps.require_adjoint_closed()
    bohr, comps = bohr_components(jumps, context)
    neg = np.array([int(np.argmin(np.abs(bohr + nu))) for nu in bohr])
    rates = np.tile(np.asarray(weight(bohr), dtype=float), jumps.size)
    ops = np.sqrt(rates)[:, None, None] * comps.reshape(-1, context.dim, context.dim)
    n_b = bohr.size
    involution = (perm[:, None] * n_b + neg[None, :]).reshape(-1)
    return _hermitian_or_raise(generic_proxy(ops, involution, dim=context.dim), "Davies proxy")


def build_two_sided_proxy(spec: LindbladSpec) -> np.ndarray:
    """Generic proxy of sqrt(gamma(E2,E1)) A_hat(E2,E1) with (a, E2, E1) -> (a', E1, E2)."""
    perm = spec.jumps.require_adjoint_closed()
    family = two_sided_oft(spec.jumps, spec.filter, spec.grid, spec.context.hamiltonian)
    n = spec.grid.N
    rates = np.tile(spec.two_sided_weights.reshape(-1), spec.jumps.size)
    ops = np.sqrt(rates)[:, None, None] * family.flat
    e2, e1 = np.meshgrid(np.arange(n), np.arange(n), indexing="ij")
    swapped = (e1 * n + e2).reshape(-1)
    involution = (perm[:, None] * n * n + swapped[None, :]).reshape(-1)
    d = generic_proxy(ops, involution, dim=spec.jumps.dim)
    return _hermitian_or_raise(d, "two-sided proxy")


@dataclass
class EpsilonReport:
    epsilon: float
    bound: float | None
    mu: float | None
    uniform_constant: float | None = None

    @property
    def passed(self) -> bool | None:
        if self.bound is None:
            return None
        return self.epsilon <= self.bound * (1 + 1e-9)


def proxy_epsilon(spec: LindbladSpec, mu: float | None = None) -> EpsilonReport:
    """
    epsilon = ||D - D(rho, L)^dag||.

    With mu, D and L use the secular operators of the rounded Hamiltonian and the
    bound 132 beta mu ||sum gamma S^dag S|| is reported. Without mu the plain
    proxy and generator are compared and no bound is given.

    Raises:
        PreconditionBetaMu: If beta * mu > 1
    """
    beta = spec.context.beta
    uniform_constant = None
    if mu is None:
        proxy = build_proxy(spec)
        gen = build_lindbladian(spec)
        rho = spec.context.rho
        bound = None
    else:
        if beta * mu > 1 + 1e-12:
            raise PreconditionBetaMu(f"beta * mu = {beta * mu:.4f} exceeds 1")
        spec.jumps.require_adjoint_closed()
        family = secular_family(spec, mu)
        proxy = proxy_from_family(family, spec.weight)
        gen = lindbladian_from_family(family, spec.weight)
        rho = rounded_context(spec).rho
        rates = family_rates(family, spec.weight)
        flat = family.flat
        gram = np.einsum("k,kji,kjl->il", rates, np.conj(flat), flat)
        bound = ADB_CONSTANT * beta * mu * operator_norm(gram)

    epsilon = operator_norm(proxy - dagger(similarity_discriminant(gen, rho)))

    width = spec.filter.width if spec.filter is not None else None
    if mu is not None and width and beta > 0:
        scale = beta * float(np.max(spec.weight.values)) * np.sqrt(mu / width)
        scale *= spec.jumps.normalization
        if scale > 0:
            uniform_constant = epsilon / scale

    report = EpsilonReport(epsilon, bound, mu, uniform_constant)
    logger.debug(f"Proxy epsilon (mu={mu}): {epsilon:.3e}, bound {bound}")
    return report
