"""Lindbladian assembly: discrete, secular, Davies, continuous-frequency and two-sided."""

import logging
from dataclasses import dataclass
from functools import lru_cache
from pathlib import Path
from typing import Literal

import numpy as np
import scipy.integrate
import scipy.special
from pydantic import BaseModel, Field

from src.config import settings
from src.constants import RESIDUAL_TOL
from src.exceptions import (
    DimensionMismatch,
    IncompatibleSpec,
    QuadratureFailure,
    RatioViolation,
    UnsupportedFilter,
)
from src.models import CheckRecord
from src.quantum.model import (
    FilterFunction,
    GibbsContext,
    JumpSet,
    SpectralGrid,
    TransitionWeight,
    make_context,
    round_hamiltonian,
)
from src.quantum.numkit import (
    Superoperator,
    choi,
    dagger,
    gksl_dense,
    gksl_terms,
    matrix_exp,
    operator_norm,
    random_density,
    superop_norm_11_lb,
    superop_norm_22,
    unvec,
    vec,
)
from src.quantum.oft import OftFamily, oft_discrete, secular_truncate, two_sided_oft

logger = logging.getLogger(__name__)

Variant = Literal["gaussian", "uniform", "explicit", "davies", "cgme_continuous", "two_sided"]


@dataclass
class LindbladSpec:
    """Recipe for generators, proxies and circuits."""

    jumps: JumpSet
    context: GibbsContext
    weight: TransitionWeight
    variant: Variant = "gaussian"
    filter: FilterFunction | None = None
    grid: SpectralGrid | None = None
    T: float | None = None
    two_sided_weights: np.ndarray | None = None
    target_weights: np.ndarray | None = None

    def __post_init__(self):
        self.validate()

    def validate(self) -> None:
        """
        Raises:
            IncompatibleSpec: On dimension or grid disagreement
        """
        if self.jumps.dim != self.context.dim:
            raise IncompatibleSpec(
                f"jumps act on dim {self.jumps.dim}, Hamiltonian on {self.context.dim}"
            )
        if self.variant in ("davies", "cgme_continuous"):
            if self.variant == "cgme_continuous" and not (self.T and self.T > 0):
                raise IncompatibleSpec("cgme_continuous needs T > 0")
            return
        if self.grid is None or self.filter is None:
            raise IncompatibleSpec(f"variant {self.variant} needs a grid and a filter")
        if self.filter.grid.N != self.grid.N or self.weight.grid is None:
            raise IncompatibleSpec("filter, weight and grid must share the same grid")
        if self.weight.grid.N != self.grid.N:
            raise IncompatibleSpec("weight table does not match the grid")
        if self.variant == "two_sided":
            n = self.grid.N
            if self.two_sided_weights is None or self.two_sided_weights.shape != (n, n):
                raise IncompatibleSpec(f"two_sided needs an ({n}, {n}) weight table")

    def with_filter(self, filt: FilterFunction) -> "LindbladSpec":
        return LindbladSpec(
            self.jumps, self.context, self.weight, self.variant, filt, self.grid, self.T,
            self.two_sided_weights, self.target_weights,
        )


def gksl_superoperator(ops: np.ndarray, rates: np.ndarray) -> Superoperator:
    """GKSL generator of weighted Lindblad operators with its dense matrix precomputed."""
    coeffs, lefts, rights = gksl_terms(ops, rates)
    d = ops.shape[-1]
    if coeffs.size == 0:
        return Superoperator.zero(d)
    return Superoperator(coeffs, lefts, rights, _dense=gksl_dense(ops, rates))


def family_rates(family: OftFamily, weight: TransitionWeight) -> np.ndarray:
    """gamma(w) repeated for every jump, aligned with family.flat."""
    return np.tile(weight.values, family.jumps.size)


def lindbladian_from_family(family: OftFamily, weight: TransitionWeight) -> Superoperator:
    return gksl_superoperator(family.flat, family_rates(family, weight))


def build_lindbladian(spec: LindbladSpec) -> Superoperator:
    """
    L = sum_{a,w} gamma(w) (A_hat . A_hat^dag - 1/2 {A_hat^dag A_hat, .}).

    Dispatches on the variant: davies, cgme_continuous and two_sided use their
    own builders.
    """
    if spec.variant == "davies":
        return build_davies(spec.jumps, spec.weight, spec.context)
    if spec.variant == "cgme_continuous":
        return build_cgme_dissipative(spec.jumps, spec.weight, spec.T, spec.context)
    if spec.variant == "two_sided":
        return build_two_sided(spec)
    family = oft_discrete(spec.jumps, spec.filter, spec.grid, spec.context.hamiltonian)
    return lindbladian_from_family(family, spec.weight)


def rounded_context(spec: LindbladSpec) -> GibbsContext:
    """Gibbs context of the Hamiltonian with its spectrum rounded to the grid."""
    ham_bar = round_hamiltonian(spec.context.hamiltonian, spec.grid.omega0)
    return make_context(ham_bar, spec.context.beta)


def secular_family(spec: LindbladSpec, mu: float) -> OftFamily:
    ctx = rounded_context(spec)
    family = oft_discrete(spec.jumps, spec.filter, spec.grid, ctx.hamiltonian)
    return secular_truncate(family, mu, ctx.hamiltonian)


def build_secular(spec: LindbladSpec, mu: float) -> Superoperator:
    """Same GKSL shape with the secular operators S^a(w) of the rounded Hamiltonian."""
    return lindbladian_from_family(secular_family(spec, mu), spec.weight)


@dataclass
class SecularBoundReport:
    measured: float
    bound: float
    hat_term: float
    time_term: float
    rounding_term: float
    T: float
    bound_min: float
    T_min: float

    @property
    def passed(self) -> bool:
        return self.measured <= self.bound * (1 + 1e-9)

    def as_check(self) -> CheckRecord:
        return CheckRecord(
            check_name="secular_bound", measured=self.measured, bound=self.bound,
            passed=self.passed,
        )


def secular_bound(spec: LindbladSpec, mu: float) -> SecularBoundReport:
    """
    ||L_beta - L_sec||_{2-2} against 4||f_hat - f_hat_s|| + 8||f - f_T|| + 4 T omega0.

    T is the grid half-range N t0 / 2; the bound minimized over grid times T is
    reported alongside.
    """
    grid, filt = spec.grid, spec.filter
    l_beta = build_lindbladian(spec)
    family = secular_family(spec, mu)
    l_sec = lindbladian_from_family(family, spec.weight)
    measured = superop_norm_22(l_beta.dense - l_sec.dense)

    hat_term = 4 * float(np.linalg.norm(filt.hat() - family.filter.hat()))
    t_abs = np.abs(grid.times)

    def time_terms(T: float) -> tuple[float, float]:
        outside = t_abs > T + 1e-12 * grid.t0
        return 8 * float(np.linalg.norm(filt.values[outside])), 4 * T * grid.omega0

    T_full = grid.N * grid.t0 / 2
    time_term, rounding_term = time_terms(T_full)
    candidates = [(sum(time_terms(T)), T) for T in np.arange(grid.N // 2 + 1) * grid.t0]
    best, T_min = min(candidates)

    report = SecularBoundReport(
        measured=measured,
        bound=hat_term + time_term + rounding_term,
        hat_term=hat_term,
        time_term=time_term,
        rounding_term=rounding_term,
        T=T_full,
        bound_min=hat_term + best,
        T_min=float(T_min),
    )
    logger.debug(
        f"Secular mu={mu}: measured {measured:.3e}, bound {report.bound:.3e}, "
        f"min over T {report.bound_min:.3e}"
    )
    return report


# ---------------------------------------------------------------------------
# Bohr-resolved generators
# ---------------------------------------------------------------------------


def bohr_components(jumps: JumpSet, context: GibbsContext) -> tuple[np.ndarray, np.ndarray]:
    """Bohr frequencies and A^a_nu stack of shape (|A|, |B|, d, d)."""
    comps = []
    for op in jumps.operators:
        bohr, parts = context.bohr_decomposition(op)
        comps.append(parts)
    return context.bohr, np.stack(comps)


def kernel_generator(
    jumps: JumpSet, context: GibbsContext, kernel: np.ndarray
) -> Superoperator:
    """
    sum_{nu1,nu2} K(nu1,nu2) (A_nu1 . A_nu2^dag - 1/2 {A_nu2^dag A_nu1, .}).

    Args:
        kernel: (|B|, |B|) real symmetric weights over context.bohr
    """
    bohr, comps = bohr_components(jumps, context)
    d = context.dim
    nonzero = np.array([[np.any(np.abs(c) > 1e-15) for c in row] for row in comps])

    coeffs, lefts, rights = [], [], []
    r = np.zeros((d, d), dtype=complex)
    for a in range(jumps.size):
        active = np.flatnonzero(nonzero[a])
        for b1 in active:
            for b2 in active:
                k = kernel[b1, b2]
                if k == 0:
                    continue
                coeffs.append(k)
                lefts.append(comps[a, b1])
                rights.append(dagger(comps[a, b2]))
                r += k * dagger(comps[a, b2]) @ comps[a, b1]
    if not coeffs:
        return Superoperator.zero(d)
    eye = np.eye(d, dtype=complex)
    coeffs += [-0.5, -0.5]
    lefts += [r, eye]
    rights += [eye, r]
    return Superoperator(np.array(coeffs), np.stack(lefts), np.stack(rights))


def build_davies(
    jumps: JumpSet, weight: TransitionWeight, context: GibbsContext
) -> Superoperator:
    """sum_nu gamma(nu) (A_nu . A_nu^dag - 1/2 {A_nu^dag A_nu, .}) over exact Bohr frequencies."""
    rates = np.asarray(weight(context.bohr), dtype=float)
    return kernel_generator(jumps, context, np.diag(rates))


# ---------------------------------------------------------------------------
# Continuous-frequency kernels
# ---------------------------------------------------------------------------


def _checked_quad(func, a: float, b: float, **kwargs) -> float:
    value, err = scipy.integrate.quad(
        func, a, b, epsabs=settings.quad_epsabs, limit=settings.quad_limit, **kwargs
    )
    if err > settings.quad_fail_tol:
        raise QuadratureFailure(f"quad error estimate {err:.2e} on [{a}, {b}]")
    return value


def gaussian_metropolis_kernel(nu1: float, nu2: float, sigma_t: float, beta: float) -> float:
    """Closed form of the Gaussian overlap integral against min(1, e^{-beta w})."""
    a = 2 * sigma_t**2
    mean = 0.5 * (nu1 + nu2)
    envelope = np.exp(-(sigma_t**2) * (nu1 - nu2) ** 2 / 2)
    m = mean - beta / (2 * a)
    cold = np.exp(scipy.special.log_ndtr(-np.sqrt(2 * a) * mean))
    hot = np.exp(-beta * mean + beta**2 / (4 * a) + scipy.special.log_ndtr(np.sqrt(2 * a) * m))
    return float(envelope * (cold + hot))


def gaussian_kernel(nu1: float, nu2: float, sigma_t: float, weight: TransitionWeight) -> float:
    """K = int gamma(w) f_hat(w - nu1) f_hat(w - nu2) dw for the Gaussian filter."""
    envelope = np.exp(-(sigma_t**2) * (nu1 - nu2) ** 2 / 2)
    if weight.is_constant:
        return float(envelope * weight(0.0))
    if weight.kind == "metropolis":
        return gaussian_metropolis_kernel(nu1, nu2, sigma_t, weight.beta)
    a = 2 * sigma_t**2
    mean = 0.5 * (nu1 + nu2)
    width = 40 / np.sqrt(a)
    density = lambda w: np.sqrt(a / np.pi) * np.exp(-a * (w - mean) ** 2) * weight(w)  # noqa: E731
    lo, hi = mean - width, mean + width
    points = [0.0] if lo < 0 < hi else None
    return float(envelope * _checked_quad(density, lo, hi, points=points))


def uniform_kernel(nu1: float, nu2: float, T: float, weight: TransitionWeight) -> float:
    """
    K = int gamma(w) f_hat(w - nu1) f_hat(w - nu2) dw for f = 1(|t| <= T/2) / sqrt(T).

    The tails beyond W = max|nu| + 1 are split into a smooth part and a Fourier
    integral handled by QAWF.
    """
    delta = nu1 - nu2
    if weight.is_constant:
        return float(np.sinc(delta * T / (2 * np.pi)) * weight(0.0))

    def hat(w):
        return np.sqrt(T / (2 * np.pi)) * np.sinc(w * T / (2 * np.pi))

    big_w = max(abs(nu1), abs(nu2)) + 1.0
    middle = _checked_quad(
        lambda w: weight(w) * hat(w - nu1) * hat(w - nu2), -big_w, big_w, points=[0.0]
    )

    c = 0.5 * (nu1 + nu2) * T
    cos_d = np.cos(delta * T / 2)

    def upper(w):
        return weight(w) / ((w - nu1) * (w - nu2))

    def lower(u):
        return weight(-u) / ((u + nu1) * (u + nu2))

    tails = 0.0
    for g, sign in ((upper, 1.0), (lower, -1.0)):
        smooth = _checked_quad(g, big_w, np.inf)
        cos_part = _checked_quad(g, big_w, np.inf, weight="cos", wvar=T)
        sin_part = _checked_quad(g, big_w, np.inf, weight="sin", wvar=T)
        # cos(T w - c) for the upper tail, cos(T u + c) after w -> -u
        oscillating = np.cos(c) * cos_part + sign * np.sin(c) * sin_part
        tails += cos_d * smooth - oscillating
    return float(middle + tails / (np.pi * T))


def continuous_kernel(
    bohr: np.ndarray, kind: str, param: float, weight: TransitionWeight
) -> np.ndarray:
    """Symmetric kernel matrix over Bohr frequencies."""
    if kind == "gaussian":
        func = gaussian_kernel
    elif kind == "uniform":
        func = uniform_kernel
    else:
        raise UnsupportedFilter(f"no continuous kernel for {kind} filters")

    @lru_cache(maxsize=None)
    def entry(i: int, j: int) -> float:
        return func(float(bohr[i]), float(bohr[j]), param, weight)

    n = bohr.size
    kernel = np.empty((n, n))
    for i in range(n):
        for j in range(i, n):
            kernel[i, j] = kernel[j, i] = entry(i, j)
    return kernel


def continuous_generator(
    jumps: JumpSet, weight: TransitionWeight, context: GibbsContext, kind: str, param: float
) -> Superoperator:
    """
    int gamma(w) (A_hat(w) . A_hat(w)^dag - 1/2 {A_hat^dag A_hat, .}) dw.

    Args:
        kind: gaussian (param = sigma_t) or uniform (param = window length T)
    """
    kernel = continuous_kernel(context.bohr, kind, param, weight)
    logger.debug(f"Continuous {kind} kernel over {context.bohr.size} Bohr frequencies")
    return kernel_generator(jumps, context, kernel)


def build_cgme_dissipative(
    jumps: JumpSet, weight: TransitionWeight, T: float, context: GibbsContext
) -> Superoperator:
    """
    Dissipative part of the uniform-weight continuous generator, window f = 1(|t| <= T/2)/sqrt(T).

    Raises:
        QuadratureFailure: If adaptive integration misses tolerance
    """
    if T is None or T <= 0:
        raise ValueError(f"T must be positive, got {T}")
    return continuous_generator(jumps, weight, context, "uniform", T)


# ---------------------------------------------------------------------------
# Two-sided generator
# ---------------------------------------------------------------------------


def boltzmann_targets(grid: SpectralGrid, beta: float) -> np.ndarray:
    """p(E) = e^{-beta E} over the grid labels."""
    return np.exp(-beta * (grid.frequencies - grid.frequencies.min()))


def metropolis_two_sided(grid: SpectralGrid, p: np.ndarray) -> np.ndarray:
    """gamma(E2, E1) = min(1, p(E2) / p(E1)); axis 0 indexes E2."""
    return np.minimum(1.0, p[:, None] / p[None, :])


def check_ratio(table: np.ndarray, p: np.ndarray, tol: float = 1e-10) -> float:
    """
    Largest |gamma(E2,E1) p(E1) - gamma(E1,E2) p(E2)|, scaled by max p.

    Raises:
        RatioViolation: If it exceeds tol
    """
    lhs = table * p[None, :]
    rhs = table.T * p[:, None]
    residual = float(np.max(np.abs(lhs - rhs)) / np.max(p))
    if residual > tol:
        raise RatioViolation(f"two-sided weights break the ratio constraint by {residual:.2e}")
    return residual


def build_two_sided(spec: LindbladSpec) -> Superoperator:
    """
    sum_{a,E2,E1} gamma(E2,E1) (A_hat . A_hat^dag - 1/2 {A_hat^dag A_hat, .}).

    Raises:
        RatioViolation: If gamma(E2,E1)/gamma(E1,E2) != p(E2)/p(E1)
    """
    table = spec.two_sided_weights
    if spec.target_weights is not None:
        check_ratio(table, spec.target_weights)
    family = two_sided_oft(spec.jumps, spec.filter, spec.grid, spec.context.hamiltonian)
    rates = np.tile(table.reshape(-1), spec.jumps.size)
    return gksl_superoperator(family.flat, rates)


# ---------------------------------------------------------------------------
# Checks and export
# ---------------------------------------------------------------------------


@dataclass
class GkslReport:
    trace_residual: float
    cp_min_eig: float
    norm_11_lb: float

    def as_checks(self) -> list[CheckRecord]:
        return [
            CheckRecord(
                check_name="trace_preservation",
                measured=self.trace_residual,
                bound=RESIDUAL_TOL,
                passed=self.trace_residual < RESIDUAL_TOL,
            ),
            CheckRecord(
                check_name="complete_positivity",
                measured=self.cp_min_eig,
                bound=-1e-8,
                passed=self.cp_min_eig >= -1e-8,
            ),
            CheckRecord(
                check_name="norm_11",
                measured=self.norm_11_lb,
                bound=2.0,
                passed=self.norm_11_lb <= 2 + 1e-9,
            ),
        ]


def trace_residual(gen: Superoperator, samples: int = 20, seed: int = 0) -> float:
    """max |Tr L[rho]| over random states, together with ||L^dag[I]||."""
    rng = np.random.default_rng(seed)
    d = gen.dim
    dense = gen.dense
    worst = operator_norm(gen.adjoint().apply(np.eye(d)))
    for _ in range(samples):
        out = unvec(dense @ vec(random_density(d, rng)), d)
        worst = max(worst, abs(np.trace(out)))
    return float(worst)


def gksl_checks(
    gen: Superoperator, delta: float = 0.01, trials: int | None = None, seed: int = 0
) -> GkslReport:
    """Trace preservation, Choi positivity of e^{delta L}, and the sampled 1->1 norm."""
    channel = matrix_exp(delta * gen.dense)
    c = choi(channel)
    cp_min = float(np.min(np.linalg.eigvalsh(0.5 * (c + dagger(c)))))
    norm = superop_norm_11_lb(
        gen,
        trials=trials or settings.norm_trials,
        rng=np.random.default_rng(seed),
        refine_steps=settings.refine_steps,
    )
    report = GkslReport(trace_residual(gen, seed=seed), cp_min, norm)
    logger.debug(f"GKSL checks: {report}")
    return report


class SuperoperatorExport(BaseModel):
    """Dense layout: row-major complex pairs."""

    dim: int = Field(..., description="Row count of the dense matrix")
    picture: str
    variant: str
    data: list[list[float]] = Field(..., description="[re, im] pairs, row-major")


def export_superoperator(gen: Superoperator | np.ndarray, path: Path, variant: str) -> Path:
    """Write the dense matrix as JSON {dim, picture, variant, data}."""
    dense = gen.dense if isinstance(gen, Superoperator) else np.asarray(gen)
    if dense.ndim != 2 or dense.shape[0] != dense.shape[1]:
        raise DimensionMismatch(f"cannot export matrix of shape {dense.shape}")
    picture = gen.picture if isinstance(gen, Superoperator) else "schrodinger"
    flat = dense.reshape(-1)
    payload = SuperoperatorExport(
        dim=dense.shape[0],
        picture=picture,
        variant=variant,
        data=np.column_stack([flat.real, flat.imag]).tolist(),
    )
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    path.write_text(payload.model_dump_json(), encoding="utf-8")
    logger.info(f"Exported {variant} generator ({dense.shape[0]}x{dense.shape[0]}) to {path}")
    return path
