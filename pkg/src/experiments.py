"""
Registered experiments.

Each experiment is a thin dispatcher over the quantum package: `point` turns one
sweep value into report rows, `verify` looks across all rows and returns the
failing ones. CSV columns are fixed per experiment.
"""

import logging
import math
from collections.abc import Callable
from dataclasses import dataclass, field
from typing import Any

import numpy as np

from src.config import settings
from src.exceptions import QGLError
from src.instance_config import Instance, Tolerances
from src.quantum.circuits import (
    EIGVEC_DIST_LIMIT,
    anneal_path,
    block_encoding_residual,
    build_block_encoding,
    build_discriminant_block,
    discriminant_block,
    label_involution,
    reject_residual,
    weak_measure_evolve,
    weak_measure_step,
)
from src.quantum.discriminant import build_proxy, discriminant_report, proxy_epsilon
from src.quantum.dynamics import bound_suite, evolve, fixed_point, mixing_time, top_eigvec_compare
from src.quantum.generator import (
    build_davies,
    build_lindbladian,
    continuous_generator,
    secular_bound,
)
from src.quantum.numkit import (
    dagger,
    random_density,
    superop_norm_22,
    trace_distance,
    trace_norm,
)
from src.quantum.oft import oft_discrete, parseval_report, tail_mass
from src.services.logger_service import log_check, log_performance

logger = logging.getLogger(__name__)


@dataclass
class Point:
    """One sweep point handed to an experiment."""

    instance: Instance
    index: int
    seed: int
    tolerances: Tolerances
    param: str | None = None
    value: float | None = None
    options: dict[str, Any] = field(default_factory=dict)

    def option(self, key: str, default: Any = None) -> Any:
        return self.options.get(key, default)


PointFn = Callable[[Point], list[dict[str, Any]]]
VerifyFn = Callable[[list[dict[str, Any]], Tolerances], list[dict[str, Any]]]


@dataclass
class Experiment:
    """Registry entry."""

    name: str
    description: str
    columns: list[str]
    point: PointFn
    verify: VerifyFn | None = None
    sweep_params: tuple[str, ...] = ()


def _timed(fn: Callable[[Point], dict[str, Any] | list[dict[str, Any]]]) -> PointFn:
    """Wrap a point function so every row carries runtime_s."""

    def wrapper(point: Point) -> list[dict[str, Any]]:
        timing: dict[str, float] = {}
        with log_performance(fn.__name__.strip("_"), logger, timing):
            out = fn(point)
        rows = out if isinstance(out, list) else [out]
        runtime = round(timing["elapsed"], 6) if settings.record_runtime else 0.0
        for row in rows:
            row["runtime_s"] = runtime
            if "measured" in row:
                log_check(row, logger)
        return rows

    wrapper.__name__ = fn.__name__
    return wrapper


def _failing(rows: list[dict[str, Any]], tol: Tolerances) -> list[dict[str, Any]]:
    return [r for r in rows if r.get("pass") is False]


def _decreasing(column: str) -> VerifyFn:
    """Rows that break strict decrease of `column`, plus any row with pass=False."""

    def verify(rows: list[dict[str, Any]], tol: Tolerances) -> list[dict[str, Any]]:
        failing = _failing(rows, tol)
        for prev, row in zip(rows, rows[1:]):
            if not row[column] < prev[column]:
                failing.append({**row, "reason": f"{column} did not decrease"})
        return failing

    return verify


def _scaling(column: str, x_columns: tuple[str, ...]) -> VerifyFn:
    """
    Strict decrease of `column` plus a log-log slope against the swept value that
    lies in [tol.slope_low, tol.slope_high].
    """
    decreasing = _decreasing(column)

    def verify(rows: list[dict[str, Any]], tol: Tolerances) -> list[dict[str, Any]]:
        failing = decreasing(rows, tol)
        xs = [next((r[c] for c in x_columns if r.get(c) is not None), None) for r in rows]
        ys = [r[column] for r in rows]
        if len(rows) < 3 or any(x is None or x <= 0 for x in xs) or min(ys) <= 0:
            return failing
        slope = float(np.polyfit(np.log(xs), np.log(ys), 1)[0])
        logger.info(f"{column} log-log slope {slope:.3f}")
        if not tol.slope_low <= slope <= tol.slope_high:
            reason = f"{column} slope {slope:.3f} outside [{tol.slope_low}, {tol.slope_high}]"
            failing.append({**rows[-1], "reason": reason})
        return failing

    return verify


def _sqrt_decay(column: str) -> VerifyFn:
    """
    Strict decrease of `column` in T plus the upper-bound form of the uniform-weight
    fixed point: column * sqrt(T / beta) must not grow along the sweep.

    The fitted log-log slope is logged only; the bound does not fix the exponent.
    """
    decreasing = _decreasing(column)

    def verify(rows: list[dict[str, Any]], tol: Tolerances) -> list[dict[str, Any]]:
        failing = decreasing(rows, tol)
        if any(not r.get("T") or r["T"] <= 0 or r["beta"] <= 0 for r in rows):
            return failing
        scaled = [r[column] * math.sqrt(r["T"] / r["beta"]) for r in rows]
        for prev, now, row in zip(scaled, scaled[1:], rows[1:]):
            if now > prev * (1 + 1e-9):
                failing.append({**row, "reason": f"{column} * sqrt(T/beta) grew to {now:.3e}"})
        ys = [r[column] for r in rows]
        if len(rows) >= 2 and min(ys) > 0:
            slope = float(np.polyfit(np.log([r["T"] for r in rows]), np.log(ys), 1)[0])
            logger.info(f"{column} log-log slope in T {slope:.3f} (informational)")
        return failing

    return verify


def _fixed_point_decay(rows: list[dict[str, Any]], tol: Tolerances) -> list[dict[str, Any]]:
    """Gaussian sweeps get the slope window; uniform-weight sweeps the sqrt(beta/T) form."""
    if rows and all(r["sigma_t"] is None for r in rows):
        return _sqrt_decay("trace_distance")(rows, tol)
    return _scaling("trace_distance", ("sigma_t", "T"))(rows, tol)


WEAK_ORDER = 2.0
WEAK_ORDER_TOL = 0.3
WEAK_END_DISTANCE = 0.05


def _weak_order(rows: list[dict[str, Any]], tol: Tolerances) -> list[dict[str, Any]]:
    """Second-order step error over the delta sweep; the finest run tracks e^{tL}."""
    failing = _decreasing("step_error")(rows, tol)
    if len(rows) >= 2 and min(r["step_error"] for r in rows) > 0:
        deltas = [r["delta"] for r in rows]
        slope = float(np.polyfit(np.log(deltas), np.log([r["step_error"] for r in rows]), 1)[0])
        logger.info(f"step_error log-log slope {slope:.3f}")
        if abs(slope - WEAK_ORDER) > WEAK_ORDER_TOL:
            failing.append({**rows[-1], "reason": f"step error slope {slope:.3f}"})
    finest = min(rows, key=lambda r: r["delta"])
    if finest["end_distance"] > WEAK_END_DISTANCE:
        failing.append({**finest, "reason": "end distance above 0.05"})
    return failing


def _mu(point: Point) -> float:
    mu = point.value if point.param == "mu" else point.option("mu", point.instance.spec.mu)
    if mu is None:
        raise QGLError("this experiment needs mu (instance.mu, options.mu or a mu sweep)")
    return float(mu)


# ---------------------------------------------------------------------------
# Point functions
# ---------------------------------------------------------------------------


def _parseval(point: Point) -> dict[str, Any]:
    inst = point.instance
    family = oft_discrete(inst.jumps, inst.filter, inst.grid, inst.hamiltonian)
    return parseval_report(family).as_check(point.tolerances.residual).as_row()


def _oft_tails(point: Point) -> dict[str, Any]:
    inst = point.instance
    mu = _mu(point)
    report = tail_mass(inst.filter, inst.grid, mu)
    return {
        "mu": mu,
        "measured": report.measured,
        "bound": report.bound,
        "estimate": report.estimate,
        "pass": report.passed,
    }


def _secular_bound(point: Point) -> dict[str, Any]:
    mu = _mu(point)
    report = secular_bound(point.instance.lindblad, mu)
    return {
        "mu": mu,
        "measured": report.measured,
        "bound": report.bound,
        "hat_term": report.hat_term,
        "time_term": report.time_term,
        "rounding_term": report.rounding_term,
        "bound_min": report.bound_min,
        "pass": report.passed,
    }


def _fixed_point_scan(point: Point) -> dict[str, Any]:
    inst = point.instance
    variant = point.option("variant", "discrete")
    if variant == "cgme_continuous":
        T = point.value if point.param == "T" else inst.spec.T
        gen = build_lindbladian(inst.cgme(T))
    else:
        T = inst.filter.width if inst.filter.kind == "uniform" else None
        gen = build_lindbladian(inst.lindblad)
    rho = fixed_point(gen)
    t_mix = None
    if point.option("mixing", True):
        t_mix = mixing_time(gen, t_max=point.option("t_max", 1000.0), seed=point.seed).t_mix
    return {
        "sigma_t": None if variant == "cgme_continuous" else inst.filter.sigma_t,
        "T": T,
        "beta": inst.context.beta,
        "N": inst.grid.N,
        "trace_distance": trace_norm(rho - inst.context.rho),
        "t_mix_lb": t_mix,
    }


def _davies_exactness(point: Point) -> dict[str, Any]:
    inst = point.instance
    gen = build_davies(inst.jumps, inst.weight, inst.context)
    distance = trace_distance(fixed_point(gen), inst.context.rho)
    adb = discriminant_report(gen, inst.context.rho).adb_norm
    return {
        "beta": inst.context.beta,
        "trace_distance": distance,
        "adb_norm": adb,
        "pass": distance < point.tolerances.residual,
    }


def _mixing_time(point: Point) -> dict[str, Any]:
    inst = point.instance
    gen = _generator(point)
    report = mixing_time(
        gen, t_max=point.option("t_max", 1000.0), rho=inst.context.rho, seed=point.seed
    )
    gaps = report.gap_data
    return {
        "t_mix_lb": report.t_mix,
        "re_gap": gaps["re_gap"],
        "lambda1": gaps["lambda1"],
        "lambda_gap": gaps["lambda_gap"],
        "adb_norm": gaps["adb_norm"],
    }


def _generator(point: Point):
    inst = point.instance
    if point.option("variant", "discrete") == "davies":
        return build_davies(inst.jumps, inst.weight, inst.context)
    return build_lindbladian(inst.lindblad)


def _adb_scan(point: Point) -> dict[str, Any]:
    inst = point.instance
    mu = _mu(point)
    report = proxy_epsilon(inst.lindblad, mu)
    return {
        "sigma_t": inst.filter.sigma_t,
        "mu": mu,
        "beta": inst.context.beta,
        "epsilon": report.epsilon,
        "bound": report.bound,
        "uniform_constant": report.uniform_constant,
        "pass": report.passed,
    }


def _proxy_eigvec_scan(point: Point) -> dict[str, Any]:
    inst = point.instance
    spec = inst.lindblad
    proxy = build_proxy(spec)
    comparison = top_eigvec_compare(proxy, inst.context)
    epsilon = proxy_epsilon(spec).epsilon
    bound = 4 * math.sqrt(2) * epsilon / comparison.gap if comparison.gap > 0 else math.inf
    hermiticity = float(np.max(np.abs(proxy - dagger(proxy))))
    within = comparison.distance <= bound * (1 + 1e-9)
    return {
        "sigma_t": inst.filter.sigma_t,
        "eigvec_dist": comparison.distance,
        "epsilon": epsilon,
        "lambda_gap": comparison.gap,
        "bound": bound,
        "hermiticity": hermiticity,
        "pass": within and hermiticity < point.tolerances.hermitian,
    }


def _weak_measure(point: Point) -> dict[str, Any]:
    inst = point.instance
    delta = point.value if point.param == "delta" else point.option("delta", 0.01)
    end_time = point.option("t", 1.0)
    spec = inst.lindblad
    encoding = build_block_encoding(spec)
    gen = build_lindbladian(spec)
    # one initial state for the whole sweep
    rho = random_density(inst.context.dim, np.random.default_rng(point.seed - point.index))
    step = weak_measure_step(encoding, delta, rho)
    step_error = trace_distance(step, evolve(gen, rho, delta))
    steps = max(1, round(end_time / delta))
    end = weak_measure_evolve(encoding, delta, rho, steps)
    return {
        "delta": delta,
        "step_error": step_error,
        "step_error_over_delta2": step_error / delta**2,
        "end_time": steps * delta,
        "end_distance": trace_distance(end, evolve(gen, rho, steps * delta)),
    }


def _block_encode_verify(point: Point) -> dict[str, Any]:
    inst = point.instance
    spec = inst.lindblad
    program = build_block_encoding(spec)
    residual = block_encoding_residual(program, spec)
    unitarity = float(
        np.max(np.abs(dagger(program.unitary) @ program.unitary - np.eye(program.register.dim)))
    )
    reject = reject_residual(spec)
    tol = point.tolerances
    return {
        "N": inst.grid.N,
        "n_qubits": program.register.n_qubits,
        "residual": residual,
        "unitarity": unitarity,
        "reject_residual": reject,
        "pass": residual < tol.block and unitarity < tol.unitary and reject < tol.unitary,
    }


def _discriminant_block_verify(point: Point) -> dict[str, Any]:
    inst = point.instance
    spec = inst.lindblad
    d = inst.context.dim
    encoding = build_block_encoding(spec)
    program = build_discriminant_block(encoding, label_involution(inst.grid, inst.jumps), d)
    block = discriminant_block(program, d)
    residual = float(np.max(np.abs(block - np.eye(d * d) - build_proxy(spec))))
    hermiticity = float(np.max(np.abs(block - dagger(block))))
    tol = point.tolerances
    return {
        "N": inst.grid.N,
        "n_qubits": program.register.n_qubits,
        "residual": residual,
        "hermiticity": hermiticity,
        "pass": residual < tol.block and hermiticity < tol.hermitian,
    }


def _anneal_path(point: Point) -> list[dict[str, Any]]:
    inst = point.instance
    k = point.option("k") or max(1, math.ceil(2 * inst.context.beta * inst.hamiltonian.norm))
    report = anneal_path(inst.lindblad, int(k), workers=settings.threads)
    threshold = point.option("min_overlap", 0.6)
    if report.flagged:
        logger.warning(
            f"{report.flagged} of {len(report.points)} nodes above eigvec_dist "
            f"{EIGVEC_DIST_LIMIT}: overlaps are not covered by the path guarantee"
        )
    rows = []
    for p in report.points:
        row = p.as_row()
        overlap_ok = p.overlap is None or p.overlap >= threshold
        row["pass"] = report.flagged == 0 and overlap_ok
        rows.append(row)
    return rows


def _discretization(point: Point) -> dict[str, Any]:
    inst = point.instance
    if inst.filter.kind != "gaussian":
        raise QGLError("discretization-convergence needs a gaussian filter")
    discrete = build_lindbladian(inst.lindblad)
    continuum = continuous_generator(
        inst.jumps, inst.weight, inst.context, "gaussian", inst.filter.sigma_t
    )
    return {
        "N": inst.grid.N,
        "omega0": inst.grid.omega0,
        "distance": superop_norm_22(discrete.dense - continuum.dense),
    }


def _bound_suite(point: Point) -> list[dict[str, Any]]:
    inst = point.instance
    gen = _generator(point)
    other = None
    if point.option("compare") == "davies":
        other = build_davies(inst.jumps, inst.weight, inst.context)
    entries = bound_suite(
        gen, inst.context.rho, other=other, t_max=point.option("t_max", 1000.0), seed=point.seed
    )
    return [e.as_row() for e in entries]


def _bound_failures(rows: list[dict[str, Any]], tol: Tolerances) -> list[dict[str, Any]]:
    return [r for r in rows if r.get("pass") is False and not r.get("informational")]


# ---------------------------------------------------------------------------
# Registry
# ---------------------------------------------------------------------------

_EXPERIMENTS = [
    Experiment(
        "parseval",
        "Operator Parseval identity of the discrete transform",
        ["check_name", "measured", "bound", "pass", "runtime_s"],
        _timed(_parseval),
        _failing,
    ),
    Experiment(
        "oft-tails",
        "Filter tail mass beyond mu against its bound",
        ["mu", "measured", "bound", "estimate", "pass", "runtime_s"],
        _timed(_oft_tails),
        _failing,
        ("mu",),
    ),
    Experiment(
        "secular-bound",
        "Generator change under secular truncation against its bound",
        [
            "mu", "measured", "bound", "hat_term", "time_term", "rounding_term", "bound_min",
            "pass", "runtime_s",
        ],
        _timed(_secular_bound),
        _failing,
        ("mu",),
    ),
    Experiment(
        "fixed-point-scan",
        "Fixed-point distance to the Gibbs state over sigma_t or T",
        ["sigma_t", "T", "beta", "N", "trace_distance", "t_mix_lb", "runtime_s"],
        _timed(_fixed_point_scan),
        _fixed_point_decay,
        ("sigma_t", "T"),
    ),
    Experiment(
        "davies-exactness",
        "Davies generator fixes the Gibbs state exactly",
        ["beta", "trace_distance", "adb_norm", "pass", "runtime_s"],
        _timed(_davies_exactness),
        _failing,
        ("beta",),
    ),
    Experiment(
        "mixing-time",
        "Sampled mixing time with spectral and discriminant gaps",
        ["t_mix_lb", "re_gap", "lambda1", "lambda_gap", "adb_norm", "runtime_s"],
        _timed(_mixing_time),
        None,
        ("sigma_t", "beta"),
    ),
    Experiment(
        "adb-scan",
        "Approximate detailed balance of the secular proxy",
        ["sigma_t", "mu", "beta", "epsilon", "bound", "uniform_constant", "pass", "runtime_s"],
        _timed(_adb_scan),
        _failing,
        ("mu", "sigma_t"),
    ),
    Experiment(
        "proxy-eigvec-scan",
        "Top eigenvector of the discriminant proxy against the purified Gibbs state",
        [
            "sigma_t", "eigvec_dist", "epsilon", "lambda_gap", "bound", "hermiticity", "pass",
            "runtime_s",
        ],
        _timed(_proxy_eigvec_scan),
        _decreasing("eigvec_dist"),
        ("sigma_t",),
    ),
    Experiment(
        "weak-measure-convergence",
        "Weak-measurement step error against e^{delta L}",
        ["delta", "step_error", "step_error_over_delta2", "end_time", "end_distance", "runtime_s"],
        _timed(_weak_measure),
        _weak_order,
        ("delta",),
    ),
    Experiment(
        "block-encode-verify",
        "Lindblad-operator block-encoding and reject block identities",
        ["N", "n_qubits", "residual", "unitarity", "reject_residual", "pass", "runtime_s"],
        _timed(_block_encode_verify),
        _failing,
        ("N",),
    ),
    Experiment(
        "discriminant-block-verify",
        "Doubled-register discriminant block against I + D",
        ["N", "n_qubits", "residual", "hermiticity", "pass", "runtime_s"],
        _timed(_discriminant_block_verify),
        _failing,
        ("N",),
    ),
    Experiment(
        "anneal-path",
        "Consecutive top-eigenvector overlaps along a temperature path",
        ["beta", "gap", "overlap", "eigvec_dist", "flag", "pass", "runtime_s"],
        _timed(_anneal_path),
        _failing,
    ),
    Experiment(
        "discretization-convergence",
        "Discrete generator against the continuous one over N",
        ["N", "omega0", "distance", "runtime_s"],
        _timed(_discretization),
        _decreasing("distance"),
        ("N",),
    ),
    Experiment(
        "bound-suite",
        "Fixed-point, mixing and perturbation inequalities",
        ["name", "lhs", "rhs", "pass", "informational", "skipped_reason", "runtime_s"],
        _timed(_bound_suite),
        _bound_failures,
    ),
]

EXPERIMENTS: dict[str, Experiment] = {e.name: e for e in _EXPERIMENTS}


def get_experiment(name: str) -> Experiment:
    """
    Look up a registered experiment.

    Raises:
        ValueError: If the name is not registered
    """
    if name not in EXPERIMENTS:
        raise ValueError(f"Unknown experiment: {name}. Available: {', '.join(EXPERIMENTS)}")
    return EXPERIMENTS[name]
