"""Experiment document loading and instance construction."""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Any

import numpy as np
import yaml
from pydantic import BaseModel, ConfigDict, ValidationError

from src.constants import (
    BLOCK_TOL,
    HERMITIAN_FLAG_TOL,
    RESIDUAL_TOL,
    UNITARY_TOL,
)
from src.exceptions import ConfigError, InstanceError, QGLError
from src.models import ExperimentConfig, InstanceSpec
from src.quantum.generator import LindbladSpec
from src.quantum.model import (
    FilterFunction,
    GibbsContext,
    Hamiltonian,
    JumpSet,
    SpectralGrid,
    TransitionWeight,
    build_hamiltonian,
    build_jumps,
    make_context,
    make_filter,
    make_grid,
    make_weight,
)

logger = logging.getLogger(__name__)


class Tolerances(BaseModel):
    """Per-run numeric thresholds; a document's `tolerances:` section overrides these."""

    model_config = ConfigDict(extra="forbid")

    residual: float = RESIDUAL_TOL
    hermitian: float = HERMITIAN_FLAG_TOL
    block: float = BLOCK_TOL
    unitary: float = UNITARY_TOL
    slope_low: float = -1.5
    slope_high: float = -0.6

    @classmethod
    def merged(cls, overrides: dict[str, float] | None) -> "Tolerances":
        try:
            return cls(**(overrides or {}))
        except ValidationError as e:
            raise ConfigError(f"Invalid tolerances: {e}") from e


class ExperimentDocument:
    """YAML experiment document loader."""

    def __init__(self, path: Path | str | None = None, data: dict[str, Any] | None = None):
        """
        Args:
            path: YAML file to read
            data: Already-parsed mapping (used instead of path)
        """
        self.path = Path(path) if path is not None else None
        self.config = self._load_config(data)
        self.tolerances = Tolerances.merged(self.config.tolerances)
        logger.debug(f"Loaded experiment document: {self.config.experiment}")

    def _load_config(self, data: dict[str, Any] | None) -> ExperimentConfig:
        if data is None:
            if self.path is None:
                raise ConfigError("An experiment document needs a path or a mapping")
            if not self.path.exists():
                raise ConfigError(f"Config file not found: {self.path}")
            try:
                with open(self.path, encoding="utf-8") as f:
                    data = yaml.safe_load(f)
            except yaml.YAMLError as e:
                logger.error(f"Malformed YAML in {self.path}: {e}")
                raise ConfigError(f"Malformed YAML in {self.path}: {e}") from e

        if not isinstance(data, dict):
            raise ConfigError("Experiment document must be a mapping")

        try:
            return ExperimentConfig(**data)
        except ValidationError as e:
            logger.error(f"Invalid experiment document: {e}")
            raise ConfigError(str(e)) from e

    @property
    def raw(self) -> dict[str, Any]:
        return self.config.model_dump(mode="json")


@dataclass
class Instance:
    """Everything built from an InstanceSpec."""

    spec: InstanceSpec
    hamiltonian: Hamiltonian
    context: GibbsContext
    grid: SpectralGrid
    jumps: JumpSet
    filter: FilterFunction
    weight: TransitionWeight

    @property
    def lindblad(self) -> LindbladSpec:
        return LindbladSpec(
            self.jumps, self.context, self.weight, self.filter.kind, self.filter, self.grid,
            self.spec.T,
        )

    def davies(self) -> LindbladSpec:
        return LindbladSpec(self.jumps, self.context, self.weight, "davies")

    def cgme(self, T: float) -> LindbladSpec:
        return LindbladSpec(self.jumps, self.context, self.weight, "cgme_continuous", T=T)


def _filter(spec: InstanceSpec, grid: SpectralGrid) -> FilterFunction:
    f = spec.filter
    if f.kind == "gaussian":
        if f.param is None:
            raise InstanceError("gaussian filter needs param (sigma_t)")
        return make_filter("gaussian", grid, sigma_t=f.param)
    if f.kind == "uniform":
        return make_filter("uniform", grid, T=f.param, window=f.window)
    if f.values is None:
        raise InstanceError("explicit filter needs values")
    return make_filter("explicit", grid, values=np.asarray(f.values))


def build_instance(spec: InstanceSpec) -> Instance:
    """
    Build the numerical objects described by a validated instance.

    Raises:
        InstanceError: If the instance cannot be built (size limits, grid range,
            inconsistent weights or filters)
    """
    try:
        ham = build_hamiltonian(spec.hamiltonian)
        context = make_context(ham, spec.beta)
        grid = make_grid(spec.grid.N, context, spec.grid.omega0)
        jumps = build_jumps(spec.jumps, spec.hamiltonian.n, spec.normalization)
        filt = _filter(spec, grid)
        table = None if spec.weight.table is None else np.asarray(spec.weight.table)
        weight = make_weight(spec.weight.kind, context.beta, grid, table)
    except InstanceError:
        raise
    except (QGLError, ValueError) as e:
        logger.error(f"Cannot build instance: {e}")
        raise InstanceError(str(e)) from e
    logger.debug(
        f"Instance: n={spec.hamiltonian.n}, beta={context.beta}, N={grid.N}, "
        f"omega0={grid.omega0:.5f}, {jumps.size} jumps, {filt.kind} filter"
    )
    return Instance(spec, ham, context, grid, jumps, filt, weight)


SWEEP_TARGETS = {
    "sigma_t": ("filter", "param"),
    "T": ("filter", "param"),
    "N": ("grid", "N"),
    "beta": (None, "beta"),
}


def apply_sweep(spec: InstanceSpec, param: str, value: float) -> InstanceSpec:
    """Instance with one swept parameter replaced; non-instance parameters pass through."""
    if param not in SWEEP_TARGETS:
        return spec
    section, key = SWEEP_TARGETS[param]
    if param == "T" and spec.filter.kind != "uniform":
        section, key = None, "T"
    if key == "N":
        value = int(value)
    data = spec.model_dump()
    if section is None:
        data[key] = value
    else:
        data[section][key] = value
    if param == "N":
        data["grid"]["omega0"] = None
    try:
        return InstanceSpec(**data)
    except ValidationError as e:
        raise ConfigError(f"Sweep {param}={value} gives an invalid instance: {e}") from e
