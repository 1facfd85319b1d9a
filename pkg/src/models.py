"""Data models for experiment documents and reports."""

from typing import Any, Literal

from pydantic import BaseModel, Field, field_validator, model_validator

MatrixEntry = float | list[float]


class HamiltonianParams(BaseModel):
    """Builder parameters; each builder reads only the keys it needs."""

    J: float | list[float] = Field(default=0.0, description="ZZ couplings (open chain)")
    h: float | list[float] = Field(default=0.0, description="Longitudinal Z fields")
    g: float | list[float] = Field(default=0.0, description="Transverse X fields")
    matrix: list[list[MatrixEntry]] | None = Field(
        default=None, description="Explicit matrix; complex entries as [re, im]"
    )
    seed: int = Field(default=0, description="Seed for random_hermitian")
    scale: float = Field(default=1.0, gt=0, description="Operator norm of random_hermitian")


class HamiltonianSpec(BaseModel):
    """Hamiltonian recipe."""

    kind: Literal["pauli_z_chain", "explicit", "random_hermitian"]
    n: int = Field(..., ge=1, description="Qubit count")
    params: HamiltonianParams = Field(default_factory=HamiltonianParams)

    @model_validator(mode="after")
    def check_explicit(self) -> "HamiltonianSpec":
        if self.kind == "explicit":
            if self.params.matrix is None:
                raise ValueError("explicit Hamiltonian requires params.matrix")
            dim = 2**self.n
            rows = self.params.matrix
            if len(rows) != dim or any(len(r) != dim for r in rows):
                raise ValueError(f"explicit matrix must be {dim}x{dim} for n={self.n}")
        return self


class JumpSpec(BaseModel):
    """One jump operator: a Pauli word, a single-site Pauli, or an explicit matrix."""

    pauli: str | None = Field(default=None, description="Pauli word like 'XZ' or letter")
    site: int | None = Field(default=None, ge=0, description="Site for a single-letter Pauli")
    matrix: list[list[MatrixEntry]] | None = None
    scale: float = Field(default=1.0, description="Prefactor")

    @model_validator(mode="after")
    def check_one_source(self) -> "JumpSpec":
        if (self.pauli is None) == (self.matrix is None):
            raise ValueError("a jump needs exactly one of 'pauli' or 'matrix'")
        if self.pauli is not None and set(self.pauli.upper()) - set("IXYZ"):
            raise ValueError(f"invalid Pauli word: {self.pauli}")
        return self


class FilterSpec(BaseModel):
    """Time-domain filter."""

    kind: Literal["gaussian", "uniform", "explicit"] = "gaussian"
    param: float | None = Field(default=None, gt=0, description="sigma_t or T")
    window: Literal["symmetric", "half_open"] = "symmetric"
    values: list[float] | None = None


class WeightSpec(BaseModel):
    """Transition weight profile."""

    kind: Literal["metropolis", "glauber", "custom"] = "metropolis"
    table: list[float] | None = None

    @field_validator("table")
    @classmethod
    def check_range(cls, v: list[float] | None) -> list[float] | None:
        if v is not None and any(x < 0 or x > 1 for x in v):
            raise ValueError("custom weights must lie in [0, 1]")
        return v


class GridSpec(BaseModel):
    """Discrete Fourier grid."""

    N: int = Field(default=64, ge=2, le=4096)
    omega0: float | None = Field(default=None, gt=0)

    @field_validator("N")
    @classmethod
    def power_of_two(cls, v: int) -> int:
        if v & (v - 1):
            raise ValueError(f"N must be a power of two, got {v}")
        return v


class InstanceSpec(BaseModel):
    """Full problem instance."""

    hamiltonian: HamiltonianSpec
    beta: float = Field(default=1.0, ge=0)
    jumps: list[JumpSpec] = Field(..., min_length=1)
    normalization: Literal["algorithmic", "physical", "none"] = "algorithmic"
    filter: FilterSpec = Field(default_factory=FilterSpec)
    weight: WeightSpec = Field(default_factory=WeightSpec)
    grid: GridSpec = Field(default_factory=GridSpec)
    mu: float | None = Field(default=None, gt=0, description="Secular truncation energy")
    T: float | None = Field(default=None, gt=0, description="Uniform window for CGME")


class SweepSpec(BaseModel):
    """One-parameter sweep."""

    param: str
    values: list[float] = Field(..., min_length=1)


class OutputSpec(BaseModel):
    path: str | None = None
    format: Literal["csv", "json"] = "csv"


class ExperimentConfig(BaseModel):
    """Validated experiment document."""

    experiment: str
    instance: InstanceSpec
    sweep: SweepSpec | None = None
    output: OutputSpec = Field(default_factory=OutputSpec)
    seed: int | None = None
    tolerances: dict[str, float] = Field(default_factory=dict)
    options: dict[str, Any] = Field(
        default_factory=dict, description="Experiment-specific knobs"
    )


class CheckRecord(BaseModel):
    """One diagnostic check."""

    check_name: str
    measured: float
    bound: float | None = None
    passed: bool = Field(default=True, alias="pass")

    model_config = {"populate_by_name": True}

    def as_row(self) -> dict[str, Any]:
        return self.model_dump(by_alias=True)


class BoundEntry(BaseModel):
    """One inequality of the bound suite."""

    name: str
    lhs: float | None = None
    rhs: float | None = None
    passed: bool | None = Field(default=None, alias="pass")
    informational: bool = False
    skipped_reason: str | None = None

    model_config = {"populate_by_name": True}

    def as_row(self) -> dict[str, Any]:
        return self.model_dump(by_alias=True)
