"""Configuration management using pydantic-settings."""

from pathlib import Path

from pydantic import Field
from pydantic_settings import BaseSettings, SettingsConfigDict


class Settings(BaseSettings):
    """Application settings loaded from QGL_* environment variables."""

    model_config = SettingsConfigDict(
        env_prefix="QGL_",
        env_file=".env",
        env_file_encoding="utf-8",
        case_sensitive=False,
        extra="ignore",
    )

    # Execution
    threads: int = Field(default=1, ge=1, le=256, description="Worker bound for sweeps")
    seed: int = Field(default=1234, description="Default RNG seed when a config omits one")

    # Sampled norms and mixing times
    norm_trials: int = Field(
        default=10_000, ge=10, description="Extreme-point samples for 1-1 norms and mixing"
    )
    refine_steps: int = Field(
        default=200, ge=0, description="Local polish iterations after sampling"
    )

    # Quadrature
    quad_epsabs: float = Field(default=1e-10, gt=0, description="Requested quadrature accuracy")
    quad_fail_tol: float = Field(
        default=1e-7, gt=0, description="Error estimate above which quadrature fails"
    )
    quad_limit: int = Field(default=500, ge=50, description="Subinterval limit for quad")

    # Output
    output_dir: Path = Field(
        default=Path("output/reports"), description="Default directory for reports"
    )
    experiments_dir: Path = Field(
        default=Path("config/experiments"), description="Bundled experiment documents"
    )
    record_runtime: bool = Field(
        default=False, description="Write measured runtimes; reports then differ run to run"
    )

    # Logging
    log_to_file: bool = Field(default=False, description="Enable logging to file with rotation")
    log_dir: Path = Field(default=Path("output/logs"), description="Directory for log files")
    log_max_age_days: int = Field(
        default=7, ge=1, le=30, description="Maximum age of log files to keep (days)"
    )


# Global settings instance
settings = Settings()
