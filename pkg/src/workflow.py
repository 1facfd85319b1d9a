"""Experiment runner: sweeps, report assembly and atomic report writes."""

import csv
import io
import json
import logging
import math
import os
import tempfile
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field
from datetime import datetime, timezone
from pathlib import Path
from typing import Any

from rich.console import Console
from rich.progress import Progress, SpinnerColumn, TextColumn

from src.config import settings
from src.exceptions import CheckFailed, ConfigError, InstanceError, QGLError
from src.experiments import Experiment, Point, get_experiment
from src.instance_config import ExperimentDocument, apply_sweep, build_instance
from src.services.logger_service import log_performance

UTC = timezone.utc

logger = logging.getLogger(__name__)
console = Console()


def _cell(value: Any) -> str:
    if value is None:
        return ""
    if isinstance(value, bool):
        return "true" if value else "false"
    if isinstance(value, float):
        if math.isnan(value):
            return "nan"
        if math.isinf(value):
            return "inf" if value > 0 else "-inf"
        return repr(value)
    return str(value)


def _json_value(value: Any) -> Any:
    if isinstance(value, float) and not math.isfinite(value):
        return str(value)
    return value


def render_csv(columns: list[str], rows: list[dict[str, Any]], stamp: str | None = None) -> str:
    """CSV text with an optional leading '# ...' comment line."""
    buffer = io.StringIO()
    if stamp:
        buffer.write(f"# {stamp}\n")
    writer = csv.writer(buffer, lineterminator="\n")
    writer.writerow(columns)
    for row in rows:
        writer.writerow([_cell(row.get(c)) for c in columns])
    return buffer.getvalue()


def write_atomic(path: Path, text: str) -> Path:
    """Write text to a temp file in the target directory, then rename over path."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    fd, tmp = tempfile.mkstemp(dir=path.parent, prefix=f".{path.name}.", suffix=".tmp")
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as f:
            f.write(text)
        os.replace(tmp, path)
    except BaseException:
        Path(tmp).unlink(missing_ok=True)
        raise
    return path


@dataclass
class RunResult:
    experiment: str
    rows: list[dict[str, Any]]
    failing: list[dict[str, Any]] = field(default_factory=list)
    path: Path | None = None

    @property
    def passed(self) -> bool:
        return not self.failing


class ExperimentRunner:
    """Runs one experiment document end to end."""

    def __init__(
        self,
        document: ExperimentDocument,
        experiment: str | None = None,
        out: Path | None = None,
        fmt: str | None = None,
        seed: int | None = None,
    ):
        """
        Args:
            document: Validated experiment document
            experiment: Experiment name; overrides the document's own
            out: Report path (defaults to settings.output_dir/<experiment>.<fmt>)
            fmt: csv or json (defaults to the document's output.format)
            seed: Base seed (defaults to the document's, then settings.seed)
        """
        self.document = document
        self.config = document.config
        name = experiment or self.config.experiment
        try:
            self.experiment: Experiment = get_experiment(name)
        except ValueError as e:
            raise ConfigError(str(e)) from e

        self.fmt = fmt or self.config.output.format
        if self.fmt not in ("csv", "json"):
            raise ConfigError(f"Unknown report format: {self.fmt}")
        default_out = self.config.output.path or settings.output_dir / f"{name}.{self.fmt}"
        self.out = Path(out) if out else Path(default_out)
        self.seed = seed if seed is not None else (
            self.config.seed if self.config.seed is not None else settings.seed
        )

        sweep = self.config.sweep
        allowed = self.experiment.sweep_params
        if sweep and allowed and sweep.param not in allowed:
            raise ConfigError(
                f"{name} cannot sweep {sweep.param}; "
                f"allowed: {', '.join(self.experiment.sweep_params)}"
            )
        if sweep and not self.experiment.sweep_params:
            raise ConfigError(f"{name} does not take a sweep")

    def _points(self) -> list[Point]:
        sweep = self.config.sweep
        values: list[float | None] = list(sweep.values) if sweep else [None]
        param = sweep.param if sweep else None
        points = []
        for index, value in enumerate(values):
            spec = self.config.instance
            if param is not None:
                spec = apply_sweep(spec, param, value)
            points.append(
                Point(
                    instance=build_instance(spec),
                    index=index,
                    seed=self.seed + index,
                    tolerances=self.document.tolerances,
                    param=param,
                    value=value,
                    options=dict(self.config.options),
                )
            )
        return points

    def _evaluate(self, point: Point) -> list[dict[str, Any]]:
        try:
            return self.experiment.point(point)
        except (CheckFailed, ConfigError, InstanceError):
            raise
        except QGLError as e:
            raise InstanceError(f"{self.experiment.name} at point {point.index}: {e}") from e

    def run(self, write: bool = True) -> RunResult:
        """
        Evaluate every sweep point, write the report, then verify the rows.

        Raises:
            ConfigError: If the document does not fit the experiment
            InstanceError: If an instance cannot be built or evaluated
            CheckFailed: If any row fails; the report is still written
        """
        name = self.experiment.name
        with log_performance(f"Experiment {name}", logger):
            points = self._points()
            with Progress(
                SpinnerColumn(),
                TextColumn("[progress.description]{task.description}"),
                console=console,
                transient=True,
            ) as progress:
                task = progress.add_task(f"[cyan]{name}: {len(points)} point(s)...", total=None)
                with ThreadPoolExecutor(max_workers=settings.threads) as pool:
                    per_point = list(pool.map(self._evaluate, points))
                progress.update(task, completed=1, total=1)

        rows = [row for chunk in per_point for row in chunk]
        verify = self.experiment.verify
        failing = verify(rows, self.document.tolerances) if verify else []
        result = RunResult(name, rows, failing)

        if write:
            result.path = write_atomic(self.out, self.render(rows))
            logger.info(f"Report written: {result.path}")

        if failing:
            raise CheckFailed(f"{len(failing)} failing row(s) in {name}", failing)
        return result

    def render(self, rows: list[dict[str, Any]]) -> str:
        stamp = f"qgl {self.experiment.name} seed={self.seed} generated {_now()}"
        columns = self.experiment.columns
        if self.fmt == "csv":
            return render_csv(columns, rows, stamp)
        payload = {
            "experiment": self.experiment.name,
            "generated": _now(),
            "seed": self.seed,
            "columns": columns,
            "rows": [{c: _json_value(row.get(c)) for c in columns} for row in rows],
            "config": self.document.raw,
        }
        return json.dumps(payload, indent=2) + "\n"


def _now() -> str:
    return datetime.now(UTC).strftime("%Y-%m-%dT%H:%M:%SZ")
