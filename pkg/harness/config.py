"""
Run configuration.

Environment settings come from ``OPT_*`` variables or a ``.env`` file;
per-run parameters are validated pydantic models that also serve as the
``config`` echo of every summary and as the ``--config`` file format.
"""
from __future__ import annotations

import json
from enum import Enum
from pathlib import Path
from typing import Annotated, List, Literal, Optional, Union

from pydantic import BaseModel, ConfigDict, Field, ValidationError, model_validator
from pydantic_settings import BaseSettings, SettingsConfigDict

from solvers.runner import OptimizerKind


class ConfigError(ValueError):
    """Invalid run configuration; the CLI reports it as a usage error."""


class Settings(BaseSettings):
    """Process-wide defaults: ``OPT_TRACE_DIR`` and ``OPT_LOG_LEVEL``."""

    model_config = SettingsConfigDict(env_prefix="OPT_", env_file=".env", extra="ignore")

    trace_dir: Path = Path("./traces")
    log_level: str = "INFO"


class HingeProblemConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["hinge"] = "hinge"
    dataset_path: str
    tau: Optional[float] = Field(default=None, gt=0)


class HardProblemConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    kind: Literal["hard"] = "hard"
    T: int = Field(default=1000, ge=2)
    c: float = Field(default=2.0, ge=1.0)


class MaxLinearProblemConfig(BaseModel):
    """
    Max-of-linear objective on an ℓ₂ ball.

    ``random`` draws Gaussian pieces and solves for the optimum; ``valley``
    builds the power-valley instance with f* = 0 (``pieces`` is ignored).
    """

    model_config = ConfigDict(extra="forbid")

    kind: Literal["maxlinear"] = "maxlinear"
    shape: Literal["random", "valley"] = "random"
    dimension: int = Field(default=10, ge=1)
    pieces: int = Field(default=20, ge=1)
    radius: float = Field(default=1.0, gt=0)
    instance_seed: int = 0


ProblemConfig = Annotated[
    Union[HingeProblemConfig, HardProblemConfig, MaxLinearProblemConfig],
    Field(discriminator="kind"),
]


class CheckName(str, Enum):
    REFORMULATION = "reformulation"
    LEMMA3 = "lemma3"
    RATE = "rate"
    FLOOR = "floor"


_CONSTANT_BETA = {OptimizerKind.HB_CONST, OptimizerKind.ADAHB_CONST}
_FIXED_HORIZON = {OptimizerKind.PSG, OptimizerKind.HB_CONST, OptimizerKind.ADAHB_CONST}


class RunConfig(BaseModel):
    model_config = ConfigDict(extra="forbid")

    problem: ProblemConfig
    optimizer: OptimizerKind
    alpha: float = Field(gt=0)
    beta: float = Field(default=0.0, ge=0.0, lt=1.0)
    gamma: float = Field(default=0.1, gt=0.0, le=1.0)
    delta: float = Field(default=1e-8, gt=0.0)
    iterations: int = Field(default=1000, ge=1)
    batch: int = Field(default=0, ge=0)
    seed: int = 0
    repeats: int = Field(default=5, ge=1)
    trace: Optional[str] = None
    checks: List[CheckName] = Field(default_factory=list)
    schedule_epoch_size: int = Field(default=1, ge=1)
    fixed_horizon: bool = False
    fstar: Optional[float] = None
    fstar_budget: int = Field(default=10_000, ge=10_000)
    label: Optional[str] = None

    @model_validator(mode="after")
    def _check_combinations(self) -> "RunConfig":
        if self.beta != 0.0 and self.optimizer not in _CONSTANT_BETA:
            raise ValueError(f"beta applies to hb_const and adahb_const only, not {self.optimizer.value}")
        if self.fixed_horizon and self.optimizer not in _FIXED_HORIZON:
            raise ValueError("fixed horizon step sizes apply to psg, hb_const and adahb_const only")
        per_step_checks = {CheckName.REFORMULATION, CheckName.LEMMA3} & set(self.checks)
        if per_step_checks and self.schedule_epoch_size != 1:
            raise ValueError(
                f"checks {sorted(c.value for c in per_step_checks)} need --schedule-epoch-size 1"
            )
        if CheckName.LEMMA3 in self.checks and not self.optimizer.adaptive:
            raise ValueError("the lemma3 check applies to adaptive optimizers only")
        if CheckName.FLOOR in self.checks and self.problem.kind != "hard":
            raise ValueError("the floor check applies to the hard problem only")
        if self.batch and self.problem.kind != "hinge":
            raise ValueError("mini-batches are only available for the hinge problem")
        return self

    @property
    def display_label(self) -> str:
        return self.label or self.optimizer.value

    @property
    def seeds(self) -> List[int]:
        """Mini-batch runs repeat over consecutive seeds; exact runs are deterministic."""
        if self.batch == 0:
            return [self.seed]
        return list(range(self.seed, self.seed + self.repeats))


def validate_run(data: dict) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(str(exc)) from None


def load_config_file(path: Union[str, Path]) -> List[RunConfig]:
    """
    Read a JSON manifest: one RunConfig, ``{"runs": [...]}``, or a saved summary.

    Raises:
        ConfigError: If the file is missing, not JSON, or fails validation
    """
    path = Path(path)
    try:
        with path.open("r", encoding="utf-8") as handle:
            data = json.load(handle)
    except OSError as exc:
        raise ConfigError(f"cannot read config {path}: {exc}") from None
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config {path} is not valid JSON: {exc}") from None

    if isinstance(data, dict) and "runs" in data:
        entries = data["runs"]
        if not isinstance(entries, list):
            raise ConfigError(f"config {path}: 'runs' must be a list")
    elif isinstance(data, dict) and "config" in data:
        entries = [data["config"]]
    else:
        entries = [data]
    return [validate_run(entry) for entry in entries]
