"""
Experiment Configuration
One flat pydantic record whose field names double as CLI flag names, plus the
YAML loader that merges defaults, a config file and command-line overrides.
"""

from enum import Enum
from pathlib import Path
from typing import Any, Dict, List, Optional, Tuple, Union
import hashlib
import json

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator

from src.errors import ConfigurationError
from src.model import ConstraintKind, L1Scope, LossConfig
from src.network import Activation, ActivationKind, MlpConfig
from src.optim import AdamConfig, LbfgsConfig
from src.polybasis import BasisKind, BasisSpec, degree_schedule
from .sampling import BoundaryMode, SamplingMode


class ExperimentKind(str, Enum):
    LEGENDRE_RECOVERY = "legendre-recovery"
    NONSMOOTH = "nonsmooth"
    HIGHDIM = "highdim"
    CSV_REGRESSION = "csv-regression"
    PDE_POISSON = "pde-poisson"
    PDE_ALLENCAHN = "pde-allencahn"
    BASIS_INFO = "basis-info"

    @property
    def is_pde(self) -> bool:
        return self in (ExperimentKind.PDE_POISSON, ExperimentKind.PDE_ALLENCAHN)

    @property
    def is_regression(self) -> bool:
        return self in (
            ExperimentKind.LEGENDRE_RECOVERY,
            ExperimentKind.NONSMOOTH,
            ExperimentKind.HIGHDIM,
            ExperimentKind.CSV_REGRESSION,
        )


class ModelFamily(str, Enum):
    PANN = "pann"
    PL = "pl"
    DNN = "dnn"
    L2 = "l2"


class ExperimentConfig(BaseModel):
    """
    Everything one experiment needs.

    Optimizer, loss and network records are derived from the flat fields by
    the *_config() helpers.
    """

    model_config = ConfigDict(frozen=True, extra="forbid")

    experiment: ExperimentKind = ExperimentKind.LEGENDRE_RECOVERY
    model: ModelFamily = ModelFamily.PANN
    n_points: int = Field(4096, ge=1)
    dim: int = Field(2, ge=1)
    sampling: SamplingMode = SamplingMode.UNIFORM
    boundary_sampling: BoundaryMode = BoundaryMode.EQUISPACED
    boundary_per_edge: int = Field(100, ge=1)

    # polynomial degree: explicit, or from the schedule
    degree: Optional[int] = Field(None, ge=0)
    degree_c: float = Field(0.001, gt=0)
    degree_offset: int = Field(8, ge=0)
    degree_doubled: bool = True
    basis: BasisKind = BasisKind.TOTAL_DEGREE

    hidden_widths: List[int] = Field(default_factory=lambda: [100, 100, 100])
    activation: ActivationKind = ActivationKind.TANH
    repu_power: int = Field(3, ge=2)

    constraint: ConstraintKind = ConstraintKind.CG
    lambda_r: float = Field(1e-5, ge=0)
    lambda_c: float = Field(1e-3, ge=0)
    lambda_pde: float = Field(1.0, ge=0)
    preconditioned: bool = True
    truncation_threshold: float = Field(1e-4, ge=0)
    l1_scope: L1Scope = L1Scope.ALL

    adam_iterations: int = Field(20000, ge=0)
    adam_lr: float = Field(1e-3, gt=0)
    cosine_annealing: bool = True
    lbfgs_iterations: int = Field(400, ge=0)
    lbfgs_lr: float = Field(1.0, gt=0)
    lbfgs_history: int = Field(10, ge=1)

    seed: int = Field(0, ge=0)
    trials: int = Field(5, ge=1)
    csv_path: Optional[str] = None
    target_column: str = "MedHouseVal"
    folds: int = Field(4, ge=2)
    quadrature_points: Optional[int] = Field(None, ge=1)
    eval_batch: int = Field(8192, ge=1)

    out: Optional[str] = None
    save_model: Optional[str] = None
    report_timing: bool = False

    @field_validator("hidden_widths")
    @classmethod
    def _positive_widths(cls, widths: List[int]) -> List[int]:
        if any(w < 1 for w in widths):
            raise ValueError(f"hidden widths must be >= 1, got {widths}")
        return widths

    # -- derived records ----------------------------------------------------

    @property
    def input_dim(self) -> int:
        if self.experiment in (ExperimentKind.HIGHDIM, ExperimentKind.CSV_REGRESSION):
            return self.dim
        return 2

    def polynomial_degree(self, n_points: int) -> int:
        if self.degree is not None:
            return self.degree
        return degree_schedule(n_points, self.degree_c, self.degree_offset, self.degree_doubled)

    def basis_spec(self, dim: int, n_points: int) -> BasisSpec:
        return BasisSpec(self.basis, dim, self.polynomial_degree(n_points))

    def mlp_config(self, dim: int) -> MlpConfig:
        widths: Tuple[int, ...] = () if self.model is ModelFamily.PL else tuple(self.hidden_widths)
        return MlpConfig(dim, widths, Activation(self.activation, self.repu_power))

    def loss_config(self) -> LossConfig:
        constraint = self.constraint
        # a constraint needs both a network and a polynomial layer
        if self.model in (ModelFamily.PL, ModelFamily.DNN) and constraint.has_penalty:
            constraint = ConstraintKind.L1_ONLY
        return LossConfig(
            lambda_r=self.lambda_r,
            lambda_c=self.lambda_c,
            lambda_pde=self.lambda_pde,
            preconditioned=self.preconditioned,
            constraint=constraint,
            truncation_threshold=self.truncation_threshold,
            l1_scope=self.l1_scope,
        )

    def adam_config(self) -> AdamConfig:
        return AdamConfig(
            iterations=self.adam_iterations,
            lr0=self.adam_lr,
            cosine_annealing=self.cosine_annealing,
        )

    def lbfgs_config(self) -> LbfgsConfig:
        return LbfgsConfig(
            iterations=self.lbfgs_iterations,
            lr0=self.lbfgs_lr,
            history_size=self.lbfgs_history,
        )

    def digest(self) -> str:
        """sha256 of the canonical JSON form; output paths and timing excluded."""
        record = self.model_dump(mode="json", exclude={"out", "save_model", "report_timing"})
        canonical = json.dumps(record, sort_keys=True, separators=(",", ":"))
        return hashlib.sha256(canonical.encode("utf-8")).hexdigest()

    def as_header(self) -> List[Tuple[str, Any]]:
        """(key, value) pairs for every field, in declaration order."""
        return list(self.model_dump(mode="json").items())


def experiment_section(raw: Dict[str, Any]) -> Dict[str, Any]:
    """Accept either flat keys or an 'experiment:' mapping."""
    if isinstance(raw.get("experiment"), dict):
        return dict(raw["experiment"])
    return {k: v for k, v in raw.items() if k != "logging"}


def _normalize_keys(values: Dict[str, Any]) -> Dict[str, Any]:
    return {str(k).replace("-", "_"): v for k, v in values.items()}


def build_experiment_config(
    file_values: Optional[Dict[str, Any]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    """
    Merge defaults < file values < overrides into an ExperimentConfig.

    Raises:
        ConfigurationError: on unknown keys or invalid values
    """
    merged: Dict[str, Any] = {}
    merged.update(_normalize_keys(file_values or {}))
    merged.update({k: v for k, v in _normalize_keys(overrides or {}).items() if v is not None})
    try:
        return ExperimentConfig(**merged)
    except ValidationError as e:
        raise ConfigurationError(f"Invalid experiment configuration:\n{e}") from e


def load_config_file(path: Union[str, Path]) -> Dict[str, Any]:
    """Read a YAML config file; returns {} for an empty file."""
    path = Path(path)
    if not path.exists():
        raise ConfigurationError(f"Config file not found: {path}")
    with open(path, "r") as f:
        try:
            raw = yaml.safe_load(f) or {}
        except yaml.YAMLError as e:
            raise ConfigurationError(f"Could not parse {path}: {e}") from e
    if not isinstance(raw, dict):
        raise ConfigurationError(f"{path} must contain a mapping at the top level")
    return raw


def load_experiment_config(
    path: Optional[Union[str, Path]] = None,
    overrides: Optional[Dict[str, Any]] = None,
) -> ExperimentConfig:
    file_values = experiment_section(load_config_file(path)) if path else {}
    return build_experiment_config(file_values, overrides)
