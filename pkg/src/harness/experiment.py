"""
Experiment Runner
Builds data, basis and model for one trial (or CV fold), trains it through
the Adam/L-BFGS pipeline and measures the held-out relative error.
"""

from dataclasses import dataclass, field
from typing import Any, Dict, List, Optional, Tuple
import logging
import math
import time

import numpy as np

from src.errors import ConfigurationError, DataError, TrainingDivergence, UnsupportedOperation
from src.model import PannModel
from src.optim import TrainReport, pde_binding, regression_binding, train_pipeline
from src.pde import gauss_legendre_rule, l2_projection, make_problem, PdeKind
from src.polybasis import (
    BasisKind,
    BasisSpec,
    cardinality_formula,
    degree_schedule,
    MultiIndexSet,
    enumerate_indices,
)
from .config import ExperimentConfig, ExperimentKind, ModelFamily
from .datasets import Dataset, kfold_split, load_csv_dataset
from .metrics import relative_l2_error
from .sampling import boundary_points, evaluation_grid, sample_points
from .targets import TargetKind, synthetic_target


logger = logging.getLogger("harness.experiment")

MAX_BASIS_TERMS = 200_000

REPORT_COLUMNS = [
    "experiment",
    "trial",
    "N",
    "d",
    "ell",
    "m",
    "constraint",
    "activation",
    "preconditioned",
    "rel_l2",
    "wall_s",
    "pct_nn_trunc",
    "pct_poly_trunc",
    "final_loss",
]

_TARGETS = {
    ExperimentKind.LEGENDRE_RECOVERY: TargetKind.LEGENDRE10,
    ExperimentKind.NONSMOOTH: TargetKind.X2SIN1Y,
    ExperimentKind.HIGHDIM: TargetKind.HIGHDIM_SINEPROD,
}

_PROBLEMS = {
    ExperimentKind.PDE_POISSON: PdeKind.POISSON,
    ExperimentKind.PDE_ALLENCAHN: PdeKind.ALLEN_CAHN,
}


@dataclass
class TrialOutcome:
    """One report row plus the trained model behind it (None for projections)."""

    row: Dict[str, Any]
    model: Optional[PannModel] = None
    train_report: Optional[TrainReport] = None
    surviving_poly_indices: List[Tuple[int, ...]] = field(default_factory=list)


class ExperimentRunner:
    """
    Runs the trials of one ExperimentConfig.

    Each trial draws its randomness from SeedSequence([seed, trial]), spawned
    into independent streams for sampling and initialization. CSV experiments
    run one trial per cross-validation fold.
    """

    def __init__(self, cfg: ExperimentConfig):
        if cfg.experiment is ExperimentKind.BASIS_INFO:
            raise ConfigurationError("basis-info has no trials; use basis_info_rows()")
        self.cfg = cfg
        self._dataset: Optional[Dataset] = None
        self._splits: Optional[List[Tuple[np.ndarray, np.ndarray]]] = None
        self._validate()

    def _validate(self):
        cfg = self.cfg
        if cfg.experiment is ExperimentKind.CSV_REGRESSION and not cfg.csv_path:
            raise ConfigurationError("csv-regression needs csv_path")
        if cfg.model is ModelFamily.L2:
            if cfg.experiment is ExperimentKind.CSV_REGRESSION:
                raise UnsupportedOperation("L2 projection needs a target function, not a dataset")
            if cfg.input_dim > 3:
                raise UnsupportedOperation(
                    f"L2 projection uses tensor quadrature and is limited to d <= 3, got d={cfg.input_dim}"
                )

    @property
    def n_runs(self) -> int:
        if self.cfg.experiment is ExperimentKind.CSV_REGRESSION:
            return self.cfg.folds
        return self.cfg.trials

    @property
    def dataset(self) -> Dataset:
        if self._dataset is None:
            self._dataset = load_csv_dataset(self.cfg.csv_path, self.cfg.target_column)
            if self._dataset.n_rows < self.cfg.folds:
                raise DataError(
                    f"{self._dataset.n_rows} rows cannot fill {self.cfg.folds} folds"
                )
            self._splits = kfold_split(self._dataset.n_rows, self.cfg.folds, self.cfg.seed)
        return self._dataset

    def run_trial(self, trial: int) -> TrialOutcome:
        """
        Run one trial end to end.

        Raises:
            TrainingDivergence: the optimizer hit a non-finite loss
            DataError, ConfigurationError: unusable inputs
        """
        cfg = self.cfg
        start = time.perf_counter()
        sample_seed, init_seed = np.random.SeedSequence([cfg.seed, trial]).spawn(2)

        if cfg.experiment.is_pde:
            outcome = self._run_pde(trial, sample_seed, init_seed)
        else:
            outcome = self._run_regression(trial, sample_seed, init_seed)

        outcome.row["wall_s"] = time.perf_counter() - start
        logger.info(
            f"{cfg.experiment.value} trial {trial}: rel_l2={outcome.row['rel_l2']:.4e} "
            f"({outcome.row['wall_s']:.2f}s)"
        )
        return outcome

    # -- data ---------------------------------------------------------------

    def _regression_data(
        self, trial: int, sample_seed: np.random.SeedSequence
    ) -> Tuple[np.ndarray, np.ndarray, np.ndarray, np.ndarray]:
        cfg = self.cfg
        if cfg.experiment is ExperimentKind.CSV_REGRESSION:
            data = self.dataset
            train_idx, test_idx = self._splits[trial]
            return data.split(train_idx, test_idx)
        target = _TARGETS[cfg.experiment]
        d = cfg.input_dim
        guard = 1 if target is TargetKind.X2SIN1Y else None
        train = sample_points(cfg.n_points, d, cfg.sampling, sample_seed, avoid_zero_axis=guard)
        test = evaluation_grid(d, seed=cfg.seed)
        return train, synthetic_target(target, train), test, synthetic_target(target, test)

    # -- runs ---------------------------------------------------------------

    def _run_regression(self, trial, sample_seed, init_seed) -> TrialOutcome:
        cfg = self.cfg
        train_x, train_y, test_x, test_y = self._regression_data(trial, sample_seed)
        n, d = train_x.shape

        if cfg.model is ModelFamily.L2:
            target = _TARGETS[cfg.experiment]
            return self._run_projection(trial, n, d, lambda x: synthetic_target(target, x), test_x)

        model = self._build_model(n, d, init_seed)
        binding = regression_binding(model, train_x, train_y, cfg.loss_config())
        return self._train_and_score(trial, n, model, binding, test_x, test_y)

    def _run_pde(self, trial, sample_seed, init_seed) -> TrialOutcome:
        cfg = self.cfg
        problem = make_problem(_PROBLEMS[cfg.experiment])
        test_x = evaluation_grid(2, seed=cfg.seed)
        if cfg.model is ModelFamily.L2:
            return self._run_projection(trial, cfg.n_points, 2, problem.exact_solution, test_x)

        interior_seed, edge_seed = sample_seed.spawn(2)
        collocation = sample_points(cfg.n_points, 2, cfg.sampling, interior_seed)
        boundary = boundary_points(cfg.boundary_per_edge, cfg.boundary_sampling, edge_seed)
        model = self._build_model(cfg.n_points, 2, init_seed)
        binding = pde_binding(model, problem, boundary, collocation, cfg.loss_config())
        return self._train_and_score(
            trial, cfg.n_points, model, binding, test_x, problem.exact_solution(test_x)
        )

    def _basis(self, n_points: int, d: int) -> MultiIndexSet:
        spec = self.cfg.basis_spec(d, n_points)
        size = basis_cardinality(spec) if spec.kind is not BasisKind.HYPERBOLIC_CROSS else 0
        if size > MAX_BASIS_TERMS:
            raise ConfigurationError(
                f"{spec.kind.value} basis with d={d}, ell={spec.degree} has {size} terms "
                f"(limit {MAX_BASIS_TERMS}); set an explicit degree"
            )
        return enumerate_indices(spec)

    def _build_model(self, n_points: int, d: int, init_seed) -> PannModel:
        cfg = self.cfg
        basis = None
        if cfg.model is not ModelFamily.DNN:
            basis = self._basis(n_points, d)
            logger.info(
                f"Basis {basis.spec.kind.value} d={d} ell={basis.spec.degree}: {basis.cardinality} terms"
            )
        return PannModel.create(cfg.mlp_config(d), basis, init_seed)

    def _train_and_score(self, trial, n_points, model, binding, test_x, test_y) -> TrialOutcome:
        cfg = self.cfg
        model, report, truncation = train_pipeline(
            binding, cfg.adam_config(), cfg.lbfgs_config(), cfg.truncation_threshold
        )
        if report.diverged:
            raise TrainingDivergence(
                f"Trial {trial} diverged after {report.iterations} iterations ({report.stop_reason})"
            )
        pred = model.evaluate(test_x, batch_size=cfg.eval_batch)
        row = self._row(
            trial,
            n_points,
            model.dim,
            model.basis.spec.degree if model.basis is not None else "",
            model.n_basis,
            relative_l2_error(pred, test_y),
        )
        row.update(
            pct_nn_trunc=truncation.pct_nn_truncated,
            pct_poly_trunc=truncation.pct_poly_truncated,
            final_loss=report.final_loss,
        )
        return TrialOutcome(row, model, report, truncation.surviving_poly_indices)

    def _run_projection(self, trial, n_points, d, target, test_x) -> TrialOutcome:
        cfg = self.cfg
        basis = self._basis(n_points, d)
        per_dim = cfg.quadrature_points or max(1, math.ceil(round(n_points ** (1.0 / d), 9)))
        rule = gauss_legendre_rule(per_dim, d)
        result = l2_projection(target, basis, rule, cfg.preconditioned, test_points=test_x)
        row = self._row(trial, rule.n_nodes, d, basis.spec.degree, basis.cardinality, result.relative_error)
        row.update(pct_nn_trunc=0.0, pct_poly_trunc=0.0, final_loss=float("nan"))
        return TrialOutcome(row)

    def _row(self, trial, n_points, d, ell, m, rel_l2) -> Dict[str, Any]:
        cfg = self.cfg
        has_network = cfg.model in (ModelFamily.PANN, ModelFamily.DNN)
        return {
            "experiment": cfg.experiment.value,
            "trial": trial,
            "N": n_points,
            "d": d,
            "ell": ell,
            "m": m,
            "constraint": cfg.loss_config().constraint.value if cfg.model is not ModelFamily.L2 else "",
            "activation": cfg.activation.value if has_network else "",
            "preconditioned": cfg.preconditioned,
            "rel_l2": rel_l2,
            "wall_s": 0.0,
        }


def failed_row(cfg: ExperimentConfig, trial: int) -> Dict[str, Any]:
    """Report row for a trial that raised: every measurement is NaN."""
    nan = float("nan")
    return {
        "experiment": cfg.experiment.value,
        "trial": trial,
        "N": cfg.n_points,
        "d": cfg.input_dim,
        "ell": "",
        "m": "",
        "constraint": cfg.loss_config().constraint.value if cfg.model is not ModelFamily.L2 else "",
        "activation": cfg.activation.value if cfg.model in (ModelFamily.PANN, ModelFamily.DNN) else "",
        "preconditioned": cfg.preconditioned,
        "rel_l2": nan,
        "wall_s": nan,
        "pct_nn_trunc": nan,
        "pct_poly_trunc": nan,
        "final_loss": nan,
    }


# -- basis-info -------------------------------------------------------------

BASIS_INFO_COLUMNS = ["table", "kind", "d", "N", "c", "ell", "m"]

_SCHEDULES = [
    # (table, c values, N values, offset, doubled)
    ("legendre-recovery", (0.001, 0.002, 0.003), (256, 1024, 4096, 16384), 8, True),
    ("nonsmooth", (0.001, 0.002, 0.003), (256, 1024, 4096, 16384), 8, False),
    ("pde", (0.003, 0.004), (64, 256, 1024, 4096), 8, True),
]


def basis_cardinality(spec: BasisSpec) -> int:
    if spec.kind is BasisKind.HYPERBOLIC_CROSS:
        return enumerate_indices(spec).cardinality
    return cardinality_formula(spec)


def basis_info_rows(cardinality_degree: int = 8, max_dim: int = 6) -> List[Dict[str, Any]]:
    """
    Basis-size tables: cardinality of each index-set family for d = 1..max_dim,
    then the (N, c) -> (ell, m) degree schedules used by the experiments
    (two-dimensional total-degree bases).
    """
    rows = []
    for kind in BasisKind:
        for d in range(1, max_dim + 1):
            spec = BasisSpec(kind, d, cardinality_degree)
            rows.append(
                {"table": "cardinality", "kind": kind.value, "d": d, "N": "", "c": "",
                 "ell": cardinality_degree, "m": basis_cardinality(spec)}
            )
    for table, cs, ns, offset, doubled in _SCHEDULES:
        for c in cs:
            for n in ns:
                ell = degree_schedule(n, c, offset, doubled)
                spec = BasisSpec(BasisKind.TOTAL_DEGREE, 2, ell)
                rows.append(
                    {"table": table, "kind": spec.kind.value, "d": 2, "N": n, "c": c,
                     "ell": ell, "m": cardinality_formula(spec)}
                )
    return rows
