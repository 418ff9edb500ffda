"""
Harness Tests
Sampling, targets, metrics, CSV ingestion, configuration, the experiment
evaluator and the command-line entry point.
"""

import math
from pathlib import Path

import numpy as np
import pandas as pd
import pytest
from hypothesis import given, settings, strategies as st
from hypothesis.extra.numpy import arrays

from main import main
from src.errors import ConfigurationError, DataError, TrainingDivergence, UnsupportedOperation
from src.evaluation import ExperimentEvaluator
from src.harness import (
    BoundaryMode,
    SamplingMode,
    TargetKind,
    boundary_points,
    evaluation_grid,
    kfold_split,
    load_csv_dataset,
    relative_l2_error,
    sample_points,
    synthetic_target,
)
from src.harness.config import (
    ExperimentConfig,
    ExperimentKind,
    ModelFamily,
    build_experiment_config,
    load_experiment_config,
)
from src.harness.datasets import FeatureScaling
from src.harness.experiment import (
    BASIS_INFO_COLUMNS,
    REPORT_COLUMNS,
    ExperimentRunner,
    basis_info_rows,
    failed_row,
)
from src.model import ConstraintKind
from src.polybasis import cardinality_formula


def _tiny(**overrides) -> ExperimentConfig:
    values = dict(
        n_points=64,
        degree=4,
        hidden_widths=[4],
        adam_iterations=20,
        lbfgs_iterations=5,
        trials=2,
    )
    values.update(overrides)
    return build_experiment_config({}, values)


# -- metrics ------------------------------------------------------------------


def test_relative_error_examples():
    assert relative_l2_error([1.0, 2.0], [1.0, 2.0]) == 0.0
    assert relative_l2_error([0.0, 0.0], [3.0, 4.0]) == pytest.approx(1.0)
    assert relative_l2_error([3.0, 0.0], [3.0, 4.0]) == pytest.approx(0.8)


def test_relative_error_rejects_bad_input():
    with pytest.raises(DataError):
        relative_l2_error([1.0], [1.0, 2.0])
    with pytest.raises(DataError):
        relative_l2_error([1.0, 2.0], [0.0, 0.0])


# -- sampling -----------------------------------------------------------------


@pytest.mark.parametrize("mode", [SamplingMode.UNIFORM, SamplingMode.POISSON_DISK])
def test_random_sampling_is_seeded_and_in_domain(mode):
    a = sample_points(500, 2, mode, seed=4)
    b = sample_points(500, 2, mode, seed=4)
    assert a.shape == (500, 2)
    assert np.array_equal(a, b)
    assert np.all(np.abs(a) <= 1.0)
    assert not np.array_equal(a, sample_points(500, 2, mode, seed=5))


def test_poisson_disk_spacing():
    points = sample_points(256, 2, SamplingMode.POISSON_DISK, seed=1)
    gaps = np.linalg.norm(points[:, None, :] - points[None, :, :], axis=-1)
    np.fill_diagonal(gaps, np.inf)
    assert gaps.min() >= 0.7 / 16 - 1e-12


def test_equispaced_sampling():
    line = sample_points(5, 1, SamplingMode.EQUISPACED)
    assert np.allclose(line[:, 0], [-1.0, -0.5, 0.0, 0.5, 1.0])
    grid = sample_points(256, 2, SamplingMode.EQUISPACED)
    assert grid.shape == (256, 2)
    assert len(np.unique(grid[:, 0])) == 16
    assert sample_points(10, 2, SamplingMode.EQUISPACED).shape == (10, 2)
    with pytest.raises(UnsupportedOperation):
        sample_points(27, 3, SamplingMode.EQUISPACED)
    with pytest.raises(UnsupportedOperation):
        sample_points(10, 3, SamplingMode.POISSON_DISK)


def test_sampling_rejects_empty_requests():
    with pytest.raises(ConfigurationError):
        sample_points(0, 2)


def test_boundary_points():
    points = boundary_points(100)
    assert points.shape == (400, 2)
    assert np.all(np.isclose(np.abs(points), 1.0).any(axis=1))
    corners = [(-1.0, -1.0), (1.0, -1.0), (1.0, 1.0), (-1.0, 1.0)]
    as_tuples = [tuple(p) for p in points]
    for corner in corners:
        assert as_tuples.count(corner) == 1
    assert len(set(as_tuples)) == 400

    random_edge = boundary_points(50, BoundaryMode.RANDOM, seed=3)
    assert random_edge.shape == (200, 2)
    assert np.array_equal(random_edge, boundary_points(50, BoundaryMode.RANDOM, seed=3))


def test_evaluation_grids():
    assert evaluation_grid(1).shape == (1024, 1)
    grid = evaluation_grid(2)
    assert grid.shape == (65536, 2)
    assert not np.any(grid[:, 1] == 0.0)
    cloud = evaluation_grid(5, seed=2)
    assert cloud.shape == (20000, 5)
    assert np.array_equal(cloud, evaluation_grid(5, seed=2))


# -- targets ------------------------------------------------------------------


def test_targets():
    points = np.array([[1.0, 1.0], [0.5, 0.0], [0.0, 0.5]])
    assert synthetic_target(TargetKind.LEGENDRE10, points)[0] == pytest.approx(1.0)
    nonsmooth = synthetic_target(TargetKind.X2SIN1Y, points)
    assert nonsmooth[0] == pytest.approx(np.sin(1.0))
    assert nonsmooth[1] == 0.0 and nonsmooth[2] == 0.0

    highdim = synthetic_target(TargetKind.HIGHDIM_SINEPROD, np.array([[0.25, 0.5, 0.5]]))
    assert highdim[0] == pytest.approx(5 * np.pi**2)
    with pytest.raises(ConfigurationError):
        synthetic_target(TargetKind.LEGENDRE10, np.zeros((2, 3)))


# -- datasets -----------------------------------------------------------------


def _write(tmp_path, text, name="data.csv"):
    path = tmp_path / name
    path.write_text(text)
    return path


def test_csv_dataset_scaling(tmp_path):
    path = _write(tmp_path, "a,b,y\n0,10,2\n5,20,-4\n10,15,1\n")
    data = load_csv_dataset(path, "y")
    assert data.feature_names == ["a", "b"]
    assert np.allclose(data.points[:, 0], [-1.0, 0.0, 1.0])
    assert np.allclose(data.points[:, 1], [-1.0, 1.0, 0.0])
    assert data.target_scale == 4.0
    assert np.allclose(data.targets, [0.5, -1.0, 0.25])
    assert np.allclose(data.scaling.unscale(data.points), [[0, 10], [5, 20], [10, 15]])


@pytest.mark.parametrize(
    "text, message",
    [
        ("", "empty"),
        ("a,y\n", "no rows"),
        ("a,b\n1,2\n", "Target column"),
        ("a,y\n1,2\nx,3\n4,\n", "line(s) 3, 4"),
        ("a,y\n1,2\n1,3\n", "Zero-range"),
        ("y\n1\n2\n", "no feature columns"),
    ],
)
def test_csv_dataset_errors(tmp_path, text, message):
    path = _write(tmp_path, text)
    with pytest.raises(DataError, match=message.replace("(", r"\(").replace(")", r"\)")):
        load_csv_dataset(path, "y")


def test_csv_dataset_missing_file(tmp_path):
    with pytest.raises(DataError):
        load_csv_dataset(tmp_path / "nope.csv", "y")


def test_dataset_split_uses_training_statistics(tmp_path):
    data = load_csv_dataset(_write(tmp_path, "a,y\n0,1\n10,-2\n20,4\n40,8\n"), "y")
    train_x, train_y, test_x, test_y = data.split(np.array([0, 1, 2]), np.array([3]))
    assert np.allclose(train_x[:, 0], [-1.0, 0.0, 1.0])
    assert np.allclose(train_y, [0.25, -0.5, 1.0])
    # the held-out row is scaled with training statistics, so it extrapolates
    assert np.allclose(test_x[:, 0], [3.0])
    assert np.allclose(test_y, [2.0])
    assert np.allclose(data.points[:, 0], [-1.0, -0.5, 0.0, 1.0])


def test_dataset_split_rejects_constant_training_feature(tmp_path):
    data = load_csv_dataset(_write(tmp_path, "a,y\n1,1\n1,2\n3,3\n"), "y")
    with pytest.raises(DataError, match="Zero-range"):
        data.split(np.array([0, 1]), np.array([2]))


@settings(max_examples=50, deadline=None)
@given(
    arrays(
        np.float64,
        st.tuples(st.integers(2, 20), st.integers(1, 4)),
        elements=st.floats(-1e6, 1e6, allow_nan=False),
    )
)
def test_feature_scaling_round_trip(features):
    span = features.max(axis=0) - features.min(axis=0)
    if np.any(span == 0.0):
        with pytest.raises(DataError):
            FeatureScaling.fit(features)
        return
    scaling = FeatureScaling.fit(features)
    scaled = scaling.scale(features)
    assert np.all(scaled >= -1.0 - 1e-12) and np.all(scaled <= 1.0 + 1e-12)
    assert np.allclose(scaling.unscale(scaled), features, rtol=1e-9, atol=1e-6)


@settings(max_examples=50, deadline=None)
@given(n=st.integers(2, 300), k=st.integers(2, 10), seed=st.integers(0, 1000))
def test_kfold_partitions_rows(n, k, seed):
    if n < k:
        with pytest.raises(ConfigurationError):
            kfold_split(n, k, seed)
        return
    splits = kfold_split(n, k, seed)
    tests = np.concatenate([test for _, test in splits])
    assert np.array_equal(np.sort(tests), np.arange(n))
    sizes = [len(test) for _, test in splits]
    assert max(sizes) - min(sizes) <= 1
    for train, test in splits:
        assert len(np.intersect1d(train, test)) == 0
        assert len(train) + len(test) == n


def test_kfold_housing_sizes():
    splits = kfold_split(20640, 4, 0)
    assert [len(test) for _, test in splits] == [5160] * 4
    with pytest.raises(ConfigurationError):
        kfold_split(10, 1, 0)


# -- configuration ------------------------------------------------------------


def test_config_precedence(tmp_path):
    path = _write(
        tmp_path,
        "logging:\n  level: WARNING\nexperiment:\n  n-points: 512\n  degree: 6\n  constraint: cg\n",
        "config.yaml",
    )
    cfg = load_experiment_config(path, {"degree": 9, "trials": None})
    assert cfg.n_points == 512
    assert cfg.degree == 9
    assert cfg.trials == 5
    assert cfg.constraint is ConstraintKind.CG


def test_config_flat_file(tmp_path):
    path = _write(tmp_path, "experiment: nonsmooth\nn_points: 100\n", "flat.yaml")
    cfg = load_experiment_config(path)
    assert cfg.experiment is ExperimentKind.NONSMOOTH
    assert cfg.n_points == 100


@pytest.mark.parametrize(
    "values",
    [{"bogus": 1}, {"n_points": 0}, {"hidden_widths": [4, 0]}, {"constraint": "zz"}, {"repu_power": 1}],
)
def test_config_rejects_invalid_values(values):
    with pytest.raises(ConfigurationError):
        build_experiment_config(values)


def test_config_file_errors(tmp_path):
    with pytest.raises(ConfigurationError):
        load_experiment_config(tmp_path / "missing.yaml")
    with pytest.raises(ConfigurationError):
        load_experiment_config(_write(tmp_path, "- just\n- a list\n", "list.yaml"))


def test_config_digest():
    base = _tiny()
    assert base.digest() == _tiny().digest()
    assert base.digest() == _tiny(out="elsewhere.csv", report_timing=True).digest()
    assert base.digest() != _tiny(seed=1).digest()
    assert len(base.digest()) == 64


def test_degree_schedule_from_config():
    cfg = build_experiment_config(
        {"n_points": 4096, "degree_c": 0.001, "degree_offset": 8, "degree_doubled": True}
    )
    assert cfg.polynomial_degree(4096) == 26
    assert cfg.basis_spec(2, 4096).degree == 26


def test_defaults_match_shipped_config():
    defaults = ExperimentConfig()
    assert defaults.n_points == 4096
    assert defaults.polynomial_degree(defaults.n_points) == 26
    assert cardinality_formula(defaults.basis_spec(2, defaults.n_points)) == 378
    assert defaults.constraint is ConstraintKind.CG
    shipped = load_experiment_config(Path(__file__).parent / "config.yaml")
    assert shipped.model_dump() == defaults.model_dump()


def test_constraint_dropped_without_both_layers():
    assert _tiny(model="pl").loss_config().constraint is ConstraintKind.L1_ONLY
    assert _tiny(model="dnn").loss_config().constraint is ConstraintKind.L1_ONLY
    assert _tiny(model="pann").loss_config().constraint is ConstraintKind.CG
    assert _tiny(model="pl").mlp_config(2).hidden_widths == ()


# -- basis-info ---------------------------------------------------------------


def test_basis_info_rows():
    rows = basis_info_rows()
    assert all(set(row) == set(BASIS_INFO_COLUMNS) for row in rows)
    cardinality = {(r["kind"], r["d"]): r["m"] for r in rows if r["table"] == "cardinality"}
    assert cardinality[("total-degree", 2)] == 45
    assert cardinality[("hyperbolic-cross", 5)] == 111
    assert cardinality[("tensor-product", 3)] == 729
    cells = {(r["table"], r["c"], r["N"]): (r["ell"], r["m"]) for r in rows if r["table"] != "cardinality"}
    assert cells[("legendre-recovery", 0.001, 4096)] == (26, 378)
    assert cells[("nonsmooth", 0.003, 256)] == (9, 55)
    assert cells[("pde", 0.004, 4096)] == (50, 1326)


# -- runner and evaluator -----------------------------------------------------


def test_runner_validation():
    with pytest.raises(ConfigurationError):
        ExperimentRunner(_tiny(experiment="csv-regression"))
    with pytest.raises(UnsupportedOperation):
        ExperimentRunner(_tiny(experiment="highdim", dim=4, model="l2"))
    with pytest.raises(ConfigurationError):
        ExperimentRunner(_tiny(experiment="basis-info"))


def test_basis_size_cap():
    runner = ExperimentRunner(_tiny(experiment="highdim", dim=10, degree=None, degree_c=0.5))
    with pytest.raises(ConfigurationError, match="explicit degree"):
        runner.run_trial(0)


def test_evaluator_report_is_deterministic(tmp_path):
    out_a, out_b = tmp_path / "a.csv", tmp_path / "b.csv"
    report = ExperimentEvaluator(_tiny(out=str(out_a))).evaluate()
    ExperimentEvaluator(_tiny(out=str(out_b))).evaluate()

    lines_a = out_a.read_text().splitlines()
    lines_b = out_b.read_text().splitlines()
    assert [l for l in lines_a if not l.startswith("# out=")] == [
        l for l in lines_b if not l.startswith("# out=")
    ]
    assert lines_a[0].startswith("# experiment=legendre-recovery")
    assert any(l.startswith("# digest=") for l in lines_a)

    frame = pd.read_csv(out_a, comment="#")
    assert list(frame.columns) == REPORT_COLUMNS
    assert list(frame["trial"].astype(str)) == ["0", "1", "mean", "std"]
    assert frame["wall_s"].isna().all()
    assert np.isfinite(frame["rel_l2"]).all()
    assert report["summary"]["successful"] == 2
    assert (tmp_path / "a.summary.txt").exists()


def test_evaluator_l2_projection(tmp_path):
    cfg = _tiny(model="l2", degree=20, n_points=1024, out=str(tmp_path / "l2.csv"))
    report = ExperimentEvaluator(cfg).evaluate()
    assert report["rows"][0]["N"] == 1024
    assert report["rows"][0]["m"] == 231
    assert report["mean"]["rel_l2"] < 1e-10


def test_evaluator_saves_model(tmp_path):
    cfg = _tiny(trials=1, save_model=str(tmp_path / "model.json"))
    ExperimentEvaluator(cfg).evaluate(save=False)
    assert (tmp_path / "model.json").exists()


class _DivergingRunner:
    n_runs = 3

    def __init__(self, diverge=(0, 1, 2)):
        self.diverge = diverge

    def run_trial(self, trial):
        raise TrainingDivergence(f"trial {trial} blew up")


def test_evaluator_records_divergence(tmp_path):
    cfg = _tiny(out=str(tmp_path / "div.csv"))
    report = ExperimentEvaluator(cfg, runner=_DivergingRunner()).evaluate()
    assert report["summary"]["all_diverged"]
    assert report["summary"]["diverged"] == 3
    assert all(math.isnan(row["rel_l2"]) for row in report["rows"])
    assert math.isnan(report["mean"]["rel_l2"])
    assert "nan" in (tmp_path / "div.csv").read_text()


def test_failed_row_matches_columns():
    assert list(failed_row(_tiny(), 4)) == REPORT_COLUMNS


# -- command line -------------------------------------------------------------


@pytest.fixture
def quiet_config(tmp_path):
    return str(_write(tmp_path, "logging:\n  level: WARNING\n", "quiet.yaml"))


def test_main_basis_info(tmp_path, quiet_config):
    out = tmp_path / "basis.csv"
    assert main(["--config", quiet_config, "basis-info", "--out", str(out)]) == 0
    assert out.read_text().splitlines()[0] == ",".join(BASIS_INFO_COLUMNS)


def test_main_check(quiet_config):
    assert main(["--config", quiet_config, "check"]) == 0


def test_main_regress(tmp_path, quiet_config):
    out = tmp_path / "run.csv"
    argv = [
        "--config", quiet_config, "regress",
        "--n-points", "64", "--degree", "4", "--hidden-widths", "4",
        "--adam-iterations", "10", "--lbfgs-iterations", "2", "--trials", "1",
        "--no-preconditioned", "--out", str(out),
    ]
    assert main(argv) == 0
    assert "# preconditioned=False" in out.read_text()


def test_main_configuration_errors(tmp_path, quiet_config):
    assert main(["--config", str(tmp_path / "missing.yaml"), "check"]) == 1
    bad = _write(tmp_path, "experiment:\n  bogus: 1\n", "bad.yaml")
    assert main(["--config", str(bad), "regress"]) == 1
    assert main(["--config", quiet_config, "pde", "--experiment", "nonsmooth"]) == 1


def test_main_data_error(tmp_path, quiet_config):
    argv = ["--config", quiet_config, "regress", "--experiment", "csv-regression",
            "--csv-path", str(tmp_path / "absent.csv")]
    assert main(argv) == 2


HOUSING_CSV = Path(__file__).parent / "data" / "housing.csv"


@pytest.mark.slow
@pytest.mark.skipif(not HOUSING_CSV.exists(), reason="housing table is user-supplied, see data/housing_schema.md")
def test_housing_cross_validation(tmp_path):
    cfg = build_experiment_config(
        {},
        dict(
            experiment="csv-regression",
            csv_path=str(HOUSING_CSV),
            dim=8,
            degree=4,
            activation="relu",
            constraint="ce",
            out=str(tmp_path / "housing.csv"),
        ),
    )
    report = ExperimentEvaluator(cfg).evaluate()
    assert len(report["rows"]) == 4
    assert all(row["N"] == 15480 for row in report["rows"])
    assert report["mean"]["rel_l2"] <= 0.23
