"""
Command Line Interface
Loads configuration, sets up logging and dispatches the experiment commands.
"""

from pathlib import Path
from typing import Any, Dict, List, Optional
import logging
import os

import pandas as pd

from src.errors import ConfigurationError
from src.evaluation import ExperimentEvaluator, run_check_suite
from src.harness.config import (
    ExperimentConfig,
    ExperimentKind,
    build_experiment_config,
    experiment_section,
    load_config_file,
)
from src.harness.experiment import BASIS_INFO_COLUMNS, basis_info_rows


COMMAND_KINDS = {
    "regress": [
        ExperimentKind.LEGENDRE_RECOVERY,
        ExperimentKind.NONSMOOTH,
        ExperimentKind.HIGHDIM,
        ExperimentKind.CSV_REGRESSION,
    ],
    "pde": [ExperimentKind.PDE_POISSON, ExperimentKind.PDE_ALLENCAHN],
    "basis-info": [ExperimentKind.BASIS_INFO],
}

EXIT_OK = 0
EXIT_ALL_DIVERGED = 3
EXIT_CHECK_FAILED = 4


class CLI:
    """
    Command-line front end for the experiment harness.

    Configuration comes from a YAML file with a `logging` section and an
    `experiment` section; command-line flags override the latter.
    """

    def __init__(self, config_path: Optional[str] = None):
        """
        Initialize CLI.

        Args:
            config_path: Path to configuration file (PANN_CONFIG, then
                config.yaml, when not given)
        """
        self.config_path = config_path or os.getenv("PANN_CONFIG", "config.yaml")
        self.config: Dict[str, Any] = {}
        path = Path(self.config_path)
        if path.exists() or config_path:
            self.config = load_config_file(path)

        self._setup_logging()
        self.logger = logging.getLogger("ui.cli")
        self.logger.info(f"Configuration loaded from {path if path.exists() else 'defaults'}")

    def _setup_logging(self):
        """Setup logging configuration."""
        log_config = self.config.get("logging", {}) or {}
        log_level = os.getenv("PANN_LOG_LEVEL") or log_config.get("level", "INFO")
        log_format = log_config.get(
            "format",
            "%(asctime)s - %(name)s - %(levelname)s - %(message)s"
        )
        level = getattr(logging, str(log_level).upper(), None)
        if not isinstance(level, int):
            raise ConfigurationError(f"Unknown log level: {log_level}")

        handlers: List[logging.Handler] = [logging.StreamHandler()]
        if log_config.get("file"):
            Path(log_config["file"]).parent.mkdir(parents=True, exist_ok=True)
            handlers.append(logging.FileHandler(log_config["file"]))

        logging.basicConfig(level=level, format=log_format, handlers=handlers, force=True)

    def experiment_config(self, command: str, overrides: Dict[str, Any]) -> ExperimentConfig:
        """
        Resolve the experiment configuration for a command.

        The file's experiment kind is kept when it belongs to the command,
        otherwise the command's first kind is used. An explicit flag that
        names a kind from another command is an error.
        """
        file_values = experiment_section(self.config)
        allowed = COMMAND_KINDS[command]
        allowed_values = [k.value for k in allowed]

        flagged = overrides.get("experiment")
        if flagged is not None and ExperimentKind(flagged) not in allowed:
            raise ConfigurationError(
                f"'{command}' runs {', '.join(allowed_values)}; got --experiment {flagged}"
            )
        if file_values.get("experiment") not in allowed_values:
            file_values["experiment"] = allowed[0].value
        return build_experiment_config(file_values, overrides)

    def run_experiment(self, cfg: ExperimentConfig) -> int:
        """Run a regression or PDE experiment and print its summary."""
        self._print_banner(f"{cfg.experiment.value.upper()} ({cfg.model.value})")
        evaluator = ExperimentEvaluator(cfg)
        report = evaluator.evaluate()
        self._display_report(report)
        if report["summary"]["all_diverged"]:
            self.logger.error("Training diverged in every trial")
            return EXIT_ALL_DIVERGED
        return EXIT_OK

    def run_basis_info(self, out: Optional[str] = None) -> int:
        """Print basis-size tables; write them as CSV when out is given."""
        rows = basis_info_rows()
        frame = pd.DataFrame(rows, columns=BASIS_INFO_COLUMNS)

        self._print_banner("BASIS SIZES")
        cardinality = frame[frame["table"] == "cardinality"]
        print(cardinality.pivot(index="d", columns="kind", values="m").to_string())
        for table in frame["table"].unique():
            if table == "cardinality":
                continue
            print("\n" + "-" * 70)
            print(f"Degree schedule: {table}")
            print("-" * 70)
            print(frame[frame["table"] == table][["c", "N", "ell", "m"]].to_string(index=False))

        if out:
            Path(out).parent.mkdir(parents=True, exist_ok=True)
            frame.to_csv(out, index=False, lineterminator="\n")
            self.logger.info(f"Basis tables saved to {out}")
        return EXIT_OK

    def run_check(self) -> int:
        """Run the invariant suite; exit code 4 when anything fails."""
        results = run_check_suite(verbose=True)
        failed = [r.name for r in results if not r.passed]
        if failed:
            self.logger.error(f"{len(failed)} invariant check(s) failed: {', '.join(failed)}")
            return EXIT_CHECK_FAILED
        return EXIT_OK

    def _print_banner(self, title: str):
        print("=" * 70)
        print(f"  {title}")
        print("=" * 70)

    def _display_report(self, report: Dict[str, Any]):
        """Display per-trial rows and the aggregate statistics."""
        print("\n" + "=" * 70)
        print("RESULTS")
        print("=" * 70)

        for row in report["rows"]:
            print(
                f"  trial {row['trial']}: rel_l2={row['rel_l2']:.4e}  "
                f"N={row['N']} ell={row['ell']} m={row['m']}  "
                f"truncated {row['pct_nn_trunc']:.1f}/{row['pct_poly_trunc']:.1f} (%NN/%PL)"
            )

        summary = report["summary"]
        print("\n" + "-" * 70)
        print(f"  mean rel_l2: {report['mean']['rel_l2']:.4e} +/- {report['std']['rel_l2']:.4e}")
        print(f"  runs: {summary['successful']}/{summary['total_runs']} succeeded", end="")
        print(f" ({summary['diverged']} diverged)" if summary["failed"] else "")
        if report.get("csv_path"):
            print(f"  report: {report['csv_path']}")
            print(f"  summary: {report['summary_path']}")
        print("=" * 70 + "\n")
