"""
Experiment Evaluator
Runs every trial of an experiment, aggregates the rows and writes reports.

Example usage:
    cfg = load_experiment_config("config.yaml", {"trials": 1})
    evaluator = ExperimentEvaluator(cfg)
    report = evaluator.evaluate()

    # CSV and summary are written next to cfg.out (or under outputs/)
"""

from pathlib import Path
from typing import Any, Dict, List, Optional
import logging
import math

import numpy as np
import pandas as pd

from src.errors import TrainingDivergence
from src.harness.config import ExperimentConfig
from src.harness.experiment import (
    REPORT_COLUMNS,
    ExperimentRunner,
    TrialOutcome,
    failed_row,
)
from src.model import save_checkpoint


NUMERIC_COLUMNS = ["rel_l2", "wall_s", "pct_nn_trunc", "pct_poly_trunc", "final_loss"]


class ExperimentEvaluator:
    """
    Evaluates one experiment configuration over all of its trials.

    A trial that diverges (or fails numerically) becomes a NaN row and the
    run moves on; configuration and data errors propagate.
    """

    def __init__(self, cfg: ExperimentConfig, runner: Optional[ExperimentRunner] = None):
        self.cfg = cfg
        self.runner = runner or ExperimentRunner(cfg)
        self.logger = logging.getLogger("evaluation.evaluator")

        self.results: List[Dict[str, Any]] = []
        self.outcomes: List[TrialOutcome] = []
        self.failures: List[Dict[str, Any]] = []

        self.logger.info(
            f"ExperimentEvaluator initialized ({cfg.experiment.value}, model={cfg.model.value}, "
            f"{self.runner.n_runs} runs, digest {cfg.digest()[:12]})"
        )

    def evaluate(self, save: bool = True) -> Dict[str, Any]:
        """
        Run all trials and build the report.

        Args:
            save: Write the CSV report and summary sidecar

        Returns:
            Report dictionary with rows, aggregate statistics and output paths
        """
        n_runs = self.runner.n_runs
        self.logger.info(f"Starting {self.cfg.experiment.value} with {n_runs} runs")

        for trial in range(n_runs):
            self.logger.info(f"Running trial {trial + 1}/{n_runs}")
            try:
                outcome = self.runner.run_trial(trial)
                self.outcomes.append(outcome)
                self.results.append(outcome.row)
            except TrainingDivergence as e:
                self.logger.error(f"Trial {trial} diverged: {e}")
                self.failures.append({"trial": trial, "error": str(e), "diverged": True})
                self.results.append(failed_row(self.cfg, trial))
            except (ArithmeticError, np.linalg.LinAlgError) as e:
                self.logger.error(f"Trial {trial} failed: {e}")
                self.failures.append({"trial": trial, "error": str(e), "diverged": False})
                self.results.append(failed_row(self.cfg, trial))

        report = self._generate_report()

        if save:
            self._save_results(report)
        if self.cfg.save_model:
            self._save_model()

        return report

    def _generate_report(self) -> Dict[str, Any]:
        """Aggregate rows into mean/std statistics and failure counts."""
        frame = pd.DataFrame(self.results, columns=REPORT_COLUMNS)
        values = frame[NUMERIC_COLUMNS].astype(float)
        mean, std = {}, {}
        for column in NUMERIC_COLUMNS:
            finite = values[column].to_numpy()
            finite = finite[np.isfinite(finite)]
            mean[column] = float(finite.mean()) if finite.size else math.nan
            std[column] = float(finite.std()) if finite.size else math.nan

        diverged = sum(1 for f in self.failures if f["diverged"])
        total = len(self.results)
        return {
            "experiment": self.cfg.experiment.value,
            "digest": self.cfg.digest(),
            "rows": self.results,
            "summary": {
                "total_runs": total,
                "successful": total - len(self.failures),
                "failed": len(self.failures),
                "diverged": diverged,
                "all_diverged": total > 0 and diverged == total,
            },
            "mean": mean,
            "std": std,
            "failures": self.failures,
        }

    def output_path(self) -> Path:
        if self.cfg.out:
            return Path(self.cfg.out)
        return Path("outputs") / f"{self.cfg.experiment.value}_{self.cfg.digest()[:12]}.csv"

    def _save_results(self, report: Dict[str, Any]):
        """
        Write the CSV report and a plain-text summary next to it.

        The CSV starts with '#' lines holding every config field and the
        config digest, then one row per trial and the mean/std rows.
        """
        csv_path = self.output_path()
        csv_path.parent.mkdir(parents=True, exist_ok=True)

        rows = [dict(r) for r in self.results]
        for label in ("mean", "std"):
            stats = report[label]
            row = {column: "" for column in REPORT_COLUMNS}
            row.update(experiment=self.cfg.experiment.value, trial=label, **stats)
            rows.append(row)
        frame = pd.DataFrame(rows, columns=REPORT_COLUMNS)
        if not self.cfg.report_timing:
            frame["wall_s"] = ""

        with open(csv_path, "w", newline="") as f:
            for key, value in self.cfg.as_header():
                f.write(f"# {key}={value}\n")
            f.write(f"# digest={report['digest']}\n")
            frame.to_csv(f, index=False, na_rep="nan", lineterminator="\n")
        report["csv_path"] = str(csv_path)
        self.logger.info(f"Report saved to {csv_path}")

        summary_file = csv_path.with_suffix(".summary.txt")
        with open(summary_file, "w") as f:
            f.write("EXPERIMENT SUMMARY\n")
            f.write("=" * 70 + "\n\n")
            f.write(f"Experiment: {self.cfg.experiment.value} (model={self.cfg.model.value})\n")
            f.write(f"Config digest: {report['digest']}\n\n")

            summary = report["summary"]
            f.write(f"Total runs: {summary['total_runs']}\n")
            f.write(f"Successful: {summary['successful']}\n")
            f.write(f"Failed: {summary['failed']} ({summary['diverged']} diverged)\n\n")

            f.write("Relative l2 error:\n")
            f.write(f"  mean: {report['mean']['rel_l2']:.6e}\n")
            f.write(f"  std:  {report['std']['rel_l2']:.6e}\n\n")

            f.write("Per-run:\n")
            for row in self.results:
                f.write(
                    f"  trial {row['trial']}: rel_l2={row['rel_l2']:.6e} "
                    f"wall={row['wall_s']:.2f}s truncated={row['pct_nn_trunc']:.1f}/"
                    f"{row['pct_poly_trunc']:.1f} (%NN/%PL)\n"
                )
            for outcome in self.outcomes:
                if outcome.model is not None and 0 < len(outcome.surviving_poly_indices) <= 20:
                    f.write(
                        f"  trial {outcome.row['trial']} surviving polynomial terms: "
                        f"{outcome.surviving_poly_indices}\n"
                    )
            for failure in self.failures:
                f.write(f"  trial {failure['trial']} error: {failure['error']}\n")

        report["summary_path"] = str(summary_file)
        self.logger.info(f"Summary saved to {summary_file}")

    def _save_model(self):
        trained = [o for o in self.outcomes if o.model is not None]
        if not trained:
            self.logger.warning("No trained model to save")
            return
        save_checkpoint(trained[-1].model, self.cfg.save_model)
