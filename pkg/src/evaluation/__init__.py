"""
Evaluation Module
Trial aggregation, CSV reporting and the numerical invariant suite.
"""

from .evaluator import ExperimentEvaluator
from .invariants import CheckResult, run_check_suite

__all__ = [
    "ExperimentEvaluator",
    "CheckResult",
    "run_check_suite",
]
