"""
Training Reports and Optimizer Settings
"""

from dataclasses import dataclass, field
from typing import Any, Callable, Dict, List, Tuple

import numpy as np
from pydantic import BaseModel, ConfigDict, Field


LossFn = Callable[[np.ndarray], Tuple[float, np.ndarray]]


class AdamConfig(BaseModel):
    model_config = ConfigDict(frozen=True)

    iterations: int = Field(20000, ge=0)
    lr0: float = Field(1e-3, gt=0, allow_inf_nan=False)
    beta1: float = Field(0.9, ge=0, lt=1)
    beta2: float = Field(0.999, ge=0, lt=1)
    epsilon: float = Field(1e-8, gt=0)
    cosine_annealing: bool = True
    trace_points: int = Field(200, ge=1)


class LbfgsConfig(BaseModel):
    """
    L-BFGS settings.

    lr0 is the initial trial step of every line search. While the curvature
    history is empty (the first iteration and after each reset) the trial step
    is min(1, 1/||g||_1) * lr0 along -g, so the first move has length at most lr0.
    """

    model_config = ConfigDict(frozen=True)

    iterations: int = Field(400, ge=0)
    lr0: float = Field(1.0, gt=0, allow_inf_nan=False)
    history_size: int = Field(10, ge=1)
    c1: float = Field(1e-4, gt=0, lt=1)
    c2: float = Field(0.9, gt=0, lt=1)
    max_line_search: int = Field(25, ge=1)
    gradient_tolerance: float = Field(1e-12, ge=0)
    curvature_floor: float = Field(1e-10, ge=0)
    fallback_lr: float = Field(1e-3, gt=0)
    trace_points: int = Field(200, ge=1)


@dataclass
class TrainReport:
    """
    Outcome of one optimizer phase (or of a whole pipeline, via merge).

    settings records every optimizer constant used, so reports stay
    interpretable on their own.
    """

    phase: str
    loss_trace: List[float] = field(default_factory=list)
    final_loss: float = float("nan")
    wall_seconds: float = 0.0
    iterations: int = 0
    evaluations: int = 0
    diverged: bool = False
    stop_reason: str = ""
    settings: Dict[str, Any] = field(default_factory=dict)

    @staticmethod
    def merge(reports: List["TrainReport"]) -> "TrainReport":
        merged = TrainReport(phase="+".join(r.phase for r in reports))
        for r in reports:
            merged.loss_trace.extend(r.loss_trace)
            merged.wall_seconds += r.wall_seconds
            merged.iterations += r.iterations
            merged.evaluations += r.evaluations
            merged.diverged = merged.diverged or r.diverged
            merged.settings[r.phase] = r.settings
        last = [r for r in reports if np.isfinite(r.final_loss)]
        if last:
            merged.final_loss = last[-1].final_loss
        merged.stop_reason = reports[-1].stop_reason if reports else ""
        return merged


def trace_stride(iterations: int, trace_points: int) -> int:
    return max(1, iterations // trace_points)
