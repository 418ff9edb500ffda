"""
Adam
Bias-corrected Adam with optional cosine learning-rate annealing, on any
loss-with-gradient callable over a flat parameter vector.
"""

from typing import Tuple
import logging
import math
import time

import numpy as np

from .report import AdamConfig, LossFn, TrainReport, trace_stride


logger = logging.getLogger("optim.adam")


def cosine_lr(lr0: float, step: int, total: int) -> float:
    """lr0 * (1 + cos(pi * step / total)) / 2; lr0 at step 0, zero at step total."""
    if total <= 0:
        return lr0
    return lr0 * 0.5 * (1.0 + math.cos(math.pi * step / total))


def _finite(loss: float, grad: np.ndarray) -> bool:
    return bool(np.isfinite(loss)) and bool(np.all(np.isfinite(grad)))


def adam_run(loss_fn: LossFn, params: np.ndarray, cfg: AdamConfig) -> Tuple[np.ndarray, TrainReport]:
    """
    Minimize loss_fn with Adam.

    Args:
        loss_fn: Maps a parameter vector to (loss, gradient)
        params: Starting point (not modified)
        cfg: Iteration budget, learning rate and moment constants

    Returns:
        Tuple of (final parameters, TrainReport). On a non-finite loss the run
        stops and the last finite parameters are returned with diverged=True.
    """
    report = TrainReport(phase="adam", settings=cfg.model_dump())
    start = time.perf_counter()
    theta = np.array(params, dtype=np.float64, copy=True)
    loss, grad = loss_fn(theta)
    report.evaluations = 1
    if not _finite(loss, grad):
        logger.error("Adam: non-finite loss at the initial point")
        report.diverged = True
        report.stop_reason = "non-finite initial loss"
        report.wall_seconds = time.perf_counter() - start
        return theta, report
    report.loss_trace.append(float(loss))

    m = np.zeros_like(theta)
    v = np.zeros_like(theta)
    stride = trace_stride(cfg.iterations, cfg.trace_points)
    last_good, last_loss = theta.copy(), float(loss)
    report.stop_reason = "iteration budget"
    for k in range(cfg.iterations):
        lr = cosine_lr(cfg.lr0, k, cfg.iterations) if cfg.cosine_annealing else cfg.lr0
        m = cfg.beta1 * m + (1.0 - cfg.beta1) * grad
        v = cfg.beta2 * v + (1.0 - cfg.beta2) * grad * grad
        m_hat = m / (1.0 - cfg.beta1 ** (k + 1))
        v_hat = v / (1.0 - cfg.beta2 ** (k + 1))
        theta = theta - lr * m_hat / (np.sqrt(v_hat) + cfg.epsilon)

        loss, grad = loss_fn(theta)
        report.evaluations += 1
        report.iterations = k + 1
        if not _finite(loss, grad):
            logger.error(f"Adam diverged at iteration {k + 1}; keeping last finite parameters")
            report.diverged = True
            report.stop_reason = "non-finite loss"
            theta = last_good
            break
        last_good, last_loss = theta.copy(), float(loss)
        if (k + 1) % stride == 0 or k + 1 == cfg.iterations:
            report.loss_trace.append(last_loss)
            logger.debug(f"Adam iteration {k + 1}/{cfg.iterations}: loss={last_loss:.6e} lr={lr:.3e}")

    report.final_loss = last_loss
    report.wall_seconds = time.perf_counter() - start
    logger.info(
        f"Adam finished: {report.iterations} iterations, loss={report.final_loss:.6e}, "
        f"{report.wall_seconds:.2f}s"
    )
    return theta, report
