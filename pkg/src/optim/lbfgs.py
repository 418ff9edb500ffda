"""
L-BFGS
Limited-memory BFGS with a strong-Wolfe line search (bracketing plus cubic
zoom), for the refinement phase after Adam.
"""

from collections import deque
from dataclasses import dataclass
from typing import Deque, Optional, Tuple
import logging
import math
import time

import numpy as np

from .report import LbfgsConfig, LossFn, TrainReport, trace_stride


logger = logging.getLogger("optim.lbfgs")


@dataclass
class _Trial:
    t: float
    f: float
    g: Optional[np.ndarray]
    gtd: float


@dataclass
class LineSearchResult:
    success: bool
    t: float
    f: float
    g: Optional[np.ndarray]
    evaluations: int


def two_loop(grad: np.ndarray, s_hist: Deque[np.ndarray], y_hist: Deque[np.ndarray]) -> np.ndarray:
    """Apply the L-BFGS inverse-Hessian approximation to grad."""
    q = grad.copy()
    if not s_hist:
        return q
    rhos = [1.0 / float(y @ s) for s, y in zip(s_hist, y_hist)]
    alphas = []
    for s, y, rho in reversed(list(zip(s_hist, y_hist, rhos))):
        alpha = rho * float(s @ q)
        q -= alpha * y
        alphas.append(alpha)
    s_last, y_last = s_hist[-1], y_hist[-1]
    gamma = float(s_last @ y_last) / float(y_last @ y_last)
    r = gamma * q
    for (s, y, rho), alpha in zip(zip(s_hist, y_hist, rhos), reversed(alphas)):
        beta = rho * float(y @ r)
        r += (alpha - beta) * s
    return r


def _cubic_minimizer(a: _Trial, b: _Trial, lo: float, hi: float) -> float:
    """Minimizer of the cubic through two (t, f, f') samples, clipped to [lo, hi]."""
    mid = 0.5 * (lo + hi)
    values = (a.t, a.f, a.gtd, b.t, b.f, b.gtd)
    if not all(math.isfinite(v) for v in values) or a.t == b.t:
        return mid
    d1 = a.gtd + b.gtd - 3.0 * (a.f - b.f) / (a.t - b.t)
    disc = d1 * d1 - a.gtd * b.gtd
    if disc < 0:
        return mid
    d2 = math.sqrt(disc)
    if a.t <= b.t:
        denom = b.gtd - a.gtd + 2.0 * d2
        t = b.t - (b.t - a.t) * ((b.gtd + d2 - d1) / denom) if denom != 0 else mid
    else:
        denom = a.gtd - b.gtd + 2.0 * d2
        t = a.t - (a.t - b.t) * ((a.gtd + d2 - d1) / denom) if denom != 0 else mid
    if not math.isfinite(t):
        return mid
    return min(max(t, lo), hi)


def strong_wolfe_search(
    loss_fn: LossFn,
    x: np.ndarray,
    f0: float,
    g0: np.ndarray,
    direction: np.ndarray,
    t_init: float,
    cfg: LbfgsConfig,
) -> LineSearchResult:
    """
    Find t satisfying the strong Wolfe conditions along direction.

    Sufficient decrease: f(x + t d) <= f0 + c1 t g0.d
    Curvature:           |g(x + t d).d| <= c2 |g0.d|
    Non-finite trial losses count as failed sufficient decrease.
    """
    gtd0 = float(g0 @ direction)
    evals = 0

    def probe(t: float) -> _Trial:
        nonlocal evals
        f, g = loss_fn(x + t * direction)
        evals += 1
        if not np.isfinite(f) or not np.all(np.isfinite(g)):
            return _Trial(t, math.inf, None, math.nan)
        return _Trial(t, float(f), g, float(g @ direction))

    def armijo_fails(trial: _Trial, previous: _Trial) -> bool:
        return trial.f > f0 + cfg.c1 * trial.t * gtd0 or (evals > 1 and trial.f >= previous.f)

    def curvature_holds(trial: _Trial) -> bool:
        return abs(trial.gtd) <= -cfg.c2 * gtd0

    def zoom(lo: _Trial, hi: _Trial) -> LineSearchResult:
        while evals < cfg.max_line_search:
            left, right = min(lo.t, hi.t), max(lo.t, hi.t)
            if right - left <= 1e-16 * max(1.0, right):
                break
            t = _cubic_minimizer(lo, hi, left, right)
            # keep trials away from the bracket ends
            margin = 0.1 * (right - left)
            if t - left < margin or right - t < margin:
                t = 0.5 * (left + right)
            trial = probe(t)
            if trial.f > f0 + cfg.c1 * t * gtd0 or trial.f >= lo.f:
                hi = trial
                continue
            if curvature_holds(trial):
                return LineSearchResult(True, trial.t, trial.f, trial.g, evals)
            if trial.gtd * (hi.t - lo.t) >= 0:
                hi = lo
            lo = trial
        return LineSearchResult(False, lo.t, lo.f, lo.g, evals)

    previous = _Trial(0.0, f0, g0, gtd0)
    t = t_init
    while evals < cfg.max_line_search:
        trial = probe(t)
        if armijo_fails(trial, previous):
            return zoom(previous, trial)
        if curvature_holds(trial):
            return LineSearchResult(True, trial.t, trial.f, trial.g, evals)
        if trial.gtd >= 0:
            return zoom(trial, previous)
        t_next = _cubic_minimizer(previous, trial, t + 0.01 * (t - previous.t), 10.0 * t)
        previous, t = trial, t_next
    return LineSearchResult(False, 0.0, f0, g0, evals)


def lbfgs_run(loss_fn: LossFn, params: np.ndarray, cfg: LbfgsConfig) -> Tuple[np.ndarray, TrainReport]:
    """
    Minimize loss_fn with L-BFGS.

    Args:
        loss_fn: Maps a parameter vector to (loss, gradient)
        params: Starting point (not modified)
        cfg: History size, line-search constants and stopping tolerances

    Returns:
        Tuple of (final parameters, TrainReport)
    """
    report = TrainReport(phase="lbfgs", settings=cfg.model_dump())
    start = time.perf_counter()
    x = np.array(params, dtype=np.float64, copy=True)
    f, g = loss_fn(x)
    report.evaluations = 1
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        logger.error("L-BFGS: non-finite loss at the initial point")
        report.diverged = True
        report.stop_reason = "non-finite initial loss"
        report.wall_seconds = time.perf_counter() - start
        return x, report
    f = float(f)
    report.loss_trace.append(f)

    s_hist: Deque[np.ndarray] = deque(maxlen=cfg.history_size)
    y_hist: Deque[np.ndarray] = deque(maxlen=cfg.history_size)
    stride = trace_stride(cfg.iterations, cfg.trace_points)
    failures = 0
    report.stop_reason = "iteration budget"

    for it in range(cfg.iterations):
        g_norm = float(np.linalg.norm(g))
        if g_norm < cfg.gradient_tolerance:
            report.stop_reason = "gradient tolerance"
            break

        direction = -two_loop(g, s_hist, y_hist)
        if float(g @ direction) >= 0:
            s_hist.clear()
            y_hist.clear()
            direction = -g
        if s_hist:
            t_init = cfg.lr0
        else:
            t_init = min(1.0, 1.0 / max(float(np.abs(g).sum()), 1e-300)) * cfg.lr0

        search = strong_wolfe_search(loss_fn, x, f, g, direction, t_init, cfg)
        report.evaluations += search.evaluations

        if search.success:
            failures = 0
            s = search.t * direction
            y = search.g - g
            if float(s @ y) > cfg.curvature_floor:
                s_hist.append(s)
                y_hist.append(y)
            x = x + s
            f, g = search.f, search.g
        else:
            failures += 1
            if failures >= 2:
                report.stop_reason = "line search failed twice"
                logger.warning(f"L-BFGS: line search failed twice in a row at iteration {it + 1}")
                break
            logger.warning(
                f"L-BFGS: line search failed at iteration {it + 1}; "
                f"taking a bounded steepest-descent step and resetting history"
            )
            x_try = x - cfg.fallback_lr * g / max(1.0, g_norm)
            f_try, g_try = loss_fn(x_try)
            report.evaluations += 1
            if np.isfinite(f_try) and np.all(np.isfinite(g_try)) and f_try <= f:
                x, f, g = x_try, float(f_try), g_try
            s_hist.clear()
            y_hist.clear()

        report.iterations = it + 1
        if (it + 1) % stride == 0:
            report.loss_trace.append(f)
            logger.debug(f"L-BFGS iteration {it + 1}/{cfg.iterations}: loss={f:.6e} |g|={g_norm:.3e}")

    if not report.loss_trace or report.loss_trace[-1] != f:
        report.loss_trace.append(f)
    report.final_loss = f
    report.wall_seconds = time.perf_counter() - start
    logger.info(
        f"L-BFGS finished ({report.stop_reason}): {report.iterations} iterations, "
        f"loss={f:.6e}, {report.wall_seconds:.2f}s"
    )
    return x, report
