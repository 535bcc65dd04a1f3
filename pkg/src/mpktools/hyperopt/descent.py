"""Gradient descent with an adaptive step size.

A candidate ``x - step * grad`` is accepted when the loss does not increase,
after which the step grows by ``grow``; otherwise the step is multiplied by
``shrink`` and the candidate discarded. The run converges once ``patience``
consecutive accepted steps each change the loss by at most ``tol``
(relative); it also ends when the step underflows or after ``max_iters``
candidate evaluations.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass, field
from typing import Callable, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import DataError, NumericalError, OptimizationError

logger = logging.getLogger(__name__)


@dataclass
class OptimizerConfig:
    max_iters: int = 5000
    tol: float = 1e-6
    initial_step: float = 1e-2
    grow: float = 1.2
    shrink: float = 0.5
    min_step: float = 1e-14
    fix_noise: bool = False
    patience: int = 30

    def __post_init__(self):
        if int(self.max_iters) < 0:
            raise ValueError(f"max_iters must be >= 0, got {self.max_iters}")
        if not self.tol >= 0:
            raise ValueError(f"tol must be >= 0, got {self.tol}")
        if not self.initial_step > 0:
            raise ValueError(f"initial_step must be positive, got {self.initial_step}")
        if not self.grow >= 1:
            raise ValueError(f"grow must be >= 1, got {self.grow}")
        if not 0 < self.shrink < 1:
            raise ValueError(f"shrink must be in (0, 1), got {self.shrink}")
        if int(self.patience) < 1:
            raise ValueError(f"patience must be >= 1, got {self.patience}")
        self.max_iters = int(self.max_iters)
        self.patience = int(self.patience)

    def to_dict(self) -> dict:
        return asdict(self)

    @classmethod
    def from_dict(cls, doc: Mapping) -> "OptimizerConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown optimizer options: {sorted(unknown)}")
        return cls(**doc)


@dataclass
class OptimizerReport:
    iterations: int
    final_loss: float
    loss_trace: List[float]
    final_step_size: float
    converged: bool
    objective: str = ""
    error: Optional[str] = None
    accepted: int = field(init=False)

    def __post_init__(self):
        self.accepted = len(self.loss_trace) - 1

    def to_dict(self) -> dict:
        return {
            "objective": self.objective,
            "iterations": self.iterations,
            "accepted": self.accepted,
            "final_loss": self.final_loss,
            "final_step_size": self.final_step_size,
            "converged": self.converged,
            "error": self.error,
            "loss_trace": list(self.loss_trace),
        }


def gradient_descent(
    loss: Callable[[np.ndarray], float],
    grad: Callable[[np.ndarray], np.ndarray],
    x0,
    config: Optional[OptimizerConfig] = None,
    frozen: Sequence[int] = (),
    name: str = "",
) -> Tuple[np.ndarray, OptimizerReport]:
    """Minimize ``loss`` from ``x0``; coordinates in ``frozen`` never move."""
    config = config or OptimizerConfig()
    frozen = list(frozen)

    def masked_grad(x):
        g = np.array(grad(x), dtype=np.float64)
        g[frozen] = 0.0
        return g

    x = np.array(x0, dtype=np.float64)
    try:
        f = float(loss(x))
        g = masked_grad(x)
    except NumericalError as exc:
        raise OptimizationError(f"objective failed at the initial point: {exc}") from exc
    if not np.isfinite(f) or not np.all(np.isfinite(g)):
        raise OptimizationError("objective or gradient is not finite at the initial point")

    trace = [f]
    step = float(config.initial_step)
    converged = False
    error = None
    iterations = 0
    flat = 0
    while iterations < config.max_iters:
        if not np.any(g):
            converged = True
            break
        iterations += 1
        candidate = x - step * g
        try:
            f_new = float(loss(candidate))
        except NumericalError as exc:
            error = str(exc)
            logger.warning("%s: objective failed at iteration %d: %s", name or "descent", iterations, exc)
            break
        if not np.isfinite(f_new) or f_new > f:
            step *= config.shrink
            if step < config.min_step:
                logger.info("%s: step size underflow after %d iterations", name or "descent", iterations)
                break
            continue
        change = abs(f - f_new)
        x, f = candidate, f_new
        trace.append(f)
        step *= config.grow
        logger.debug("%s: iter %d loss %.10g step %.3g", name or "descent", iterations, f, step)
        flat = flat + 1 if change <= config.tol * max(abs(trace[-2]), np.finfo(float).tiny) else 0
        if flat >= config.patience:
            converged = True
            break
        try:
            g = masked_grad(x)
        except NumericalError as exc:
            error = str(exc)
            logger.warning("%s: gradient failed at iteration %d: %s", name or "descent", iterations, exc)
            break
        if not np.all(np.isfinite(g)):
            error = "gradient is not finite"
            logger.warning("%s: non-finite gradient at iteration %d", name or "descent", iterations)
            break

    report = OptimizerReport(
        iterations=iterations,
        final_loss=f,
        loss_trace=trace,
        final_step_size=step,
        converged=converged,
        objective=name,
        error=error,
    )
    logger.info(
        "%s: %d iterations, loss %.6g -> %.6g, converged=%s",
        name or "descent",
        iterations,
        trace[0],
        f,
        converged,
    )
    return x, report


__all__ = ["OptimizerConfig", "OptimizerReport", "gradient_descent"]
