"""NARX regressors, one-step-ahead prediction and free-run simulation.

A NARX regressor at time k stacks the current and past inputs with past
outputs::

    [u_k, u_{k-1}, ..., u_{k-m}, z_{k-1}, ..., z_{k-n_y}]

with target z_k. ``n_y`` defaults to m; ``n_y = 0`` gives plain Volterra
windows. Rows start at k = max(m, n_y), the first sample with a full history.
"""
from __future__ import annotations

import logging
from dataclasses import asdict, dataclass
from typing import Mapping, Optional, Tuple

import numpy as np

from ..errors import DataError, DimensionError, MpkError
from ..regnet import FittedNetwork, predict
from ..volterra import Dataset, fit_percent, rmse

logger = logging.getLogger(__name__)


@dataclass
class NarxConfig:
    memory: int = 5
    output_lags: Optional[int] = None
    train_size: int = 200
    partitions: int = 5
    partition_size: int = 100
    columns: Tuple[int, int] = (0, 1)

    def __post_init__(self):
        self.memory = int(self.memory)
        if self.memory < 1:
            raise ValueError(f"memory must be >= 1, got {self.memory}")
        if self.output_lags is not None:
            self.output_lags = int(self.output_lags)
            if self.output_lags < 0:
                raise ValueError(f"output_lags must be >= 0, got {self.output_lags}")
        if self.train_size <= 2 * self.memory:
            raise ValueError(f"train_size must exceed 2*memory={2 * self.memory}, got {self.train_size}")
        if not 0 < self.partition_size < self.train_size:
            raise ValueError(
                f"partition_size must be in (0, train_size={self.train_size}), got {self.partition_size}"
            )
        if self.partitions < 1:
            raise ValueError(f"partitions must be >= 1, got {self.partitions}")
        self.columns = tuple(int(c) for c in self.columns)

    @property
    def lags(self) -> int:
        return self.memory if self.output_lags is None else self.output_lags

    @property
    def start(self) -> int:
        return max(self.memory, self.lags)

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["columns"] = list(self.columns)
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "NarxConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown narx options: {sorted(unknown)}")
        return cls(**doc)


def _signals(u, z) -> Tuple[np.ndarray, np.ndarray]:
    u = np.asarray(u, dtype=np.float64).ravel()
    z = np.asarray(z, dtype=np.float64).ravel()
    if u.shape != z.shape:
        raise DimensionError(f"input has {u.shape[0]} samples, output has {z.shape[0]}")
    return u, z


def _structure(memory: int, output_lags: Optional[int]) -> Tuple[int, int, int]:
    if memory < 0:
        raise ValueError(f"memory must be non-negative, got {memory}")
    n_y = memory if output_lags is None else int(output_lags)
    if n_y < 0:
        raise ValueError(f"output_lags must be non-negative, got {n_y}")
    return memory, n_y, max(memory, n_y)


def narx_regressors(u, z, memory: int, output_lags: Optional[int] = None) -> np.ndarray:
    """The regressor matrix only; row i belongs to time k = start + i."""
    u, z = _signals(u, z)
    m, n_y, start = _structure(memory, output_lags)
    n = u.shape[0]
    if n <= start:
        raise DimensionError(f"signals have {n} samples, need more than {start}")
    k = np.arange(start, n)
    u_lags = u[k[:, None] - np.arange(m + 1)]
    z_lags = z[k[:, None] - np.arange(1, n_y + 1)]
    return np.hstack([u_lags, z_lags])


def build_narx_dataset(u, z, memory: int, output_lags: Optional[int] = None) -> Dataset:
    """NARX dataset: regressors for every k >= start with targets z_k."""
    u, z = _signals(u, z)
    X = narx_regressors(u, z, memory, output_lags)
    start = u.shape[0] - X.shape[0]
    return Dataset(X, z[start:])


def model_structure(model: FittedNetwork) -> Tuple[int, int]:
    """(memory, output_lags) recorded in a fitted model's metadata."""
    try:
        memory = int(model.metadata["memory"])
    except KeyError:
        raise DataError("model metadata does not record the regressor memory") from None
    n_y = int(model.metadata.get("output_lags", memory))
    if memory + 1 + n_y != model.input_dim:
        raise DimensionError(
            f"memory {memory} and {n_y} output lags give {memory + 1 + n_y} regressors, "
            f"model expects {model.input_dim}"
        )
    return memory, n_y


def one_step_predict(model: FittedNetwork, u, z) -> np.ndarray:
    """One-step-ahead predictions from measured signals, for k >= start."""
    memory, n_y = model_structure(model)
    return predict(model, narx_regressors(u, z, memory, n_y))


def free_run_simulate(model: FittedNetwork, u, z_init) -> np.ndarray:
    """Simulate the model from measured seeds, feeding back its own predictions.

    ``z_init`` holds the first ``start`` measured outputs, which are copied to
    the result. If a prediction is not finite the simulation stops there and
    the returned vector is shorter than ``u``.
    """
    memory, n_y = model_structure(model)
    start = max(memory, n_y)
    u = np.asarray(u, dtype=np.float64).ravel()
    z_init = np.asarray(z_init, dtype=np.float64).ravel()
    if z_init.shape[0] < start:
        raise DimensionError(f"need {start} initial outputs, got {z_init.shape[0]}")
    n = u.shape[0]
    if n < start:
        raise DimensionError(f"input has {n} samples, need at least {start}")
    zhat = np.empty(n)
    zhat[:start] = z_init[:start]
    row = np.empty(memory + 1 + n_y)
    for k in range(start, n):
        row[: memory + 1] = u[k - memory : k + 1][::-1]
        row[memory + 1 :] = zhat[k - n_y : k][::-1]
        try:
            value = predict(model, row)[0]
        except MpkError as exc:
            logger.warning("free-run simulation failed at sample %d: %s", k, exc)
            return zhat[:k]
        if not np.isfinite(value):
            logger.warning("free-run simulation diverged at sample %d", k)
            return zhat[:k]
        zhat[k] = value
    return zhat


@dataclass(frozen=True)
class SimulationScore:
    fit: float
    rmse: float
    diverged: bool
    length: int

    def to_dict(self) -> dict:
        return asdict(self)


def score_simulation(z, zhat, start: int = 0) -> SimulationScore:
    """Fit% and RMSE of a free-run output from sample ``start`` on.

    A truncated (diverged) simulation scores Fit% = -inf and RMSE = inf.
    """
    z = np.asarray(z, dtype=np.float64).ravel()
    zhat = np.asarray(zhat, dtype=np.float64).ravel()
    if zhat.shape[0] < z.shape[0]:
        return SimulationScore(-np.inf, np.inf, True, zhat.shape[0])
    return SimulationScore(fit_percent(z[start:], zhat[start:]), rmse(z[start:], zhat[start:]), False, z.shape[0])


__all__ = [
    "NarxConfig",
    "narx_regressors",
    "build_narx_dataset",
    "model_structure",
    "one_step_predict",
    "free_run_simulate",
    "SimulationScore",
    "score_simulation",
]
