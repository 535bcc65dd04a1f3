"""mpktools.hyperopt: hyperparameter tuning for PK and MPK networks.

Two objectives are available, both with hand-derived exact gradients:

- the negative log marginal likelihood of the training outputs under the
  Gaussian process with covariance ``K + sigma_n^2 I``;
- the sum over cross-validation folds of the validation mean squared error
  of a network fitted on the fold's training split.

Hyperparameters travel as a flat `HyperParamVector`. Its layout is

    MPK: [raw_offsets (r), raw_increments (r*d, row major), raw_noise, (raw_gamma)]
    PK:  [raw_noise, (raw_gamma)]

with ``sigma_n = raw_noise^2``. The regularization scale gamma of the network
is sigma_n itself unless the vector was packed with a separate gamma, in which
case ``gamma = raw_gamma^2`` (cross validation only). When the dataset
normalization standardizes outputs, sigma_n and gamma are in standardized
units.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import DataError, DimensionError, FoldError, NumericalError
from ..kernels import KERNEL_KINDS, KernelParams, MpkParams, PkParams, build_cross, build_gram, mpk_gram_vjp
from ..regnet.linalg import SpdFactor, jitter_cholesky
from ..volterra import Dataset, make_rng
from .descent import OptimizerConfig, OptimizerReport, gradient_descent

logger = logging.getLogger(__name__)

LOG_2PI = float(np.log(2.0 * np.pi))


@dataclass(frozen=True, eq=False)
class HyperParamVector:
    """Flat raw hyperparameters of one kernel kind, with the noise and optional gamma coordinates."""

    kind: str
    degree: int
    input_dim: int
    values: np.ndarray
    decouple_gamma: bool = False

    def __post_init__(self):
        if self.kind not in KERNEL_KINDS:
            raise ValueError(f"kernel kind must be one of {KERNEL_KINDS}, got {self.kind!r}")
        values = np.array(self.values, dtype=np.float64).ravel()
        object.__setattr__(self, "degree", int(self.degree))
        object.__setattr__(self, "input_dim", int(self.input_dim))
        object.__setattr__(self, "decouple_gamma", bool(self.decouple_gamma))
        if values.shape[0] != self.size:
            raise DimensionError(f"{self.kind} vector needs {self.size} values, got {values.shape[0]}")
        values.setflags(write=False)
        object.__setattr__(self, "values", values)

    @property
    def n_kernel(self) -> int:
        return self.degree * (1 + self.input_dim) if self.kind == "mpk" else 0

    @property
    def noise_index(self) -> int:
        return self.n_kernel

    @property
    def gamma_index(self) -> Optional[int]:
        return self.n_kernel + 1 if self.decouple_gamma else None

    @property
    def size(self) -> int:
        return self.n_kernel + 1 + int(self.decouple_gamma)

    @property
    def noise_std(self) -> float:
        return float(self.values[self.noise_index] ** 2)

    @property
    def gamma(self) -> float:
        if self.decouple_gamma:
            return float(self.values[self.gamma_index] ** 2)
        return self.noise_std

    def kernel(self) -> KernelParams:
        if self.kind == "pk":
            return PkParams(self.degree)
        r, d = self.degree, self.input_dim
        return MpkParams(
            degree=r,
            input_dim=d,
            raw_offsets=self.values[:r],
            raw_increments=self.values[r : r + r * d].reshape(r, d),
        )

    def with_values(self, values) -> "HyperParamVector":
        return HyperParamVector(self.kind, self.degree, self.input_dim, values, self.decouple_gamma)

    @classmethod
    def pack(
        cls, kernel: KernelParams, noise_std: float, gamma: Optional[float] = None, input_dim: Optional[int] = None
    ) -> "HyperParamVector":
        """Flatten a kernel, a noise level and an optional separate gamma."""
        if noise_std < 0 or (gamma is not None and gamma < 0):
            raise ValueError("noise_std and gamma must be non-negative")
        tail = [np.sqrt(noise_std)] + ([] if gamma is None else [np.sqrt(gamma)])
        if isinstance(kernel, MpkParams):
            head = np.concatenate([kernel.raw_offsets, kernel.raw_increments.ravel()])
            return cls("mpk", kernel.degree, kernel.input_dim, np.concatenate([head, tail]), gamma is not None)
        if input_dim is None:
            raise ValueError("input_dim is required to pack a PK kernel")
        return cls("pk", kernel.degree, input_dim, np.asarray(tail), gamma is not None)

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "r": self.degree,
            "d": self.input_dim,
            "decouple_gamma": self.decouple_gamma,
            "values": self.values.tolist(),
            "noise_std": self.noise_std,
            "gamma": self.gamma,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "HyperParamVector":
        try:
            return cls(doc["kind"], doc["r"], doc["d"], doc["values"], doc.get("decouple_gamma", False))
        except (KeyError, TypeError) as exc:
            raise DataError(f"invalid hyperparameter document: {exc}") from exc


def default_init(kind: str, data: Dataset, degree: int, decouple_gamma: bool = False) -> HyperParamVector:
    """Derived kernel parameters 1/(r d) and sigma_n^2 = 0.1 var(y), y as fitted."""
    d = data.input_dim
    kernel = MpkParams.initial(degree, d) if kind == "mpk" else PkParams(degree)
    variance = float(np.var(data.scaled_outputs()))
    if not variance > 0:
        variance = 1.0
    noise_std = float(np.sqrt(0.1 * variance))
    return HyperParamVector.pack(
        kernel, noise_std, gamma=noise_std if decouple_gamma else None, input_dim=d
    )


def _ridge_derivative(theta: HyperParamVector) -> Tuple[int, float]:
    """Coordinate carrying gamma^2 and d(gamma^2)/d(raw) at theta."""
    index = theta.gamma_index if theta.decouple_gamma else theta.noise_index
    raw = theta.values[index]
    return index, 4.0 * raw**3


def _factor(X: np.ndarray, kernel: KernelParams, ridge: float) -> Tuple[np.ndarray, SpdFactor]:
    K = build_gram(X, kernel)
    Ky = K.copy()
    Ky[np.diag_indices_from(Ky)] += ridge
    return K, jitter_cholesky(Ky)


def nll(theta: HyperParamVector, data: Dataset) -> float:
    """Negative log marginal likelihood of the (standardized) outputs."""
    _, factor = _factor(data.scaled_inputs(), theta.kernel(), theta.noise_std**2)
    y = data.scaled_outputs()
    alpha = factor.solve(y)
    return float(0.5 * y @ alpha + 0.5 * factor.log_det + 0.5 * data.size * LOG_2PI)


def nll_gradient(theta: HyperParamVector, data: Dataset) -> np.ndarray:
    """Exact gradient of `nll` w.r.t. every raw coordinate of theta."""
    X = data.scaled_inputs()
    kernel = theta.kernel()
    _, factor = _factor(X, kernel, theta.noise_std**2)
    alpha = factor.solve(data.scaled_outputs())
    W = 0.5 * (factor.inverse() - np.outer(alpha, alpha))
    grad = np.zeros(theta.size)
    if isinstance(kernel, MpkParams):
        d_off, d_inc = mpk_gram_vjp(X, X, kernel, W)
        r = kernel.degree
        grad[:r] = d_off
        grad[r : theta.n_kernel] = d_inc.ravel()
    raw_noise = theta.values[theta.noise_index]
    grad[theta.noise_index] = np.trace(W) * 4.0 * raw_noise**3
    return grad


@dataclass(frozen=True, eq=False)
class Fold:
    """One cross-validation partition: a training split and a validation split."""

    train: Dataset
    validation: Dataset

    def __post_init__(self):
        if self.train.size < 1 or self.validation.size < 1:
            raise ValueError("folds need non-empty train and validation splits")


def make_folds(
    data: Dataset,
    partitions: int = 5,
    train_size: int = 100,
    validation_size: Optional[int] = None,
    seed: int = 0,
) -> List[Fold]:
    """Independent seeded random partitions of the rows into train / validation."""
    if validation_size is None:
        validation_size = data.size - train_size
    if train_size < 1 or validation_size < 1 or train_size + validation_size > data.size:
        raise ValueError(
            f"cannot split {data.size} samples into {train_size} train and {validation_size} validation"
        )
    rng = make_rng(seed)
    folds = []
    for _ in range(int(partitions)):
        perm = rng.permutation(data.size)
        folds.append(
            Fold(
                train=data.subset(perm[:train_size]),
                validation=data.subset(perm[train_size : train_size + validation_size]),
            )
        )
    return folds


def _fold_terms(theta: HyperParamVector, fold: Fold, kernel: KernelParams):
    Xt = fold.train.scaled_inputs()
    Xv = fold.validation.scaled_inputs()
    _, factor = _factor(Xt, kernel, theta.gamma**2)
    alpha = factor.solve(fold.train.scaled_outputs())
    Kc = build_cross(Xv, Xt, kernel)
    residual = Kc @ alpha - fold.validation.scaled_outputs()
    return Xt, Xv, factor, alpha, Kc, residual


def cv_loss(theta: HyperParamVector, folds: Sequence[Fold]) -> float:
    """Sum over folds of the validation MSE."""
    kernel = theta.kernel()
    total = 0.0
    for index, fold in enumerate(folds):
        try:
            residual = _fold_terms(theta, fold, kernel)[-1]
        except NumericalError as exc:
            raise FoldError(index, exc) from exc
        total += float(np.mean(residual**2))
    return total


def cv_gradient(theta: HyperParamVector, folds: Sequence[Fold]) -> np.ndarray:
    """Exact gradient of `cv_loss`, differentiating through each fold's solve."""
    kernel = theta.kernel()
    ridge_index, ridge_slope = _ridge_derivative(theta)
    grad = np.zeros(theta.size)
    for index, fold in enumerate(folds):
        try:
            Xt, Xv, factor, alpha, Kc, residual = _fold_terms(theta, fold, kernel)
        except NumericalError as exc:
            raise FoldError(index, exc) from exc
        scale = 2.0 / residual.shape[0]
        beta = factor.solve(Kc.T @ residual)
        if isinstance(kernel, MpkParams):
            cross_off, cross_inc = mpk_gram_vjp(Xv, Xt, kernel, np.outer(residual, alpha))
            gram_off, gram_inc = mpk_gram_vjp(Xt, Xt, kernel, np.outer(beta, alpha))
            r = kernel.degree
            grad[:r] += scale * (cross_off - gram_off)
            grad[r : theta.n_kernel] += scale * (cross_inc - gram_inc).ravel()
        grad[ridge_index] -= scale * float(beta @ alpha) * ridge_slope
    return grad


class NllObjective:
    """Negative log marginal likelihood as a function of the raw values."""

    name = "nll"

    def __init__(self, data: Dataset, template: HyperParamVector):
        self.data = data
        self.template = template

    def loss(self, values) -> float:
        return nll(self.template.with_values(values), self.data)

    def gradient(self, values) -> np.ndarray:
        return nll_gradient(self.template.with_values(values), self.data)


class CvObjective:
    """Summed fold validation MSE as a function of the raw values."""

    name = "cv"

    def __init__(self, folds: Sequence[Fold], template: HyperParamVector):
        self.folds = list(folds)
        self.template = template

    def loss(self, values) -> float:
        return cv_loss(self.template.with_values(values), self.folds)

    def gradient(self, values) -> np.ndarray:
        return cv_gradient(self.template.with_values(values), self.folds)


def optimize(objective, init: HyperParamVector, config: Optional[OptimizerConfig] = None):
    """Run adaptive gradient descent on an objective from ``init``.

    Returns ``(HyperParamVector, OptimizerReport)``.
    """
    config = config or OptimizerConfig()
    frozen = [init.noise_index] if config.fix_noise else []
    values, report = gradient_descent(
        objective.loss, objective.gradient, init.values, config, frozen=frozen, name=objective.name
    )
    return init.with_values(values), report


def tune_ml(data: Dataset, init: HyperParamVector, config: Optional[OptimizerConfig] = None):
    return optimize(NllObjective(data, init), init, config)


def tune_cv(folds: Sequence[Fold], init: HyperParamVector, config: Optional[OptimizerConfig] = None):
    return optimize(CvObjective(folds, init), init, config)


__all__ = [
    "HyperParamVector",
    "OptimizerConfig",
    "OptimizerReport",
    "Fold",
    "default_init",
    "nll",
    "nll_gradient",
    "make_folds",
    "cv_loss",
    "cv_gradient",
    "NllObjective",
    "CvObjective",
    "gradient_descent",
    "optimize",
    "tune_ml",
    "tune_cv",
]
