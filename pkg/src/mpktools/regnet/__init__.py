"""mpktools.regnet: kernel regularization network.

`fit` solves ``(K + gamma^2 I) alpha = y`` with a Cholesky factorization and
`predict` evaluates ``zhat = K(new, train) alpha``. `explicit_ridge_oracle`
solves the same problem in the primal, over the explicit Volterra features
with per-monomial ridge penalties 1/lambda; on small problems the two must
give the same predictions. Outputs standardized by the dataset normalization
are fitted in standardized units and predicted in the original ones.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass, field
from typing import Mapping, Optional, Tuple

import numpy as np
import scipy.linalg as la

from ..errors import DataError, DimensionError, GuardExceededError
from ..kernels import (
    MAX_MONOMIALS,
    KernelParams,
    PenaltyTable,
    build_cross,
    build_gram,
    kernel_from_dict,
)
from ..volterra import Dataset, Normalization, feature_matrix
from .linalg import SpdFactor, jitter_cholesky

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class FittedNetwork:
    """Representer-theorem model ``zhat(u) = sum_t alpha_t k(u, u_t)``.

    ``training_inputs`` are stored as given (before normalization); the
    normalization, when present, is replayed on both training and query
    inputs at prediction time. When it also standardizes outputs, alpha is
    in standardized units and predictions are mapped back.
    """

    training_inputs: np.ndarray
    alpha: np.ndarray
    kernel: KernelParams
    gamma: float
    normalization: Optional[Normalization] = None
    log_det: float = float("nan")
    metadata: Mapping = field(default_factory=dict)
    _scaled: np.ndarray = field(init=False, repr=False)

    def __post_init__(self):
        X = np.asarray(self.training_inputs, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        alpha = np.asarray(self.alpha, dtype=np.float64).ravel()
        if alpha.shape[0] != X.shape[0]:
            raise DimensionError(f"{alpha.shape[0]} coefficients for {X.shape[0]} training inputs")
        if not float(self.gamma) > 0:
            raise ValueError(f"gamma must be positive, got {self.gamma}")
        object.__setattr__(self, "training_inputs", X)
        object.__setattr__(self, "alpha", alpha)
        object.__setattr__(self, "gamma", float(self.gamma))
        object.__setattr__(self, "metadata", dict(self.metadata))
        scaled = X if self.normalization is None else self.normalization.apply(X)
        object.__setattr__(self, "_scaled", scaled)

    @property
    def input_dim(self) -> int:
        return self.training_inputs.shape[1]

    @property
    def size(self) -> int:
        return self.training_inputs.shape[0]

    def to_dict(self) -> dict:
        return {
            "training_inputs": self.training_inputs.tolist(),
            "alpha": self.alpha.tolist(),
            "kernel": self.kernel.to_dict(),
            "gamma": self.gamma,
            "normalization": None if self.normalization is None else self.normalization.to_dict(),
            "log_det": self.log_det,
            "metadata": dict(self.metadata),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "FittedNetwork":
        try:
            norm = doc.get("normalization")
            return cls(
                training_inputs=doc["training_inputs"],
                alpha=doc["alpha"],
                kernel=kernel_from_dict(doc["kernel"]),
                gamma=float(doc["gamma"]),
                normalization=None if norm is None else Normalization.from_dict(norm),
                log_det=float("nan") if doc.get("log_det") is None else float(doc["log_det"]),
                metadata=doc.get("metadata", {}),
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"invalid model document: {exc}") from exc


def fit_factored(
    data: Dataset, kernel: KernelParams, gamma: float, metadata: Optional[Mapping] = None
) -> Tuple[FittedNetwork, SpdFactor]:
    """`fit`, also returning the Cholesky factor of ``K + gamma^2 I``."""
    gamma = float(gamma)
    if not gamma > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if data.size < 1:
        raise DimensionError("cannot fit a network on an empty dataset")
    K = build_gram(data.scaled_inputs(), kernel)
    K[np.diag_indices_from(K)] += gamma**2
    factor = jitter_cholesky(K)
    alpha = factor.solve(data.scaled_outputs())
    model = FittedNetwork(
        training_inputs=data.inputs,
        alpha=alpha,
        kernel=kernel,
        gamma=gamma,
        normalization=data.normalization,
        log_det=factor.log_det,
        metadata=metadata or {},
    )
    return model, factor


def fit(
    data: Dataset, kernel: KernelParams, gamma: float, metadata: Optional[Mapping] = None
) -> FittedNetwork:
    """Fit the regularization network: alpha = (K + gamma^2 I)^-1 y."""
    model, _ = fit_factored(data, kernel, gamma, metadata)
    logger.debug("fitted %s network on %d samples (gamma=%.4g)", kernel.kind, model.size, gamma)
    return model


def predict(model: FittedNetwork, inputs) -> np.ndarray:
    """Predictions zhat = K(inputs, training) alpha."""
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2 or X.shape[1] != model.input_dim:
        raise DimensionError(
            f"inputs have {X.shape[-1]} columns, model was trained on {model.input_dim}"
        )
    if model.normalization is None:
        return build_cross(X, model._scaled, model.kernel) @ model.alpha
    zhat = build_cross(model.normalization.apply(X), model._scaled, model.kernel) @ model.alpha
    return model.normalization.invert_outputs(zhat)


def explicit_ridge_oracle(data: Dataset, penalties: PenaltyTable, gamma: float) -> np.ndarray:
    """Weighted ridge over explicit Volterra features.

    Minimizes ``sum_t (y_t - phi(u_t)^T c)^2 + gamma^2 sum_q c_q^2 / lambda_q``
    with ``c_q = 0`` wherever ``lambda_q = 0``. Returns c in monomial order.
    """
    if not float(gamma) > 0:
        raise ValueError(f"gamma must be positive, got {gamma}")
    if data.input_dim != penalties.input_dim:
        raise DimensionError(
            f"data has {data.input_dim} input columns, penalty table has {penalties.input_dim}"
        )
    if len(penalties) > MAX_MONOMIALS:
        raise GuardExceededError(len(penalties), MAX_MONOMIALS)
    Phi = feature_matrix(data.scaled_inputs(), penalties.degree)
    lam = penalties.as_vector()
    active = lam > 0
    root = np.sqrt(lam[active])
    G = Phi[:, active] * root
    # ||y - G b||^2 + gamma^2 ||b||^2 with c = sqrt(lambda) b, as one least squares system
    design = np.vstack([G, float(gamma) * np.eye(G.shape[1])])
    target = np.concatenate([data.scaled_outputs(), np.zeros(G.shape[1])])
    b = la.lstsq(design, target)[0]
    weights = np.zeros(lam.shape[0])
    weights[active] = root * b
    return weights


def oracle_predict(
    weights, inputs, degree: int, normalization: Optional[Normalization] = None
) -> np.ndarray:
    """phi(u)^T c for each input row, mapped back to output units."""
    X = np.asarray(inputs, dtype=np.float64)
    if normalization is None:
        return feature_matrix(X, degree) @ np.asarray(weights, dtype=np.float64)
    z = feature_matrix(normalization.apply(X), degree) @ np.asarray(weights, dtype=np.float64)
    return normalization.invert_outputs(z)


__all__ = [
    "FittedNetwork",
    "SpdFactor",
    "jitter_cholesky",
    "fit",
    "fit_factored",
    "predict",
    "explicit_ridge_oracle",
    "oracle_predict",
]
