"""Top level package for mpktools.

Expose the main entry points at package level so users can build kernels,
fit regularization networks and tune them without importing subpackages.
"""
from .errors import (
    DataError,
    DimensionError,
    FoldError,
    GuardExceededError,
    IllConditionedError,
    MpkError,
    NumericalError,
    OptimizationError,
)
from .volterra import Dataset, MonomialIndex, VolterraSeries, enumerate_monomials, feature_map, fit_percent, rmse
from .kernels import MpkParams, PkParams, build_cross, build_gram, expand_penalties, kernel_eval
from .regnet import FittedNetwork, explicit_ridge_oracle, fit, predict
from .hyperopt import HyperParamVector, OptimizerConfig, OptimizerReport, default_init, make_folds, tune_cv, tune_ml


def identify(data, kernel: str = "mpk", tuning: str = "ml", degree: int = 3, config=None, seed: int = 0):
    """Tune and fit a PK or MPK network in one call.

    Parameters:
    - data: Dataset of regressors and measured outputs
    - kernel: "pk" or "mpk" (default: "mpk")
    - tuning: "ml" for marginal likelihood, "cv" for 5-fold random partitions (half/half)
    - degree: polynomial degree r (default: 3)
    - config: OptimizerConfig, or None for the defaults
    - seed: seed of the cross-validation partitions

    Returns:
    - (FittedNetwork, HyperParamVector, OptimizerReport)

    Examples:
    >>> model, theta, report = identify(data, "mpk", "ml")
    >>> zhat = predict(model, new_inputs)
    """
    init = default_init(kernel, data, degree)
    if tuning == "ml":
        theta, report = tune_ml(data, init, config)
    elif tuning == "cv":
        folds = make_folds(data, partitions=5, train_size=data.size // 2, seed=seed)
        theta, report = tune_cv(folds, init, config)
    else:
        raise ValueError(f"tuning must be 'ml' or 'cv', got {tuning!r}")

    from .experiments import network_gamma

    model = fit(data, theta.kernel(), network_gamma(theta))
    return model, theta, report


__version__ = "1.0.0"
__all__ = [
    "identify",
    "Dataset",
    "MonomialIndex",
    "VolterraSeries",
    "enumerate_monomials",
    "feature_map",
    "fit_percent",
    "rmse",
    "PkParams",
    "MpkParams",
    "kernel_eval",
    "build_gram",
    "build_cross",
    "expand_penalties",
    "FittedNetwork",
    "fit",
    "predict",
    "explicit_ridge_oracle",
    "HyperParamVector",
    "OptimizerConfig",
    "OptimizerReport",
    "default_init",
    "make_folds",
    "tune_ml",
    "tune_cv",
    "MpkError",
    "DimensionError",
    "GuardExceededError",
    "DataError",
    "NumericalError",
    "IllConditionedError",
    "FoldError",
    "OptimizationError",
]
