"""mpktools.experiments: reproduction harness.

`run_synthetic` runs the Monte Carlo comparison of PK and MPK networks on the
memory-6 benchmark system, and `run_silverbox` runs the NARX identification
pipeline (cross-validated tuning, one-step prediction, free-run simulation)
on a measured record or on the bundled synthetic surrogate.
"""
from __future__ import annotations

import concurrent.futures
import logging
import os
from dataclasses import asdict, dataclass, field
from typing import Callable, Dict, List, Mapping, Optional, Sequence, Tuple, Union

import numpy as np

from ..errors import DataError, MpkError
from ..hyperopt import (
    HyperParamVector,
    OptimizerConfig,
    OptimizerReport,
    default_init,
    make_folds,
    tune_cv,
    tune_ml,
)
from ..io import read_signal_csv
from ..kernels import KERNEL_KINDS
from ..regnet import FittedNetwork, fit, predict
from ..volterra import Dataset, SPL_MEMORY, SPL_ORDER, fit_percent, lagged_windows, make_rng, rmse, spl_outputs
from .narx import (
    NarxConfig,
    SimulationScore,
    build_narx_dataset,
    free_run_simulate,
    one_step_predict,
    score_simulation,
)
from .report import ExperimentReport, RunRecord, write_boxplot_svg, write_error_trace_svg
from .surrogate import make_surrogate_pair, make_surrogate_record

logger = logging.getLogger(__name__)

# smallest regularization scale handed to the network when the tuned noise level reaches 0
MIN_GAMMA = 1e-8

# (train mean, test mean, train std, test std) of the input signals
EXPERIMENT_PRESETS = {
    1: (0.0, 0.0, 4.0, 4.0),
    2: (0.0, 0.0, 2.0, 2.0),
    3: (-12.0, 12.0, 4.0, 4.0),
    4: (-12.0, 12.0, 2.0, 2.0),
}


@dataclass
class ExperimentConfig:
    experiment_id: Union[int, str] = "custom"
    train_mean: float = 0.0
    test_mean: float = 0.0
    train_std: float = 4.0
    test_std: float = 4.0
    noise_std: float = 4.0
    train_samples: int = 1000
    test_samples: int = 1000
    runs: int = 100
    kernels: Tuple[str, ...] = KERNEL_KINDS
    base_seed: int = 0
    degree: int = SPL_ORDER
    normalize: bool = True
    scale_outputs: bool = True
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    def __post_init__(self):
        if not (self.train_std > 0 and self.test_std > 0):
            raise ValueError(f"input stds must be positive, got {self.train_std} and {self.test_std}")
        if self.noise_std < 0:
            raise ValueError(f"noise_std must be non-negative, got {self.noise_std}")
        if int(self.runs) < 1:
            raise ValueError(f"runs must be >= 1, got {self.runs}")
        if int(self.train_samples) < 2 or int(self.test_samples) < 2:
            raise ValueError("train_samples and test_samples must be >= 2")
        if int(self.base_seed) < 0:
            raise ValueError(f"base_seed must be non-negative, got {self.base_seed}")
        self.kernels = tuple(self.kernels)
        bad = [k for k in self.kernels if k not in KERNEL_KINDS]
        if bad or not self.kernels:
            raise ValueError(f"kernels must be a non-empty subset of {KERNEL_KINDS}, got {self.kernels}")
        self.runs = int(self.runs)
        self.train_samples = int(self.train_samples)
        self.test_samples = int(self.test_samples)
        self.base_seed = int(self.base_seed)
        if isinstance(self.optimizer, Mapping):
            self.optimizer = OptimizerConfig.from_dict(self.optimizer)

    @property
    def memory(self) -> int:
        return SPL_MEMORY

    def to_dict(self) -> dict:
        doc = asdict(self)
        doc["kernels"] = list(self.kernels)
        doc["optimizer"] = self.optimizer.to_dict()
        return doc

    @classmethod
    def from_dict(cls, doc: Mapping) -> "ExperimentConfig":
        unknown = set(doc) - set(cls.__dataclass_fields__)
        if unknown:
            raise DataError(f"unknown experiment options: {sorted(unknown)}")
        return cls(**doc)


def experiment_config(experiment_id: int, **overrides) -> ExperimentConfig:
    """Preset configuration for experiments 1 to 4, with optional overrides."""
    try:
        train_mean, test_mean, train_std, test_std = EXPERIMENT_PRESETS[int(experiment_id)]
    except (KeyError, ValueError):
        raise ValueError(f"experiment id must be one of {sorted(EXPERIMENT_PRESETS)}, got {experiment_id!r}") from None
    values = dict(
        experiment_id=int(experiment_id),
        train_mean=train_mean,
        test_mean=test_mean,
        train_std=train_std,
        test_std=test_std,
    )
    values.update(overrides)
    return ExperimentConfig(**values)


def network_gamma(theta: HyperParamVector) -> float:
    return max(theta.gamma, MIN_GAMMA)


def synthetic_data(config: ExperimentConfig, seed: int) -> Tuple[Dataset, Dataset, np.ndarray]:
    """Training set (noisy outputs), test set and noiseless test outputs of one run."""
    rng = make_rng(seed)
    m = config.memory
    u_train = rng.normal(config.train_mean, config.train_std, config.train_samples + m)
    u_test = rng.normal(config.test_mean, config.test_std, config.test_samples + m)
    X_train = lagged_windows(u_train, m)
    X_test = lagged_windows(u_test, m)
    z_train = spl_outputs(X_train)
    z_test = spl_outputs(X_test)
    y_train = z_train + rng.normal(0.0, 1.0, z_train.shape[0]) * config.noise_std
    train = Dataset(X_train, y_train)
    if config.normalize:
        train = train.with_normalization(outputs=config.scale_outputs)
    return train, Dataset(X_test, z_test), z_test


def _initial_point(kind: str, config: ExperimentConfig, train: Dataset) -> HyperParamVector:
    init = default_init(kind, train, config.degree)
    if config.optimizer.fix_noise:
        values = np.array(init.values)
        scale = train.normalization.output_std if train.normalization is not None else 1.0
        values[init.noise_index] = np.sqrt(config.noise_std / scale)
        init = init.with_values(values)
    return init


def run_single(config: ExperimentConfig, run: int) -> List[RunRecord]:
    """Both kernels on one draw of training and test data."""
    seed = config.base_seed + run
    train, test, z_test = synthetic_data(config, seed)
    records = []
    for kind in config.kernels:
        record = RunRecord(run=run, seed=seed, kernel=kind)
        try:
            theta, report = tune_ml(train, _initial_point(kind, config, train), config.optimizer)
            record.iterations = report.iterations
            record.final_loss = report.final_loss
            record.converged = report.converged
            if report.error:
                record.error = report.error
            model = fit(train, theta.kernel(), network_gamma(theta))
            record.train_fit = fit_percent(train.outputs, predict(model, train.inputs))
            zhat = predict(model, test.inputs)
            record.test_fit = fit_percent(z_test, zhat)
            record.test_rmse = rmse(z_test, zhat)
        except MpkError as exc:
            logger.warning("run %d (%s) failed: %s", run, kind, exc)
            record.error = f"{type(exc).__name__}: {exc}"
        logger.info("run %d %s: test Fit%% %.2f", run, kind, record.test_fit)
        records.append(record)
    return records


def run_synthetic(
    config: ExperimentConfig,
    threads: int = 1,
    progress: Optional[Callable[[int, List[RunRecord]], None]] = None,
) -> ExperimentReport:
    """Monte Carlo over ``config.runs`` independent draws.

    Run i uses seed ``base_seed + i`` whatever the thread count, and records
    are assembled in run order, so the report does not depend on ``threads``.
    ``progress(run, records)`` is called as each run finishes.
    """
    results: Dict[int, List[RunRecord]] = {}

    def finished(run, records):
        results[run] = records
        if progress is not None:
            progress(run, records)

    if threads <= 1:
        for run in range(config.runs):
            finished(run, run_single(config, run))
    else:
        executor = concurrent.futures.ThreadPoolExecutor(max_workers=threads)
        try:
            futures = {executor.submit(run_single, config, run): run for run in range(config.runs)}
            for future in concurrent.futures.as_completed(futures):
                finished(futures[future], future.result())
        except KeyboardInterrupt:
            executor.shutdown(wait=False, cancel_futures=True)
            raise
        executor.shutdown(wait=True)

    records = [rec for run in sorted(results) for rec in results[run]]
    return ExperimentReport(config=config.to_dict(), records=records)


@dataclass
class TuningSpec:
    method: str = "cv"
    decouple_gamma: bool = False
    optimizer: OptimizerConfig = field(default_factory=OptimizerConfig)

    METHODS = ("ml", "cv", "ml+cv")

    def __post_init__(self):
        if self.method not in self.METHODS:
            raise ValueError(f"tuning method must be one of {self.METHODS}, got {self.method!r}")
        if isinstance(self.optimizer, Mapping):
            self.optimizer = OptimizerConfig.from_dict(self.optimizer)

    def to_dict(self) -> dict:
        return {"method": self.method, "decouple_gamma": self.decouple_gamma, "optimizer": self.optimizer.to_dict()}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "TuningSpec":
        unknown = set(doc) - {"method", "decouple_gamma", "optimizer"}
        if unknown:
            raise DataError(f"unknown tuning options: {sorted(unknown)}")
        return cls(**doc)


def tune(
    kind: str, data: Dataset, degree: int, tuning: TuningSpec, narx: NarxConfig, seed: int = 0
) -> Tuple[HyperParamVector, List[OptimizerReport]]:
    """Tune one kernel on a NARX training set with the requested method(s)."""
    reports = []
    theta = default_init(kind, data, degree)
    if tuning.method in ("ml", "ml+cv"):
        theta, report = tune_ml(data, theta, tuning.optimizer)
        reports.append(report)
    if tuning.method in ("cv", "ml+cv"):
        if tuning.decouple_gamma:
            theta = HyperParamVector.pack(theta.kernel(), theta.noise_std, theta.noise_std, data.input_dim)
        folds = make_folds(
            data,
            partitions=narx.partitions,
            train_size=narx.partition_size,
            validation_size=data.size - narx.partition_size,
            seed=seed,
        )
        theta, report = tune_cv(folds, theta, tuning.optimizer)
        reports.append(report)
    return theta, reports


@dataclass
class KernelScore:
    kernel: str
    prediction_fit: float
    simulation_fit: float
    simulation_rmse: float
    diverged: bool
    noise_std: float
    gamma: float
    reports: List[dict] = field(default_factory=list)
    model: Optional[FittedNetwork] = field(default=None, repr=False)
    simulation: Optional[np.ndarray] = field(default=None, repr=False)

    @property
    def simulation_rmse_mv(self) -> float:
        return 1000.0 * self.simulation_rmse

    def to_dict(self) -> dict:
        return {
            "kernel": self.kernel,
            "prediction_fit": self.prediction_fit,
            "simulation_fit": self.simulation_fit,
            "simulation_rmse": self.simulation_rmse,
            "simulation_rmse_mv": self.simulation_rmse_mv,
            "diverged": self.diverged,
            "noise_std": self.noise_std,
            "gamma": self.gamma,
            "optimizer": self.reports,
        }


@dataclass
class SilverboxReport:
    config: Mapping
    scores: Dict[str, KernelScore]
    test_output: np.ndarray = field(repr=False, default_factory=lambda: np.zeros(0))
    start: int = 0

    def to_dict(self) -> dict:
        return {"config": dict(self.config), "scores": {k: s.to_dict() for k, s in self.scores.items()}}

    def table(self) -> str:
        lines = [f"{'kernel':<8}{'Pred. Fit%':>12}{'Sim. Fit%':>12}{'Sim. RMSE (mV)':>16}"]
        for kind, s in self.scores.items():
            lines.append(f"{kind.upper():<8}{s.prediction_fit:>12.2f}{s.simulation_fit:>12.2f}{s.simulation_rmse_mv:>16.4f}")
        return "\n".join(lines)


Record = Tuple[np.ndarray, np.ndarray]


def load_silverbox(directory=None, columns: Tuple[int, int] = (0, 1)) -> Tuple[Record, Record]:
    """Training and test records from ``train.csv`` and ``test.csv``.

    ``directory`` defaults to the ``SILVERBOX_DATA`` environment variable.
    """
    directory = directory or os.environ.get("SILVERBOX_DATA")
    if not directory:
        raise DataError("no Silverbox data directory given and SILVERBOX_DATA is not set")
    train = read_signal_csv(os.path.join(directory, "train.csv"), columns)
    test = read_signal_csv(os.path.join(directory, "test.csv"), columns)
    return train, test


def run_silverbox(
    train: Record,
    test: Record,
    narx: Optional[NarxConfig] = None,
    tuning: Optional[TuningSpec] = None,
    kernels: Sequence[str] = KERNEL_KINDS,
    degree: int = 3,
    normalize: bool = True,
    seed: int = 0,
) -> SilverboxReport:
    """Identify NARX networks on the head of ``train`` and score them on ``test``."""
    narx = narx or NarxConfig()
    tuning = tuning or TuningSpec()
    m, n_y, start = narx.memory, narx.lags, narx.start
    u_tr, y_tr = train
    u_ts, y_ts = test
    needed = narx.train_size + start
    if len(u_tr) < needed:
        raise DataError(f"training record has {len(u_tr)} samples, need {needed}")
    data = build_narx_dataset(u_tr[:needed], y_tr[:needed], m, n_y)
    if normalize:
        data = data.with_normalization()

    config = {
        "narx": narx.to_dict(),
        "tuning": tuning.to_dict(),
        "kernels": list(kernels),
        "degree": degree,
        "normalize": normalize,
        "seed": seed,
        "train_samples": int(len(u_tr)),
        "test_samples": int(len(u_ts)),
    }
    scores = {}
    for kind in kernels:
        theta, reports = tune(kind, data, degree, tuning, narx, seed)
        model = fit(
            data,
            theta.kernel(),
            network_gamma(theta),
            metadata={"memory": m, "output_lags": n_y, "kernel_kind": kind},
        )
        pred = one_step_predict(model, u_ts, y_ts)
        prediction_fit = fit_percent(np.asarray(y_ts)[start:], pred)
        sim = free_run_simulate(model, u_ts, np.asarray(y_ts)[:start])
        sim_score: SimulationScore = score_simulation(y_ts, sim, start)
        logger.info(
            "%s: prediction Fit%% %.2f, simulation Fit%% %.2f, RMSE %.4g mV",
            kind,
            prediction_fit,
            sim_score.fit,
            1000.0 * sim_score.rmse,
        )
        scores[kind] = KernelScore(
            kernel=kind,
            prediction_fit=prediction_fit,
            simulation_fit=sim_score.fit,
            simulation_rmse=sim_score.rmse,
            diverged=sim_score.diverged,
            noise_std=theta.noise_std,
            gamma=theta.gamma,
            reports=[r.to_dict() for r in reports],
            model=model,
            simulation=sim,
        )
    return SilverboxReport(config=config, scores=scores, test_output=np.asarray(y_ts, dtype=float), start=start)


def surrogate_records(seed: int = 0, train_samples: int = 1000, test_samples: int = 2000) -> Tuple[Record, Record]:
    return make_surrogate_pair(train_samples, test_samples, seed)


__all__ = [
    "EXPERIMENT_PRESETS",
    "ExperimentConfig",
    "ExperimentReport",
    "RunRecord",
    "experiment_config",
    "synthetic_data",
    "run_single",
    "run_synthetic",
    "NarxConfig",
    "TuningSpec",
    "KernelScore",
    "SilverboxReport",
    "build_narx_dataset",
    "one_step_predict",
    "free_run_simulate",
    "score_simulation",
    "load_silverbox",
    "run_silverbox",
    "make_surrogate_record",
    "surrogate_records",
    "write_boxplot_svg",
    "write_error_trace_svg",
]
