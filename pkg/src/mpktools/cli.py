"""Command line front end: ``mpktools {expand,fit,predict,bench,silverbox}``.

Exit codes: 0 success, 2 expansion guard exceeded, 3 unreadable or
inconsistent input, 4 numerical failure, 130 interrupted.
"""
from __future__ import annotations

import argparse
import logging
import os
import sys
from dataclasses import dataclass
from typing import List, Optional

import numpy as np

from . import __version__
from .config import load_config_file, merge_options, section
from .errors import DataError, DimensionError, GuardExceededError, MpkError, NumericalError
from .experiments import (
    ExperimentConfig,
    NarxConfig,
    TuningSpec,
    experiment_config,
    load_silverbox,
    network_gamma,
    run_silverbox,
    run_synthetic,
    surrogate_records,
)
from .experiments.narx import build_narx_dataset, free_run_simulate, model_structure, one_step_predict, score_simulation
from .experiments.report import ExperimentReport, RunRecord, write_boxplot_svg, write_error_trace_svg
from .hyperopt import HyperParamVector, OptimizerConfig, OptimizerReport, default_init, make_folds, nll, tune_cv, tune_ml
from .io import load_json, read_signal_csv, save_json, write_predictions_csv
from .kernels import KERNEL_KINDS, MpkParams, PkParams, expand_penalties, kernel_from_dict
from .regnet import FittedNetwork, fit
from .volterra import fit_percent, rmse

logger = logging.getLogger("mpktools")

EXIT_OK = 0
EXIT_GUARD = 2
EXIT_DATA = 3
EXIT_NUMERICAL = 4
EXIT_INTERRUPTED = 130

LOG_FORMAT = "%(asctime)s %(levelname)s %(name)s: %(message)s"


@dataclass
class RunConfig:
    subcommand: str
    config_path: Optional[str] = None
    seed: Optional[int] = None
    out: str = "."
    threads: int = 1
    verbosity: int = 0

    def __post_init__(self):
        if self.seed is not None and self.seed < 0:
            raise ValueError(f"--seed must be an unsigned integer, got {self.seed}")
        if self.threads < 1:
            raise ValueError(f"--threads must be >= 1, got {self.threads}")

    def prepare_out(self) -> str:
        try:
            os.makedirs(self.out, exist_ok=True)
        except OSError as exc:
            raise DataError(f"cannot create output directory: {exc}", path=self.out) from exc
        if not os.access(self.out, os.W_OK):
            raise DataError("output directory is not writable", path=self.out)
        return self.out

    def path(self, name: str) -> str:
        return os.path.join(self.out, name)


def setup_logging(verbosity: int) -> None:
    level = {-1: logging.WARNING, 0: logging.INFO}.get(verbosity, logging.DEBUG)
    logging.basicConfig(level=level, format=LOG_FORMAT, stream=sys.stderr, force=True)


def _optimizer_options(args, doc) -> OptimizerConfig:
    flags = {
        "max_iters": args.max_iters,
        "tol": args.tol,
        "initial_step": args.step,
        "fix_noise": True if args.fix_noise else None,
    }
    return merge_options(OptimizerConfig, section(doc, "optimizer"), flags)


def _read_kernel(path, kind: str, degree: Optional[int], input_dim: Optional[int]):
    """Kernel from a parameter file, or the default kernel of ``kind``."""
    if path is None:
        degree = 3 if degree is None else degree
        if kind == "pk":
            return PkParams(degree)
        return MpkParams.initial(degree, 2 if input_dim is None else input_dim)
    doc = load_json(path)
    if not isinstance(doc, dict):
        raise DataError("kernel parameters must be a JSON object", path=str(path))
    try:
        if "sigmas" in doc:
            return MpkParams.from_sigmas(doc["offsets"], doc["sigmas"])
        if "increments" in doc:
            return MpkParams.from_derived(doc["offsets"], doc["increments"])
    except (KeyError, TypeError) as exc:
        raise DataError(f"invalid kernel parameters: {exc}", path=str(path)) from exc
    return kernel_from_dict(doc)


def cmd_expand(args, run: RunConfig) -> int:
    kernel = _read_kernel(
        args.params, args.kernel, args.degree, None if args.memory is None else args.memory + 1
    )
    if isinstance(kernel, MpkParams):
        input_dim = kernel.input_dim if args.memory is None else args.memory + 1
    else:
        input_dim = 2 if args.memory is None else args.memory + 1
    degree = kernel.degree if args.degree is None else args.degree
    table = expand_penalties(kernel, input_dim, degree)
    run.prepare_out()
    path = run.path("penalties.csv")
    table.to_csv(path)
    logger.info("wrote %d penalty coefficients to %s", len(table), path)
    if len(table) <= 10:
        for degrees, value in table.rows():
            print(f"lambda_{{{','.join(str(d) for d in degrees)}}} = {value:g}")
    return EXIT_OK


def _fit_dataset(args, u, y):
    data = build_narx_dataset(u, y, args.memory, args.output_lags)
    return data if args.no_normalize else data.with_normalization()


def cmd_fit(args, run: RunConfig) -> int:
    doc = load_config_file(run.config_path)
    optimizer = _optimizer_options(args, doc)
    u, y = read_signal_csv(args.data)
    data = _fit_dataset(args, u, y)
    n_y = args.memory if args.output_lags is None else args.output_lags

    if args.params is not None:
        kernel = _read_kernel(args.params, args.kernel, args.degree, data.input_dim)
        if kernel.kind != args.kernel:
            raise DataError(f"parameter file holds a {kernel.kind} kernel, --kernel is {args.kernel}")
        noise = args.noise_std if args.noise_std is not None else default_init(args.kernel, data, kernel.degree).noise_std
        theta = HyperParamVector.pack(kernel, noise, input_dim=data.input_dim)
    else:
        theta = default_init(args.kernel, data, 3 if args.degree is None else args.degree)
        if args.noise_std is not None:
            theta = HyperParamVector.pack(theta.kernel(), args.noise_std, input_dim=data.input_dim)
    if theta.kind == "mpk" and theta.input_dim != data.input_dim:
        raise DimensionError(f"kernel has input_dim {theta.input_dim}, regressors have {data.input_dim}")

    if args.tuning == "ml":
        theta, report = tune_ml(data, theta, optimizer)
    elif args.tuning == "cv":
        folds = make_folds(data, partitions=args.partitions, train_size=data.size // 2, seed=run.seed or 0)
        theta, report = tune_cv(folds, theta, optimizer)
    else:
        loss = nll(theta, data)
        report = OptimizerReport(0, loss, [loss], 0.0, True, objective="fixed")

    model = fit(
        data,
        theta.kernel(),
        network_gamma(theta),
        metadata={"memory": args.memory, "output_lags": n_y, "kernel_kind": theta.kind, "noise_std": theta.noise_std},
    )
    run.prepare_out()
    save_json(run.path("model.json"), model.to_dict())
    optimizer_doc = report.to_dict()
    optimizer_doc["config"] = optimizer.to_dict()
    optimizer_doc["hyperparameters"] = theta.to_dict()
    save_json(run.path("optimizer.json"), optimizer_doc)
    logger.info("fitted %s network on %d samples, loss %.6g", theta.kind, data.size, report.final_loss)
    return EXIT_OK


def cmd_predict(args, run: RunConfig) -> int:
    model = FittedNetwork.from_dict(load_json(args.model))
    memory, n_y = model_structure(model)
    start = max(memory, n_y)
    u, z = read_signal_csv(args.data)
    if args.mode == "onestep":
        zhat = one_step_predict(model, u, z)
        metrics = {"fit": fit_percent(z[start:], zhat), "rmse": rmse(z[start:], zhat), "diverged": False}
    else:
        sim = free_run_simulate(model, u, z[:start])
        score = score_simulation(z, sim, start)
        zhat = sim[start:]
        metrics = {"fit": score.fit, "rmse": score.rmse, "diverged": score.diverged}
    metrics.update({"mode": args.mode, "samples": int(zhat.shape[0]), "start": start})
    run.prepare_out()
    index = np.arange(start, start + zhat.shape[0])
    write_predictions_csv(run.path("predictions.csv"), index, z[index], zhat)
    save_json(run.path("metrics.json"), metrics)
    logger.info("%s: Fit%% %.2f, RMSE %.4g", args.mode, metrics["fit"], metrics["rmse"])
    return EXIT_OK


def _experiment(args, doc, run: RunConfig) -> ExperimentConfig:
    options = section(doc, "experiment")
    if "optimizer" not in options and "optimizer" in doc:
        options["optimizer"] = section(doc, "optimizer")
    optimizer = merge_options(OptimizerConfig, options.pop("optimizer", {}), {
        "max_iters": args.max_iters,
        "tol": args.tol,
        "initial_step": args.step,
        "fix_noise": True if args.fix_noise else None,
    })
    flags = {
        "runs": args.runs,
        "train_samples": args.train_samples,
        "test_samples": args.test_samples,
        "noise_std": args.noise_std,
        "kernels": None if args.kernels is None else tuple(args.kernels.split(",")),
        "base_seed": run.seed,
    }
    experiment_id = args.experiment if args.experiment is not None else options.pop("experiment_id", None)
    if experiment_id is not None and str(experiment_id) != "custom":
        options.pop("experiment_id", None)
        preset = experiment_config(int(experiment_id)).to_dict()
        preset.pop("optimizer")
        preset.update(options)
        options = preset
    options["optimizer"] = optimizer
    return merge_options(ExperimentConfig, options, flags)


def cmd_bench(args, run: RunConfig) -> int:
    doc = load_config_file(run.config_path)
    config = _experiment(args, doc, run)
    run.prepare_out()
    done: dict = {}

    def progress(index, records):
        done[index] = records
        logger.info("finished run %d/%d", len(done), config.runs)

    try:
        report = run_synthetic(config, threads=run.threads, progress=progress)
    except KeyboardInterrupt:
        records: List[RunRecord] = [rec for index in sorted(done) for rec in done[index]]
        partial = ExperimentReport(config=config.to_dict(), records=records)
        partial.to_csv(run.path("report.csv"))
        partial.to_json(run.path("summary.json"))
        logger.warning("interrupted, wrote %d completed runs", len(done))
        return EXIT_INTERRUPTED

    report.to_csv(run.path("report.csv"))
    report.to_json(run.path("summary.json"))
    write_boxplot_svg(run.path("boxplot.svg"), report, title=f"Experiment {config.experiment_id}")
    for kernel, stats in report.aggregate().items():
        if stats["n"]:
            print(f"{kernel.upper():<4} median test Fit% {stats['median']:.2f} (q1 {stats['q1']:.2f}, q3 {stats['q3']:.2f}, n={stats['n']})")
    if report.failures == len(report.records):
        logger.error("all %d runs failed", config.runs)
        return EXIT_NUMERICAL
    return EXIT_OK


def cmd_silverbox(args, run: RunConfig) -> int:
    doc = load_config_file(run.config_path)
    narx = merge_options(
        NarxConfig,
        section(doc, "narx"),
        {"memory": args.memory, "output_lags": args.output_lags, "train_size": args.train_size},
    )
    tuning_options = section(doc, "tuning")
    tuning_options.pop("optimizer", None)
    tuning = merge_options(
        TuningSpec,
        tuning_options,
        {
            "method": args.tuning,
            "decouple_gamma": True if args.decouple_gamma else None,
            "optimizer": _optimizer_options(args, doc),
        },
    )
    if args.surrogate:
        train, test = surrogate_records(seed=run.seed or 0)
    else:
        train, test = load_silverbox(args.data_dir)
    report = run_silverbox(train, test, narx, tuning, kernels=tuple(args.kernels.split(",")), seed=run.seed or 0)
    run.prepare_out()
    save_json(run.path("silverbox.json"), report.to_dict())
    write_error_trace_svg(
        run.path("error_trace.svg"),
        report.test_output,
        {k: s.simulation for k, s in report.scores.items()},
        start=report.start,
    )
    print(report.table())
    return EXIT_OK


def _common_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", metavar="PATH", help="JSON configuration file")
    common.add_argument("--seed", type=int, help="random seed (base seed for bench)")
    common.add_argument("--out", default=".", metavar="DIR", help="output directory (default: .)")
    common.add_argument("--threads", type=int, default=1, help="worker threads for bench runs")
    noise = common.add_mutually_exclusive_group()
    noise.add_argument("--quiet", action="store_true", help="only log warnings and errors")
    noise.add_argument("-v", "--verbose", action="store_true", help="log debug messages")
    return common


def _optimizer_flags(parser) -> None:
    parser.add_argument("--max-iters", type=int, help="optimizer iteration budget")
    parser.add_argument("--tol", type=float, help="relative loss change for convergence")
    parser.add_argument("--step", type=float, help="initial step size")
    parser.add_argument("--fix-noise", action="store_true", help="do not tune the noise level")


def build_parser() -> argparse.ArgumentParser:
    common = _common_parser()
    parser = argparse.ArgumentParser(
        prog="mpktools", description="Volterra identification with PK and MPK regularization networks"
    )
    parser.add_argument("--version", action="version", version=f"%(prog)s {__version__}")
    sub = parser.add_subparsers(dest="command", required=True)

    p = sub.add_parser("expand", parents=[common], help="write the penalty table of a kernel")
    p.add_argument("--kernel", choices=KERNEL_KINDS, default="pk")
    p.add_argument("--memory", type=int, help="memory m (input_dim = m + 1)")
    p.add_argument("--degree", type=int, help="polynomial degree r")
    p.add_argument("--params", metavar="JSON", help="MPK parameter file")
    p.set_defaults(func=cmd_expand)

    p = sub.add_parser("fit", parents=[common], help="fit a network on a signal file")
    p.add_argument("--data", required=True, metavar="CSV", help="two-column u,y signal file")
    p.add_argument("--kernel", choices=KERNEL_KINDS, default="mpk")
    p.add_argument("--tuning", choices=("ml", "cv", "fixed"), default="ml")
    p.add_argument("--memory", type=int, default=1)
    p.add_argument("--output-lags", type=int, help="output lags (default: memory, 0 for pure Volterra)")
    p.add_argument("--degree", type=int)
    p.add_argument("--params", metavar="JSON", help="kernel parameter file (initial or fixed)")
    p.add_argument("--noise-std", type=float, help="initial or fixed noise level")
    p.add_argument("--partitions", type=int, default=5, help="cross-validation partitions")
    p.add_argument("--no-normalize", action="store_true", help="do not z-score the regressors")
    _optimizer_flags(p)
    p.set_defaults(func=cmd_fit)

    p = sub.add_parser("predict", parents=[common], help="predict or simulate with a fitted model")
    p.add_argument("--model", required=True, metavar="JSON")
    p.add_argument("--data", required=True, metavar="CSV")
    p.add_argument("--mode", choices=("onestep", "freerun"), default="onestep")
    p.set_defaults(func=cmd_predict)

    p = sub.add_parser("bench", parents=[common], help="run a synthetic Monte Carlo experiment")
    p.add_argument("--experiment", type=int, choices=(1, 2, 3, 4))
    p.add_argument("--runs", type=int)
    p.add_argument("--train-samples", type=int)
    p.add_argument("--test-samples", type=int)
    p.add_argument("--noise-std", type=float)
    p.add_argument("--kernels", help="comma separated kernel kinds")
    _optimizer_flags(p)
    p.set_defaults(func=cmd_bench)

    p = sub.add_parser("silverbox", parents=[common], help="NARX identification on the Silverbox record")
    p.add_argument("--data-dir", metavar="DIR", help="directory with train.csv and test.csv (default: $SILVERBOX_DATA)")
    p.add_argument("--surrogate", action="store_true", help="use the synthetic surrogate record")
    p.add_argument("--tuning", choices=TuningSpec.METHODS)
    p.add_argument("--decouple-gamma", action="store_true")
    p.add_argument("--memory", type=int)
    p.add_argument("--output-lags", type=int)
    p.add_argument("--train-size", type=int)
    p.add_argument("--kernels", default="pk,mpk")
    _optimizer_flags(p)
    p.set_defaults(func=cmd_silverbox)
    return parser


def main(argv: Optional[List[str]] = None) -> int:
    args = build_parser().parse_args(argv)
    verbosity = -1 if args.quiet else (1 if args.verbose else 0)
    setup_logging(verbosity)
    try:
        run = RunConfig(args.command, args.config, args.seed, args.out, args.threads, verbosity)
        return args.func(args, run)
    except GuardExceededError as exc:
        logger.error("%s", exc)
        return EXIT_GUARD
    except (DataError, DimensionError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except NumericalError as exc:
        logger.error("%s", exc)
        return EXIT_NUMERICAL
    except (MpkError, ValueError, OSError) as exc:
        logger.error("%s", exc)
        return EXIT_DATA
    except KeyboardInterrupt:
        logger.warning("interrupted")
        return EXIT_INTERRUPTED


if __name__ == "__main__":
    sys.exit(main())
