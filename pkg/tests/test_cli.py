"""Tests for the mpktools command line."""
import json
import os

import numpy as np
import pytest

from mpktools.cli import EXIT_DATA, EXIT_GUARD, EXIT_OK, build_parser, main

DATA = os.path.join(os.path.dirname(__file__), "data", "tiny.csv")


def read_csv_columns(path):
    return np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)


class TestExpand:
    """mpktools expand."""

    def test_pk_table(self, tmp_path, capsys):
        code = main(["expand", "--kernel", "pk", "--memory", "1", "--degree", "3", "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "lambda_{1,1} = 6" in out
        assert "lambda_{3,0} = 1" in out
        assert len(out.splitlines()) == 10
        lines = (tmp_path / "penalties.csv").read_text().splitlines()
        assert lines[0] == "d_0,d_1,lambda"

    def test_mpk_params(self, tmp_path, capsys):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"offsets": [1, 1, 1], "increments": [[0, 1], [0, 0], [1, 0]]}))
        code = main(["expand", "--kernel", "mpk", "--params", str(params), "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_OK
        out = capsys.readouterr().out
        assert "lambda_{2,0} = 3" in out
        assert "lambda_{0,3} = 0" in out

    def test_mpk_sigmas(self, tmp_path, capsys):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"offsets": [1, 1, 1], "sigmas": [[1, 1], [1, 0], [1, 0]]}))
        assert main(["expand", "--params", str(params), "--out", str(tmp_path), "--quiet"]) == EXIT_OK
        assert "lambda_{2,1} = 1" in capsys.readouterr().out

    def test_guard(self, tmp_path):
        code = main(["expand", "--kernel", "pk", "--memory", "99", "--degree", "4", "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_GUARD
        assert not (tmp_path / "penalties.csv").exists()

    def test_bad_params_file(self, tmp_path):
        params = tmp_path / "params.json"
        params.write_text("{not json")
        assert main(["expand", "--params", str(params), "--out", str(tmp_path), "--quiet"]) == EXIT_DATA


def fit_args(out, *extra):
    return ["fit", "--data", DATA, "--memory", "1", "--out", str(out), "--max-iters", "20", "--quiet", *extra]


class TestFitPredict:
    """mpktools fit / predict on a small signal file."""

    def test_fit_writes_model_and_report(self, tmp_path):
        assert main(fit_args(tmp_path)) == EXIT_OK
        model = json.loads((tmp_path / "model.json").read_text())
        assert model["metadata"]["memory"] == 1
        assert model["kernel"]["kind"] == "mpk"
        report = json.loads((tmp_path / "optimizer.json").read_text())
        assert report["objective"] == "nll"
        assert report["config"]["max_iters"] == 20
        assert report["iterations"] <= 20
        assert report["hyperparameters"]["kind"] == "mpk"

    def test_fit_is_deterministic(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        for out in (a, b):
            assert main(fit_args(out, "--tuning", "cv", "--partitions", "2", "--seed", "3")) == EXIT_OK
        assert (a / "model.json").read_bytes() == (b / "model.json").read_bytes()
        assert (a / "optimizer.json").read_bytes() == (b / "optimizer.json").read_bytes()

    def test_fixed_tuning_with_params(self, tmp_path):
        params = tmp_path / "params.json"
        params.write_text(json.dumps({"kind": "pk", "r": 2}))
        args = fit_args(tmp_path, "--kernel", "pk", "--tuning", "fixed", "--params", str(params), "--noise-std", "0.1")
        assert main(args) == EXIT_OK
        report = json.loads((tmp_path / "optimizer.json").read_text())
        assert report["objective"] == "fixed" and report["iterations"] == 0
        assert report["hyperparameters"]["noise_std"] == pytest.approx(0.1)

    def test_predict_onestep(self, tmp_path):
        assert main(fit_args(tmp_path)) == EXIT_OK
        out = tmp_path / "pred"
        code = main(["predict", "--model", str(tmp_path / "model.json"), "--data", DATA, "--out", str(out), "--quiet"])
        assert code == EXIT_OK
        table = read_csv_columns(out / "predictions.csv")
        assert table.shape == (19, 3)
        assert table[0, 0] == 1
        metrics = json.loads((out / "metrics.json").read_text())
        assert metrics["mode"] == "onestep" and metrics["samples"] == 19
        assert metrics["fit"] > 50.0

    def test_freerun_equals_onestep_without_output_lags(self, tmp_path):
        assert main(fit_args(tmp_path, "--output-lags", "0")) == EXIT_OK
        tables = {}
        for mode in ("onestep", "freerun"):
            out = tmp_path / mode
            args = ["predict", "--model", str(tmp_path / "model.json"), "--data", DATA, "--mode", mode]
            assert main(args + ["--out", str(out), "--quiet"]) == EXIT_OK
            tables[mode] = read_csv_columns(out / "predictions.csv")
        np.testing.assert_allclose(tables["freerun"], tables["onestep"], rtol=1e-12, atol=1e-12)

    def test_missing_model(self, tmp_path):
        code = main(["predict", "--model", str(tmp_path / "nope.json"), "--data", DATA, "--out", str(tmp_path), "--quiet"])
        assert code == EXIT_DATA

    def test_missing_data(self, tmp_path):
        assert main(["fit", "--data", str(tmp_path / "nope.csv"), "--out", str(tmp_path), "--quiet"]) == EXIT_DATA

    def test_bad_config_option(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"optimizer": {"max_iter": 3}}))
        assert main(fit_args(tmp_path, "--config", str(config))) == EXIT_DATA

    def test_config_file_used_when_flag_absent(self, tmp_path):
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"optimizer": {"max_iters": 2, "tol": 0.0}}))
        args = ["fit", "--data", DATA, "--out", str(tmp_path), "--config", str(config), "--quiet"]
        assert main(args) == EXIT_OK
        report = json.loads((tmp_path / "optimizer.json").read_text())
        assert report["config"]["max_iters"] == 2
        assert report["iterations"] <= 2


class TestBench:
    """mpktools bench."""

    def bench(self, out, *extra):
        args = [
            "bench", "--runs", "1", "--train-samples", "40", "--test-samples", "20",
            "--max-iters", "2", "--out", str(out), "--quiet", *extra,
        ]
        return main(args)

    def test_writes_report_files(self, tmp_path, capsys):
        assert self.bench(tmp_path, "--experiment", "1") == EXIT_OK
        for name in ("report.csv", "summary.json", "boxplot.svg"):
            assert (tmp_path / name).exists()
        assert "median test Fit%" in capsys.readouterr().out
        lines = (tmp_path / "report.csv").read_text().splitlines()
        assert len(lines) == 3

    def test_config_echo(self, tmp_path):
        assert self.bench(tmp_path, "--experiment", "2", "--seed", "9", "--kernels", "mpk") == EXIT_OK
        summary = json.loads((tmp_path / "summary.json").read_text())
        config = summary["config"]
        assert config["experiment_id"] == 2
        assert config["train_std"] == 2.0 and config["test_std"] == 2.0
        assert config["base_seed"] == 9
        assert config["kernels"] == ["mpk"]
        assert config["optimizer"]["max_iters"] == 2

    def test_reproducible(self, tmp_path):
        a, b = tmp_path / "a", tmp_path / "b"
        assert self.bench(a, "--experiment", "3") == EXIT_OK
        assert self.bench(b, "--experiment", "3", "--threads", "2") == EXIT_OK
        assert (a / "report.csv").read_bytes() == (b / "report.csv").read_bytes()
        assert (a / "boxplot.svg").read_bytes() == (b / "boxplot.svg").read_bytes()

    def test_bad_kernel_list(self, tmp_path):
        assert self.bench(tmp_path, "--kernels", "rbf") == EXIT_DATA


class TestParser:
    """Argument parsing."""

    def test_subcommand_required(self):
        with pytest.raises(SystemExit):
            build_parser().parse_args([])

    def test_negative_seed(self, tmp_path):
        assert main(["expand", "--seed", "-1", "--out", str(tmp_path), "--quiet"]) == EXIT_DATA

    def test_silverbox_surrogate(self, tmp_path, capsys):
        args = [
            "silverbox", "--surrogate", "--memory", "1", "--train-size", "60", "--kernels", "mpk",
            "--max-iters", "3", "--out", str(tmp_path), "--quiet",
        ]
        config = tmp_path / "config.json"
        config.write_text(json.dumps({"narx": {"partitions": 1, "partition_size": 30}}))
        assert main(args + ["--config", str(config)]) == EXIT_OK
        doc = json.loads((tmp_path / "silverbox.json").read_text())
        assert doc["config"]["narx"]["memory"] == 1
        assert "mpk" in doc["scores"]
        assert (tmp_path / "error_trace.svg").exists()
        assert "MPK" in capsys.readouterr().out
