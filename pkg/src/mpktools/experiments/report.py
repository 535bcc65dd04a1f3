"""Per-run records, aggregates and report files for the Monte Carlo harness."""
from __future__ import annotations

import csv
import logging
import math
from dataclasses import asdict, dataclass, field, fields
from typing import Dict, List, Mapping, Optional, Sequence

import numpy as np
from matplotlib import rc_context
from matplotlib.figure import Figure

from ..io import save_json

logger = logging.getLogger(__name__)

SVG_RC = {"svg.hashsalt": "mpktools", "svg.fonttype": "path"}


@dataclass
class RunRecord:
    run: int
    seed: int
    kernel: str
    train_fit: float = math.nan
    test_fit: float = math.nan
    test_rmse: float = math.nan
    iterations: int = 0
    final_loss: float = math.nan
    converged: bool = False
    error: str = ""

    @property
    def ok(self) -> bool:
        return not self.error and math.isfinite(self.test_fit)

    def to_dict(self) -> dict:
        return asdict(self)


CSV_FIELDS = [f.name for f in fields(RunRecord)]


def _five_numbers(values: Sequence[float]) -> dict:
    v = np.asarray([x for x in values if math.isfinite(x)], dtype=np.float64)
    if v.size == 0:
        return {"n": 0, "median": None, "q1": None, "q3": None, "min": None, "max": None}
    q1, median, q3 = np.percentile(v, [25.0, 50.0, 75.0])
    return {
        "n": int(v.size),
        "median": float(median),
        "q1": float(q1),
        "q3": float(q3),
        "min": float(v.min()),
        "max": float(v.max()),
    }


@dataclass
class ExperimentReport:
    """Records of a synthetic experiment, in run order then kernel order."""

    config: Mapping
    records: List[RunRecord] = field(default_factory=list)

    def kernels(self) -> List[str]:
        seen: List[str] = []
        for rec in self.records:
            if rec.kernel not in seen:
                seen.append(rec.kernel)
        return seen

    def test_fits(self, kernel: str) -> List[float]:
        return [rec.test_fit for rec in self.records if rec.kernel == kernel]

    @property
    def failures(self) -> int:
        return sum(1 for rec in self.records if not rec.ok)

    def aggregate(self) -> Dict[str, dict]:
        """Five-number summary of test Fit% per kernel over the successful runs."""
        return {kernel: _five_numbers(self.test_fits(kernel)) for kernel in self.kernels()}

    def summary(self) -> dict:
        return {
            "config": dict(self.config),
            "records": len(self.records),
            "failures": self.failures,
            "aggregate": self.aggregate(),
        }

    def to_csv(self, path) -> None:
        with open(path, "w", encoding="utf8", newline="") as fh:
            writer = csv.DictWriter(fh, fieldnames=CSV_FIELDS, lineterminator="\n")
            writer.writeheader()
            for rec in self.records:
                row = rec.to_dict()
                for key, value in row.items():
                    if isinstance(value, float):
                        row[key] = repr(value)
                writer.writerow(row)

    def to_json(self, path) -> None:
        save_json(path, self.summary())


def read_records_csv(path) -> List[RunRecord]:
    """Records back from `ExperimentReport.to_csv`."""
    casts = {f.name: f.type for f in fields(RunRecord)}
    out = []
    with open(path, "r", encoding="utf8", newline="") as fh:
        for row in csv.DictReader(fh):
            values = {}
            for key, text in row.items():
                kind = casts[key]
                if kind in ("int", int):
                    values[key] = int(text)
                elif kind in ("float", float):
                    values[key] = float(text)
                elif kind in ("bool", bool):
                    values[key] = text == "True"
                else:
                    values[key] = text
            out.append(RunRecord(**values))
    return out


def write_boxplot_svg(path, report: ExperimentReport, title: Optional[str] = None) -> None:
    """Boxplot of test Fit% per kernel; failed runs are left out."""
    kernels = report.kernels()
    data = [np.asarray([x for x in report.test_fits(k) if math.isfinite(x)]) for k in kernels]
    with rc_context(SVG_RC):
        fig = Figure(figsize=(4.0, 4.0))
        ax = fig.add_subplot(1, 1, 1)
        positions = list(range(1, len(kernels) + 1))
        ax.boxplot(data, positions=positions, whis=1.5)
        ax.set_xticks(positions)
        ax.set_xticklabels([k.upper() for k in kernels])
        ax.set_ylabel("test Fit%")
        ax.grid(True, axis="y", alpha=0.3)
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.debug("wrote boxplot %s", path)


def write_error_trace_svg(path, z, simulations: Mapping[str, np.ndarray], start: int = 0, title: Optional[str] = None) -> None:
    """Measured test output and the free-run simulation error of each model."""
    z = np.asarray(z, dtype=np.float64).ravel()
    k = np.arange(z.shape[0])
    with rc_context(SVG_RC):
        fig = Figure(figsize=(8.0, 4.0))
        ax = fig.add_subplot(1, 1, 1)
        ax.plot(k[start:], z[start:], color="0.6", lw=0.6, label="output")
        for name, zhat in simulations.items():
            zhat = np.asarray(zhat, dtype=np.float64).ravel()
            n = min(zhat.shape[0], z.shape[0])
            ax.plot(k[start:n], z[start:n] - zhat[start:n], lw=0.6, label=f"{name.upper()} error")
        ax.set_xlabel("sample")
        ax.set_ylabel("output / simulation error")
        ax.legend(loc="upper right", fontsize="small")
        if title:
            ax.set_title(title)
        fig.tight_layout()
        fig.savefig(path, format="svg", metadata={"Date": None})
    logger.debug("wrote error trace %s", path)


__all__ = [
    "RunRecord",
    "ExperimentReport",
    "CSV_FIELDS",
    "read_records_csv",
    "write_boxplot_svg",
    "write_error_trace_svg",
]
