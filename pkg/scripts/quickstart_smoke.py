"""Small smoke test for the Quickstart snippet.

This script assumes the package is importable, e.g. after:

    pip install -e .

It simulates the memory-1 order-3 example system, tunes an MPK network by
marginal likelihood with a short iteration budget and prints the penalty
table of the tuned kernel.
"""

import numpy as np

from mpktools import OptimizerConfig, expand_penalties, fit_percent, identify, predict
from mpktools.volterra import lagged_windows, penalty_example_series, simulate_series

print("Running quickstart smoke test...")

series = penalty_example_series()
rng = np.random.default_rng(0)
data, _ = simulate_series(series, rng.normal(0.0, 1.0, 101), noise_std=0.1, seed=0)

model, theta, report = identify(data, kernel="mpk", tuning="ml", config=OptimizerConfig(max_iters=200))
print(f"tuned in {report.iterations} iterations, NLL {report.loss_trace[0]:.3f} -> {report.final_loss:.3f}")

u_new = rng.normal(0.0, 1.0, 51)
windows = lagged_windows(u_new, 1)
print(f"test Fit% = {fit_percent(series.evaluate(windows), predict(model, windows)):.2f}")

for degrees, value in expand_penalties(theta.kernel(), 2, 3).rows():
    print(f"lambda_{degrees} = {value:.4g}")

print("quickstart smoke test completed successfully")
