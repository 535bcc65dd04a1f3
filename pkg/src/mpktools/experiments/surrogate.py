"""Synthetic stand-in for the Silverbox record.

An explicit discretisation of a lightly damped oscillator with a cubic
stiffening spring::

    z_k = 1.6 z_{k-1} - 0.8 z_{k-2} + 0.1 u_{k-1} - 0.5 z_{k-1}^3

driven by clipped Gaussian noise. The linear part has poles 0.8 +/- 0.4j and
the clipped input keeps |z| well inside the region where the cubic term
cannot destabilise the recursion.
"""
from __future__ import annotations

from typing import Tuple

import numpy as np

from ..volterra import make_rng

A1, A2, B1, C3 = 1.6, -0.8, 0.1, 0.5
INPUT_CLIP = 2.5


def surrogate_step(z1: float, z2: float, u1: float) -> float:
    return A1 * z1 + A2 * z2 + B1 * u1 - C3 * z1**3


def make_surrogate_record(
    n: int, seed: int, input_std: float = 1.0, noise_std: float = 0.0
) -> Tuple[np.ndarray, np.ndarray]:
    """Input and output signals of the cubic NARX surrogate, n samples each."""
    if n < 3:
        raise ValueError(f"surrogate record needs at least 3 samples, got {n}")
    if not input_std > 0:
        raise ValueError(f"input_std must be positive, got {input_std}")
    if noise_std < 0:
        raise ValueError(f"noise_std must be non-negative, got {noise_std}")
    rng = make_rng(seed)
    u = np.clip(rng.normal(0.0, 1.0, n), -INPUT_CLIP, INPUT_CLIP) * input_std
    z = np.zeros(n)
    for k in range(2, n):
        z[k] = surrogate_step(z[k - 1], z[k - 2], u[k - 1])
    if noise_std > 0:
        z = z + rng.normal(0.0, noise_std, n)
    return u, z


def make_surrogate_pair(
    train_samples: int = 1000, test_samples: int = 2000, seed: int = 0
) -> Tuple[Tuple[np.ndarray, np.ndarray], Tuple[np.ndarray, np.ndarray]]:
    """Independent training and test records (seeds ``seed`` and ``seed + 1``)."""
    return make_surrogate_record(train_samples, seed), make_surrogate_record(test_samples, seed + 1)


__all__ = ["make_surrogate_record", "make_surrogate_pair", "surrogate_step"]
