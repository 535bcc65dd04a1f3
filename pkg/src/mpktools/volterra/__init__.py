"""mpktools.volterra: truncated Volterra series with finite memory.

A symmetric Volterra series of order r and memory m is written as a linear
model over all distinct monomials of the input window
``[u_k, u_{k-1}, ..., u_{k-m}]`` with total degree up to r. Monomials are
identified by their degree vectors (`MonomialIndex`) and always listed in the
graded lexicographic order returned by `enumerate_monomials`: by total degree
first, then by decreasing exponent of the most recent lag.

The module also holds the benchmark systems used by the experiments, the
seeded noise generator and the Fit% / RMSE metrics.
"""
from __future__ import annotations

import logging
import math
from dataclasses import dataclass, field
from functools import lru_cache
from itertools import combinations_with_replacement
from typing import Dict, List, Mapping, Optional, Sequence, Tuple

import numpy as np

from ..errors import DataError, DimensionError, NumericalError

logger = logging.getLogger(__name__)


@dataclass(frozen=True)
class MonomialIndex:
    """Exponents (d_0, ..., d_m) of the monomial prod_j u_{k-j}^{d_j}."""

    degrees: Tuple[int, ...]

    def __post_init__(self):
        degrees = tuple(int(d) for d in self.degrees)
        if any(d < 0 for d in degrees):
            raise ValueError(f"monomial degrees must be non-negative, got {degrees}")
        object.__setattr__(self, "degrees", degrees)

    @property
    def total_degree(self) -> int:
        return sum(self.degrees)

    def __len__(self) -> int:
        return len(self.degrees)

    def __iter__(self):
        return iter(self.degrees)

    def monomial(self, u) -> float:
        """Evaluate the monomial at the window ``u``."""
        u = np.asarray(u, dtype=np.float64).ravel()
        if u.shape[0] != len(self.degrees):
            raise DimensionError(
                f"window has {u.shape[0]} entries, monomial expects {len(self.degrees)}"
            )
        return float(np.prod(u ** np.asarray(self.degrees)))

    def __str__(self) -> str:
        return "(" + ",".join(str(d) for d in self.degrees) + ")"


def _as_index(key) -> MonomialIndex:
    return key if isinstance(key, MonomialIndex) else MonomialIndex(tuple(key))


@lru_cache(maxsize=64)
def _monomials(n_vars: int, r: int) -> Tuple[MonomialIndex, ...]:
    out = []
    for degree in range(r + 1):
        # combinations_with_replacement walks lag multisets in lex order, which
        # is descending lex order on the resulting degree vectors.
        for lags in combinations_with_replacement(range(n_vars), degree):
            degrees = [0] * n_vars
            for j in lags:
                degrees[j] += 1
            out.append(MonomialIndex(tuple(degrees)))
    return tuple(out)


@lru_cache(maxsize=64)
def _exponents(n_vars: int, r: int) -> np.ndarray:
    exps = np.array([idx.degrees for idx in _monomials(n_vars, r)], dtype=np.int64)
    exps = exps.reshape(-1, n_vars)
    exps.setflags(write=False)
    return exps


def monomial_count(m: int, r: int) -> int:
    """Number of monomials of degree 0..r in m+1 variables, C(m+1+r, r)."""
    if m < 0 or r < 0:
        raise ValueError(f"m and r must be non-negative, got m={m}, r={r}")
    return math.comb(m + 1 + r, r)


def enumerate_monomials(m: int, r: int) -> List[MonomialIndex]:
    """All monomial indices with total degree 0..r over m+1 lags, graded lex order."""
    m = int(m)
    r = int(r)
    if m < 0:
        raise ValueError(f"memory m must be non-negative, got {m}")
    if r < 0:
        raise ValueError(f"order r must be non-negative, got {r}")
    return list(_monomials(m + 1, r))


def exponent_matrix(m: int, r: int) -> np.ndarray:
    """Read-only N x (m+1) matrix whose rows are the degree vectors of `enumerate_monomials`."""
    if m < 0 or r < 0:
        raise ValueError(f"m and r must be non-negative, got m={m}, r={r}")
    return _exponents(int(m) + 1, int(r))


def multinomial_coeff(idx, i: int) -> int:
    """Multinomial coefficient i! / (d_0! ... d_m!) of a degree-i monomial."""
    idx = _as_index(idx)
    if idx.total_degree != i:
        raise ValueError(
            f"monomial {idx} has total degree {idx.total_degree}, expected {i}"
        )
    return math.factorial(i) // math.prod(math.factorial(d) for d in idx.degrees)


def feature_matrix(inputs, r: int) -> np.ndarray:
    """Rows of monomial features for every input row, aligned with `enumerate_monomials`."""
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionError(f"inputs must be a 2D array, got {X.ndim}D")
    exps = _exponents(X.shape[1], int(r))
    return np.prod(X[:, None, :] ** exps[None, :, :], axis=2)


def feature_map(u, m: int, r: int) -> np.ndarray:
    """Volterra feature vector phi(u) of a single window (constant slot first)."""
    u = np.asarray(u, dtype=np.float64).ravel()
    if u.shape[0] != m + 1:
        raise DimensionError(f"window must have m+1={m + 1} entries, got {u.shape[0]}")
    return feature_matrix(u[None, :], r)[0]


def lagged_windows(u_signal, m: int) -> np.ndarray:
    """Regressor windows ``[u_k, ..., u_{k-m}]`` for k = m .. len-1.

    The first m samples have no complete history and are dropped.
    """
    u = np.asarray(u_signal, dtype=np.float64).ravel()
    if m < 0:
        raise ValueError(f"memory m must be non-negative, got {m}")
    if u.shape[0] < m + 1:
        raise DimensionError(f"signal has {u.shape[0]} samples, memory {m} needs at least {m + 1}")
    return np.lib.stride_tricks.sliding_window_view(u, m + 1)[:, ::-1].copy()


def make_rng(seed: int) -> np.random.Generator:
    """Counter-based generator, identical streams for identical seeds on every platform."""
    seed = int(seed)
    if seed < 0:
        raise ValueError(f"seed must be non-negative, got {seed}")
    return np.random.Generator(np.random.Philox(seed))


@dataclass(frozen=True)
class VolterraSeries:
    """Symmetric Volterra series given by its scaled monomial weights.

    ``coeffs`` maps each monomial index (1 <= total degree <= order) to the
    weight w of that monomial, i.e. the h_i value already multiplied by the
    multinomial coefficient.
    """

    order: int
    memory: int
    h0: float = 0.0
    coeffs: Mapping[MonomialIndex, float] = field(default_factory=dict)

    def __post_init__(self):
        if int(self.order) < 1:
            raise ValueError(f"order must be >= 1, got {self.order}")
        if int(self.memory) < 0:
            raise ValueError(f"memory must be >= 0, got {self.memory}")
        object.__setattr__(self, "order", int(self.order))
        object.__setattr__(self, "memory", int(self.memory))
        object.__setattr__(self, "h0", float(self.h0))
        coeffs: Dict[MonomialIndex, float] = {}
        for key, value in dict(self.coeffs).items():
            idx = _as_index(key)
            if len(idx) != self.memory + 1:
                raise DimensionError(
                    f"monomial {idx} has {len(idx)} lags, memory {self.memory} needs {self.memory + 1}"
                )
            if not 1 <= idx.total_degree <= self.order:
                raise ValueError(
                    f"monomial {idx} has total degree {idx.total_degree}, allowed 1..{self.order}"
                )
            coeffs[idx] = coeffs.get(idx, 0.0) + float(value)
        object.__setattr__(self, "coeffs", coeffs)

    @property
    def n_features(self) -> int:
        return monomial_count(self.memory, self.order)

    def weights(self) -> np.ndarray:
        """Weight vector aligned with `enumerate_monomials`; entry 0 is h0."""
        w = np.zeros(self.n_features)
        w[0] = self.h0
        for pos, idx in enumerate(enumerate_monomials(self.memory, self.order)):
            if idx in self.coeffs:
                w[pos] = self.coeffs[idx]
        return w

    def evaluate(self, windows) -> np.ndarray:
        """Noiseless outputs z for each window row."""
        X = np.asarray(windows, dtype=np.float64)
        if X.ndim == 1:
            X = X[None, :]
        if X.shape[1] != self.memory + 1:
            raise DimensionError(
                f"windows have {X.shape[1]} columns, memory {self.memory} needs {self.memory + 1}"
            )
        return feature_matrix(X, self.order) @ self.weights()

    def to_dict(self) -> dict:
        terms = [
            {"degrees": list(idx.degrees), "coeff": value}
            for idx, value in sorted(self.coeffs.items(), key=lambda kv: _order_key(kv[0]))
        ]
        return {"r": self.order, "m": self.memory, "h0": self.h0, "terms": terms}

    @classmethod
    def from_dict(cls, doc: Mapping) -> "VolterraSeries":
        try:
            r = int(doc["r"])
            m = int(doc["m"])
            h0 = float(doc.get("h0", 0.0))
            coeffs = {}
            for term in doc.get("terms", []):
                idx = MonomialIndex(tuple(term["degrees"]))
                coeffs[idx] = coeffs.get(idx, 0.0) + float(term["coeff"])
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid Volterra series document: {exc}") from exc
        return cls(order=r, memory=m, h0=h0, coeffs=coeffs)


def _order_key(idx: MonomialIndex):
    return (idx.total_degree, tuple(-d for d in idx.degrees))


@dataclass(frozen=True, eq=False)
class Normalization:
    """Per-column affine map (x - mean) / std applied to regression inputs.

    ``output_mean`` and ``output_std`` standardize the outputs the same way;
    the defaults (0, 1) leave outputs untouched.
    """

    mean: np.ndarray
    std: np.ndarray
    output_mean: float = 0.0
    output_std: float = 1.0

    def __post_init__(self):
        mean = np.asarray(self.mean, dtype=np.float64).ravel()
        std = np.asarray(self.std, dtype=np.float64).ravel()
        if mean.shape != std.shape:
            raise DimensionError(f"mean has {mean.shape[0]} entries, std has {std.shape[0]}")
        if np.any(~(std > 0)) or not float(self.output_std) > 0:
            raise ValueError("normalization std entries must be strictly positive")
        object.__setattr__(self, "mean", mean)
        object.__setattr__(self, "std", std)
        object.__setattr__(self, "output_mean", float(self.output_mean))
        object.__setattr__(self, "output_std", float(self.output_std))

    @classmethod
    def fit(cls, inputs, outputs=None) -> "Normalization":
        """Column statistics of ``inputs``; output statistics too when ``outputs`` is given."""
        X = np.asarray(inputs, dtype=np.float64)
        std = X.std(axis=0)
        std[std == 0] = 1.0
        if outputs is None:
            return cls(mean=X.mean(axis=0), std=std)
        y = np.asarray(outputs, dtype=np.float64).ravel()
        y_std = float(y.std())
        return cls(
            mean=X.mean(axis=0),
            std=std,
            output_mean=float(y.mean()),
            output_std=y_std if y_std > 0 else 1.0,
        )

    @property
    def scales_outputs(self) -> bool:
        return self.output_mean != 0.0 or self.output_std != 1.0

    def apply(self, inputs) -> np.ndarray:
        X = np.asarray(inputs, dtype=np.float64)
        if X.shape[-1] != self.mean.shape[0]:
            raise DimensionError(
                f"inputs have {X.shape[-1]} columns, normalization has {self.mean.shape[0]}"
            )
        return (X - self.mean) / self.std

    def apply_outputs(self, outputs) -> np.ndarray:
        return (np.asarray(outputs, dtype=np.float64) - self.output_mean) / self.output_std

    def invert_outputs(self, outputs) -> np.ndarray:
        return np.asarray(outputs, dtype=np.float64) * self.output_std + self.output_mean

    def to_dict(self) -> dict:
        return {
            "mean": self.mean.tolist(),
            "std": self.std.tolist(),
            "output_mean": self.output_mean,
            "output_std": self.output_std,
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "Normalization":
        return cls(
            mean=doc["mean"],
            std=doc["std"],
            output_mean=doc.get("output_mean", 0.0),
            output_std=doc.get("output_std", 1.0),
        )


@dataclass(frozen=True, eq=False)
class Dataset:
    """Regression inputs (T x d), outputs (T,) and an optional input normalization."""

    inputs: np.ndarray
    outputs: np.ndarray
    normalization: Optional[Normalization] = None

    def __post_init__(self):
        X = np.asarray(self.inputs, dtype=np.float64)
        if X.ndim == 1:
            X = X[:, None]
        if X.ndim != 2:
            raise DimensionError(f"inputs must be a 2D array, got {X.ndim}D")
        y = np.asarray(self.outputs, dtype=np.float64).ravel()
        if X.shape[0] != y.shape[0]:
            raise DimensionError(f"{X.shape[0]} input rows but {y.shape[0]} outputs")
        if self.normalization is not None and self.normalization.mean.shape[0] != X.shape[1]:
            raise DimensionError("normalization does not match the input dimension")
        object.__setattr__(self, "inputs", X)
        object.__setattr__(self, "outputs", y)

    @property
    def size(self) -> int:
        return self.inputs.shape[0]

    @property
    def input_dim(self) -> int:
        return self.inputs.shape[1]

    def with_normalization(
        self, normalization: Optional[Normalization] = None, outputs: bool = False
    ) -> "Dataset":
        """Copy with z-scoring enabled, fitted on this data unless one is given.

        With ``outputs=True`` the fitted record also standardizes the outputs.
        """
        if normalization is None:
            normalization = Normalization.fit(self.inputs, self.outputs if outputs else None)
        return Dataset(self.inputs, self.outputs, normalization)

    def scaled_inputs(self) -> np.ndarray:
        if self.normalization is None:
            return self.inputs
        return self.normalization.apply(self.inputs)

    def scaled_outputs(self) -> np.ndarray:
        """Outputs in the units the kernel is fitted in."""
        if self.normalization is None or not self.normalization.scales_outputs:
            return self.outputs
        return self.normalization.apply_outputs(self.outputs)

    def subset(self, rows: Sequence[int]) -> "Dataset":
        rows = np.asarray(rows, dtype=np.int64)
        return Dataset(self.inputs[rows], self.outputs[rows], self.normalization)


def simulate_series(series: VolterraSeries, u_signal, noise_std: float, seed: int):
    """Simulate a Volterra series on an input signal.

    Returns ``(dataset, z)`` where the dataset holds the windows and the noisy
    outputs ``y_k = z_k + e_k`` with e_k ~ N(0, noise_std^2) drawn from the
    seeded generator, and ``z`` is the noiseless output.
    """
    if noise_std < 0:
        raise ValueError(f"noise_std must be non-negative, got {noise_std}")
    windows = lagged_windows(u_signal, series.memory)
    z = series.evaluate(windows)
    rng = make_rng(seed)
    if noise_std > 0:
        y = z + rng.normal(0.0, noise_std, size=z.shape[0])
    else:
        y = z.copy()
    return Dataset(windows, y), z


SPL_MEMORY = 6
SPL_ORDER = 3


def spl_output(window) -> float:
    """Third order benchmark system with memory 6, evaluated on one window."""
    u = np.asarray(window, dtype=np.float64).ravel()
    if u.shape[0] != SPL_MEMORY + 1:
        raise DimensionError(f"benchmark window must have 7 entries, got {u.shape[0]}")
    return float(spl_outputs(u[None, :])[0])


def spl_outputs(windows) -> np.ndarray:
    """Vectorised `spl_output` over window rows."""
    W = np.asarray(windows, dtype=np.float64)
    if W.ndim != 2 or W.shape[1] != SPL_MEMORY + 1:
        raise DimensionError(f"benchmark windows must be T x 7, got shape {W.shape}")
    u0, u1, u2, u3, u4, u5, u6 = W.T
    return (
        u0
        + 0.6 * u1
        + 0.35 * (u2 + u4)
        - 0.25 * u3**2
        + 0.2 * (u5 + u6)
        + 0.9 * u3
        + 0.25 * u0 * u1
        + 0.75 * u2**3
        - u1 * u2
        + 0.5 * (u0**2 + u0 * u2 + u1 * u3)
    )


def _term(n_lags: int, *lags: int) -> MonomialIndex:
    degrees = [0] * n_lags
    for j in lags:
        degrees[j] += 1
    return MonomialIndex(tuple(degrees))


def spl_series() -> VolterraSeries:
    """The memory-6 benchmark as an explicit `VolterraSeries`."""
    n = SPL_MEMORY + 1
    coeffs = {
        _term(n, 0): 1.0,
        _term(n, 1): 0.6,
        _term(n, 2): 0.35,
        _term(n, 4): 0.35,
        _term(n, 3, 3): -0.25,
        _term(n, 5): 0.2,
        _term(n, 6): 0.2,
        _term(n, 3): 0.9,
        _term(n, 0, 1): 0.25,
        _term(n, 2, 2, 2): 0.75,
        _term(n, 1, 2): -1.0,
        _term(n, 0, 0): 0.5,
        _term(n, 0, 2): 0.5,
        _term(n, 1, 3): 0.5,
    }
    return VolterraSeries(order=SPL_ORDER, memory=SPL_MEMORY, h0=0.0, coeffs=coeffs)


def penalty_example_series() -> VolterraSeries:
    """u_k^3 + u_k^2 u_{k-1} + 0.5, the order-3 memory-1 penalty example."""
    return VolterraSeries(order=3, memory=1, h0=0.5, coeffs={(3, 0): 1.0, (2, 1): 1.0})


def fit_percent(z, zhat) -> float:
    """Fit% = 100 (1 - ||z - zhat||_1 / ||z - mean(z)||_1); negative for poor fits."""
    z = np.asarray(z, dtype=np.float64).ravel()
    zhat = np.asarray(zhat, dtype=np.float64).ravel()
    if z.shape != zhat.shape:
        raise DimensionError(f"z has {z.shape[0]} samples, zhat has {zhat.shape[0]}")
    if z.shape[0] < 2:
        raise DimensionError("Fit% needs at least 2 samples")
    denom = np.abs(z - z.mean()).sum()
    if denom == 0:
        raise NumericalError("Fit% is undefined for a constant reference output")
    return float(100.0 * (1.0 - np.abs(z - zhat).sum() / denom))


def rmse(z, zhat) -> float:
    """Root mean squared error between two equal-length vectors."""
    z = np.asarray(z, dtype=np.float64).ravel()
    zhat = np.asarray(zhat, dtype=np.float64).ravel()
    if z.shape != zhat.shape:
        raise DimensionError(f"z has {z.shape[0]} samples, zhat has {zhat.shape[0]}")
    if z.shape[0] == 0:
        raise DimensionError("RMSE of empty vectors is undefined")
    return float(np.sqrt(np.mean((z - zhat) ** 2)))


__all__ = [
    "MonomialIndex",
    "VolterraSeries",
    "Normalization",
    "Dataset",
    "monomial_count",
    "enumerate_monomials",
    "exponent_matrix",
    "multinomial_coeff",
    "feature_matrix",
    "feature_map",
    "lagged_windows",
    "make_rng",
    "simulate_series",
    "spl_output",
    "spl_outputs",
    "spl_series",
    "penalty_example_series",
    "fit_percent",
    "rmse",
]
