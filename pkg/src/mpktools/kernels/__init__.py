"""mpktools.kernels: polynomial kernels for Volterra regularization networks.

Two kernels are provided:

- `PkParams`: the inhomogeneous polynomial kernel ``(1 + u^T v)^r``.
- `MpkParams`: the multiplicative polynomial kernel
  ``prod_i (sigma0_i + u^T Sigma_i v)`` with diagonal ``Sigma_i``.

MPK hyperparameters are stored raw and unconstrained. Every derived quantity
is the square of its raw value, so it is non-negative and can reach exactly
zero. The diagonals are built backwards, ``Sigma_r = diag(a_r)`` and
``Sigma_i = Sigma_{i+1} + diag(a_i)``, which makes them non-increasing in i.

Gram assembly is vectorised with numpy. `mpk_gram_vjp` contracts the
derivative of a kernel matrix against a weight matrix, which is all the
hyperparameter gradients need.
"""
from __future__ import annotations

import logging
from dataclasses import dataclass
from typing import ClassVar, Mapping, Optional, Tuple, Union

import numpy as np

from ..errors import DataError, DimensionError, NumericalError

logger = logging.getLogger(__name__)

KERNEL_KINDS = ("pk", "mpk")


@dataclass(frozen=True)
class PkParams:
    """Inhomogeneous polynomial kernel of degree r."""

    degree: int
    kind: ClassVar[str] = "pk"

    def __post_init__(self):
        if int(self.degree) < 1:
            raise ValueError(f"kernel degree must be >= 1, got {self.degree}")
        object.__setattr__(self, "degree", int(self.degree))

    def to_dict(self) -> dict:
        return {"kind": self.kind, "r": self.degree}


@dataclass(frozen=True, eq=False)
class MpkParams:
    """Raw MPK hyperparameters.

    ``raw_offsets`` has one entry per factor (sigma0_i = raw^2) and
    ``raw_increments`` is r x d (a_ij = raw^2).
    """

    degree: int
    input_dim: int
    raw_offsets: np.ndarray
    raw_increments: np.ndarray
    kind: ClassVar[str] = "mpk"

    def __post_init__(self):
        r = int(self.degree)
        d = int(self.input_dim)
        if r < 1:
            raise ValueError(f"kernel degree must be >= 1, got {r}")
        if d < 1:
            raise ValueError(f"input_dim must be >= 1, got {d}")
        offsets = np.array(self.raw_offsets, dtype=np.float64).ravel()
        increments = np.array(self.raw_increments, dtype=np.float64)
        if offsets.shape != (r,):
            raise DimensionError(f"raw_offsets must have {r} entries, got {offsets.shape[0]}")
        if increments.shape != (r, d):
            raise DimensionError(
                f"raw_increments must have shape ({r}, {d}), got {increments.shape}"
            )
        offsets.setflags(write=False)
        increments.setflags(write=False)
        object.__setattr__(self, "degree", r)
        object.__setattr__(self, "input_dim", d)
        object.__setattr__(self, "raw_offsets", offsets)
        object.__setattr__(self, "raw_increments", increments)

    @property
    def n_params(self) -> int:
        return self.degree * (1 + self.input_dim)

    @property
    def offsets(self) -> np.ndarray:
        return self.raw_offsets**2

    @property
    def increments(self) -> np.ndarray:
        return self.raw_increments**2

    @classmethod
    def from_derived(cls, offsets, increments) -> "MpkParams":
        """Build from non-negative offsets sigma0_i and increments a_ij."""
        offsets = np.asarray(offsets, dtype=np.float64)
        increments = np.atleast_2d(np.asarray(increments, dtype=np.float64))
        if np.any(offsets < 0) or np.any(increments < 0):
            raise ValueError("MPK offsets and increments must be non-negative")
        return cls(
            degree=increments.shape[0],
            input_dim=increments.shape[1],
            raw_offsets=np.sqrt(offsets),
            raw_increments=np.sqrt(increments),
        )

    @classmethod
    def from_sigmas(cls, offsets, sigmas) -> "MpkParams":
        """Build from offsets and the Sigma_i diagonals (rows), inverting the backward sums."""
        sigmas = np.atleast_2d(np.asarray(sigmas, dtype=np.float64))
        increments = sigmas.copy()
        increments[:-1] -= sigmas[1:]
        if np.any(increments < 0):
            raise ValueError("Sigma_i diagonals must be non-increasing in i")
        return cls.from_derived(offsets, increments)

    @classmethod
    def initial(cls, degree: int, input_dim: int, value: Optional[float] = None) -> "MpkParams":
        """All derived offsets and increments equal to ``value`` (default 1/(r d))."""
        if value is None:
            value = 1.0 / (degree * input_dim)
        return cls.from_derived(
            np.full(degree, float(value)), np.full((degree, input_dim), float(value))
        )

    def to_dict(self) -> dict:
        return {
            "kind": self.kind,
            "r": self.degree,
            "d": self.input_dim,
            "raw_offsets": self.raw_offsets.tolist(),
            "raw_increments": self.raw_increments.tolist(),
        }

    @classmethod
    def from_dict(cls, doc: Mapping) -> "MpkParams":
        try:
            return cls(
                degree=int(doc["r"]),
                input_dim=int(doc["d"]),
                raw_offsets=doc["raw_offsets"],
                raw_increments=doc["raw_increments"],
            )
        except (KeyError, TypeError) as exc:
            raise DataError(f"invalid MPK parameter document: {exc}") from exc


KernelParams = Union[PkParams, MpkParams]


def kernel_to_dict(kernel: KernelParams) -> dict:
    return kernel.to_dict()


def kernel_from_dict(doc: Mapping) -> KernelParams:
    """Inverse of `kernel_to_dict`; documents without ``kind`` are read as MPK."""
    kind = doc.get("kind", "mpk" if "raw_offsets" in doc else None)
    if kind == "pk":
        try:
            return PkParams(int(doc["r"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise DataError(f"invalid PK parameter document: {exc}") from exc
    if kind == "mpk":
        return MpkParams.from_dict(doc)
    raise DataError(f"unknown kernel kind {kind!r}, expected one of {KERNEL_KINDS}")


def derive_sigmas(params: MpkParams) -> Tuple[np.ndarray, np.ndarray]:
    """Offsets sigma0 (r,) and the Sigma_i diagonals as an r x d array."""
    increments = params.increments
    sigmas = np.cumsum(increments[::-1], axis=0)[::-1]
    return params.offsets, np.ascontiguousarray(sigmas)


def _pair(u, v):
    u = np.asarray(u, dtype=np.float64).ravel()
    v = np.asarray(v, dtype=np.float64).ravel()
    if u.shape != v.shape:
        raise DimensionError(f"inputs have different dimensions: {u.shape[0]} and {v.shape[0]}")
    return u, v


def pk_eval(u, v, params: PkParams) -> float:
    """(1 + u^T v)^r"""
    u, v = _pair(u, v)
    return float((1.0 + u @ v) ** params.degree)


def mpk_eval(u, v, params: MpkParams) -> float:
    """prod_i (sigma0_i + u^T Sigma_i v)"""
    u, v = _pair(u, v)
    if u.shape[0] != params.input_dim:
        raise DimensionError(f"inputs have dimension {u.shape[0]}, kernel expects {params.input_dim}")
    offsets, sigmas = derive_sigmas(params)
    return float(np.prod(offsets + sigmas @ (u * v)))


def kernel_eval(u, v, kernel: KernelParams) -> float:
    if isinstance(kernel, MpkParams):
        return mpk_eval(u, v, kernel)
    return pk_eval(u, v, kernel)


def _as_matrix(inputs, name: str) -> np.ndarray:
    X = np.asarray(inputs, dtype=np.float64)
    if X.ndim == 1:
        X = X[None, :]
    if X.ndim != 2:
        raise DimensionError(f"{name} must be a 2D array, got {X.ndim}D")
    return X


def _mpk_factors(A: np.ndarray, B: np.ndarray, params: MpkParams) -> np.ndarray:
    offsets, sigmas = derive_sigmas(params)
    return np.stack([offsets[i] + (A * sigmas[i]) @ B.T for i in range(params.degree)])


def _check_finite(K: np.ndarray) -> None:
    bad = ~np.isfinite(K)
    if bad.any():
        rows = np.unique(np.nonzero(bad)[0])
        raise NumericalError("kernel matrix has non-finite entries", rows=rows)


def build_cross(inputs_a, inputs_b, kernel: KernelParams) -> np.ndarray:
    """Kernel matrix with entries k(a_i, b_j)."""
    A = _as_matrix(inputs_a, "inputs_a")
    B = _as_matrix(inputs_b, "inputs_b")
    if A.shape[1] != B.shape[1]:
        raise DimensionError(f"inputs have {A.shape[1]} and {B.shape[1]} columns")
    if isinstance(kernel, MpkParams):
        if A.shape[1] != kernel.input_dim:
            raise DimensionError(
                f"inputs have dimension {A.shape[1]}, kernel expects {kernel.input_dim}"
            )
        K = np.prod(_mpk_factors(A, B, kernel), axis=0)
    else:
        K = (1.0 + A @ B.T) ** kernel.degree
    _check_finite(K)
    return K


def build_gram(inputs, kernel: KernelParams) -> np.ndarray:
    """Symmetric T x T Gram matrix of the training inputs.

    Only the upper triangle is evaluated; it is mirrored into the lower one,
    so the result is exactly symmetric.
    """
    X = _as_matrix(inputs, "inputs")
    if X.shape[0] < 1:
        raise DimensionError("Gram matrix needs at least one input")
    if isinstance(kernel, MpkParams) and X.shape[1] != kernel.input_dim:
        raise DimensionError(f"inputs have dimension {X.shape[1]}, kernel expects {kernel.input_dim}")
    rows, cols = np.triu_indices(X.shape[0])
    products = X[rows] * X[cols]
    if isinstance(kernel, MpkParams):
        offsets, sigmas = derive_sigmas(kernel)
        values = np.prod(offsets + products @ sigmas.T, axis=1)
    else:
        values = (1.0 + products.sum(axis=1)) ** kernel.degree
    K = np.empty((X.shape[0], X.shape[0]))
    K[rows, cols] = values
    K[cols, rows] = values
    _check_finite(K)
    return K


def _leave_one_out_products(factors: np.ndarray) -> np.ndarray:
    """Products over all factors but one, along axis 0, without dividing."""
    ones = np.ones_like(factors[:1])
    prefix = np.cumprod(np.concatenate([ones, factors[:-1]]), axis=0)
    suffix = np.cumprod(np.concatenate([ones, factors[:0:-1]]), axis=0)[::-1]
    return prefix * suffix


def mpk_param_gradient(u, v, params: MpkParams) -> Tuple[np.ndarray, np.ndarray]:
    """Exact partial derivatives of `mpk_eval` w.r.t. the raw parameters.

    Returns ``(d_raw_offsets, d_raw_increments)`` with shapes (r,) and (r, d).
    """
    u, v = _pair(u, v)
    if u.shape[0] != params.input_dim:
        raise DimensionError(f"inputs have dimension {u.shape[0]}, kernel expects {params.input_dim}")
    offsets, sigmas = derive_sigmas(params)
    x = u * v
    others = _leave_one_out_products(offsets + sigmas @ x)
    d_sigmas = others[:, None] * x[None, :]
    # a_ij enters Sigma_1 .. Sigma_i
    d_increments = np.cumsum(d_sigmas, axis=0)
    return 2.0 * params.raw_offsets * others, 2.0 * params.raw_increments * d_increments


def mpk_gram_vjp(inputs_a, inputs_b, params: MpkParams, weights) -> Tuple[np.ndarray, np.ndarray]:
    """Gradient of sum_kl W_kl k(a_k, b_l) w.r.t. the raw parameters.

    Same return layout as `mpk_param_gradient`.
    """
    A = _as_matrix(inputs_a, "inputs_a")
    B = _as_matrix(inputs_b, "inputs_b")
    W = np.asarray(weights, dtype=np.float64)
    if W.shape != (A.shape[0], B.shape[0]):
        raise DimensionError(f"weights have shape {W.shape}, expected {(A.shape[0], B.shape[0])}")
    M = _leave_one_out_products(_mpk_factors(A, B, params)) * W[None, :, :]
    d_offsets = M.sum(axis=(1, 2))
    d_sigmas = np.sum((M @ B) * A[None, :, :], axis=1)
    d_increments = np.cumsum(d_sigmas, axis=0)
    return 2.0 * params.raw_offsets * d_offsets, 2.0 * params.raw_increments * d_increments


from .penalties import (  # noqa: E402
    MAX_MONOMIALS,
    PenaltyTable,
    expand_penalties,
    reconstruct_kernel,
)

__all__ = [
    "KERNEL_KINDS",
    "PkParams",
    "MpkParams",
    "KernelParams",
    "kernel_to_dict",
    "kernel_from_dict",
    "derive_sigmas",
    "pk_eval",
    "mpk_eval",
    "kernel_eval",
    "build_cross",
    "build_gram",
    "mpk_param_gradient",
    "mpk_gram_vjp",
    "MAX_MONOMIALS",
    "PenaltyTable",
    "expand_penalties",
    "reconstruct_kernel",
]
