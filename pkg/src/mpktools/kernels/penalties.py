"""Penalty coefficients lambda induced by PK and MPK kernels.

Both kernels are finite sums ``k(u, v) = sum_q lambda_q phi_q(u) phi_q(v)``
over the Volterra monomials phi_q, and 1/lambda_q is the ridge penalty that the
regularization network puts on the coefficient of phi_q. The expansion is
exact: the PK coefficients are multinomials, and the MPK coefficients come from
multiplying the r linear factors as polynomials in the formal variables
x_j = u_j v_j.
"""
from __future__ import annotations

import csv
import logging
import math
from collections import defaultdict
from dataclasses import dataclass
from typing import Dict, Mapping, Tuple

import numpy as np

from ..errors import DataError, DimensionError, GuardExceededError
from ..volterra import MonomialIndex, enumerate_monomials, feature_map, monomial_count
from . import KernelParams, MpkParams, derive_sigmas

logger = logging.getLogger(__name__)

MAX_MONOMIALS = 10**6


@dataclass(frozen=True, eq=False)
class PenaltyTable:
    """lambda for every monomial of degree 0..r in ``input_dim`` variables."""

    entries: Mapping[MonomialIndex, float]
    degree: int
    input_dim: int

    def __post_init__(self):
        expected = enumerate_monomials(self.input_dim - 1, self.degree)
        entries: Dict[MonomialIndex, float] = {}
        for key, value in dict(self.entries).items():
            idx = key if isinstance(key, MonomialIndex) else MonomialIndex(tuple(key))
            entries[idx] = float(value)
        if set(entries) != set(expected):
            raise DimensionError(
                f"penalty table keys do not match the {len(expected)} monomials "
                f"of degree <= {self.degree} in {self.input_dim} variables"
            )
        if any(value < 0 for value in entries.values()):
            raise ValueError("penalty coefficients must be non-negative")
        object.__setattr__(self, "entries", {idx: entries[idx] for idx in expected})

    def __getitem__(self, key) -> float:
        idx = key if isinstance(key, MonomialIndex) else MonomialIndex(tuple(key))
        return self.entries[idx]

    def __len__(self) -> int:
        return len(self.entries)

    def as_vector(self) -> np.ndarray:
        """lambda values in `enumerate_monomials` order."""
        return np.fromiter(self.entries.values(), dtype=np.float64, count=len(self.entries))

    def rows(self):
        for idx, value in self.entries.items():
            yield idx.degrees, value

    def to_csv(self, path) -> None:
        with open(path, "w", newline="", encoding="utf8") as fh:
            writer = csv.writer(fh)
            writer.writerow([f"d_{j}" for j in range(self.input_dim)] + ["lambda"])
            for degrees, value in self.rows():
                writer.writerow(list(degrees) + [repr(value)])

    @classmethod
    def from_csv(cls, path) -> "PenaltyTable":
        try:
            with open(path, newline="", encoding="utf8") as fh:
                reader = csv.reader(fh)
                header = next(reader)
                entries = {}
                for line, row in enumerate(reader, start=2):
                    try:
                        entries[tuple(int(v) for v in row[:-1])] = float(row[-1])
                    except ValueError as exc:
                        raise DataError(str(exc), path=path, line=line) from exc
        except OSError as exc:
            raise DataError(f"cannot read penalty table: {exc}", path=path) from exc
        except StopIteration as exc:
            raise DataError("empty penalty table", path=path) from exc
        input_dim = len(header) - 1
        degree = max((sum(k) for k in entries), default=0)
        return cls(entries=entries, degree=degree, input_dim=input_dim)


def _pk_lambda(degrees: Tuple[int, ...], r: int) -> float:
    rest = r - sum(degrees)
    denom = math.prod(math.factorial(d) for d in degrees) * math.factorial(rest)
    return float(math.factorial(r) // denom)


def _mpk_expansion(params: MpkParams) -> Dict[Tuple[int, ...], float]:
    offsets, sigmas = derive_sigmas(params)
    d = params.input_dim
    poly: Dict[Tuple[int, ...], float] = {(0,) * d: 1.0}
    for i in range(params.degree):
        grown: Dict[Tuple[int, ...], float] = defaultdict(float)
        for key, coeff in poly.items():
            grown[key] += coeff * offsets[i]
            for j in range(d):
                if sigmas[i, j] == 0.0:
                    continue
                bumped = key[:j] + (key[j] + 1,) + key[j + 1 :]
                grown[bumped] += coeff * sigmas[i, j]
        poly = grown
    return poly


def expand_penalties(kernel: KernelParams, input_dim: int, degree: int) -> PenaltyTable:
    """Exact lambda table of a PK or MPK kernel over ``input_dim`` variables."""
    input_dim = int(input_dim)
    degree = int(degree)
    if input_dim < 1 or degree < 1:
        raise ValueError(f"input_dim and degree must be >= 1, got {input_dim} and {degree}")
    count = monomial_count(input_dim - 1, degree)
    if count > MAX_MONOMIALS:
        raise GuardExceededError(count, MAX_MONOMIALS)
    if kernel.degree != degree:
        raise ValueError(f"kernel has degree {kernel.degree}, table requested for degree {degree}")
    monomials = enumerate_monomials(input_dim - 1, degree)
    if isinstance(kernel, MpkParams):
        if kernel.input_dim != input_dim:
            raise DimensionError(
                f"kernel has input_dim {kernel.input_dim}, table requested for {input_dim}"
            )
        poly = _mpk_expansion(kernel)
        entries = {idx: poly.get(idx.degrees, 0.0) for idx in monomials}
    else:
        entries = {idx: _pk_lambda(idx.degrees, degree) for idx in monomials}
    logger.debug("expanded %s kernel into %d penalty coefficients", kernel.kind, count)
    return PenaltyTable(entries=entries, degree=degree, input_dim=input_dim)


def reconstruct_kernel(table: PenaltyTable, u, v) -> float:
    """sum_q lambda_q phi_q(u) phi_q(v)"""
    m = table.input_dim - 1
    phi_u = feature_map(u, m, table.degree)
    phi_v = feature_map(v, m, table.degree)
    return float(table.as_vector() @ (phi_u * phi_v))


__all__ = ["MAX_MONOMIALS", "PenaltyTable", "expand_penalties", "reconstruct_kernel"]
