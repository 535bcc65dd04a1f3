""" Cholesky factorization with diagonal jitter. """
from __future__ import annotations

import logging
from dataclasses import dataclass

import numpy as np
import scipy.linalg as la

from ..errors import IllConditionedError, NumericalError

logger = logging.getLogger(__name__)

# relative jitter levels tried, as fractions of the mean diagonal
JITTER_LEVELS = tuple(10.0**p for p in range(-10, -3))


@dataclass(frozen=True, eq=False)
class SpdFactor:
    """Lower Cholesky factor of a symmetric positive definite matrix."""

    lower: np.ndarray
    log_det: float
    jitter: float = 0.0

    @property
    def size(self) -> int:
        return self.lower.shape[0]

    def solve(self, b) -> np.ndarray:
        return la.cho_solve((self.lower, True), b)

    def inverse(self) -> np.ndarray:
        return self.solve(np.eye(self.size))


def logdet(L: np.ndarray) -> float:
    """ Log determinant of A = L L^T from its Cholesky factor L. """
    return float(2.0 * np.log(L.diagonal()).sum())


def jitter_cholesky(A) -> SpdFactor:
    """ Cholesky factor of A, adding diagonal jitter if A is not numerically PD.

        The jitter is a fraction of the mean diagonal, escalated by factors of
        ten from 1e-10 to 1e-4. Beyond that the matrix is reported as
        ill-conditioned.
    """
    A = np.asarray(A, dtype=np.float64)
    if A.ndim != 2 or A.shape[0] != A.shape[1]:
        raise ValueError(f"expected a square matrix, got shape {A.shape}")
    if not np.all(np.isfinite(A)):
        rows = np.unique(np.nonzero(~np.isfinite(A))[0])
        raise NumericalError("matrix to factor has non-finite entries", rows=rows)

    try:
        L = la.cholesky(A, lower=True, check_finite=False)
        return SpdFactor(L, logdet(L))
    except la.LinAlgError:
        pass

    scale = float(A.diagonal().mean())
    if not scale > 0:
        scale = 1.0
    di = np.diag_indices(A.shape[0])
    for level in JITTER_LEVELS:
        Ajit = A.copy()
        Ajit[di] += scale * level
        try:
            L = la.cholesky(Ajit, lower=True, check_finite=False)
        except la.LinAlgError:
            logger.debug("Cholesky failed with jitter %.0e", level)
            continue
        logger.warning("Cholesky needed jitter %.0e x mean diagonal (%.3g)", level, scale)
        return SpdFactor(L, logdet(L), scale * level)

    raise IllConditionedError(
        f"matrix is not positive definite after adding {JITTER_LEVELS[-1]:.0e} x mean diagonal"
    )


__all__ = ["JITTER_LEVELS", "SpdFactor", "logdet", "jitter_cholesky"]
