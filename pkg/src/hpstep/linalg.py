"""Minimal dense linear-algebra contract used by the rest of the package.

Thin wrappers around LAPACK (via scipy) that add the singularity policy the
solver relies on: partial-pivoted LU with an explicit tolerance relative to
the largest pivot, reusable factorizations, and a general eigendecomposition
with a residual guarantee.
"""

import warnings

import numpy as np
import scipy.linalg

from .errors import EigenConvergenceError, SingularMatrixError

#: pivots below SINGULARITY_RTOL * max|pivot| are treated as exact zeros
SINGULARITY_RTOL = 1e-13


class DenseFactorization:
    """Partial-pivoted LU factorization of a square matrix, reusable across
    right-hand sides.  Immutable after construction."""

    def __init__(self, A, context=None):
        A = np.asarray(A, dtype=float)
        if A.ndim != 2 or A.shape[0] != A.shape[1]:
            raise ValueError(f"expected a square matrix, got shape {A.shape}")
        if A.size and not np.all(np.isfinite(A)):
            raise ValueError("matrix contains non-finite entries")
        self.n = A.shape[0]
        self.context = context
        with warnings.catch_warnings():
            # exact zero pivots are detected below with our own tolerance
            warnings.simplefilter("ignore", scipy.linalg.LinAlgWarning)
            self._lu, self._piv = scipy.linalg.lu_factor(A, check_finite=False)
        pivots = np.abs(np.diag(self._lu))
        pmax = pivots.max() if self.n else 0.0
        if self.n and (pmax == 0.0 or pivots.min() <= SINGULARITY_RTOL * pmax):
            raise SingularMatrixError(
                f"matrix of size {self.n} is singular to tolerance "
                f"{SINGULARITY_RTOL:g} (min/max pivot = "
                f"{pivots.min():.3e}/{pmax:.3e})", context=context)

    def solve(self, B):
        """Solve ``A X = B`` for one or many right-hand sides."""
        B = np.asarray(B, dtype=float)
        return scipy.linalg.lu_solve((self._lu, self._piv), B,
                                     check_finite=False)


def factor_solve(A, B, context=None):
    """Factor ``A`` and solve ``A X = B``.

    For repeated solves against the same matrix, construct a
    :class:`DenseFactorization` once and call ``solve``.
    """
    return DenseFactorization(A, context=context).solve(B)


def eig_general(A, context=None):
    """Eigendecomposition of a general square matrix.

    Returns ``(values, vectors)`` with complex values permitted; column
    ``vectors[:, k]`` pairs with ``values[k]``.
    """
    A = np.asarray(A, dtype=float)
    try:
        values, vectors = scipy.linalg.eig(A, check_finite=False)
    except scipy.linalg.LinAlgError as exc:
        raise EigenConvergenceError(
            f"eigendecomposition failed to converge for a "
            f"{A.shape[0]}x{A.shape[0]} matrix: {exc}") from exc
    return values, vectors
