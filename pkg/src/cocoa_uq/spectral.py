"""Small-matrix spectral helpers: normalized graph Laplacian and symmetric
eigenvalues via the cyclic Jacobi rotation method.

Matrices here are tiny (n is the number of samples per record), so Jacobi's
simplicity and controllable accuracy beat anything fancier. The solver
reports raw eigenvalues; any clamping belongs to the caller.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DataError

__all__ = ["LaplacianResult", "normalized_laplacian", "sym_eigenvalues", "laplacian_spectrum"]

MAX_DIM = 256
SWEEP_LIMIT = 100
OFF_DIAG_THRESHOLD = 1e-12
SYMMETRY_TOL = 1e-9


@dataclass(frozen=True)
class LaplacianResult:
    matrix: np.ndarray
    eigenvalues: np.ndarray


def normalized_laplacian(g: np.ndarray) -> np.ndarray:
    """I - D^{-1/2} G D^{-1/2} with D_ii the row sums of G.

    G must be a symmetrized similarity matrix with unit diagonal and entries
    in [0, 1]; the unit diagonal keeps every degree >= 1, so there is no
    zero-degree case. The result is symmetrized exactly to cancel rounding.
    """
    g = np.asarray(g, dtype=float)
    if g.ndim != 2 or g.shape[0] != g.shape[1]:
        raise DataError("similarity matrix must be square")
    if np.max(np.abs(g - g.T)) > SYMMETRY_TOL:
        raise DataError("similarity matrix is not symmetric within 1e-9")
    if np.any(g < -1e-12) or np.any(g > 1 + 1e-12):
        raise DataError("similarity entries must lie in [0,1]")
    if np.any(np.abs(np.diagonal(g) - 1.0) > 1e-12):
        raise DataError("similarity matrix must have unit diagonal")
    inv_sqrt_d = 1.0 / np.sqrt(g.sum(axis=1))
    lap = np.eye(g.shape[0]) - inv_sqrt_d[:, None] * g * inv_sqrt_d[None, :]
    return (lap + lap.T) / 2.0


def sym_eigenvalues(a: np.ndarray) -> np.ndarray:
    """Eigenvalues of a symmetric matrix, ascending, by cyclic Jacobi sweeps.

    Rotations run until every off-diagonal magnitude drops below 1e-12;
    failure to get there within 100 sweeps signals malformed input.
    """
    a = np.array(a, dtype=float)
    if a.ndim != 2 or a.shape[0] != a.shape[1]:
        raise DataError("matrix must be square")
    n = a.shape[0]
    if n > MAX_DIM:
        raise DataError(f"matrix dimension {n} exceeds the design bound {MAX_DIM}")
    if np.max(np.abs(a - a.T)) > SYMMETRY_TOL:
        raise DataError("matrix is not symmetric within 1e-9")
    a = (a + a.T) / 2.0
    if n == 1:
        return a.reshape(1).copy()

    for _ in range(SWEEP_LIMIT):
        off = np.max(np.abs(a - np.diag(np.diagonal(a))))
        if off < OFF_DIAG_THRESHOLD:
            return np.sort(np.diagonal(a).copy())
        for p in range(n - 1):
            for q in range(p + 1, n):
                apq = a[p, q]
                if abs(apq) <= OFF_DIAG_THRESHOLD:
                    continue
                theta = (a[q, q] - a[p, p]) / (2.0 * apq)
                sign = 1.0 if theta >= 0 else -1.0
                t = sign / (abs(theta) + math.sqrt(theta * theta + 1.0))
                c = 1.0 / math.sqrt(t * t + 1.0)
                s = t * c
                # Two-sided rotation J^T A J in the (p, q) plane.
                rp, rq = a[p, :].copy(), a[q, :].copy()
                a[p, :] = c * rp - s * rq
                a[q, :] = s * rp + c * rq
                cp, cq = a[:, p].copy(), a[:, q].copy()
                a[:, p] = c * cp - s * cq
                a[:, q] = s * cp + c * cq
                a[p, q] = 0.0
                a[q, p] = 0.0
    raise DataError(f"Jacobi iteration did not converge in {SWEEP_LIMIT} sweeps")


def laplacian_spectrum(g: np.ndarray) -> LaplacianResult:
    lap = normalized_laplacian(g)
    return LaplacianResult(matrix=lap, eigenvalues=sym_eigenvalues(lap))
