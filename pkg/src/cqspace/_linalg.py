"""Small linear-algebra helpers shared by the estimators."""

from __future__ import annotations

import numpy as np
from numpy.typing import NDArray


def orient_columns(basis: NDArray[np.float64], tol: float = 1e-12) -> NDArray[np.float64]:
    """Scale columns to unit length with their first nonzero entry positive."""
    b = np.array(basis, dtype=float, copy=True)
    if b.ndim == 1:
        b = b[:, None]
    for j in range(b.shape[1]):
        nrm = np.linalg.norm(b[:, j])
        if nrm == 0:
            continue
        col = b[:, j] / nrm
        nz = np.flatnonzero(np.abs(col) > tol)
        if nz.size and col[nz[0]] < 0:
            col = -col
        b[:, j] = col
    return b


def sorted_eigh(m: NDArray[np.float64]) -> tuple[NDArray[np.float64], NDArray[np.float64]]:
    """Eigenpairs of a symmetric matrix, eigenvalues nonincreasing.

    Ties keep the order returned by ``eigh`` (lowest index first).
    """
    w, v = np.linalg.eigh(0.5 * (m + m.T))
    order = np.argsort(-w, kind="stable")
    return w[order], v[:, order]
