"""Subspace accuracy: projection matrices, distance measure and trace correlation."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.linalg import qr


class RankError(ValueError):
    pass


def _as_basis(b: ArrayLike) -> NDArray[np.float64]:
    b = np.asarray(b, dtype=float)
    if b.ndim == 1:
        b = b[:, None]
    if b.ndim != 2 or b.shape[1] < 1:
        raise ValueError("basis must be a (p, d) matrix")
    return b


def orthonormalize(b: ArrayLike, rcond: float = 1e-10) -> NDArray[np.float64]:
    """Orthonormal basis of the column space of ``b`` (pivoted QR)."""
    b = _as_basis(b)
    s = np.linalg.svd(b, compute_uv=False)
    if s[0] == 0 or s[-1] <= rcond * s[0] or b.shape[1] > b.shape[0]:
        raise RankError(f"basis is rank deficient (singular values {s.tolist()})")
    qmat, _, _ = qr(b, mode="economic", pivoting=True)
    return qmat


def projection(b: ArrayLike) -> NDArray[np.float64]:
    """Orthogonal projector onto span(b), i.e. ``b (b'b)^-1 b'``."""
    qmat = orthonormalize(b)
    p = qmat @ qmat.T
    return 0.5 * (p + p.T)


@dataclass(frozen=True)
class SubspacePair:
    """An estimated basis and a reference basis in the same ambient space."""

    estimated: NDArray[np.float64]
    truth: NDArray[np.float64]

    def __post_init__(self):
        e, t = _as_basis(self.estimated), _as_basis(self.truth)
        if e.shape[0] != t.shape[0]:
            raise ValueError(f"bases live in different spaces (p={e.shape[0]} vs p={t.shape[0]})")
        orthonormalize(e)
        orthonormalize(t)
        object.__setattr__(self, "estimated", e)
        object.__setattr__(self, "truth", t)


def _pair(estimated, truth):
    if isinstance(estimated, SubspacePair):
        if truth is not None:
            raise TypeError("pass either a SubspacePair or two bases")
        return estimated.estimated, estimated.truth
    pair = SubspacePair(estimated, truth)
    return pair.estimated, pair.truth


def distance_measure(estimated: ArrayLike | SubspacePair, truth: ArrayLike | None = None) -> float:
    """Spectral norm of the difference of the two orthogonal projectors.

    Accepts either a :class:`SubspacePair` or the two bases.
    """
    e, t = _pair(estimated, truth)
    diff = projection(e) - projection(t)
    w = np.linalg.eigvalsh(diff)
    return float(min(1.0, max(abs(w[0]), abs(w[-1]))))


def trace_correlation(estimated: ArrayLike | SubspacePair, truth: ArrayLike | None = None) -> float:
    """sqrt of the mean eigenvalue of ``E0' T0 T0' E0`` for orthonormalized bases."""
    e, t = _pair(estimated, truth)
    if e.shape[1] != t.shape[1]:
        raise ValueError(f"trace correlation needs equal dimensions, got {e.shape[1]} and {t.shape[1]}")
    e0, t0 = orthonormalize(e), orthonormalize(t)
    c = e0.T @ t0
    lam = np.linalg.eigvalsh(c @ c.T)
    return float(np.sqrt(np.clip(lam.mean(), 0.0, 1.0)))
