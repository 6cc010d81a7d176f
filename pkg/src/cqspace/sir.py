"""Sliced inverse regression for the initial central-subspace basis."""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._linalg import orient_columns, sorted_eigh
from .data import inverse_sqrt_psd

DEFAULT_SLICES = 10


class SirError(ValueError):
    pass


@dataclass(frozen=True)
class SirConfig:
    target_dim: int = 1
    n_slices: int = DEFAULT_SLICES

    def __post_init__(self):
        if self.n_slices < 2:
            raise ValueError("n_slices must be >= 2")
        if self.target_dim < 1:
            raise ValueError("target_dim must be >= 1")


@dataclass
class SirResult:
    directions: NDArray[np.float64]
    """(p, d) unit-norm columns on the original predictor scale."""
    eigenvalues: NDArray[np.float64]
    """All p eigenvalues of the between-slice covariance, nonincreasing."""
    slice_sizes: NDArray[np.int64]

    @property
    def eigenvalue_ratio(self) -> float:
        """Leading eigenvalue over the mean of the rest; near 1 when y carries no signal."""
        w = self.eigenvalues
        rest = w[1:].mean() if w.size > 1 else 0.0
        return float(w[0] / rest) if rest > 0 else float("inf")


def slice_labels(y: NDArray[np.float64], n_slices: int) -> NDArray[np.int64]:
    """Assign each observation to a slice of the response.

    A response with at most ``n_slices`` distinct values gets one slice per
    value.  Otherwise slices hold near-equal counts of the sorted response;
    the first ``n % n_slices`` slices receive one extra observation, and a
    run of tied values is kept whole in the lowest slice it touches.
    """
    n = y.size
    values, inverse = np.unique(y, return_inverse=True)
    if values.size <= n_slices:
        return inverse.astype(np.int64)
    order = np.argsort(y, kind="stable")
    base, extra = divmod(n, n_slices)
    sizes = np.full(n_slices, base)
    sizes[:extra] += 1
    sorted_labels = np.repeat(np.arange(n_slices), sizes)
    # a run of tied responses joins the slice its first member falls in
    ys = y[order]
    starts = np.r_[0, np.flatnonzero(np.diff(ys) != 0) + 1]
    group = np.cumsum(np.r_[0, np.diff(ys) != 0])
    sorted_labels = sorted_labels[starts][group]
    labels = np.empty(n, dtype=np.int64)
    labels[order] = np.unique(sorted_labels, return_inverse=True)[1]
    return labels


def sir(x: ArrayLike, y: ArrayLike, config: SirConfig = SirConfig()) -> SirResult:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float).ravel()
    n, p = x.shape
    if y.size != n:
        raise SirError("x and y have different numbers of rows")
    if n <= p:
        raise SirError(f"SIR needs n > p (n={n}, p={p})")
    if config.target_dim > p:
        raise SirError(f"target_dim {config.target_dim} exceeds p={p}")
    xc = x - x.mean(axis=0)
    cov = xc.T @ xc / (n - 1)
    try:
        root = inverse_sqrt_psd(cov)
    except np.linalg.LinAlgError as err:
        raise SirError(f"predictor covariance is singular: {err}") from None
    z = xc @ root
    labels = slice_labels(y, config.n_slices)
    sizes = np.bincount(labels)
    if np.any(sizes < 2):
        raise SirError(f"a slice has fewer than 2 observations (sizes {sizes.tolist()})")
    means = np.zeros((sizes.size, p))
    np.add.at(means, labels, z)
    means /= sizes[:, None]
    props = sizes / n
    between = (means * props[:, None]).T @ means
    w, v = sorted_eigh(between)
    w = np.clip(w, 0.0, None)
    directions = orient_columns(root @ v[:, : config.target_dim])
    return SirResult(directions=directions, eigenvalues=w, slice_sizes=sizes)


def sir_directions(x: ArrayLike, y: ArrayLike, config: SirConfig = SirConfig()) -> NDArray[np.float64]:
    """Top ``config.target_dim`` SIR directions as a (p, d) matrix."""
    return sir(x, y, config).directions
