"""Datasets, rank-based normal scores and whitening.

The normal-scores map replaces every predictor value by the standard normal
quantile of its (mid)rank, ``Phi^{-1}(rank / (n + 1))``.  Whitening then maps
the scores to identity sample covariance with the symmetric inverse square
root of their covariance matrix.
"""

from __future__ import annotations

import csv
import math
import os
import tempfile
from dataclasses import dataclass, field
from typing import Sequence

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtri
from scipy.stats import rankdata


class DataError(ValueError):
    """Raised for malformed input data (files, shapes, non-finite values)."""


@dataclass
class Dataset:
    """Response vector ``y`` (n,) and predictor matrix ``x`` (n, p)."""

    y: NDArray[np.float64]
    x: NDArray[np.float64]
    names: list[str] = field(default_factory=list)
    response_name: str = "y"

    def __post_init__(self):
        self.y = np.asarray(self.y, dtype=float).ravel()
        self.x = np.asarray(self.x, dtype=float)
        if self.x.ndim == 1:
            self.x = self.x[:, None]
        n, p = self.x.shape
        if self.y.shape[0] != n:
            raise DataError(f"y has {self.y.shape[0]} rows but x has {n}")
        if n < 2:
            raise DataError(f"need at least 2 observations, got {n}")
        if p < 1:
            raise DataError("need at least one predictor column")
        if not (np.all(np.isfinite(self.x)) and np.all(np.isfinite(self.y))):
            raise DataError("dataset contains non-finite values")
        if not self.names:
            self.names = [f"x{j + 1}" for j in range(p)]
        if len(self.names) != p:
            raise DataError(f"{len(self.names)} column names for {p} columns")

    @property
    def n(self) -> int:
        return self.x.shape[0]

    @property
    def p(self) -> int:
        return self.x.shape[1]


def read_numeric_csv(path: str | os.PathLike) -> tuple[list[str], NDArray[np.float64]]:
    """Read a header + numeric-body CSV file, reporting bad cells by position."""
    path = os.fspath(path)
    if not os.path.isfile(path):
        raise DataError(f"{path}: no such file")
    with open(path, newline="", encoding="utf-8") as fh:
        reader = csv.reader(fh)
        try:
            header = [h.strip() for h in next(reader)]
        except StopIteration:
            raise DataError(f"{path}: empty file (header row required)") from None
        rows = []
        for i, raw in enumerate(reader, start=1):
            if not raw or all(not c.strip() for c in raw):
                continue
            if len(raw) != len(header):
                raise DataError(
                    f"{path}: row {i} has {len(raw)} fields, header has {len(header)}"
                )
            vals = []
            for name, cell in zip(header, raw):
                try:
                    v = float(cell)
                except ValueError:
                    raise DataError(
                        f"{path}: row {i}, column '{name}': cannot parse {cell!r} as a number"
                    ) from None
                if not math.isfinite(v):
                    raise DataError(f"{path}: row {i}, column '{name}': non-finite value {cell!r}")
                vals.append(v)
            rows.append(vals)
    body = np.array(rows, dtype=float).reshape(len(rows), len(header))
    return header, body


def load_dataset(path: str | os.PathLike, response_column: str) -> Dataset:
    """Load a CSV with a header row; ``response_column`` becomes ``y``.

    Remaining columns become the predictor matrix in file order, and row
    order is preserved.
    """
    header, body = read_numeric_csv(path)
    if response_column not in header:
        raise DataError(f"{os.fspath(path)}: response column '{response_column}' not in header {header}")
    j = header.index(response_column)
    names = [h for k, h in enumerate(header) if k != j]
    if body.shape[0] < 2:
        raise DataError(f"{os.fspath(path)}: need at least 2 data rows, got {body.shape[0]}")
    x = np.delete(body, j, axis=1)
    return Dataset(y=body[:, j], x=x, names=names, response_name=response_column)


def atomic_write_text(path: str | os.PathLike, text: str) -> None:
    path = os.fspath(path)
    folder = os.path.dirname(os.path.abspath(path))
    fd, tmp = tempfile.mkstemp(dir=folder, prefix=".tmp-", suffix=os.path.basename(path))
    try:
        with os.fdopen(fd, "w", encoding="utf-8", newline="") as fh:
            fh.write(text)
        os.replace(tmp, path)
    except BaseException:
        if os.path.exists(tmp):
            os.unlink(tmp)
        raise


def format_matrix_csv(m: ArrayLike, header: Sequence[str] | None = None) -> str:
    m = np.atleast_2d(np.asarray(m, dtype=float))
    if header is None:
        header = [f"c{j + 1}" for j in range(m.shape[1])]
    lines = [",".join(header)]
    lines += [",".join(repr(float(v)) for v in row) for row in m]
    return "\n".join(lines) + "\n"


def write_matrix_csv(path, m: ArrayLike, header: Sequence[str] | None = None) -> None:
    atomic_write_text(path, format_matrix_csv(m, header))


def read_matrix_csv(path) -> NDArray[np.float64]:
    _, body = read_numeric_csv(path)
    return body


def column_ranks(values: ArrayLike) -> NDArray[np.float64]:
    """Ranks 1..n with ties given their average position (midranks)."""
    v = np.asarray(values, dtype=float)
    if v.ndim != 1 or v.size < 1:
        raise DataError("column_ranks expects a non-empty 1-d vector")
    if not np.all(np.isfinite(v)):
        raise DataError("column_ranks: non-finite input")
    return rankdata(v, method="average")


def inverse_normal_cdf(prob: ArrayLike) -> NDArray[np.float64] | float:
    """Standard normal quantile function on the open interval (0, 1)."""
    p = np.asarray(prob, dtype=float)
    if np.any(~(p > 0.0) | ~(p < 1.0)):
        raise ValueError("inverse_normal_cdf: probabilities must lie strictly in (0, 1)")
    out = ndtri(p)
    return float(out) if out.ndim == 0 else out


def normal_scores(x: ArrayLike) -> NDArray[np.float64]:
    """Column-wise ``Phi^{-1}(rank / (n + 1))`` with midranks for ties."""
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    n = x.shape[0]
    if n < 2:
        raise DataError("normal_scores needs at least 2 rows")
    ranks = np.column_stack([column_ranks(x[:, j]) for j in range(x.shape[1])])
    return ndtri(ranks / (n + 1.0))


def inverse_sqrt_psd(cov: NDArray[np.float64], rcond: float = 1e-10) -> NDArray[np.float64]:
    """Symmetric inverse square root ``cov^{-1/2}`` via eigendecomposition.

    Raises ``np.linalg.LinAlgError`` when the smallest eigenvalue is below
    ``rcond`` times the largest.
    """
    cov = 0.5 * (cov + cov.T)
    w, v = np.linalg.eigh(cov)
    top = w[-1]
    if not top > 0 or w[0] <= rcond * top:
        raise np.linalg.LinAlgError(
            f"covariance is singular: smallest eigenvalue {w[0]:.3e} "
            f"vs largest {top:.3e} (ratio threshold {rcond:g})"
        )
    return (v / np.sqrt(w)) @ v.T


@dataclass
class TransformedDesign:
    """Normal scores, their covariance and the whitened scores.

    ``z_g = (g_hat - center) @ inv_sqrt_sigma`` row-wise; ``inv_sqrt_sigma``
    is symmetric so this is the same as applying it to column vectors.
    """

    g_hat: NDArray[np.float64]
    sigma_g_hat: NDArray[np.float64]
    z_g: NDArray[np.float64]
    center: NDArray[np.float64]
    inv_sqrt_sigma: NDArray[np.float64]

    def to_score_coordinates(self, basis: NDArray[np.float64]) -> NDArray[np.float64]:
        """Map a basis in whitened coordinates to raw-score coordinates."""
        return self.inv_sqrt_sigma @ basis


def whiten(g_hat: ArrayLike) -> TransformedDesign:
    """Center and whiten ``g_hat`` to identity sample covariance."""
    g = np.asarray(g_hat, dtype=float)
    if g.ndim == 1:
        g = g[:, None]
    n = g.shape[0]
    if n < 2:
        raise DataError("whiten needs at least 2 rows")
    center = g.mean(axis=0)
    gc = g - center
    sigma = gc.T @ gc / (n - 1)
    root = inverse_sqrt_psd(sigma)
    return TransformedDesign(g_hat=g, sigma_g_hat=sigma, z_g=gc @ root, center=center, inv_sqrt_sigma=root)
