"""Linear central quantile subspace estimator.

Steps, for a fixed quantile level tau:

1. an initial central-subspace basis ``a_hat`` (SIR) gives sufficient
   predictors ``x @ a_hat``;
2. local-linear conditional quantiles of y are fitted at every sample point;
3. their least-squares slope on x is the first vector ``beta_0``;
4. if one direction is requested, ``beta_0`` is the answer;
5. otherwise ``beta_j = mean_i Qhat(y | x_i @ beta_{j-1}) (x_i - xbar)`` for
   j = 1..p-1, and the leading eigenvectors of ``V V'`` with
   ``V = [beta_0, ..., beta_{p-1}]`` span the estimate.

Predictors are centred inside the averaging step so that shifting y by a
constant leaves every vector unchanged.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np
from numpy.typing import ArrayLike, NDArray

from ._linalg import orient_columns, sorted_eigh
from .sir import SirConfig, sir_directions
from .smoother import _check_tau, fitted_quantiles

KINDS = ("linear", "transformed")


class CqsError(RuntimeError):
    pass


@dataclass
class SubspaceEstimate:
    basis: NDArray[np.float64]
    tau: float
    kind: str
    d: int

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ValueError(f"kind must be one of {KINDS}")
        _check_tau(self.tau)
        if self.basis.ndim != 2 or self.basis.shape[1] != self.d:
            raise ValueError("basis must be (p, d)")


@dataclass
class IterationState:
    """Vectors produced by the iteration and the spectrum of ``V V'``.

    With a single requested direction the iteration stops after the first
    vector, so ``vectors`` has length one in that case.
    """

    vectors: list[NDArray[np.float64]]
    v_matrix: NDArray[np.float64]
    eigenvalues: NDArray[np.float64]
    stalled: bool = False
    notes: list[str] = field(default_factory=list)

    @property
    def eigenvalue_ratios(self) -> NDArray[np.float64]:
        """Consecutive ratios lambda_{k+1} / lambda_k, a scree-style diagnostic."""
        w = self.eigenvalues
        with np.errstate(divide="ignore", invalid="ignore"):
            return np.where(w[:-1] > 0, w[1:] / w[:-1], 0.0)


def _as_xy(x: ArrayLike, y: ArrayLike) -> tuple[NDArray, NDArray]:
    x = np.asarray(x, dtype=float)
    if x.ndim == 1:
        x = x[:, None]
    y = np.asarray(y, dtype=float).ravel()
    if x.shape[0] != y.size:
        raise ValueError("x and y have different numbers of rows")
    return x, y


def ols_slope(response: ArrayLike, x: ArrayLike) -> tuple[float, NDArray[np.float64]]:
    """Least-squares intercept and slope of ``response`` on ``x``."""
    x, r = _as_xy(x, response)
    n, p = x.shape
    if n <= p + 1:
        raise CqsError(f"OLS needs n > p + 1 (n={n}, p={p})")
    design = np.column_stack([np.ones(n), x])
    coef, _, rank, sv = np.linalg.lstsq(design, r, rcond=None)
    if rank < p + 1 or sv[-1] <= 1e-10 * sv[0]:
        raise CqsError(f"OLS design is rank deficient: smallest singular value {sv[-1]:.3e} (largest {sv[0]:.3e})")
    return float(coef[0]), coef[1:]


def initial_beta(x: ArrayLike, y: ArrayLike, tau: float, a_hat: ArrayLike, bandwidth_scale: float = 1.0) -> NDArray[np.float64]:
    """OLS slope of the fitted conditional quantiles ``Qhat(y | x @ a_hat)`` on x."""
    x, y = _as_xy(x, y)
    a = np.asarray(a_hat, dtype=float)
    if a.ndim == 1:
        a = a[:, None]
    if a.shape[0] != x.shape[1] or a.shape[1] < 1:
        raise ValueError(f"a_hat must be (p, d1) with p={x.shape[1]}")
    q_hat = fitted_quantiles(x @ a, y, tau, bandwidth_scale=bandwidth_scale)
    return ols_slope(q_hat, x)[1]


def _iterate(x, y, tau, beta_prev, bandwidth_scale):
    beta_prev = np.asarray(beta_prev, dtype=float).ravel()
    if not np.any(beta_prev):
        raise CqsError("previous direction is zero")
    q_hat = fitted_quantiles(x @ beta_prev, y, tau, bandwidth_scale=bandwidth_scale)
    xc = x - x.mean(axis=0)
    return q_hat @ xc / x.shape[0], q_hat


def iterate_beta(x: ArrayLike, y: ArrayLike, tau: float, beta_prev: ArrayLike, bandwidth_scale: float = 1.0) -> NDArray[np.float64]:
    """``mean_i Qhat(y | x_i @ beta_prev) (x_i - xbar)``."""
    x, y = _as_xy(x, y)
    return _iterate(x, y, tau, beta_prev, bandwidth_scale)[0]


def cqs_basis(x: ArrayLike, y: ArrayLike, tau: float, d_target: int, a_hat: ArrayLike,
              bandwidth_scale: float = 1.0, kind: str = "linear") -> tuple[SubspaceEstimate, IterationState]:
    """Estimate a ``d_target``-dimensional quantile subspace basis."""
    x, y = _as_xy(x, y)
    tau = _check_tau(tau)
    p = x.shape[1]
    if not 1 <= d_target <= p:
        raise ValueError(f"d_target must be in [1, {p}], got {d_target}")
    beta0 = initial_beta(x, y, tau, a_hat, bandwidth_scale)
    if not np.any(beta0):
        raise CqsError("initial direction is exactly zero")
    if d_target == 1:
        b = beta0 / np.linalg.norm(beta0)
        basis = orient_columns(b[:, None])
        w, _ = sorted_eigh(np.outer(beta0, beta0))
        state = IterationState(vectors=[beta0], v_matrix=beta0[:, None], eigenvalues=np.clip(w, 0.0, None))
        return SubspaceEstimate(basis=basis, tau=tau, kind=kind, d=1), state

    vectors = [beta0]
    stalled = False
    notes: list[str] = []
    for j in range(1, p):
        prev = vectors[-1]
        if stalled:
            vectors.append(prev)
            continue
        beta, q_hat = _iterate(x, y, tau, prev, bandwidth_scale)
        if np.ptp(q_hat) <= 1e-10 * (1.0 + np.max(np.abs(q_hat))) or not np.any(beta):
            stalled = True
            notes.append(f"fitted quantiles degenerate at step {j}; repeating previous direction")
            beta = prev / np.linalg.norm(prev)
        vectors.append(beta)
    v = np.column_stack(vectors)
    w, vecs = sorted_eigh(v @ v.T)
    basis = orient_columns(vecs[:, :d_target])
    state = IterationState(vectors=vectors, v_matrix=v, eigenvalues=np.clip(w, 0.0, None), stalled=stalled, notes=notes)
    return SubspaceEstimate(basis=basis, tau=tau, kind=kind, d=d_target), state


def cqs(x: ArrayLike, y: ArrayLike, tau: float, d_target: int, sir_config: SirConfig | None = None,
        a_hat: ArrayLike | None = None, bandwidth_scale: float = 1.0) -> tuple[SubspaceEstimate, IterationState]:
    """Full linear estimator: SIR initial basis, then :func:`cqs_basis`.

    ``a_hat`` can be passed to reuse one initial basis across quantile
    levels; by default SIR is run with ``target_dim = d_target``.
    """
    x, y = _as_xy(x, y)
    if a_hat is None:
        if sir_config is None:
            sir_config = SirConfig(target_dim=d_target)
        a_hat = sir_directions(x, y, sir_config)
    return cqs_basis(x, y, tau, d_target, a_hat, bandwidth_scale)
