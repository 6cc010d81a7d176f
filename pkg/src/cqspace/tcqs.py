"""Transformed central quantile subspace estimator.

Predictors are Gaussianized column by column with rank-based normal scores,
whitened, and the linear estimator of :mod:`cqspace.cqs` runs on the
whitened scores.  The returned basis lives in whitened-score coordinates;
:meth:`TcqsResult.score_basis` converts it to raw-score coordinates.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np
from numpy.typing import ArrayLike, NDArray
from scipy.special import ndtri

from ._linalg import orient_columns
from .cqs import IterationState, SubspaceEstimate, cqs_basis
from .data import Dataset, TransformedDesign, column_ranks, normal_scores, whiten
from .sir import SirConfig, sir_directions


@dataclass
class TcqsResult:
    basis: SubspaceEstimate
    transform: TransformedDesign
    gamma_hat: NDArray[np.float64]
    state: IterationState

    def score_basis(self) -> NDArray[np.float64]:
        """Basis in raw normal-score coordinates (unit-norm columns).

        Projections are unchanged up to column scale:
        ``(g - center) @ score_basis`` is proportional to ``z_g @ basis``.
        """
        return orient_columns(self.transform.to_score_coordinates(self.basis.basis))


def tcqs_basis(dataset: Dataset, tau: float, d_target: int, sir_config: SirConfig | None = None,
               bandwidth_scale: float = 1.0) -> TcqsResult:
    """Estimate the transformed quantile subspace of ``dataset``.

    ``sir_config.target_dim`` sets the dimension of the transformed
    central-subspace basis used to seed the iteration (default ``d_target``).
    """
    design = whiten(normal_scores(dataset.x))
    if sir_config is None:
        sir_config = SirConfig(target_dim=d_target)
    gamma = sir_directions(design.z_g, dataset.y, sir_config)
    est, state = cqs_basis(design.z_g, dataset.y, tau, d_target, gamma, bandwidth_scale, kind="transformed")
    return TcqsResult(basis=est, transform=design, gamma_hat=gamma, state=state)


def empirical_normal_scores(train_x: ArrayLike, new_x: ArrayLike) -> NDArray[np.float64]:
    """Normal scores of new rows under the training marginals.

    Each new value gets the (mid)rank it would have among the training
    values, linearly interpolated between order statistics and clipped to
    [1, n]; the score is ``Phi^{-1}(rank / (n + 1))``.  Training rows map to
    exactly their training scores.
    """
    tx = np.asarray(train_x, dtype=float)
    nx = np.asarray(new_x, dtype=float)
    if tx.ndim == 1:
        tx = tx[:, None]
    if nx.ndim == 1:
        nx = nx[:, None] if tx.shape[1] == 1 else nx[None, :]
    if nx.shape[1] != tx.shape[1]:
        raise ValueError(f"new data has {nx.shape[1]} columns, training data has {tx.shape[1]}")
    n = tx.shape[0]
    out = np.empty(nx.shape)
    for j in range(tx.shape[1]):
        ranks = column_ranks(tx[:, j])
        knots, first = np.unique(tx[:, j], return_index=True)
        r = np.interp(nx[:, j], knots, ranks[first], left=1.0, right=float(n))
        out[:, j] = ndtri(np.clip(r, 1.0, float(n)) / (n + 1.0))
    return out


def sufficient_predictors(result: TcqsResult, new_x: ArrayLike, train_x: ArrayLike) -> NDArray[np.float64]:
    """Project new rows onto the estimated basis through the training transform."""
    g = empirical_normal_scores(train_x, new_x)
    t = result.transform
    z = (g - t.center) @ t.inv_sqrt_sigma
    return z @ result.basis.basis
