"""Central quantile subspace estimation.

Linear (:func:`cqs`) and transformed (:func:`tcqs_basis`) estimators of the
subspace that carries a conditional quantile of y given x, the building
blocks they rely on (local-linear quantile smoothing, sliced inverse
regression, rank-based Gaussianization) and a seeded Monte Carlo harness.
"""

from .cqs import CqsError, IterationState, SubspaceEstimate, cqs, cqs_basis, initial_beta, iterate_beta, ols_slope
from .data import (
    DataError,
    Dataset,
    TransformedDesign,
    column_ranks,
    inverse_normal_cdf,
    inverse_sqrt_psd,
    load_dataset,
    normal_scores,
    whiten,
)
from .metrics import RankError, SubspacePair, distance_measure, orthonormalize, projection, trace_correlation
from .simulation import (
    ModelSpec,
    ReplicationReport,
    TruthSpec,
    consistency_sweep,
    default_truth,
    generate,
    run_replications,
)
from .sir import SirConfig, SirError, SirResult, sir, sir_directions
from .smoother import (
    KernelConfig,
    LocalFit,
    SmootherError,
    check_loss,
    fitted_quantiles,
    local_linear_quantile,
    mean_bandwidth,
    quantile_bandwidth,
    weighted_linear_qr,
)
from .tcqs import TcqsResult, empirical_normal_scores, sufficient_predictors, tcqs_basis

__version__ = "0.1.0"
