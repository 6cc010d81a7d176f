"""Monte Carlo benchmark: model generators, truth subspaces and replication engine.

Random streams
--------------
Every replication draws from its own Philox (counter-based, 64-bit) stream,
keyed by ``SeedSequence(seed, spawn_key=(r,))``.  Streams for different
replication indices are independent, and a replication's output depends
only on ``(seed, r)``, never on which worker ran it or in what order.

Truth subspaces
---------------
Two families are provided.

``linear``: the span of the directions the conditional quantile
``Q_tau(Y|X) = location(X) + scale(X) * Phi^{-1}(tau)`` depends on.  At the
median the scale term drops out.

``transformed``: a single direction on the scale of the monotone transforms
that make the quantile additive, e.g. Model V has
``Q_tau = X1^3 + X2 + Phi^{-1}(tau) * 3 e^{2 X3} / (1 + e^{2 X3})``, i.e.
``(1, 1, Phi^{-1}(tau), 0, ...)`` in ``(X1^3, X2, 3 e^{2X3}/(1+e^{2X3}))``.
Symmetric scale terms such as ``|X2|`` admit no monotone transform and are
left out.

The transformed estimator is scored against the transformed family and the
linear estimator against the linear family.
"""

from __future__ import annotations

import io
import csv
import math
import os
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from numpy.typing import NDArray
from scipy.special import ndtri

from .cqs import cqs_basis
from .data import Dataset, atomic_write_text
from .metrics import distance_measure, trace_correlation
from .sir import SirConfig, sir_directions
from .tcqs import tcqs_basis

MODELS = ("EX1", "I", "II", "III", "IV", "V", "VI")
METHODS = ("cqs", "tcqs")
PREDICTOR_DISTS = ("normal", "ar", "t3", "t5", "t10")
_MIN_P = {"EX1": 4, "I": 2, "II": 2, "III": 2, "IV": 2, "V": 3, "VI": 4}
AR_RHO = 0.5
PAPER_TAUS = (0.1, 0.25, 0.5, 0.75, 0.9)
REPORT_COLUMNS = ("model", "method", "tau", "dm_mean", "dm_sd", "tcc_mean", "tcc_sd", "failures",
                  "n", "p", "predictor_dist", "d", "n_reps", "sd_flag")


class SimulationError(ValueError):
    pass


@dataclass(frozen=True)
class ModelSpec:
    id: str
    n: int
    p: int = 10
    predictor_dist: str = "normal"
    seed: int = 0

    def __post_init__(self):
        if self.id not in MODELS:
            raise SimulationError(f"unknown model {self.id!r}; choose from {MODELS}")
        if self.predictor_dist not in PREDICTOR_DISTS:
            raise SimulationError(f"unknown predictor distribution {self.predictor_dist!r}; choose from {PREDICTOR_DISTS}")
        if self.n < 50:
            raise SimulationError(f"n must be >= 50, got {self.n}")
        if self.p < _MIN_P[self.id]:
            raise SimulationError(f"model {self.id} needs p >= {_MIN_P[self.id]}, got {self.p}")
        if not 0 <= self.seed < 2**64:
            raise SimulationError("seed must be a 64-bit unsigned integer")


@dataclass
class TruthSpec:
    tau: float
    basis: NDArray[np.float64]

    @property
    def d(self) -> int:
        return self.basis.shape[1]


@dataclass
class ReplicationReport:
    model: ModelSpec
    tau: float
    method: str
    n_reps: int
    d: int
    dm_mean: float
    dm_sd: float
    tcc_mean: float
    tcc_sd: float
    failures: int = 0
    dms: list[float] = field(default_factory=list, repr=False)
    tccs: list[float] = field(default_factory=list, repr=False)

    @property
    def sd_flag(self) -> bool:
        """True when fewer than two successful replications back the sd fields."""
        return len(self.dms) < 2

    def row(self) -> dict:
        return {
            "model": self.model.id, "method": self.method, "tau": self.tau,
            "dm_mean": self.dm_mean, "dm_sd": self.dm_sd,
            "tcc_mean": self.tcc_mean, "tcc_sd": self.tcc_sd, "failures": self.failures,
            "n": self.model.n, "p": self.model.p, "predictor_dist": self.model.predictor_dist,
            "d": self.d, "n_reps": self.n_reps, "sd_flag": int(self.sd_flag),
        }


# ---------------------------------------------------------------------------
# data generation


def replication_rng(seed: int, r: int) -> np.random.Generator:
    """Philox stream for replication ``r`` of a run seeded with ``seed``."""
    return np.random.Generator(np.random.Philox(np.random.SeedSequence(seed, spawn_key=(r,))))


def draw_predictors(rng: np.random.Generator, n: int, p: int, dist: str) -> NDArray[np.float64]:
    if dist == "normal":
        return rng.standard_normal((n, p))
    if dist == "ar":
        idx = np.arange(p)
        cov = AR_RHO ** np.abs(idx[:, None] - idx[None, :])
        return rng.standard_normal((n, p)) @ np.linalg.cholesky(cov).T
    if dist.startswith("t"):
        # raw Student-t draws, not rescaled to unit variance
        return rng.standard_t(int(dist[1:]), size=(n, p))
    raise SimulationError(f"unknown predictor distribution {dist!r}")


def _logistic3(t):
    return 3.0 / (1.0 + np.exp(-2.0 * t))


def model_response(model_id: str, x: NDArray[np.float64], eps: NDArray[np.float64]) -> NDArray[np.float64]:
    """Evaluate a model's response formula for given predictors and errors."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    eps = np.asarray(eps, dtype=float)
    if model_id not in MODELS:
        raise SimulationError(f"unknown model {model_id!r}")
    if x.shape[1] < _MIN_P[model_id]:
        raise SimulationError(f"model {model_id} needs p >= {_MIN_P[model_id]}")
    x1, x2 = x[:, 0], x[:, 1]
    if model_id == "EX1":
        return 2 * np.exp(x1 / 3) + x2**3 / 3 + x[:, 2] + x[:, 3] + 0.5 * eps
    if model_id == "I":
        return x1 + 0.5 * x2 * eps
    if model_id == "II":
        return x1 + 0.5 * np.exp(0.15 * x2) * eps
    if model_id == "III":
        return x1**3 + 0.5 * np.exp(x2) * eps
    if model_id == "IV":
        return np.exp(x1) - 1.05 + 0.5 * np.exp(x2) * eps
    if model_id == "V":
        return x1**3 + x2 + _logistic3(x[:, 2]) * eps
    return 2 * np.exp(x1 / 3) + x2**3 / 3 + (x[:, 2] + x[:, 3]) * eps


def generate(spec: ModelSpec, rng: np.random.Generator | None = None) -> Dataset:
    """Draw one dataset; without ``rng`` the stream is replication 0 of ``spec.seed``."""
    if rng is None:
        rng = replication_rng(spec.seed, 0)
    x = draw_predictors(rng, spec.n, spec.p, spec.predictor_dist)
    eps = rng.standard_normal(spec.n)
    return Dataset(y=model_response(spec.id, x, eps), x=x)


# ---------------------------------------------------------------------------
# truths


def _unit(p: int, *entries: tuple[int, float]) -> NDArray[np.float64]:
    v = np.zeros(p)
    for j, val in entries:
        v[j] = val
    return v


def default_truth(model_id: str, tau: float, p: int, kind: str = "linear") -> TruthSpec:
    """Basis of the population quantile subspace for a benchmark model."""
    if model_id not in MODELS:
        raise SimulationError(f"unknown model {model_id!r}")
    if not 0.0 < tau < 1.0:
        raise ValueError("tau must lie in (0, 1)")
    if p < _MIN_P[model_id]:
        raise SimulationError(f"model {model_id} needs p >= {_MIN_P[model_id]}")
    median = math.isclose(tau, 0.5)
    z = float(ndtri(tau))
    if model_id == "EX1":
        cols = [_unit(p, (0, 1), (1, 1), (2, 1), (3, 1))]
    elif kind == "linear":
        if model_id in ("I", "II", "III", "IV"):
            cols = [_unit(p, (0, 1))] if median else [_unit(p, (0, 1)), _unit(p, (1, 1))]
        elif model_id == "V":
            cols = [_unit(p, (0, 1)), _unit(p, (1, 1))] + ([] if median else [_unit(p, (2, 1))])
        else:
            cols = [_unit(p, (0, 1)), _unit(p, (1, 1))] + ([] if median else [_unit(p, (2, 1), (3, 1))])
    elif kind == "transformed":
        if model_id == "I":
            cols = [_unit(p, (0, 1))]
        elif model_id in ("II", "III", "IV"):
            cols = [_unit(p, (0, 1), (1, 0.5 * z))]
        elif model_id == "V":
            cols = [_unit(p, (0, 1), (1, 1), (2, z))]
        else:
            cols = [_unit(p, (0, 1), (1, 1))]
    else:
        raise ValueError(f"kind must be 'linear' or 'transformed', got {kind!r}")
    b = np.column_stack(cols)
    return TruthSpec(tau=tau, basis=b / np.linalg.norm(b, axis=0))


def truth_for_method(model_id: str, tau: float, p: int, method: str) -> TruthSpec:
    return default_truth(model_id, tau, p, kind="transformed" if method == "tcqs" else "linear")


# ---------------------------------------------------------------------------
# replications


@dataclass(frozen=True)
class _Job:
    spec: ModelSpec
    r: int
    taus: tuple[float, ...]
    methods: tuple[str, ...]
    truths: tuple
    n_slices: int
    bandwidth_scale: float


def _one_replication(job: _Job) -> list[tuple[float, float] | None]:
    """Scores for every (method, tau) cell of one replication; None marks a failure."""
    data = generate(job.spec, replication_rng(job.spec.seed, job.r))
    out: list[tuple[float, float] | None] = []
    a_cache: dict[int, NDArray] = {}
    for method, truths in zip(job.methods, job.truths):
        for tau, truth in zip(job.taus, truths):
            d = truth.shape[1]
            try:
                if method == "tcqs":
                    res = tcqs_basis(data, tau, d, SirConfig(target_dim=d, n_slices=job.n_slices),
                                     bandwidth_scale=job.bandwidth_scale)
                    est = res.score_basis()
                else:
                    if d not in a_cache:
                        a_cache[d] = sir_directions(data.x, data.y, SirConfig(target_dim=d, n_slices=job.n_slices))
                    est = cqs_basis(data.x, data.y, tau, d, a_cache[d], job.bandwidth_scale)[0].basis
                out.append((distance_measure(est, truth), trace_correlation(est, truth)))
            except (ArithmeticError, ValueError, RuntimeError, np.linalg.LinAlgError):
                out.append(None)
    return out


def _mean_sd(values: list[float]) -> tuple[float, float]:
    if not values:
        return math.nan, math.nan
    m = math.fsum(values) / len(values)
    if len(values) < 2:
        return m, 0.0
    return m, math.sqrt(math.fsum((v - m) ** 2 for v in values) / (len(values) - 1))


def map_jobs(fn, jobs, threads: int = 1) -> list:
    """Apply ``fn`` to ``jobs`` preserving order, optionally across processes."""
    if threads <= 1 or len(jobs) <= 1:
        return [fn(j) for j in jobs]
    with ProcessPoolExecutor(max_workers=threads) as pool:
        return list(pool.map(fn, jobs))


def run_replications(spec: ModelSpec, taus, methods, n_reps: int, d_per_tau: dict | None = None,
                     truths: dict | None = None, n_slices: int = 10, bandwidth_scale: float = 1.0,
                     threads: int = 1) -> list[ReplicationReport]:
    """Monte Carlo summary of DM and TCC for each (method, tau).

    Parameters
    ----------
    spec : model, sample size, dimension, predictor law and base seed.
    taus, methods : quantile levels and estimators ("cqs", "tcqs").
    n_reps : number of replications (>= 1).
    d_per_tau : optional ``{tau: d}``; must agree with the truth dimension.
    truths : optional ``{(method, tau): basis}`` overriding the default truths.
    threads : worker processes; results do not depend on this value.
    """
    if n_reps < 1:
        raise SimulationError("n_reps must be >= 1")
    taus = tuple(float(t) for t in taus)
    methods = tuple(methods)
    for m in methods:
        if m not in METHODS:
            raise SimulationError(f"unknown method {m!r}; choose from {METHODS}")
    truths = dict(truths or {})
    truth_mats = []
    for m in methods:
        row = []
        for t in taus:
            b = truths.get((m, t))
            b = truth_for_method(spec.id, t, spec.p, m).basis if b is None else np.atleast_2d(np.asarray(b, float).T).T
            if d_per_tau and t in d_per_tau and d_per_tau[t] != b.shape[1]:
                raise SimulationError(f"d={d_per_tau[t]} at tau={t} disagrees with the truth dimension {b.shape[1]}")
            row.append(b)
        truth_mats.append(tuple(row))
    jobs = [_Job(spec, r, taus, methods, tuple(truth_mats), n_slices, bandwidth_scale) for r in range(n_reps)]
    results = map_jobs(_one_replication, jobs, threads)
    reports = []
    k = 0
    for mi, m in enumerate(methods):
        for ti, t in enumerate(taus):
            cells = [res[k] for res in results]
            ok = [c for c in cells if c is not None]
            dms = [c[0] for c in ok]
            tccs = [c[1] for c in ok]
            dm_mean, dm_sd = _mean_sd(dms)
            tcc_mean, tcc_sd = _mean_sd(tccs)
            reports.append(ReplicationReport(model=spec, tau=t, method=m, n_reps=n_reps, d=truth_mats[mi][ti].shape[1],
                                             dm_mean=dm_mean, dm_sd=dm_sd, tcc_mean=tcc_mean, tcc_sd=tcc_sd,
                                             failures=len(cells) - len(ok), dms=dms, tccs=tccs))
            k += 1
    return reports


def _fmt(v) -> str:
    if isinstance(v, float):
        return "nan" if math.isnan(v) else repr(round(v, 12))
    return str(v)


def reports_to_csv(reports: list[ReplicationReport]) -> str:
    buf = io.StringIO()
    w = csv.writer(buf, lineterminator="\n")
    w.writerow(REPORT_COLUMNS)
    for rep in reports:
        row = rep.row()
        w.writerow([_fmt(row[c]) for c in REPORT_COLUMNS])
    return buf.getvalue()


def write_reports_csv(path: str | os.PathLike, reports: list[ReplicationReport]) -> None:
    atomic_write_text(path, reports_to_csv(reports))


# ---------------------------------------------------------------------------
# consistency sweep


@dataclass
class ConsistencyResult:
    n: list[int]
    inv_sqrt_n: list[float]
    dm_mean: list[float]
    slope: float
    intercept: float
    r_squared: float
    failures: list[int]

    def to_csv(self) -> str:
        lines = ["n,inv_sqrt_n,dm_mean"]
        lines += [f"{n},{_fmt(a)},{_fmt(b)}" for n, a, b in zip(self.n, self.inv_sqrt_n, self.dm_mean)]
        return "\n".join(lines) + "\n"


def linear_fit(x, y) -> tuple[float, float, float]:
    """Least-squares slope, intercept and R^2 of y on x."""
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    slope, intercept = np.polyfit(x, y, 1)
    resid = y - (slope * x + intercept)
    ss_tot = float(np.sum((y - y.mean()) ** 2))
    r2 = 1.0 - float(np.sum(resid**2)) / ss_tot if ss_tot > 0 else 0.0
    return float(slope), float(intercept), r2


def consistency_sweep(model_id: str, n_grid, tau: float, n_reps: int, p: int = 10, seed: int = 0,
                      method: str = "tcqs", predictor_dist: str = "normal", threads: int = 1,
                      n_slices: int = 10, bandwidth_scale: float = 1.0) -> ConsistencyResult:
    """Mean DM across sample sizes and its linear fit on 1/sqrt(n)."""
    grid = [int(n) for n in n_grid]
    if len(grid) < 3:
        raise SimulationError("consistency sweep needs at least 3 sample sizes")
    if any(b <= a for a, b in zip(grid, grid[1:])):
        raise SimulationError("n_grid must be strictly increasing")
    dm, fails = [], []
    for n in grid:
        spec = ModelSpec(model_id, n=n, p=p, predictor_dist=predictor_dist, seed=seed)
        rep = run_replications(spec, [tau], [method], n_reps, threads=threads, n_slices=n_slices,
                               bandwidth_scale=bandwidth_scale)[0]
        dm.append(rep.dm_mean)
        fails.append(rep.failures)
    inv = [1.0 / math.sqrt(n) for n in grid]
    slope, intercept, r2 = linear_fit(inv, dm)
    return ConsistencyResult(n=grid, inv_sqrt_n=inv, dm_mean=dm, slope=slope, intercept=intercept,
                             r_squared=r2, failures=fails)
