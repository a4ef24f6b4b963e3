"""Monte Carlo harness for the simulation study and the hold-out experiments.

Every replication draws its own dataset from a seed derived from
``(seed, n, a, replication, attempt)``, so results do not depend on the
order in which replications run or on the number of worker processes.
A replication that raises a package or linear-algebra error is redrawn with
the next attempt index, at most ``MAX_RETRIES`` times.
"""

from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field
import logging
import struct

import numpy as np
from threadpoolctl import threadpool_limits

from .errors import SsflrdError
from .model import fit_sflrd, fit_ssflrd, fitted_surface, mse1, mse2, predict_many, prediction_error
from .simulate import ScenarioConfig, derive_seed, generate_scenario
from .smoother import KernelSpec
from .spatial import SpatialCovModel
from .tuning import TuningGrid

__all__ = [
    "BenchmarkConfig",
    "CellResult",
    "BenchmarkResult",
    "run_replication",
    "run_benchmark",
    "holdout_errors",
    "model_comparison",
]

logger = logging.getLogger(__name__)

MAX_RETRIES = 3
FLAG_FRACTION = 0.05
_RECOVERABLE = (SsflrdError, np.linalg.LinAlgError, FloatingPointError)


def _float_key(a: float) -> int:
    """Seed key of a decay value: its IEEE-754 bit pattern."""
    return struct.unpack("<q", struct.pack("<d", float(a)))[0]


@dataclass(frozen=True)
class BenchmarkConfig:
    """Settings shared by every cell of a benchmark run.

    ``phi_inner='G'`` pairs ``phi_hat`` with the curves in the L2 sense,
    as in the residuals, the prediction criterion and MSE2 of the
    simulation study.
    """

    ns: tuple = (5, 10)
    a_values: tuple = (0.1, 1.0, 3.0, 200.0)
    replications: int = 100
    seed: int = 0
    p: int = 366
    grid: TuningGrid = field(default_factory=TuningGrid)
    kernel_family: str = "epanechnikov_radial"
    gcv_norm: str = "chebyshev"
    phi_inner: str = "G"
    index_set: str = "offset"
    workers: int = 1

    def __post_init__(self):
        if int(self.replications) < 2:
            raise ValueError("replications must be >= 2")
        if not self.ns or not self.a_values:
            raise ValueError("benchmark needs at least one n and one a")
        if int(self.workers) < 1:
            raise ValueError("workers must be >= 1")


@dataclass(frozen=True, eq=False)
class CellResult:
    """Replication series of one ``(n, a)`` cell.

    ``failures`` counts failed attempts, including those later redrawn
    successfully; replications that never succeeded hold NaN.
    """

    n: int
    a: float
    mse1: np.ndarray
    mse2: np.ndarray
    failures: int
    flagged: bool

    @property
    def n2(self) -> int:
        return self.n * self.n

    def summary(self, metric: str):
        """``(mean, sd)`` over successful replications (sd with ``ddof=1``)."""
        values = np.asarray(getattr(self, metric))
        values = values[np.isfinite(values)]
        if values.size == 0:
            return float("nan"), float("nan")
        sd = float(np.std(values, ddof=1)) if values.size > 1 else float("nan")
        return float(np.mean(values)), sd


@dataclass(frozen=True, eq=False)
class BenchmarkResult:
    config: BenchmarkConfig
    cells: list

    def cell(self, n: int, a: float) -> CellResult:
        for c in self.cells:
            if c.n == n and c.a == a:
                return c
        raise KeyError((n, a))

    @property
    def flagged(self) -> list:
        return [c for c in self.cells if c.flagged]

    def rows(self) -> list:
        """Table rows ``(n2, a, metric, mean, sd, replications, failures)``."""
        out = []
        for c in self.cells:
            for metric in ("mse1", "mse2"):
                mean, sd = c.summary(metric)
                out.append((c.n2, c.a, metric, mean, sd, len(c.mse1), c.failures))
        return out


def _fit_one(config: BenchmarkConfig, n: int, a: float, seed: int):
    data = generate_scenario(ScenarioConfig(n=n, a=a, p=config.p, seed=seed))
    cov = SpatialCovModel(sigma2=1.0, a=a, norm=config.gcv_norm)
    kernel = KernelSpec(config.kernel_family, data.design.d)
    fit = fit_ssflrd(data.curves, data.responses, data.design, grid=config.grid, cov=cov,
                     kernel=kernel, index_set=config.index_set, phi_inner=config.phi_inner)
    e1 = mse1(data.truth.r_values, fitted_surface(fit))
    e2 = mse2(fit, data.truth, phi_inner=config.phi_inner)
    if not (np.isfinite(e1) and np.isfinite(e2)):
        raise FloatingPointError("non-finite error metric")
    return e1, e2


def run_replication(config: BenchmarkConfig, n: int, a: float, rep: int):
    """One replication with retries.

    Returns
    -------
    mse1, mse2 : float
        NaN if every attempt failed.
    failures : int
        Number of failed attempts.
    """
    failures = 0
    with threadpool_limits(1):
        for attempt in range(MAX_RETRIES + 1):
            seed = derive_seed(config.seed, n, _float_key(a), rep, attempt)
            try:
                e1, e2 = _fit_one(config, n, a, seed)
                return e1, e2, failures
            except _RECOVERABLE as exc:
                failures += 1
                logger.warning("n=%d a=%g replication %d attempt %d failed: %s", n, a, rep, attempt, exc)
    return float("nan"), float("nan"), failures


def _task(args):
    return run_replication(*args)


def run_benchmark(config: BenchmarkConfig = None, progress=None) -> BenchmarkResult:
    """Monte Carlo means and standard deviations of MSE1 and MSE2 per cell.

    Parameters
    ----------
    config : BenchmarkConfig
    progress : callable, optional
        Called as ``progress(done, total)`` after each replication.
    """
    config = config or BenchmarkConfig()
    tasks = [(config, n, float(a), rep)
             for n in config.ns for a in config.a_values for rep in range(config.replications)]
    results = [None] * len(tasks)
    if config.workers > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            for k, res in enumerate(pool.map(_task, tasks, chunksize=1)):
                results[k] = res
                if progress:
                    progress(k + 1, len(tasks))
    else:
        for k, args in enumerate(tasks):
            results[k] = _task(args)
            if progress:
                progress(k + 1, len(tasks))

    cells = []
    R = config.replications
    for c, (n, a) in enumerate((n, float(a)) for n in config.ns for a in config.a_values):
        block = results[c * R:(c + 1) * R]
        failures = sum(r[2] for r in block)
        flagged = failures > FLAG_FRACTION * R
        if flagged:
            logger.warning("cell n=%d a=%g flagged: %d failed attempts in %d replications", n, a, failures, R)
        cells.append(CellResult(n, a, np.array([r[0] for r in block]), np.array([r[1] for r in block]),
                                failures, flagged))
    return BenchmarkResult(config, cells)


def holdout_errors(n: int, a: float = 3.0, replications: int = 50, seed: int = 0, p: int = 366,
                   grid: TuningGrid = None, phi_inner: str = "H") -> np.ndarray:
    """Squared prediction errors on the ring ``I_{n+1} \\ I_n``.

    Each replication fits on the ``n x n`` lattice and predicts the ring
    sites, comparing with the noiseless regression value there.

    Returns
    -------
    ndarray, shape (replications,)
        Mean over ring sites of ``(Y_hat - Y*)^2``; NaN for failed replications.
    """
    out = np.full(replications, np.nan)
    with threadpool_limits(1):
        for rep in range(replications):
            for attempt in range(MAX_RETRIES + 1):
                s = derive_seed(seed, n, _float_key(a), rep, attempt)
                try:
                    data = generate_scenario(ScenarioConfig(n=n, a=a, p=p, seed=s, holdout=True))
                    fit = fit_ssflrd(data.curves, data.responses, data.design, grid=grid,
                                     cov=SpatialCovModel(1.0, a), phi_inner=phi_inner)
                    ring = data.holdout
                    preds = predict_many(fit, ring.design.coords, ring.curves)
                    target = ring.truth.linear + ring.truth.r_values
                    out[rep] = np.mean((np.array([q.y_hat for q in preds]) - target) ** 2)
                    break
                except _RECOVERABLE as exc:
                    logger.warning("hold-out n=%d replication %d attempt %d failed: %s", n, rep, attempt, exc)
    return out


def model_comparison(n: int = 8, a: float = 3.0, n_test: int = 16, replications: int = 50, seed: int = 0,
                     p: int = 366, grid: TuningGrid = None, phi_inner: str = "H"):
    """Prediction error of SSFLRD and SFLRD on randomly held-out lattice sites.

    Returns
    -------
    pe_ssflrd, pe_sflrd : ndarray, shape (replications,)
        :func:`prediction_error` against the observed responses.
    """
    pe = np.full((2, replications), np.nan)
    with threadpool_limits(1):
        for rep in range(replications):
            for attempt in range(MAX_RETRIES + 1):
                s = derive_seed(seed, n, _float_key(a), rep, attempt)
                try:
                    data = generate_scenario(ScenarioConfig(n=n, a=a, p=p, seed=s))
                    rng = np.random.default_rng(derive_seed(s, 1))
                    test = np.sort(rng.choice(data.design.size, n_test, replace=False))
                    train = np.setdiff1d(np.arange(data.design.size), test)
                    tr, te = data.subset(train), data.subset(test)
                    cov = SpatialCovModel(1.0, a)
                    for k, fitter in enumerate((fit_ssflrd, fit_sflrd)):
                        fit = fitter(tr.curves, tr.responses, tr.design, grid=grid, cov=cov, phi_inner=phi_inner)
                        preds = predict_many(fit, te.design.coords, te.curves)
                        pe[k, rep] = prediction_error(te.responses, [q.y_hat for q in preds])
                    break
                except _RECOVERABLE as exc:
                    logger.warning("comparison replication %d attempt %d failed: %s", rep, attempt, exc)
    return pe[0], pe[1]
