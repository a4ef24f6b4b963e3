"""Synthetic spatial functional data for the benchmark scenarios.

Regressor curves are ``X_i = sum_k Lambda_{i,k} F_k`` with ``F_k`` the first
15 Fourier functions, where each column ``(Lambda_{1,k}, ..., Lambda_{n,k})``
is one draw from a zero-mean normal truncated to ``[0, 1]^n`` with covariance
``exp(-a |i - j|_2)`` between lattice indices.  Responses follow

    Y_i = int phi X_i + int gamma X'_i + r(i / (n + 1)) + eps_i

with integrals by the rectangular rule and ``eps ~ N(0, Sigma2)``, where
``Sigma2`` has unit diagonal and off-diagonal ``0.01 exp(-a |i - j|_2)``.
"""

from dataclasses import dataclass, field
import logging

import numpy as np
import scipy.linalg
from scipy import special

from .errors import NumericError
from .funcdata import FunctionalCurve, Grid, make_grid
from .spatial import LatticeDesign, SpatialCovModel, covariance_matrix, make_lattice

__all__ = [
    "ScenarioConfig",
    "Truth",
    "SyntheticDataset",
    "derive_seed",
    "fourier_basis",
    "phi_true",
    "gamma_true",
    "r_true",
    "sample_truncated_mvn",
    "generate_noise",
    "generate_scenario",
]

logger = logging.getLogger(__name__)

BURN_IN = 200
THIN = 10


def derive_seed(base: int, *keys: int) -> int:
    """Deterministic 63-bit child seed for ``(base, *keys)``."""
    state = np.random.SeedSequence([int(base), *(int(k) for k in keys)]).generate_state(2, dtype=np.uint64)
    return int(state[0] >> np.uint64(1))


def _rng(seed) -> np.random.Generator:
    if isinstance(seed, np.random.Generator):
        return seed
    return np.random.default_rng(seed)


def fourier_basis(k: int, grid: Grid) -> FunctionalCurve:
    """``F_1 = 1``, ``F_2j = sqrt(2) sin(2 pi j t)``, ``F_2j+1 = sqrt(2) cos(2 pi j t)``."""
    if not 1 <= k <= 15 or int(k) != k:
        raise ValueError(f"Fourier index must be in 1..15, got {k}")
    t = grid.points
    if k == 1:
        return FunctionalCurve(grid, np.ones(grid.p), np.zeros(grid.p))
    j = k // 2
    w = 2 * np.pi * j
    if k % 2 == 0:
        return FunctionalCurve(grid, np.sqrt(2) * np.sin(w * t), np.sqrt(2) * w * np.cos(w * t))
    return FunctionalCurve(grid, np.sqrt(2) * np.cos(w * t), -np.sqrt(2) * w * np.sin(w * t))


def phi_true(grid: Grid) -> FunctionalCurve:
    """``phi(t) = sin(2 pi t^3)^3`` with its analytic derivative."""
    t = grid.points
    s = np.sin(2 * np.pi * t**3)
    c = np.cos(2 * np.pi * t**3)
    return FunctionalCurve(grid, s**3, 3 * s**2 * c * 6 * np.pi * t**2)


def gamma_true(grid: Grid) -> FunctionalCurve:
    """``gamma(t) = (0.6 - t)^2``."""
    t = grid.points
    return FunctionalCurve(grid, (0.6 - t) ** 2, -2 * (0.6 - t))


def r_true(x) -> np.ndarray:
    """``r(x) = exp(-max_k |x_k|)``."""
    x = np.atleast_2d(np.asarray(x, dtype=float))
    return np.exp(-np.max(np.abs(x), axis=1))


def _truncnorm_std(alpha, beta, u):
    """Inverse-CDF draw from N(0, 1) truncated to ``[alpha, beta]``.

    Works in the lower tail through log-CDFs; intervals lying in the upper
    tail are reflected first.
    """
    flip = alpha > 0
    lo = np.where(flip, -beta, alpha)
    hi = np.where(flip, -alpha, beta)
    log_lo = special.log_ndtr(lo)
    log_hi = special.log_ndtr(hi)
    # log(Phi(lo) + u (Phi(hi) - Phi(lo)))
    with np.errstate(divide="ignore"):
        logp = log_hi + np.log(u + (1.0 - u) * np.exp(log_lo - log_hi))
    z = np.clip(special.ndtri_exp(logp), lo, hi)
    return np.where(flip, -z, z)


def _precision(cov):
    cov = np.asarray(cov, dtype=float)
    scale = max(float(np.max(np.abs(np.diag(cov)))), 1e-300)
    if not np.allclose(cov, cov.T, rtol=1e-10, atol=1e-12 * scale):
        raise ValueError("covariance matrix must be symmetric")
    eig_min = float(np.linalg.eigvalsh(cov)[0])
    if eig_min < -1e-8 * scale:
        raise ValueError(f"covariance matrix is not positive semidefinite (min eigenvalue {eig_min:.3g})")
    jitter = 0.0
    for _ in range(8):
        try:
            cho = scipy.linalg.cho_factor(cov + jitter * np.eye(cov.shape[0]))
            return scipy.linalg.cho_solve(cho, np.eye(cov.shape[0]))
        except np.linalg.LinAlgError:
            jitter = 1e-12 * scale if jitter == 0 else 10 * jitter
    raise NumericError("could not factor the covariance matrix")


def sample_truncated_mvn(mean, cov, lower, upper, count: int, seed=None, chains: int = 1,
                         burn_in: int = BURN_IN, thin: int = THIN, _block: bool = True) -> np.ndarray:
    """Gibbs sampler for ``N(mean, cov)`` truncated to the box ``[lower, upper]``.

    Each coordinate is redrawn from its conditional truncated normal by
    inverse CDF.  Every chain discards ``burn_in`` sweeps and then keeps one
    state every ``thin`` sweeps.  With several chains the retained states are
    returned round by round (chain 0, chain 1, ... of the first round, then
    the second round).

    Parameters
    ----------
    mean, lower, upper : array, shape (m,)
    cov : array, shape (m, m)
        Positive semidefinite covariance of the untruncated normal.
    count : int
        Number of retained draws.
    seed : int, SeedSequence or Generator, optional
    chains : int
        Independent chains advanced together.

    Returns
    -------
    ndarray, shape (count, m)
    """
    mean = np.atleast_1d(np.asarray(mean, dtype=float))
    lower = np.broadcast_to(np.asarray(lower, dtype=float), mean.shape)
    upper = np.broadcast_to(np.asarray(upper, dtype=float), mean.shape)
    m = mean.size
    if np.shape(cov) != (m, m):
        raise ValueError(f"covariance must be {m}x{m}")
    if np.any(lower >= upper):
        raise ValueError("lower bounds must be strictly below upper bounds")
    if count < 1 or chains < 1:
        raise ValueError("count and chains must be positive")
    rng = _rng(seed)
    prec = _precision(cov)
    qdiag = np.diag(prec).copy()
    coef = -prec / qdiag[:, None]
    np.fill_diagonal(coef, 0.0)
    sd = 1.0 / np.sqrt(qdiag)
    pinned = sd < 1e-12 * np.sqrt(np.max(np.abs(np.diag(cov))))

    x = np.repeat(np.clip(mean, lower, upper)[:, None], chains, axis=1)
    rounds = -(-count // chains)
    out = np.empty((rounds * chains, m))
    total = burn_in + (rounds - 1) * thin + 1
    if _block and not np.any(coef) and not np.any(pinned):
        # conditionals do not depend on the state: same stream, drawn in one block
        u = rng.random((total, m, chains))[burn_in::thin]
        alpha = ((lower - mean) / sd)[None, :, None]
        beta = ((upper - mean) / sd)[None, :, None]
        draws = mean[None, :, None] + sd[None, :, None] * _truncnorm_std(alpha, beta, u)
        draws = np.clip(draws, lower[None, :, None], upper[None, :, None])
        return draws.transpose(0, 2, 1).reshape(rounds * chains, m)[:count]
    lo_rows, hi_rows = lower[:, None], upper[:, None]
    kept = 0
    for sweep in range(1, total + 1):
        u = rng.random((m, chains))
        for j in range(m):
            cm = mean[j] + coef[j] @ (x - mean[:, None])
            if pinned[j]:
                x[j] = np.clip(cm, lower[j], upper[j])
                continue
            alpha = (lo_rows[j] - cm) / sd[j]
            beta = (hi_rows[j] - cm) / sd[j]
            x[j] = np.clip(cm + sd[j] * _truncnorm_std(alpha, beta, u[j]), lower[j], upper[j])
        if sweep > burn_in and (sweep - burn_in - 1) % thin == 0:
            out[kept * chains:(kept + 1) * chains] = x.T
            kept += 1
    return out[:count]


def generate_noise(design: LatticeDesign, model: SpatialCovModel, seed=None) -> np.ndarray:
    """One draw of ``N(0, Sigma)`` with ``Sigma = covariance_matrix(model, design)``.

    Negative eigenvalues (possible only for unusual models) are floored at
    zero with a warning.
    """
    rng = _rng(seed)
    cov = covariance_matrix(model, design)
    z = rng.standard_normal(design.size)
    try:
        L = np.linalg.cholesky(cov)
        return L @ z
    except np.linalg.LinAlgError:
        vals, vecs = np.linalg.eigh(cov)
        if vals[0] < 0:
            logger.warning("noise covariance is indefinite (min eigenvalue %.3g); clipping at 0", vals[0])
        return vecs @ (np.sqrt(np.clip(vals, 0.0, None)) * z)


@dataclass(frozen=True)
class ScenarioConfig:
    """One benchmark scenario on the ``n x n`` lattice."""

    n: int = 5
    a: float = 3.0
    p: int = 366
    n_basis: int = 15
    seed: int = 0
    noise_scale: float = 0.01
    holdout: bool = False

    def __post_init__(self):
        if int(self.n) != self.n or self.n < 2:
            raise ValueError(f"lattice side n must be an integer >= 2, got {self.n}")
        if not self.a > 0:
            raise ValueError(f"decay a must be positive, got {self.a}")
        if not 1 <= self.n_basis <= 15:
            raise ValueError("n_basis must be in 1..15")
        if not 0 <= self.noise_scale <= 1:
            raise ValueError("noise_scale must lie in [0, 1]")


@dataclass(frozen=True, eq=False)
class Truth:
    phi: FunctionalCurve
    gamma: FunctionalCurve
    r_values: np.ndarray
    eps: np.ndarray
    linear: np.ndarray  # int phi X_i + int gamma X'_i


@dataclass(frozen=True, eq=False)
class SyntheticDataset:
    design: LatticeDesign
    curves: list
    responses: np.ndarray
    truth: Truth = None
    holdout: "SyntheticDataset" = field(default=None)

    @property
    def grid(self) -> Grid:
        return self.curves[0].grid

    def subset(self, idx) -> "SyntheticDataset":
        idx = np.asarray(idx)
        truth = None
        if self.truth is not None:
            t = self.truth
            truth = Truth(t.phi, t.gamma, t.r_values[idx], t.eps[idx], t.linear[idx])
        return SyntheticDataset(self.design.subset(idx), [self.curves[i] for i in idx], self.responses[idx], truth)


def generate_scenario(config: ScenarioConfig) -> SyntheticDataset:
    """Simulate one dataset; with ``holdout=True`` also the ring ``I_{n+1} \\ I_n``.

    The ring sites share the coefficient field and the noise draw with the
    training lattice and use the same coordinate map ``i / (n + 1)``.
    """
    n = config.n
    grid = make_grid(config.p)
    side = n + 1 if config.holdout else n
    full = make_lattice((side, side))
    design = LatticeDesign((n, n), full.sites, full.sites / (n + 1.0))

    lam_seed, noise_seed = np.random.SeedSequence(config.seed).spawn(2)
    field_model = SpatialCovModel(sigma2=1.0, a=config.a, norm="euclidean")
    sigma1 = covariance_matrix(field_model, design)
    nsite = design.size
    lam = sample_truncated_mvn(np.zeros(nsite), sigma1, 0.0, 1.0, count=config.n_basis,
                               seed=lam_seed, chains=config.n_basis).T  # (sites, basis)

    basis = [fourier_basis(k, grid) for k in range(1, config.n_basis + 1)]
    F = np.stack([b.values for b in basis])
    dF = np.stack([b.deriv for b in basis])
    values = lam @ F
    derivs = lam @ dF
    curves = [FunctionalCurve(grid, v, dv) for v, dv in zip(values, derivs)]

    noise_model = SpatialCovModel(sigma2=1.0, a=config.a, norm="euclidean", offdiag=config.noise_scale)
    eps = generate_noise(design, noise_model, seed=noise_seed)

    phi, gamma = phi_true(grid), gamma_true(grid)
    linear = grid.dt * (values @ phi.values) + grid.dt * (derivs @ gamma.values)
    r_values = r_true(design.coords)
    y = linear + r_values + eps
    data = SyntheticDataset(design, curves, y, Truth(phi, gamma, r_values, eps, linear))
    if not config.holdout:
        return data
    inner = np.flatnonzero(np.all(design.sites <= n, axis=1))
    ring = np.flatnonzero(np.any(design.sites > n, axis=1))
    train = data.subset(inner)
    train = SyntheticDataset(make_lattice((n, n)), train.curves, train.responses, train.truth, data.subset(ring))
    return train
