"""Hyperparameter selection.

``(psi, w)`` are chosen by leave-one-out mean squared prediction error of the
linear part (CVMSEP); the bandwidth ``h`` by generalized cross-validation on
the residual series, with the degrees of freedom corrected by the error
correlation matrix, ``tr(S C)``.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from .errors import NumericError, TuningError
from .operators import GramSystem, moment_weights
from .smoother import KernelSpec, hat_matrix
from .spatial import SpatialCovModel, correlation_matrix

__all__ = [
    "TuningGrid",
    "TuningResult",
    "default_grid",
    "cv_scores",
    "cvmsep",
    "select_regularization",
    "gcv",
    "select_bandwidth",
]

logger = logging.getLogger(__name__)

MAX_SKIPPED_FRACTION = 0.10
# relative / absolute tolerance under which two scores count as tied
TIE_RTOL = 1e-9
TIE_ATOL = 1e-14


def _check_values(name, values, allow_empty=False):
    values = tuple(float(v) for v in values)
    if not values and not allow_empty:
        raise ValueError(f"{name} must not be empty")
    if any(not v > 0 or not np.isfinite(v) for v in values):
        raise ValueError(f"{name} must be positive and finite")
    return tuple(sorted(values))


@dataclass(frozen=True)
class TuningGrid:
    """Candidate values; sorted on construction.

    An empty ``h_values`` switches the spatial smoother off.
    """

    psi_values: tuple = (1e-4, 1e-3, 1e-2, 1e-1)
    w_values: tuple = (1e-4, 1e-3, 1e-2, 1e-1)
    h_values: tuple = tuple(float(h) for h in np.linspace(0.1, 0.9, 8))

    def __post_init__(self):
        object.__setattr__(self, "psi_values", _check_values("psi_values", self.psi_values))
        object.__setattr__(self, "w_values", _check_values("w_values", self.w_values))
        object.__setattr__(self, "h_values", _check_values("h_values", self.h_values, allow_empty=True))


def default_grid() -> TuningGrid:
    return TuningGrid()


@dataclass(frozen=True, eq=False)
class TuningResult:
    """Winner and full score table of one grid search.

    ``best`` is ``(psi, w)`` for regularization and ``h`` for bandwidths.
    Non-finite entries of ``scores`` mark invalid candidates.
    """

    best: object
    scores: np.ndarray
    values: tuple
    ties_broken: str
    skipped: np.ndarray = field(default=None)

    def to_dict(self) -> dict:
        scores = [None if not np.isfinite(s) else float(s) for s in np.ravel(self.scores)]
        out = {
            "best": list(self.best) if isinstance(self.best, tuple) else self.best,
            "values": [list(v) for v in self.values],
            "scores": scores,
            "shape": list(np.shape(self.scores)),
            "ties_broken": self.ties_broken,
        }
        if self.skipped is not None:
            out["skipped_folds"] = np.ravel(self.skipped).astype(int).tolist()
        return out


def _tied_minimum(scores):
    finite = np.isfinite(scores)
    if not np.any(finite):
        return None
    best = np.min(scores[finite])
    return finite & (scores <= best + TIE_RTOL * abs(best) + TIE_ATOL)


def cv_scores(gram: GramSystem, responses, design, pairs, index_set="offset", phi_inner="H"):
    """Leave-one-out CVMSEP for each ``(psi, w)`` in ``pairs``.

    Every fold removes one site from all moment sums and rebuilds the
    estimates on the remaining ones; the held-out response is predicted by
    ``<phi_hat, X_l> + <gamma_hat, X'_l>_G``.

    Returns
    -------
    scores : ndarray, shape (len(pairs),)
        NaN where more than 10 % of the folds failed.
    skipped : ndarray of int
    """
    y = np.asarray(responses, dtype=float)
    n = y.size
    if n < 2:
        raise ValueError("cross-validation needs at least two samples")
    pairs = list(pairs)
    sq = np.zeros((len(pairs), n))
    bad = np.zeros((len(pairs), n), dtype=bool)
    everything = np.arange(n)
    for ell in range(n):
        train = np.delete(everything, ell)
        sub = design.subset(train) if design is not None else None
        try:
            weights = moment_weights(y[train], sub, index_set)
        except Exception as exc:  # empty offset set etc.
            logger.debug("fold %d skipped: %s", ell, exc)
            bad[:, ell] = True
            continue
        try:
            c_phi, c_gamma = gram.solve(train, weights, pairs)
        except NumericError:
            c_phi = np.full((len(pairs), train.size), np.nan)
            c_gamma = np.full_like(c_phi, np.nan)
            for k, pair in enumerate(pairs):
                try:
                    cp, cg = gram.solve(train, weights, [pair])
                    c_phi[k], c_gamma[k] = cp[0], cg[0]
                except NumericError:
                    pass
        phi_term, gamma_term = gram.linear_terms([ell], train, c_phi, c_gamma, phi_inner)
        err = (y[ell] - phi_term[:, 0] - gamma_term[:, 0]) ** 2
        bad[:, ell] = ~np.isfinite(err)
        sq[:, ell] = np.where(bad[:, ell], 0.0, err)
    skipped = bad.sum(axis=1)
    kept = n - skipped
    with np.errstate(invalid="ignore", divide="ignore"):
        scores = sq.sum(axis=1) / kept
    scores[skipped > MAX_SKIPPED_FRACTION * n] = np.nan
    return scores, skipped


def cvmsep(curves, responses, design, psi: float, w: float, index_set="offset", phi_inner="H") -> float:
    """Leave-one-out mean squared prediction error of the linear part."""
    gram = curves if isinstance(curves, GramSystem) else GramSystem(curves)
    scores, _ = cv_scores(gram, responses, design, [(psi, w)], index_set, phi_inner)
    return float(scores[0])


def select_regularization(curves, responses, design, grid: TuningGrid,
                          index_set="offset", phi_inner="H") -> TuningResult:
    """Exhaustive CVMSEP search over ``psi_values x w_values``.

    Ties go to the larger ``psi``, then the larger ``w``.
    """
    gram = curves if isinstance(curves, GramSystem) else GramSystem(curves)
    pairs = [(p, w) for p in grid.psi_values for w in grid.w_values]
    scores, skipped = cv_scores(gram, responses, design, pairs, index_set, phi_inner)
    tied = _tied_minimum(scores)
    if tied is None:
        raise TuningError("every (psi, w) pair produced an invalid CVMSEP", stage="regularization")
    best = max(pair for pair, t in zip(pairs, tied) if t)
    shape = (len(grid.psi_values), len(grid.w_values))
    return TuningResult(
        best=best,
        scores=scores.reshape(shape),
        values=(grid.psi_values, grid.w_values),
        ties_broken="larger psi, then larger w",
        skipped=skipped.reshape(shape),
    )


def gcv(T, design, h: float, spec: KernelSpec, cov: SpatialCovModel, corr=None, warn: bool = True) -> float:
    """Generalized cross-validation score of bandwidth ``h``.

    ``mean((T - S T)^2) / (1 - tr(S C) / n)^2``, with ``S`` the hat matrix at
    the design points and ``C`` the error correlation matrix.  Returns NaN
    when the denominator is within 1e-8 of zero.
    """
    T = np.asarray(T, dtype=float)
    n = T.size
    S = hat_matrix(design.coords, h, spec, warn=warn)
    C = correlation_matrix(cov, design) if corr is None else corr
    denom = 1.0 - np.sum(S * C.T) / n  # tr(S C)
    if abs(denom) < 1e-8:
        return float("nan")
    resid = T - S @ T
    return float(np.mean(resid**2) / denom**2)


def select_bandwidth(T, design, h_values, spec: KernelSpec, cov: SpatialCovModel) -> TuningResult:
    """Minimize :func:`gcv` over ``h_values``; ties go to the larger ``h``."""
    h_values = _check_values("h_values", h_values)
    corr = correlation_matrix(cov, design)
    scores = np.array([gcv(T, design, h, spec, cov, corr=corr, warn=False) for h in h_values])
    tied = _tied_minimum(scores)
    if tied is None:
        raise TuningError("every bandwidth produced an invalid GCV score", stage="bandwidth")
    best = max(h for h, t in zip(h_values, tied) if t)
    return TuningResult(best=best, scores=scores, values=(h_values,), ties_broken="larger h")
