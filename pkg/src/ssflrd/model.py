"""Two-stage fit of the spatial semi-functional model and prediction at new sites.

Stage 1 estimates ``(phi, gamma)`` by the regularized moment method with
``(psi, w)`` chosen by CVMSEP.  Stage 2 smooths the residual series
``T_i = Y_i - <phi_hat, X_i> - <gamma_hat, X'_i>_G`` with a local linear
estimator whose bandwidth is chosen by GCV.  The SFLRD baseline stops after
stage 1.
"""

from dataclasses import dataclass, field
import logging

import numpy as np

from .errors import DimensionError, EmptyWindowError
from .funcdata import FunctionalCurve
from .operators import CoefficientEstimates, GramSystem, RegularizationParams, moment_weights
from .smoother import KernelSpec, hat_matrix, smooth_surface
from .spatial import SpatialCovModel
from .tuning import TuningGrid, TuningResult, select_bandwidth, select_regularization

__all__ = [
    "SsflrdFit",
    "Prediction",
    "linear_terms",
    "fit_ssflrd",
    "fit_sflrd",
    "fitted_surface",
    "predict",
    "predict_many",
    "mse1",
    "mse2",
    "prediction_error",
]

logger = logging.getLogger(__name__)


@dataclass(frozen=True, eq=False)
class SsflrdFit:
    """Fitted state of either model.

    ``h`` is None for the SFLRD baseline (or when no bandwidth grid was
    given); the spatial component is then identically zero.
    """

    model: str
    coeffs: CoefficientEstimates
    residuals: np.ndarray
    design: object
    curves: list
    responses: np.ndarray
    h: float
    kernel: KernelSpec
    cov_model: SpatialCovModel
    phi_inner: str
    index_set: str
    regularization: TuningResult
    bandwidth: TuningResult = field(default=None)

    @property
    def grid(self):
        return self.coeffs.phi_hat.grid


@dataclass(frozen=True)
class Prediction:
    site: object
    y_hat: float
    linear_h: float
    linear_g: float
    spatial: float


def linear_terms(coeffs: CoefficientEstimates, curves, phi_inner: str = "H"):
    """``<phi_hat, X_i>`` (H or G) and ``<gamma_hat, X'_i>_G`` for each curve."""
    grid = coeffs.phi_hat.grid
    if any(c.grid != grid for c in curves):
        raise DimensionError("curves and coefficients live on different grids")
    Xv = np.stack([c.values for c in curves])
    Xd = np.stack([c.deriv for c in curves])
    phi = coeffs.phi_hat
    phi_term = Xv @ phi.values
    if phi_inner == "H":
        phi_term = phi_term + Xd @ phi.deriv
    elif phi_inner != "G":
        raise ValueError(f"phi_inner must be 'H' or 'G', got {phi_inner!r}")
    return grid.dt * phi_term, grid.dt * (Xd @ coeffs.gamma_hat.values)


def _stage_one(curves, responses, design, grid, index_set, phi_inner):
    y = np.asarray(responses, dtype=float)
    if y.size != len(curves):
        raise DimensionError(f"{y.size} responses for {len(curves)} curves")
    if y.size < 4:
        raise DimensionError("fitting needs at least 4 sites")
    if index_set == "offset" and design.sites is None:
        logger.warning("design has no multi-indices; averaging moments over all sites")
        index_set = "full"
    gram = GramSystem(curves)
    reg = select_regularization(gram, y, design, grid, index_set, phi_inner)
    params = RegularizationParams(*reg.best)
    coeffs = gram.estimates(np.arange(y.size), moment_weights(y, design, index_set), params)
    phi_term, gamma_term = linear_terms(coeffs, curves, phi_inner)
    return y, coeffs, y - phi_term - gamma_term, reg, index_set


def fit_ssflrd(curves, responses, design, grid: TuningGrid = None, cov: SpatialCovModel = None,
               kernel: KernelSpec = None, index_set: str = "offset", phi_inner: str = "H") -> SsflrdFit:
    """Fit the full model: moment-method coefficients, then the spatial smoother.

    Parameters
    ----------
    curves : list of FunctionalCurve
    responses : array, shape (n,)
    design : LatticeDesign
    grid : TuningGrid, optional
        Candidate ``psi``, ``w`` and ``h``; an empty ``h_values`` skips stage 2.
    cov : SpatialCovModel, optional
        Error model whose correlation enters the GCV correction.
    kernel : KernelSpec, optional
        Radial Epanechnikov in the design dimension by default.
    index_set : {'offset', 'full'}
    phi_inner : {'H', 'G'}
        Pairing of ``phi_hat`` with the curves in predictions and residuals.
    """
    grid = grid or TuningGrid()
    cov = cov or SpatialCovModel()
    kernel = kernel or KernelSpec(dimension=design.d)
    y, coeffs, T, reg, index_set = _stage_one(curves, responses, design, grid, index_set, phi_inner)
    h, bw = None, None
    if grid.h_values:
        bw = select_bandwidth(T, design, grid.h_values, kernel, cov)
        h = float(bw.best)
    return SsflrdFit("ssflrd", coeffs, T, design, list(curves), y, h, kernel, cov,
                     phi_inner, index_set, reg, bw)


def fit_sflrd(curves, responses, design, grid: TuningGrid = None, cov: SpatialCovModel = None,
              kernel: KernelSpec = None, index_set: str = "offset", phi_inner: str = "H") -> SsflrdFit:
    """Baseline without the spatial surface (stage 1 only)."""
    grid = grid or TuningGrid()
    cov = cov or SpatialCovModel()
    kernel = kernel or KernelSpec(dimension=design.d)
    y, coeffs, T, reg, index_set = _stage_one(curves, responses, design, grid, index_set, phi_inner)
    return SsflrdFit("sflrd", coeffs, T, design, list(curves), y, None, kernel, cov,
                     phi_inner, index_set, reg, None)


def fitted_surface(fit: SsflrdFit, points=None) -> np.ndarray:
    """``r_hat`` at ``points`` (default: the design points)."""
    points = fit.design.coords if points is None else np.atleast_2d(points)
    if fit.h is None:
        return np.zeros(points.shape[0])
    if points is fit.design.coords:
        return hat_matrix(points, fit.h, fit.kernel) @ fit.residuals
    return smooth_surface(fit.residuals, fit.design.coords, points, fit.h, fit.kernel)


def predict_many(fit: SsflrdFit, coords, curves, sites=None) -> list:
    """Predictions ``<phi_hat, X> + <gamma_hat, X'>_G + r_hat(s)`` at new sites."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if coords.shape[0] != len(curves):
        raise DimensionError(f"{coords.shape[0]} sites for {len(curves)} curves")
    if sites is None:
        sites = [tuple(c) for c in coords]
    phi_term, gamma_term = linear_terms(fit.coeffs, curves, fit.phi_inner)
    if fit.h is None:
        spatial = np.zeros(len(curves))
    else:
        try:
            spatial = smooth_surface(fit.residuals, fit.design.coords, coords, fit.h, fit.kernel)
        except EmptyWindowError as exc:
            raise EmptyWindowError(f"cannot predict at sites {list(sites)} with h={fit.h}: {exc}") from exc
    return [
        Prediction(site, float(a + b + c), float(a), float(b), float(c))
        for site, a, b, c in zip(sites, phi_term, gamma_term, spatial)
    ]


def predict(fit: SsflrdFit, site, curve: FunctionalCurve) -> Prediction:
    """Prediction at one new site given by its coordinates in [0, 1]^d."""
    return predict_many(fit, np.atleast_2d(site), [curve], sites=[site])[0]


def mse1(truth_r, fitted_r) -> float:
    """Mean squared error of the spatial surface over the design points."""
    truth_r = np.asarray(truth_r, dtype=float)
    fitted_r = np.asarray(fitted_r, dtype=float)
    if truth_r.shape != fitted_r.shape:
        raise DimensionError(f"length mismatch: {truth_r.shape} vs {fitted_r.shape}")
    return float(np.mean((truth_r - fitted_r) ** 2))


def mse2(fit: SsflrdFit, truth, curves=None, phi_inner: str = None) -> float:
    """Mean squared error of the whole regression function over the design.

    ``<phi - phi_hat, X_i> + <gamma - gamma_hat, X'_i>_G + r - r_hat``, with
    the ``phi`` pairing given by ``phi_inner`` (default: the fit's).
    """
    if truth is None:
        raise ValueError("mse2 needs the true phi, gamma and r")
    curves = fit.curves if curves is None else curves
    phi_inner = phi_inner or fit.phi_inner
    true_coeffs = CoefficientEstimates(truth.phi, truth.gamma, fit.coeffs.params)
    tp, tg = linear_terms(true_coeffs, curves, phi_inner)
    fp, fg = linear_terms(fit.coeffs, curves, phi_inner)
    err = (tp - fp) + (tg - fg) + (np.asarray(truth.r_values) - fitted_surface(fit))
    return float(np.mean(err**2))


def prediction_error(y_true, y_hat) -> float:
    """Root of the summed squared prediction errors (no averaging)."""
    y_true = np.asarray(y_true, dtype=float)
    y_hat = np.asarray(y_hat, dtype=float)
    if y_true.shape != y_hat.shape or y_true.size == 0:
        raise DimensionError(f"length mismatch or empty input: {y_true.shape} vs {y_hat.shape}")
    return float(np.sqrt(np.sum((y_true - y_hat) ** 2)))
