"""Spatial semi-functional linear regression with derivatives.

Scalar responses observed on a spatial lattice are modelled as

    Y_i = <phi, X_i>_H + <gamma, X'_i>_G + r(i / (n + 1)) + eps_i

with functional regressors ``X_i``, their derivatives ``X'_i``, a smooth
spatial surface ``r`` and spatially correlated errors.  ``(phi, gamma)`` are
estimated by a regularized method of moments and ``r`` by local linear
smoothing of the partial residuals.
"""

from .errors import (
    ConfigError,
    DataFormatError,
    DimensionError,
    EmptyWindowError,
    GridError,
    NumericError,
    SsflrdError,
    TuningError,
)
from .funcdata import FunctionalCurve, Grid, gram_g, gram_h, inner_g, inner_h, make_grid, numeric_derivative
from .model import (
    Prediction,
    SsflrdFit,
    fit_sflrd,
    fit_ssflrd,
    fitted_surface,
    mse1,
    mse2,
    predict,
    predict_many,
    prediction_error,
)
from .operators import RegularizationParams, build_empirical, solve_coefficients
from .simulate import ScenarioConfig, generate_scenario
from .smoother import KernelSpec, hat_matrix, local_linear_fit, smooth_surface
from .spatial import LatticeDesign, SpatialCovModel, irregular_design, make_lattice
from .tuning import TuningGrid, cvmsep, gcv, select_bandwidth, select_regularization

__version__ = "0.1.0"
