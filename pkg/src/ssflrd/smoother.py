"""Local linear kernel regression on [0, 1]^d.

The estimate at ``s0`` is the intercept of a kernel-weighted affine fit and
is linear in the responses: ``r_hat(s0) = S(s0)^T T``.  Hat rows are computed
in batch for many evaluation points.
"""

from dataclasses import dataclass
import logging
import math

import numpy as np

from .errors import EmptyWindowError

__all__ = [
    "KernelSpec",
    "LocalLinearFit",
    "kernel_eval",
    "hat_rows",
    "local_linear_fit",
    "smooth_surface",
    "hat_matrix",
]

logger = logging.getLogger(__name__)

FAMILIES = ("epanechnikov_radial", "epanechnikov_product")

# smallest/largest eigenvalue ratio below which a local system is treated as singular
_SINGULAR_RTOL = 1e-10
_JITTER = 1e-12


@dataclass(frozen=True)
class KernelSpec:
    family: str = "epanechnikov_radial"
    dimension: int = 2

    def __post_init__(self):
        if self.family not in FAMILIES:
            raise ValueError(f"kernel family must be one of {FAMILIES}, got {self.family!r}")
        if int(self.dimension) < 1:
            raise ValueError("kernel dimension must be >= 1")

    @property
    def constant(self) -> float:
        """Normalizing constant making the kernel integrate to one."""
        d = self.dimension
        if self.family == "epanechnikov_product":
            return 0.75**d
        ball = math.pi ** (d / 2) / math.gamma(d / 2 + 1)
        return (d + 2) / (2 * ball)

    @property
    def nu2(self) -> float:
        """Second moment ``int u_k^2 K(u) du`` (diagnostic only)."""
        if self.family == "epanechnikov_product":
            return 0.2
        return 1.0 / (self.dimension + 4)


@dataclass(frozen=True, eq=False)
class LocalLinearFit:
    s0: np.ndarray
    intercept: float
    slope: np.ndarray
    hat_weights: np.ndarray
    fallback: bool = False


def kernel_eval(spec: KernelSpec, u) -> np.ndarray:
    """Kernel value at ``u`` (last axis has length ``spec.dimension``).

    Radial: ``c_d * max(1 - |u|^2, 0)`` (``c_2 = 2 / pi``); product:
    ``prod_k 0.75 * max(1 - u_k^2, 0)``.
    """
    u = np.asarray(u, dtype=float)
    if u.shape[-1] != spec.dimension:
        raise ValueError(f"expected {spec.dimension}-vectors, got trailing size {u.shape[-1]}")
    if spec.family == "epanechnikov_radial":
        return spec.constant * np.maximum(1.0 - np.sum(u * u, axis=-1), 0.0)
    return np.prod(0.75 * np.maximum(1.0 - u * u, 0.0), axis=-1)


def _local_systems(coords, points, h, spec):
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    points = np.atleast_2d(np.asarray(points, dtype=float))
    if not h > 0:
        raise ValueError(f"bandwidth must be positive, got {h}")
    d = coords.shape[1]
    if points.shape[1] != d or spec.dimension != d:
        raise ValueError(f"dimension mismatch: sites d={d}, points d={points.shape[1]}, kernel d={spec.dimension}")
    n = coords.shape[0]
    u = (coords[None, :, :] - points[:, None, :]) / h  # (m, n, d)
    weights = kernel_eval(spec, u) / h**d  # diagonal of W_0 per point
    design = np.concatenate([np.ones(u.shape[:2] + (1,)), u], axis=2)  # rows of the local design matrix
    moment = np.einsum("mn,mni,mnj->mij", weights, design, design) / n
    return weights, design, moment


def hat_rows(coords, points, h: float, spec: KernelSpec, warn: bool = True):
    """Hat weights of the local linear fit at each evaluation point.

    ``warn=False`` demotes the singular-system message to debug level, for
    grid searches that probe degenerate bandwidths on purpose.

    Returns
    -------
    rows : ndarray, shape (n_points, n_sites)
    fallback : ndarray of bool
        Points where the local system was singular and the locally constant
        (weighted mean) estimator was used instead.

    Raises
    ------
    EmptyWindowError
        If some point has no site with positive kernel weight.
    """
    weights, design, moment = _local_systems(coords, points, h, spec)
    m, n, k = design.shape
    total = weights.sum(axis=1)
    empty = np.flatnonzero(total <= 0)
    if empty.size:
        raise EmptyWindowError(f"no site within bandwidth h={h} of evaluation point(s) {empty.tolist()}")

    eig = np.linalg.eigvalsh(moment)
    singular = eig[:, 0] <= _SINGULAR_RTOL * eig[:, -1]
    rows = np.empty((m, n))
    ok = ~singular
    if np.any(ok):
        mom = moment[ok]
        trace = np.trace(mom, axis1=1, axis2=2)
        mom = mom + _JITTER * trace[:, None, None] * np.eye(k)
        e1 = np.zeros((mom.shape[0], k, 1))
        e1[:, 0, 0] = 1.0
        z = np.linalg.solve(mom, e1)[..., 0]  # (1, 0^T) M^{-1}, M symmetric
        rows[ok] = np.einsum("mi,mni->mn", z, design[ok]) * weights[ok] / n
    if np.any(singular):
        (logger.warning if warn else logger.debug)(
            "local linear system singular at %d point(s) for h=%g; using locally constant fit",
            int(singular.sum()), h,
        )
        rows[singular] = weights[singular] / total[singular, None]
    return rows, singular


def local_linear_fit(T, sites, s0, h: float, spec: KernelSpec) -> LocalLinearFit:
    """Weighted least-squares affine fit of ``T`` around ``s0``."""
    T = np.asarray(T, dtype=float)
    s0 = np.atleast_1d(np.asarray(s0, dtype=float))
    rows, singular = hat_rows(sites, s0[None, :], h, spec)
    weights, design, moment = _local_systems(sites, s0[None, :], h, spec)
    k = design.shape[2]
    if singular[0]:
        slope = np.zeros(k - 1)
    else:
        rhs = np.einsum("n,ni,n->i", weights[0], design[0], T) / T.size
        mom = moment[0] + _JITTER * np.trace(moment[0]) * np.eye(k)
        slope = np.linalg.solve(mom, rhs)[1:]
    return LocalLinearFit(
        s0=s0,
        intercept=float(rows[0] @ T),
        slope=slope,
        hat_weights=rows[0],
        fallback=bool(singular[0]),
    )


def smooth_surface(T, sites, eval_points, h: float, spec: KernelSpec) -> np.ndarray:
    """``r_hat`` at each evaluation point."""
    rows, _ = hat_rows(sites, eval_points, h, spec)
    return rows @ np.asarray(T, dtype=float)


def hat_matrix(sites, h: float, spec: KernelSpec, warn: bool = True) -> np.ndarray:
    """Smoother matrix whose row ``l`` is the hat row of the fit centred at site ``l``."""
    rows, _ = hat_rows(sites, sites, h, spec, warn=warn)
    return rows
