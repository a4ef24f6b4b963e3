"""Lattice designs and exponential spatial covariance models."""

from dataclasses import dataclass
import itertools
import logging

import numpy as np
from scipy.spatial.distance import cdist

from .errors import DimensionError

__all__ = [
    "LatticeDesign",
    "SpatialCovModel",
    "make_lattice",
    "irregular_design",
    "covariance_matrix",
    "correlation_matrix",
]

logger = logging.getLogger(__name__)

_NORMS = {"chebyshev": "chebyshev", "euclidean": "euclidean"}


@dataclass(frozen=True, eq=False)
class LatticeDesign:
    """Sites of a spatial design and their coordinates in [0, 1]^d.

    Attributes
    ----------
    dims : tuple of int or None
        Lattice sizes ``(n_1, ..., n_d)``; None for irregular designs.
    sites : ndarray of int, shape (n_sites, d), or None
        Integer multi-indices in lexicographic order (lattice mode) or in
        file order for subsets.
    coords : ndarray, shape (n_sites, d)
        Design points, ``i / (n + 1)`` in lattice mode.
    """

    dims: tuple
    sites: np.ndarray
    coords: np.ndarray

    def __post_init__(self):
        coords = np.atleast_2d(np.array(self.coords, dtype=float))
        coords.setflags(write=False)
        object.__setattr__(self, "coords", coords)
        if self.sites is not None:
            sites = np.atleast_2d(np.array(self.sites, dtype=np.int64))
            if sites.shape != coords.shape:
                raise DimensionError(f"sites {sites.shape} and coords {coords.shape} disagree")
            sites.setflags(write=False)
            object.__setattr__(self, "sites", sites)

    @property
    def size(self) -> int:
        return self.coords.shape[0]

    @property
    def d(self) -> int:
        return self.coords.shape[1]

    @property
    def irregular(self) -> bool:
        return self.dims is None

    def site_ids(self) -> list:
        """``"i1-i2-..."`` labels for lattice sites, ``"s<k>"`` otherwise."""
        if self.sites is None:
            return [f"s{k + 1}" for k in range(self.size)]
        return ["-".join(str(int(v)) for v in row) for row in self.sites]

    def subset(self, idx) -> "LatticeDesign":
        """Design restricted to ``idx``; keeps ``dims`` so coordinates stay on the parent lattice."""
        idx = np.asarray(idx)
        sites = None if self.sites is None else self.sites[idx]
        return LatticeDesign(self.dims, sites, self.coords[idx])

    def offset_mask(self) -> np.ndarray:
        """Sites whose multi-index has every coordinate >= 2."""
        if self.sites is None:
            raise DimensionError("offset index set needs integer multi-indices")
        return np.all(self.sites >= 2, axis=1)


def make_lattice(dims) -> LatticeDesign:
    """Lexicographically ordered lattice ``{1..n_1} x ... x {1..n_d}``.

    >>> make_lattice((2, 2)).site_ids()
    ['1-1', '1-2', '2-1', '2-2']
    """
    dims = tuple(int(n) for n in np.atleast_1d(dims))
    if len(dims) == 0 or any(n < 1 for n in dims):
        raise DimensionError(f"lattice dimensions must be positive, got {dims}")
    sites = np.array(list(itertools.product(*(range(1, n + 1) for n in dims))), dtype=np.int64)
    coords = sites / (np.array(dims, dtype=float) + 1.0)
    return LatticeDesign(dims, sites, coords)


def irregular_design(coords, sites=None) -> LatticeDesign:
    """Design from arbitrary normalized coordinates (real-data mode)."""
    coords = np.atleast_2d(np.asarray(coords, dtype=float))
    if np.any(coords < 0) or np.any(coords > 1):
        logger.warning("irregular design has coordinates outside [0, 1]")
    return LatticeDesign(None, sites, coords)


@dataclass(frozen=True)
class SpatialCovModel:
    """``sigma2 * exp(-a * dist(i, j))`` between sites.

    ``offdiag`` multiplies every off-diagonal entry; 0.01 reproduces the
    simulation error covariance and 1.0 is the plain exponential model.
    ``scale="index"`` measures distances between integer multi-indices,
    ``scale="none"`` between coordinates times ``coord_factor`` (used when a
    design has no multi-indices).
    """

    sigma2: float = 1.0
    a: float = 1.0
    norm: str = "chebyshev"
    scale: str = "index"
    offdiag: float = 1.0
    coord_factor: float = 1.0

    def __post_init__(self):
        if not self.sigma2 > 0:
            raise ValueError(f"sigma2 must be positive, got {self.sigma2}")
        if not self.a > 0:
            raise ValueError(f"decay a must be positive, got {self.a}")
        if self.norm not in _NORMS:
            raise ValueError(f"norm must be one of {sorted(_NORMS)}, got {self.norm!r}")
        if self.scale not in ("index", "none"):
            raise ValueError(f"scale must be 'index' or 'none', got {self.scale!r}")
        if not 0 <= self.offdiag <= 1:
            raise ValueError(f"offdiag must lie in [0, 1], got {self.offdiag}")


def _distances(model: SpatialCovModel, design: LatticeDesign) -> np.ndarray:
    if model.scale == "index" and design.sites is not None:
        pts = design.sites.astype(float)
    else:
        pts = design.coords * model.coord_factor
    return cdist(pts, pts, metric=_NORMS[model.norm])


def covariance_matrix(model: SpatialCovModel, design: LatticeDesign) -> np.ndarray:
    """Covariance matrix over the sites of ``design``; diagonal is exactly sigma2."""
    if design.size == 0:
        raise DimensionError("empty design")
    cov = model.sigma2 * model.offdiag * np.exp(-model.a * _distances(model, design))
    np.fill_diagonal(cov, model.sigma2)
    return cov


def correlation_matrix(model: SpatialCovModel, design: LatticeDesign) -> np.ndarray:
    cov = covariance_matrix(model, design)
    cov /= model.sigma2
    np.fill_diagonal(cov, 1.0)
    return cov
