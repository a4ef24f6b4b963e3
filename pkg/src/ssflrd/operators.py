"""Empirical moment operators and the regularized moment-method solver.

Operators are stored as ``p x p`` matrices acting on grid samples.  Pairings
``<X_i, h>_H`` use the stored derivative of the data curve ``X_i`` and the
finite-difference derivative of the operand ``h``, so an operator applied to
``h`` agrees with a loop of :func:`tensor_apply` calls whenever ``h`` carries
stencil derivatives (:meth:`FunctionalCurve.from_values`).

Two routes compute the estimates:

* :func:`assemble_schur` / :func:`solve_coefficients` compose the ``p x p``
  matrices literally (reference route);
* :class:`GramSystem` solves the same equations in sample space.  Every
  operator has the form ``U^T V / n`` with ``U, V`` of shape ``(n, p)``, and
  the push-through identity ``(c I + U^T K V)^{-1} U^T = U^T (c I + K V U^T)^{-1}``
  reduces both estimates to ``n x n`` solves:

      (psi n I + (psi / w) Q + P) c_phi   = n y,   phi_hat   = X^T  c_phi
      (psi n I + (psi / w) P + Q) c_gamma = n y,   gamma_hat = X'^T c_gamma

  with ``P[i, j] = <X_i, X_j>_H`` and ``Q[i, j] = <X'_i, X'_j>_G``.
"""

from dataclasses import dataclass

import numpy as np
import scipy.linalg

from .errors import DimensionError, NumericError
from .funcdata import (
    FunctionalCurve,
    Grid,
    derivative_matrix,
    gram_g,
    gram_h,
    inner_g,
    inner_h,
)

__all__ = [
    "OperatorMatrix",
    "MomentVector",
    "EmpiricalMoments",
    "SchurSystem",
    "RegularizationParams",
    "CoefficientEstimates",
    "GramSystem",
    "tensor_apply",
    "moment_weights",
    "build_empirical",
    "adjoint",
    "regularized_inverse_apply",
    "assemble_schur",
    "solve_coefficients",
]

_SPACES = ("G", "H")


def _metric(space: str, grid: Grid) -> np.ndarray:
    return gram_h(grid) if space == "H" else gram_g(grid)


@dataclass(frozen=True, eq=False)
class OperatorMatrix:
    """Operator from ``domain`` to ``codomain`` (each ``"G"`` or ``"H"``)."""

    entries: np.ndarray
    domain: str
    codomain: str
    grid: Grid

    def __post_init__(self):
        entries = np.array(self.entries, dtype=float)
        if entries.shape != (self.grid.p, self.grid.p):
            raise DimensionError(f"operator must be {self.grid.p}x{self.grid.p}, got {entries.shape}")
        if not np.all(np.isfinite(entries)):
            raise NumericError("operator entries must be finite")
        if self.domain not in _SPACES or self.codomain not in _SPACES:
            raise ValueError("spaces must be 'G' or 'H'")
        entries.setflags(write=False)
        object.__setattr__(self, "entries", entries)

    def apply(self, h: FunctionalCurve) -> FunctionalCurve:
        if h.grid != self.grid:
            raise DimensionError("operand lives on a different grid")
        return FunctionalCurve.from_values(self.entries @ h.values, self.grid)

    def __matmul__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        if other.codomain != self.domain:
            raise DimensionError(f"cannot compose {self.domain}->{self.codomain} after {other.domain}->{other.codomain}")
        return OperatorMatrix(self.entries @ other.entries, other.domain, self.codomain, self.grid)

    def __sub__(self, other: "OperatorMatrix") -> "OperatorMatrix":
        return OperatorMatrix(self.entries - other.entries, self.domain, self.codomain, self.grid)

    @classmethod
    def identity(cls, grid: Grid, space: str = "H") -> "OperatorMatrix":
        return cls(np.eye(grid.p), space, space, grid)


@dataclass(frozen=True, eq=False)
class MomentVector:
    curve: FunctionalCurve
    space: str


@dataclass(frozen=True, eq=False)
class EmpiricalMoments:
    gamma: OperatorMatrix
    gamma_prime: OperatorMatrix
    gamma_prime_adj: OperatorMatrix
    gamma_second: OperatorMatrix
    delta: MomentVector
    delta_prime: MomentVector


@dataclass(frozen=True, eq=False)
class SchurSystem:
    s_phi: OperatorMatrix
    s_gamma: OperatorMatrix
    u_phi: MomentVector
    u_gamma: MomentVector


@dataclass(frozen=True)
class RegularizationParams:
    """``w`` regularizes the inner inverses, ``psi`` the outer solve."""

    psi: float
    w: float

    def __post_init__(self):
        if not (self.psi > 0 and self.w > 0):
            raise ValueError(f"psi and w must be positive, got psi={self.psi}, w={self.w}")


@dataclass(frozen=True, eq=False)
class CoefficientEstimates:
    phi_hat: FunctionalCurve
    gamma_hat: FunctionalCurve
    params: RegularizationParams


def tensor_apply(u: FunctionalCurve, v: FunctionalCurve, space: str, h: FunctionalCurve) -> FunctionalCurve:
    """``(u (x) v)(h) = <u, h>_space v``."""
    if space not in _SPACES:
        raise ValueError(f"space must be 'G' or 'H', got {space!r}")
    coef = inner_h(u, h) if space == "H" else inner_g(u, h)
    return v * coef


def _stack(curves):
    if len(curves) == 0:
        raise DimensionError("no samples")
    grid = curves[0].grid
    for c in curves:
        if c.grid != grid:
            raise DimensionError("all curves must share one grid")
    values = np.stack([c.values for c in curves])
    derivs = np.stack([c.deriv for c in curves])
    return grid, values, derivs


def moment_weights(responses, design=None, index_set: str = "offset") -> np.ndarray:
    """Per-sample weights ``y_i`` such that ``Delta_n = sum_i y_i X_i``.

    ``"offset"`` averages over sites whose multi-index has all coordinates
    >= 2, dividing by their count (``prod(n_k - 1)`` on a full lattice);
    ``"full"`` averages over every site.
    """
    y = np.asarray(responses, dtype=float)
    if index_set == "full":
        return y / y.size
    if index_set != "offset":
        raise ValueError(f"index_set must be 'offset' or 'full', got {index_set!r}")
    if design is None:
        raise DimensionError("offset index set needs a design with multi-indices")
    mask = design.offset_mask()
    if mask.size != y.size:
        raise DimensionError(f"{y.size} responses for {mask.size} sites")
    count = int(mask.sum())
    if count == 0:
        raise DimensionError("offset index set is empty")
    return np.where(mask, y, 0.0) / count


def build_empirical(curves, responses, design=None, index_set: str = "offset") -> EmpiricalMoments:
    """Empirical ``Gamma_n, Gamma'_n, Gamma'*_n, Gamma''_n, Delta_n, Delta'_n``.

    Operators average over all samples with weight ``1 / n``; the moment
    vectors use :func:`moment_weights`.
    """
    grid, Xv, Xd = _stack(curves)
    n = Xv.shape[0]
    if len(responses) != n:
        raise DimensionError(f"{len(responses)} responses for {n} curves")
    if design is not None:
        if design.size != n:
            raise DimensionError(f"design has {design.size} sites for {n} curves")
        if n < 2 ** design.d:
            raise DimensionError(f"need at least {2 ** design.d} samples, got {n}")
    D = derivative_matrix(grid)
    A = grid.dt * (Xv + Xd @ D)  # rows represent <X_i, .>_H
    B = grid.dt * Xd  # rows represent <X'_i, .>_G
    yw = moment_weights(responses, design, index_set)
    return EmpiricalMoments(
        gamma=OperatorMatrix(Xv.T @ A / n, "H", "H", grid),
        gamma_prime=OperatorMatrix(Xv.T @ B / n, "G", "H", grid),
        gamma_prime_adj=OperatorMatrix(Xd.T @ A / n, "H", "G", grid),
        gamma_second=OperatorMatrix(Xd.T @ B / n, "G", "G", grid),
        delta=MomentVector(FunctionalCurve.from_values(Xv.T @ yw, grid), "H"),
        delta_prime=MomentVector(FunctionalCurve.from_values(Xd.T @ yw, grid), "G"),
    )


def adjoint(op: OperatorMatrix) -> OperatorMatrix:
    """Adjoint between the metric spaces: ``M_dom^{-1} A^T M_cod``."""
    m_dom = _metric(op.domain, op.grid)
    m_cod = _metric(op.codomain, op.grid)
    try:
        entries = scipy.linalg.solve(m_dom, op.entries.T @ m_cod, assume_a="pos")
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"singular metric: {exc}") from exc
    return OperatorMatrix(entries, op.codomain, op.domain, op.grid)


def _shifted_solve(entries: np.ndarray, w: float, rhs: np.ndarray) -> np.ndarray:
    if not w > 0:
        raise ValueError(f"regularization must be positive, got {w}")
    try:
        lu = scipy.linalg.lu_factor(entries + w * np.eye(entries.shape[0]), check_finite=True)
        x = scipy.linalg.lu_solve(lu, rhs)
    except (np.linalg.LinAlgError, ValueError) as exc:
        raise NumericError(f"factorization of (A + wI) failed: {exc}") from exc
    if not np.all(np.isfinite(x)):
        raise NumericError("regularized solve produced non-finite values")
    return x


def regularized_inverse_apply(op: OperatorMatrix, w: float, b: FunctionalCurve) -> FunctionalCurve:
    """Solve ``(A + w I) x = b``."""
    if b.grid != op.grid:
        raise DimensionError("right-hand side lives on a different grid")
    return FunctionalCurve.from_values(_shifted_solve(op.entries, w, b.values), op.grid)


def assemble_schur(moments: EmpiricalMoments, w: float) -> SchurSystem:
    """Schur complements ``S_phi, S_gamma`` and right-hand sides ``u_phi, u_gamma``."""
    grid = moments.gamma.grid
    G1, Gp, Gpa, G2 = (m.entries for m in (moments.gamma, moments.gamma_prime, moments.gamma_prime_adj, moments.gamma_second))
    d = moments.delta.curve.values
    dp = moments.delta_prime.curve.values

    # (Gamma''_n + wI)^{-1} [Gamma'*_n | Delta'_n] and (Gamma_n + wI)^{-1} [Gamma'_n | Delta_n]
    inv2 = _shifted_solve(G2, w, np.column_stack([Gpa, dp]))
    inv1 = _shifted_solve(G1, w, np.column_stack([Gp, d]))
    s_phi = G1 - Gp @ inv2[:, :-1]
    u_phi = d - Gp @ inv2[:, -1]
    s_gamma = G2 - Gpa @ inv1[:, :-1]
    u_gamma = dp - Gpa @ inv1[:, -1]
    return SchurSystem(
        s_phi=OperatorMatrix(s_phi, "H", "H", grid),
        s_gamma=OperatorMatrix(s_gamma, "G", "G", grid),
        u_phi=MomentVector(FunctionalCurve.from_values(u_phi, grid), "H"),
        u_gamma=MomentVector(FunctionalCurve.from_values(u_gamma, grid), "G"),
    )


def solve_coefficients(moments: EmpiricalMoments, params: RegularizationParams) -> CoefficientEstimates:
    """``phi_hat = (S_phi + psi I)^{-1} u_phi`` and likewise for ``gamma_hat``."""
    schur = assemble_schur(moments, params.w)
    phi = regularized_inverse_apply(schur.s_phi, params.psi, schur.u_phi.curve)
    gamma = regularized_inverse_apply(schur.s_gamma, params.psi, schur.u_gamma.curve)
    return CoefficientEstimates(phi, gamma, params)


class GramSystem:
    """Sample-space form of the moment solver for a fixed set of curves.

    Holds the Gram matrices once so that leave-one-out refits and grid
    searches over ``(psi, w)`` only need ``n x n`` solves.

    Parameters
    ----------
    curves : sequence of FunctionalCurve
        Regressor curves ``X_i`` with their derivatives ``X'_i``.
    """

    def __init__(self, curves):
        grid, Xv, Xd = _stack(curves)
        self.grid = grid
        self.values = Xv
        self.derivs = Xd
        D = derivative_matrix(grid)
        A = grid.dt * (Xv + Xd @ D)
        self.P = A @ Xv.T  # <X_i, X_j>_H, derivative of X_j by stencil
        self.Q = grid.dt * (Xd @ Xd.T)  # <X'_i, X'_j>_G
        self.G = grid.dt * (Xv @ Xv.T)  # <X_i, X_j>_G

    @property
    def size(self) -> int:
        return self.values.shape[0]

    def solve(self, idx, weights, pairs):
        """Sample-space coefficients for every ``(psi, w)`` in ``pairs``.

        Parameters
        ----------
        idx : array of int
            Training samples.
        weights : array
            Moment weights of the training samples (see :func:`moment_weights`).
        pairs : sequence of (psi, w)

        Returns
        -------
        c_phi, c_gamma : ndarray, shape (len(pairs), len(idx))
        """
        idx = np.asarray(idx)
        n = idx.size
        P = self.P[np.ix_(idx, idx)]
        Q = self.Q[np.ix_(idx, idx)]
        eye = np.eye(n)
        psi = np.array([p for p, _ in pairs], dtype=float)[:, None, None]
        w = np.array([w for _, w in pairs], dtype=float)[:, None, None]
        if np.any(psi <= 0) or np.any(w <= 0):
            raise ValueError("psi and w must be positive")
        m_phi = psi * n * eye + (psi / w) * Q + P
        m_gamma = psi * n * eye + (psi / w) * P + Q
        rhs = np.broadcast_to(n * np.asarray(weights, dtype=float), (len(pairs), n))[..., None]
        try:
            c_phi = np.linalg.solve(m_phi, rhs)[..., 0]
            c_gamma = np.linalg.solve(m_gamma, rhs)[..., 0]
        except np.linalg.LinAlgError as exc:
            raise NumericError(f"sample-space solve failed: {exc}") from exc
        return c_phi, c_gamma

    def linear_terms(self, rows, idx, c_phi, c_gamma, phi_inner: str = "H"):
        """``<phi_hat, X_r>`` and ``<gamma_hat, X'_r>_G`` for samples ``rows``."""
        rows = np.atleast_1d(rows)
        left = self.P if phi_inner == "H" else self.G
        phi_term = c_phi @ left[np.ix_(rows, idx)].T
        gamma_term = c_gamma @ self.Q[np.ix_(rows, idx)].T
        return phi_term, gamma_term

    def estimates(self, idx, weights, params: RegularizationParams) -> CoefficientEstimates:
        """Coefficient curves for one ``(psi, w)``; equal to :func:`solve_coefficients`."""
        idx = np.asarray(idx)
        c_phi, c_gamma = self.solve(idx, weights, [(params.psi, params.w)])
        phi = FunctionalCurve.from_values(c_phi[0] @ self.values[idx], self.grid)
        gamma = FunctionalCurve.from_values(c_gamma[0] @ self.derivs[idx], self.grid)
        return CoefficientEstimates(phi, gamma, params)
