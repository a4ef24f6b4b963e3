"""Independent reference computations used by the tests.

Everything here is written with explicit loops or textbook formulas.  The
leave-one-out oracle is the exception: it runs the package's dense ``p x p``
operator route, which shares no code with the sample-space solver that the
tuning module uses.
"""

import math

import numpy as np
from scipy import integrate, stats

from ssflrd.funcdata import FunctionalCurve, inner_g, inner_h
from ssflrd.operators import (
    EmpiricalMoments,
    MomentVector,
    RegularizationParams,
    build_empirical,
    solve_coefficients,
)


def rect_sum(f, g, p):
    """Left-rectangular quadrature of ``f * g`` sampled on ``t_j = (j - 1) / p``."""
    total = 0.0
    for j in range(p):
        total += f[j] * g[j] / p
    return total


def inner_t_t(p):
    """``sum_j ((j - 1) / p)^2 / p`` in closed form."""
    return (p - 1) * (2 * p - 1) / (6.0 * p * p)


def stencil_derivative(values, dt):
    """Second-order finite differences, one-sided three-point stencils at the ends."""
    v = list(values)
    p = len(v)
    out = [0.0] * p
    out[0] = (-3 * v[0] + 4 * v[1] - v[2]) / (2 * dt)
    out[-1] = (3 * v[-1] - 4 * v[-2] + v[-3]) / (2 * dt)
    for j in range(1, p - 1):
        out[j] = (v[j + 1] - v[j - 1]) / (2 * dt)
    return np.array(out)


def truncated_normal_mean(lo=0.0, hi=1.0):
    """Mean of N(0, 1) truncated to ``[lo, hi]`` by numerical integration."""
    num, _ = integrate.quad(lambda t: t * stats.norm.pdf(t), lo, hi)
    den, _ = integrate.quad(stats.norm.pdf, lo, hi)
    return num / den


def h_inner(f_vals, f_der, g_vals, g_der, p):
    return rect_sum(f_vals, g_vals, p) + rect_sum(f_der, g_der, p)


def local_linear_intercept(T, sites, s0, h, kernel):
    """``(1, 0) A^{-1} B`` from the weighted normal equations, one site at a time."""
    sites = np.atleast_2d(sites)
    n, d = sites.shape
    A = np.zeros((d + 1, d + 1))
    B = np.zeros(d + 1)
    for i in range(n):
        u = (sites[i] - s0) / h
        x = np.concatenate([[1.0], u])
        w = kernel(u) / h**d
        A += w * np.outer(x, x) / n
        B += w * x * T[i] / n
    return np.linalg.solve(A, B)[0]


def radial_epanechnikov_2d(u):
    return 2.0 / math.pi * max(1.0 - float(np.dot(u, u)), 0.0)


def classical_gcv(T, S):
    """``n * RSS / (n - tr S)^2``."""
    n = len(T)
    rss = sum((T[i] - sum(S[i, j] * T[j] for j in range(n))) ** 2 for i in range(n))
    tr = sum(S[i, i] for i in range(n))
    return n * rss / (n - tr) ** 2


def loo_cvmsep_dense(curves, y, design, psi, w, phi_inner="H"):
    """Leave-one-out score through the literal operator route.

    Each fold rebuilds the empirical operators on the remaining samples,
    averages the moment vectors over the offset sites that remain, and
    solves the Schur systems with ``p x p`` matrices.
    """
    n = len(curves)
    grid = curves[0].grid
    errs = []
    for ell in range(n):
        keep = np.array([i for i in range(n) if i != ell])
        ops = build_empirical([curves[i] for i in keep], y[keep], None, "full")
        mask = design.subset(keep).offset_mask()
        yw = np.where(mask, y[keep], 0.0) / mask.sum()
        Xv = np.stack([curves[i].values for i in keep])
        Xd = np.stack([curves[i].deriv for i in keep])
        moments = EmpiricalMoments(
            ops.gamma, ops.gamma_prime, ops.gamma_prime_adj, ops.gamma_second,
            MomentVector(FunctionalCurve.from_values(Xv.T @ yw, grid), "H"),
            MomentVector(FunctionalCurve.from_values(Xd.T @ yw, grid), "G"),
        )
        est = solve_coefficients(moments, RegularizationParams(psi, w))
        x = curves[ell]
        phi_term = inner_h(x, est.phi_hat) if phi_inner == "H" else inner_g(x, est.phi_hat)
        gamma_term = inner_g(x.derivative_curve(), est.gamma_hat)
        errs.append((y[ell] - phi_term - gamma_term) ** 2)
    return float(np.mean(errs))
