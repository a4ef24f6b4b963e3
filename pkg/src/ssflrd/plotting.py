"""Static SVG figures for the command-line reports.

Figures are built on bare :class:`matplotlib.figure.Figure` objects (no
pyplot state) and saved with a fixed hash salt and no timestamp, so that
repeated runs write byte-identical files.
"""

from pathlib import Path

import matplotlib
from matplotlib.figure import Figure
import numpy as np

__all__ = ["save_figure", "benchmark_figure", "mse_scatter", "prediction_scatter", "coefficient_figure"]

_STYLE = {
    "svg.hashsalt": "ssflrd",
    "svg.fonttype": "none",
    "font.size": 9,
    "axes.grid": True,
    "grid.linestyle": ":",
    "grid.linewidth": 0.5,
    "xtick.direction": "in",
    "ytick.direction": "in",
}


def save_figure(fig: Figure, path) -> Path:
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with matplotlib.rc_context(_STYLE):
        fig.savefig(path, format="svg", metadata={"Date": None, "Creator": None})
    return path


def _figure(ncols=1, width=4.0, height=3.2):
    with matplotlib.rc_context(_STYLE):
        fig = Figure(figsize=(width * ncols, height), layout="constrained")
        axes = fig.subplots(1, ncols, squeeze=False)[0]
    return fig, axes


def benchmark_figure(cells, path) -> Path:
    """Mean and one standard deviation of MSE1 and MSE2 against ``a``, one line per lattice size."""
    fig, axes = _figure(2)
    sizes = sorted({c.n2 for c in cells})
    for ax, metric, label in zip(axes, ("mse1", "mse2"), ("MSE$_1$", "MSE$_2$")):
        for n2 in sizes:
            sub = sorted((c for c in cells if c.n2 == n2), key=lambda c: c.a)
            a = np.array([c.a for c in sub])
            stats = np.array([c.summary(metric) for c in sub])
            ax.errorbar(a, stats[:, 0], yerr=stats[:, 1], marker="o", ms=3, capsize=2, label=f"$n^2$ = {n2}")
        ax.set_xscale("log")
        ax.set_xlabel("decay $a$")
        ax.set_ylabel(label)
        ax.legend(frameon=False)
    return save_figure(fig, path)


def mse_scatter(cells, path) -> Path:
    """Per-replication MSE2 against MSE1 for every cell."""
    fig, (ax,) = _figure()
    for c in cells:
        ax.scatter(c.mse1, c.mse2, s=6, alpha=0.6, label=f"$n^2$={c.n2}, a={c.a:g}")
    hi = max([np.nanmax(np.r_[c.mse1, c.mse2]) for c in cells] + [1e-12])
    ax.plot([0, hi], [0, hi], color="0.4", lw=0.6)
    ax.set_xlabel("MSE$_1$")
    ax.set_ylabel("MSE$_2$")
    ax.legend(frameon=False, fontsize=6, ncol=2)
    return save_figure(fig, path)


def prediction_scatter(measured, predicted, path, title=None) -> Path:
    """Centred predicted values against centred measured values."""
    measured = np.asarray(measured, dtype=float)
    predicted = np.asarray(predicted, dtype=float)
    x = measured - measured.mean()
    y = predicted - predicted.mean()
    fig, (ax,) = _figure(width=3.4, height=3.2)
    ax.scatter(x, y, s=10, color="k")
    lim = max(np.max(np.abs(np.r_[x, y])), 1e-12) * 1.1
    ax.plot([-lim, lim], [-lim, lim], color="0.5", lw=0.6)
    ax.set_xlim(-lim, lim)
    ax.set_ylim(-lim, lim)
    ax.set_xlabel("centred measured")
    ax.set_ylabel("centred predicted")
    if title:
        ax.set_title(title)
    return save_figure(fig, path)


def coefficient_figure(fit, path) -> Path:
    """Estimated coefficient curves and, when smoothed, the residual series with its fit."""
    fig, axes = _figure(2)
    t = fit.grid.points
    axes[0].plot(t, fit.coeffs.phi_hat.values, label=r"$\hat\phi$")
    axes[0].plot(t, fit.coeffs.gamma_hat.values, label=r"$\hat\gamma$")
    axes[0].set_xlabel("$t$")
    axes[0].legend(frameon=False)
    order = np.arange(fit.residuals.size)
    axes[1].plot(order, fit.residuals, ".", ms=3, color="0.4", label="$T_i$")
    if fit.h is not None:
        from .model import fitted_surface

        axes[1].plot(order, fitted_surface(fit), lw=0.8, label=r"$\hat r$")
    axes[1].set_xlabel("site (lexicographic)")
    axes[1].legend(frameon=False)
    return save_figure(fig, path)
