from dataclasses import replace

import numpy as np
import pytest

from ssflrd.errors import DimensionError
from ssflrd.funcdata import FunctionalCurve, inner_g, inner_h, make_grid
from ssflrd.model import (
    fit_sflrd,
    fit_ssflrd,
    fitted_surface,
    linear_terms,
    mse1,
    mse2,
    predict,
    predict_many,
    prediction_error,
)
from ssflrd.operators import CoefficientEstimates, RegularizationParams
from ssflrd.simulate import ScenarioConfig, generate_scenario
from ssflrd.spatial import SpatialCovModel, irregular_design, make_lattice
from ssflrd.tuning import TuningGrid

from conftest import random_curves

SMALL = TuningGrid((1e-3, 1e-1), (1e-3, 1e-1), (0.4, 0.6, 0.8))


def test_zero_data_gives_zero_fit(rng):
    curves = random_curves(rng, 16, 12)
    fit = fit_ssflrd(curves, np.zeros(16), make_lattice((4, 4)), grid=SMALL)
    assert np.all(fit.coeffs.phi_hat.values == 0) and np.all(fit.coeffs.gamma_hat.values == 0)
    assert np.all(fitted_surface(fit) == 0)


def test_simulated_fit_recovers_surface():
    data = generate_scenario(ScenarioConfig(n=10, a=3.0, p=120, seed=1))
    fit = fit_ssflrd(data.curves, data.responses, data.design, grid=SMALL, cov=SpatialCovModel(1.0, 3.0))
    assert mse1(data.truth.r_values, fitted_surface(fit)) < 0.5
    assert fit.h in SMALL.h_values
    assert (fit.coeffs.params.psi, fit.coeffs.params.w) == fit.regularization.best


def test_pure_surface_decoupled(rng):
    """Responses carry no functional signal: heavy shrinkage wins and the surface is an affine fit."""
    d = make_lattice((5, 5))
    curves = random_curves(rng, 25, 16)
    y = 0.5 + d.coords[:, 0] - 0.3 * d.coords[:, 1]
    grid = TuningGrid((1e6, 1e7), (1e-2,), (0.5, 0.9))
    fit = fit_ssflrd(curves, y, d, grid=grid)
    np.testing.assert_allclose(fitted_surface(fit), y, atol=1e-4)


def test_sflrd_is_stage_one_of_ssflrd(rng):
    d = make_lattice((4, 4))
    curves = random_curves(rng, 16, 12)
    y = rng.normal(size=16)
    full = fit_ssflrd(curves, y, d, grid=SMALL)
    base = fit_sflrd(curves, y, d, grid=SMALL)
    np.testing.assert_array_equal(full.coeffs.phi_hat.values, base.coeffs.phi_hat.values)
    np.testing.assert_array_equal(full.residuals, base.residuals)
    assert base.h is None and base.model == "sflrd"
    assert np.all(fitted_surface(base) == 0)


def test_residual_identity(rng):
    d = make_lattice((4, 4))
    curves = random_curves(rng, 16, 12)
    y = rng.normal(size=16)
    fit = fit_ssflrd(curves, y, d, grid=SMALL)
    phi, gam = fit.coeffs.phi_hat, fit.coeffs.gamma_hat
    direct = [y[i] - inner_h(x, phi) - inner_g(x.derivative_curve(), gam) for i, x in enumerate(curves)]
    np.testing.assert_allclose(fit.residuals, direct, rtol=1e-10, atol=1e-12)


def test_prediction_decomposition(rng):
    d = make_lattice((4, 4))
    curves = random_curves(rng, 16, 12)
    fit = fit_ssflrd(curves, rng.normal(size=16), d, grid=SMALL)
    new = random_curves(rng, 3, 12)
    sites = np.array([[0.3, 0.3], [0.5, 0.7], [0.6, 0.2]])
    preds = predict_many(fit, sites, new)
    for q, x, s in zip(preds, new, sites):
        assert q.y_hat == pytest.approx(q.linear_h + q.linear_g + q.spatial, abs=1e-14)
        assert q.linear_h == pytest.approx(inner_h(x, fit.coeffs.phi_hat), rel=1e-10, abs=1e-12)
        assert q.spatial == pytest.approx(fitted_surface(fit, s)[0], abs=1e-14)
    single = predict(fit, sites[1], new[1])
    assert single.y_hat == pytest.approx(preds[1].y_hat, abs=1e-14)


def test_prediction_at_design_sites_matches_fitted_values(rng):
    d = make_lattice((4, 4))
    curves = random_curves(rng, 16, 12)
    fit = fit_ssflrd(curves, rng.normal(size=16), d, grid=SMALL)
    preds = predict_many(fit, d.coords, curves)
    phi_t, gam_t = linear_terms(fit.coeffs, curves, fit.phi_inner)
    np.testing.assert_allclose([q.y_hat for q in preds], phi_t + gam_t + fitted_surface(fit), atol=1e-12)


def test_fit_on_irregular_sites_uses_full_index_set(rng):
    coords = rng.uniform(0.1, 0.9, size=(12, 2))
    fit = fit_ssflrd(random_curves(rng, 12, 10), rng.normal(size=12), irregular_design(coords),
                     grid=TuningGrid((0.1,), (0.1,), (0.8,)))
    assert fit.index_set == "full"


def test_fit_validation(rng):
    d = make_lattice((2, 2))
    with pytest.raises(DimensionError):
        fit_ssflrd(random_curves(rng, 4, 8), np.zeros(3), d)
    with pytest.raises(DimensionError):
        fit_ssflrd(random_curves(rng, 3, 8), np.zeros(3), irregular_design(rng.uniform(size=(3, 2))))
    fit = fit_sflrd(random_curves(rng, 9, 8), rng.normal(size=9), make_lattice((3, 3)), grid=SMALL)
    with pytest.raises(DimensionError):
        predict_many(fit, np.zeros((2, 2)), random_curves(rng, 3, 8))
    with pytest.raises(DimensionError):
        predict_many(fit, np.zeros((1, 2)) + 0.5, random_curves(rng, 1, 9))


def test_mse_examples():
    assert mse1([1.0, 2.0], [1.0, 4.0]) == 2.0
    with pytest.raises(DimensionError):
        mse1([1.0], [1.0, 2.0])
    assert prediction_error([1.0, 2.0], [1.0, 4.0]) == 2.0
    assert prediction_error([3.0, 0.0], [0.0, 4.0]) == 5.0
    with pytest.raises(DimensionError):
        prediction_error([], [])


def test_mse2_zero_at_truth():
    data = generate_scenario(ScenarioConfig(n=4, a=3.0, p=60, seed=5))
    fit = fit_sflrd(data.curves, data.responses, data.design, grid=SMALL, phi_inner="G")
    assert mse2(fit, data.truth) > 0
    perfect = replace(fit, coeffs=replace(fit.coeffs, phi_hat=data.truth.phi, gamma_hat=data.truth.gamma))
    assert mse2(perfect, data.truth) == pytest.approx(np.mean(data.truth.r_values**2), rel=1e-12)
    with pytest.raises(ValueError):
        mse2(fit, None)


def test_linear_terms_pairings():
    g = make_grid(10)
    t = g.points
    x = FunctionalCurve(g, t, np.ones(10))
    c = CoefficientEstimates(x, FunctionalCurve(g, np.ones(10), np.zeros(10)), RegularizationParams(1, 1))
    ph, gg = linear_terms(c, [x], "H")
    pg, _ = linear_terms(c, [x], "G")
    assert ph[0] == pytest.approx(pg[0] + 1.0)
    assert gg[0] == pytest.approx(1.0)
    with pytest.raises(ValueError):
        linear_terms(c, [x], "L2")
