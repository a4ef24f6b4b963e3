import numpy as np

from ssflrd import plotting
from ssflrd.benchmark import CellResult
from ssflrd.model import fit_ssflrd
from ssflrd.spatial import make_lattice
from ssflrd.tuning import TuningGrid

from conftest import random_curves


def _cells():
    r = np.random.default_rng(0)
    return [CellResult(n, a, r.uniform(size=5), r.uniform(size=5), 0, False) for n in (3, 4) for a in (0.1, 3.0)]


def test_benchmark_figures_are_deterministic_svg(tmp_path):
    a = plotting.benchmark_figure(_cells(), tmp_path / "a.svg").read_bytes()
    b = plotting.benchmark_figure(_cells(), tmp_path / "b.svg").read_bytes()
    assert a == b and a.lstrip().startswith(b"<?xml") and b"<svg" in a
    assert plotting.mse_scatter(_cells(), tmp_path / "s.svg").stat().st_size > 0


def test_prediction_and_coefficient_figures(tmp_path, rng):
    path = plotting.prediction_scatter([1.0, 2.0, 3.0], [1.2, 1.9, 3.3], tmp_path / "p.svg", title="SSFLRD")
    assert b"SSFLRD" in path.read_bytes()
    d = make_lattice((3, 3))
    fit = fit_ssflrd(random_curves(rng, 9, 8), rng.normal(size=9), d, grid=TuningGrid((0.1,), (0.1,), (0.8,)))
    assert plotting.coefficient_figure(fit, tmp_path / "sub" / "f.svg").exists()
