import numpy as np
import pytest

from ssflrd import benchmark
from ssflrd.benchmark import BenchmarkConfig, run_benchmark
from ssflrd.errors import NumericError
from ssflrd.tuning import TuningGrid

TINY = dict(ns=(3, 4), a_values=(1.0, 200.0), replications=2, seed=5, p=24,
            grid=TuningGrid((1e-2, 1e-1), (1e-2,), (0.6, 0.9)))


def test_smoke_layout_and_finiteness():
    res = run_benchmark(BenchmarkConfig(**TINY))
    rows = res.rows()
    assert len(rows) == 2 * 2 * 2
    assert [r[:3] for r in rows[:4]] == [(9, 1.0, "mse1"), (9, 1.0, "mse2"), (9, 200.0, "mse1"), (9, 200.0, "mse2")]
    assert all(np.isfinite(r[3]) and r[5] == 2 for r in rows)
    assert res.cell(4, 200.0).n2 == 16 and not res.flagged
    with pytest.raises(KeyError):
        res.cell(7, 1.0)


def test_full_configuration_has_sixteen_rows():
    cfg = BenchmarkConfig()
    assert len(cfg.ns) * len(cfg.a_values) * 2 == 16


def test_worker_count_does_not_change_results():
    one = run_benchmark(BenchmarkConfig(**{**TINY, "ns": (3,), "workers": 1}))
    two = run_benchmark(BenchmarkConfig(**{**TINY, "ns": (3,), "workers": 2}))
    assert one.rows() == two.rows()
    for a, b in zip(one.cells, two.cells):
        np.testing.assert_array_equal(a.mse1, b.mse1)


def test_failures_are_retried_and_flagged(monkeypatch):
    def broken(*args, **kwargs):
        raise NumericError("forced")

    monkeypatch.setattr(benchmark, "_fit_one", broken)
    res = run_benchmark(BenchmarkConfig(**{**TINY, "ns": (3,), "a_values": (1.0,)}))
    cell = res.cells[0]
    assert cell.failures == 2 * (benchmark.MAX_RETRIES + 1)
    assert cell.flagged and np.all(np.isnan(cell.mse1))
    assert np.isnan(cell.summary("mse1")[0])


def test_partial_failures_recovered(monkeypatch):
    real = benchmark._fit_one
    calls = {"n": 0}

    def flaky(config, n, a, seed):
        calls["n"] += 1
        if calls["n"] == 1:
            raise NumericError("once")
        return real(config, n, a, seed)

    monkeypatch.setattr(benchmark, "_fit_one", flaky)
    res = run_benchmark(BenchmarkConfig(**{**TINY, "ns": (3,), "a_values": (1.0,), "replications": 40}))
    cell = res.cells[0]
    assert cell.failures == 1 and not cell.flagged and np.all(np.isfinite(cell.mse1))


def test_config_validation():
    with pytest.raises(ValueError):
        BenchmarkConfig(replications=1)
    with pytest.raises(ValueError):
        BenchmarkConfig(ns=())
    with pytest.raises(ValueError):
        BenchmarkConfig(workers=0)
