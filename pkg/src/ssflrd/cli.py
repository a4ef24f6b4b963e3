"""Command-line front end: ``simulate``, ``fit``, ``predict`` and ``benchmark``.

Settings come from the defaults, then the ``--config`` file, then flags.

Exit codes: 0 ok, 2 configuration, 3 I/O, 4 data format, 5 tuning failure,
6 flagged benchmark cells.
"""

import argparse
import logging
from pathlib import Path
import sys

import numpy as np

from . import dataio, plotting
from .benchmark import BenchmarkConfig, run_benchmark
from .config import RunConfig, load_config
from .errors import ConfigError, DataFormatError, DimensionError, EmptyWindowError, SsflrdError, TuningError
from .model import fit_sflrd, fit_ssflrd, predict_many, prediction_error
from .simulate import ScenarioConfig, generate_scenario
from .smoother import KernelSpec
from .spatial import SpatialCovModel
from .tuning import TuningGrid

__all__ = ["main", "build_parser", "cmd_simulate", "cmd_fit", "cmd_predict", "cmd_benchmark"]

logger = logging.getLogger("ssflrd")

EXIT_OK, EXIT_CONFIG, EXIT_IO, EXIT_FORMAT, EXIT_TUNING, EXIT_FLAGGED = 0, 2, 3, 4, 5, 6


def _grid(config: RunConfig, smoother: bool = True) -> TuningGrid:
    return TuningGrid(config.psi_values, config.w_values, config.h_values if smoother else ())


def _cov(config: RunConfig) -> SpatialCovModel:
    return SpatialCovModel(sigma2=config.sigma2, a=config.a, norm=config.norm, scale=config.cov_scale,
                           coord_factor=config.coord_factor)


def _out(config: RunConfig) -> Path:
    return Path(config.out)


def cmd_simulate(config: RunConfig) -> int:
    """Write one simulated dataset: curves, responses, truth and manifest."""
    data = generate_scenario(ScenarioConfig(n=config.n, a=config.a, p=config.p, n_basis=config.n_basis,
                                            seed=config.seed, noise_scale=config.noise_scale,
                                            holdout=config.holdout))
    out = _out(config)
    ids = data.design.site_ids()
    dataio.write_curves(out / "curves.csv", ids, data.design.coords, data.curves, config)
    dataio.write_responses(out / "responses.csv", ids, data.responses, config)
    dataio.write_json(out / "truth.json", dataio.truth_to_dict(data.truth, ids), config)
    files = ["curves.csv", "responses.csv", "truth.json"]
    if data.holdout is not None:
        ring = data.holdout
        ring_ids = ring.design.site_ids()
        dataio.write_curves(out / "holdout_curves.csv", ring_ids, ring.design.coords, ring.curves, config)
        dataio.write_responses(out / "holdout_responses.csv", ring_ids, ring.responses, config)
        dataio.write_json(out / "holdout_truth.json", dataio.truth_to_dict(ring.truth, ring_ids), config)
        files += ["holdout_curves.csv", "holdout_responses.csv", "holdout_truth.json"]
    dataio.write_json(out / "manifest.json", {"files": files, "sites": data.design.size, "p": config.p}, config)
    print(f"wrote {len(files)} files for {data.design.size} sites to {out}")
    return EXIT_OK


def _require(config, *keys):
    for key in keys:
        if not getattr(config, key):
            raise ConfigError(f"'{key}' must be set for the {config.command} command")


def _format_report(fit) -> str:
    psi, w = fit.coeffs.params.psi, fit.coeffs.params.w
    lines = [f"model = {fit.model}", f"sites = {fit.residuals.size}", f"p = {fit.grid.p}",
             f"phi_inner = {fit.phi_inner}", f"index_set = {fit.index_set}"]
    if fit.h is not None:
        lines.append(f"h = {fit.h:.4g}, ψ = {psi:.4g}, w = {w:.4g}")
    else:
        lines.append(f"ψ = {psi:.4g}, w = {w:.4g}")
    lines.append(f"CVMSEP = {np.nanmin(fit.regularization.scores):.6g}")
    if fit.bandwidth is not None:
        lines.append(f"GCV = {np.nanmin(fit.bandwidth.scores):.6g}")
    lines.append(f"residual variance = {np.var(fit.residuals):.6g}")
    return "\n".join(lines) + "\n"


def cmd_fit(config: RunConfig) -> int:
    """Fit the chosen model and write ``fit.json`` and ``report.txt``."""
    _require(config, "curves", "responses")
    ids, coords, curves = dataio.read_curves(config.curves)
    y = dataio.read_responses(config.responses, ids)
    design = dataio.design_from_ids(ids, coords)
    kernel = KernelSpec(config.kernel, design.d)
    phi_inner = config.resolved_phi_inner("fit")
    if config.model == "ssflrd":
        fit = fit_ssflrd(curves, y, design, grid=_grid(config), cov=_cov(config), kernel=kernel,
                         index_set=config.index_set, phi_inner=phi_inner)
    else:
        fit = fit_sflrd(curves, y, design, grid=_grid(config, smoother=False), cov=_cov(config), kernel=kernel,
                        index_set=config.index_set, phi_inner=phi_inner)
    out = _out(config)
    dataio.write_json(out / "fit.json", dataio.fit_to_dict(fit, ids), config)
    report = _format_report(fit)
    (out / "report.txt").write_text(report, encoding="utf-8")
    if config.plot:
        plotting.coefficient_figure(fit, out / "fit.svg")
    print(report, end="")
    return EXIT_OK


def cmd_predict(config: RunConfig) -> int:
    """Predict at the sites of ``curves`` from a stored fit; print PE when responses are given."""
    _require(config, "fit", "curves")
    fit = dataio.fit_from_dict(dataio.read_json(config.fit), config.fit)
    ids, coords, curves = dataio.read_curves(config.curves)
    if curves[0].grid != fit.grid:
        raise DataFormatError(f"curves have p={curves[0].grid.p} but the fit has p={fit.grid.p}", config.curves)
    if coords.shape[1] != fit.design.d:
        raise DataFormatError(f"curves have d={coords.shape[1]} but the fit has d={fit.design.d}", config.curves)
    preds = predict_many(fit, coords, curves, sites=ids)
    out = _out(config)
    dataio.write_predictions(out / "predictions.csv", preds, coords, ids, config)
    print(f"wrote {len(preds)} predictions to {out / 'predictions.csv'}")
    if config.responses:
        y = dataio.read_responses(config.responses, ids)
        y_hat = np.array([q.y_hat for q in preds])
        print(f"PE = {prediction_error(y, y_hat):.17g}")
        if config.plot:
            plotting.prediction_scatter(y, y_hat, out / "predictions.svg", title=fit.model.upper())
    return EXIT_OK


def cmd_benchmark(config: RunConfig) -> int:
    """Run the simulation study and write ``table1.csv`` and ``plotdata/``."""
    bench = BenchmarkConfig(
        ns=config.ns, a_values=config.a_values, replications=config.replications, seed=config.seed,
        p=config.p, grid=_grid(config), kernel_family=config.kernel, gcv_norm=config.norm,
        phi_inner=config.resolved_phi_inner("benchmark"), index_set=config.index_set, workers=config.workers,
    )
    result = run_benchmark(bench)
    out = _out(config)
    dataio.write_table(out / "table1.csv", result.rows(), config)
    dataio.write_series(out / "plotdata", result.cells, config)
    if config.plot:
        plotting.benchmark_figure(result.cells, out / "table1.svg")
        plotting.mse_scatter(result.cells, out / "mse_scatter.svg")
    print(f"{'n2':>4} {'a':>6} {'metric':>6} {'mean':>8} {'sd':>8} {'fail':>4}")
    for n2, a, metric, mean, sd, _, fails in result.rows():
        print(f"{n2:>4} {a:>6g} {metric:>6} {mean:>8.4f} {sd:>8.4f} {fails:>4}")
    if result.flagged:
        cells = ", ".join(f"n2={c.n2} a={c.a:g}" for c in result.flagged)
        print(f"flagged cells: {cells}", file=sys.stderr)
        return EXIT_FLAGGED
    return EXIT_OK


COMMANDS = {"simulate": cmd_simulate, "fit": cmd_fit, "predict": cmd_predict, "benchmark": cmd_benchmark}


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--config", help="key = value configuration file")
    common.add_argument("--seed", type=int)
    common.add_argument("--workers", type=int)
    common.add_argument("--model", choices=("ssflrd", "sflrd"))
    common.add_argument("--plot", action="store_true", default=None, help="also write SVG figures")
    common.add_argument("--out", help="output directory")
    common.add_argument("--set", action="append", default=[], metavar="KEY=VALUE",
                        help="override any configuration key (repeatable)")
    common.add_argument("-v", "--verbose", action="count", default=0)

    parser = argparse.ArgumentParser(prog="ssflrd", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    sim = sub.add_parser("simulate", parents=[common], help="simulate one dataset")
    sim.add_argument("--n", type=int)
    sim.add_argument("--a", type=float)
    sim.add_argument("--p", type=int)
    sim.add_argument("--holdout", action="store_true", default=None, help="also write the ring I_(n+1) minus I_n")
    fit = sub.add_parser("fit", parents=[common], help="fit SSFLRD or SFLRD")
    fit.add_argument("--curves")
    fit.add_argument("--responses")
    pred = sub.add_parser("predict", parents=[common], help="predict at new sites")
    pred.add_argument("--fit")
    pred.add_argument("--curves")
    pred.add_argument("--responses", help="observed values at the new sites; prints PE")
    bench = sub.add_parser("benchmark", parents=[common], help="run the simulation study")
    bench.add_argument("--replications", type=int)
    return parser


_FLAG_KEYS = ("seed", "workers", "model", "plot", "out", "n", "a", "p", "holdout", "curves", "responses", "fit",
              "replications")


def resolve_config(args) -> RunConfig:
    config = RunConfig(command=args.command)
    if args.config:
        config = load_config(args.config, config)
    overrides = {}
    for item in args.set:
        if "=" not in item:
            raise ConfigError(f"--set expects KEY=VALUE, got {item!r}")
        key, value = (s.strip() for s in item.split("=", 1))
        overrides[key.replace("-", "_")] = value
    for key in _FLAG_KEYS:
        value = getattr(args, key, None)
        if value is not None:
            overrides[key] = value
    overrides["command"] = args.command
    return config.updated(**overrides)


def main(argv=None) -> int:
    parser = build_parser()
    args = parser.parse_args(argv)
    level = logging.WARNING - 10 * min(args.verbose, 2)
    logging.basicConfig(level=level, format="%(levelname)s %(name)s: %(message)s", stream=sys.stderr)
    try:
        config = resolve_config(args)
        return COMMANDS[args.command](config)
    except ConfigError as exc:
        print(f"configuration error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except DataFormatError as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except TuningError as exc:
        print(f"tuning failed ({exc.stage}): {exc}", file=sys.stderr)
        return EXIT_TUNING
    except (DimensionError, EmptyWindowError) as exc:
        print(f"data format error: {exc}", file=sys.stderr)
        return EXIT_FORMAT
    except SsflrdError as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return EXIT_TUNING
    except OSError as exc:
        print(f"I/O error: {exc}", file=sys.stderr)
        return EXIT_IO


if __name__ == "__main__":
    sys.exit(main())
