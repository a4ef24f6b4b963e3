"""File formats of the command-line front end.

CSV files open with ``#`` comment lines carrying the format version and the
resolved run configuration, followed by a header row.  JSON files carry the
same information as top-level fields.  Floats are written with 17
significant digits so that curves survive a round trip bit-exactly.
"""

import csv
import json
import math
import os
from pathlib import Path

import numpy as np

from .errors import DataFormatError
from .funcdata import FunctionalCurve, make_grid, numeric_derivative
from .operators import CoefficientEstimates, RegularizationParams
from .smoother import KernelSpec
from .spatial import LatticeDesign, SpatialCovModel, irregular_design
from .tuning import TuningResult

__all__ = [
    "FORMAT_VERSION",
    "write_curves",
    "read_curves",
    "write_responses",
    "read_responses",
    "write_json",
    "read_json",
    "design_from_ids",
    "truth_to_dict",
    "fit_to_dict",
    "fit_from_dict",
    "write_predictions",
    "read_predictions",
    "write_table",
    "read_table",
    "write_series",
]

FORMAT_VERSION = "1.0"


def _fmt(x) -> str:
    return format(float(x), ".17g")


def _header_lines(config) -> list:
    lines = [f"# format_version = {FORMAT_VERSION}"]
    if config is not None:
        lines += [f"# {k} = {v}" for k, v in config.items(execution=False)]
    return lines


def _write_csv(path, config, header, rows):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", encoding="utf-8", newline="") as fh:
        for line in _header_lines(config):
            fh.write(line + "\n")
        fh.write(",".join(header) + "\n")
        for row in rows:
            fh.write(",".join(row) + "\n")


def _check_version(version, path, line=None):
    if version is None:
        raise DataFormatError("missing format_version", path, line)
    major = str(version).split(".")[0]
    if major != FORMAT_VERSION.split(".")[0]:
        raise DataFormatError(f"unsupported format version {version} (expected {FORMAT_VERSION})", path, line)


def _read_csv(path):
    """Metadata, header and ``(line number, fields)`` data rows."""
    meta = {}
    header, rows = None, []
    with open(path, encoding="utf-8", newline="") as fh:
        for lineno, raw in enumerate(fh, start=1):
            text = raw.rstrip("\r\n")
            if text.startswith("#"):
                if "=" in text:
                    key, value = (s.strip() for s in text[1:].split("=", 1))
                    meta[key] = value
                continue
            if not text.strip():
                continue
            fields = next(csv.reader([text]))
            if header is None:
                if "format_version" in meta:
                    _check_version(meta["format_version"], path, lineno)
                header = [f.strip() for f in fields]
                continue
            if len(fields) != len(header):
                raise DataFormatError(f"expected {len(header)} fields, found {len(fields)}", path, lineno)
            rows.append((lineno, fields))
    if header is None:
        raise DataFormatError("no header row", path, 1)
    return meta, header, rows


def _float(text, path, lineno, column):
    try:
        value = float(text)
    except ValueError:
        raise DataFormatError(f"column {column}: cannot read {text!r} as a number", path, lineno) from None
    if not math.isfinite(value):
        raise DataFormatError(f"column {column}: non-finite value {text!r}", path, lineno)
    return value


def write_curves(path, site_ids, coords, curves, config=None, derivatives: bool = True):
    """``site_id,c1..cd,t_1..t_p[,d_1..d_p]``, one row per site."""
    coords = np.atleast_2d(coords)
    p = curves[0].grid.p
    header = ["site_id"] + [f"c{k + 1}" for k in range(coords.shape[1])] + [f"t_{j + 1}" for j in range(p)]
    if derivatives:
        header += [f"d_{j + 1}" for j in range(p)]
    rows = []
    for sid, c, curve in zip(site_ids, coords, curves):
        row = [str(sid)] + [_fmt(x) for x in c] + [_fmt(x) for x in curve.values]
        if derivatives:
            row += [_fmt(x) for x in curve.deriv]
        rows.append(row)
    _write_csv(path, config, header, rows)


def read_curves(path):
    """Read a curves file.

    Returns
    -------
    site_ids : list of str
    coords : ndarray, shape (n, d)
    curves : list of FunctionalCurve
        Derivatives from the file when present, numerical otherwise.
    """
    _, header, rows = _read_csv(path)
    if header[0] != "site_id":
        raise DataFormatError("first column must be site_id", path, _header_line(path))
    cols = header[1:]
    d = 0
    while d < len(cols) and cols[d] == f"c{d + 1}":
        d += 1
    p = 0
    while d + p < len(cols) and cols[d + p] == f"t_{p + 1}":
        p += 1
    rest = cols[d + p:]
    has_deriv = bool(rest)
    if d == 0 or p < 3 or (has_deriv and rest != [f"d_{j + 1}" for j in range(p)]):
        raise DataFormatError("header must be site_id,c1..cd,t_1..t_p[,d_1..d_p] with p >= 3",
                              path, _header_line(path))
    if not rows:
        raise DataFormatError("no data rows", path, _header_line(path))
    grid = make_grid(p)
    ids, coords, curves, seen = [], [], [], set()
    for lineno, fields in rows:
        sid = fields[0].strip()
        if not sid or sid in seen:
            raise DataFormatError(f"empty or duplicate site_id {sid!r}", path, lineno)
        seen.add(sid)
        nums = [_float(t, path, lineno, header[k + 1]) for k, t in enumerate(fields[1:])]
        c = np.array(nums[:d])
        if np.any(c < 0) or np.any(c > 1):
            raise DataFormatError("coordinates must lie in [0, 1]", path, lineno)
        values = np.array(nums[d:d + p])
        deriv = np.array(nums[d + p:]) if has_deriv else numeric_derivative(values, grid)
        ids.append(sid)
        coords.append(c)
        curves.append(FunctionalCurve(grid, values, deriv))
    return ids, np.array(coords), curves


def _header_line(path) -> int:
    with open(path, encoding="utf-8") as fh:
        for lineno, raw in enumerate(fh, start=1):
            if raw.strip() and not raw.startswith("#"):
                return lineno
    return 1


def write_responses(path, site_ids, y, config=None):
    _write_csv(path, config, ["site_id", "y"], [[str(s), _fmt(v)] for s, v in zip(site_ids, y)])


def read_responses(path, site_ids=None) -> np.ndarray:
    """Responses, reordered to ``site_ids`` when given."""
    _, header, rows = _read_csv(path)
    if header != ["site_id", "y"]:
        raise DataFormatError("header must be site_id,y", path, _header_line(path))
    values = {}
    for lineno, (sid, y) in rows:
        sid = sid.strip()
        if sid in values:
            raise DataFormatError(f"duplicate site_id {sid!r}", path, lineno)
        values[sid] = _float(y, path, lineno, "y")
    if site_ids is None:
        return np.array(list(values.values()))
    missing = [s for s in site_ids if s not in values]
    if missing:
        raise DataFormatError(f"no response for site(s) {missing[:5]}", path)
    return np.array([values[s] for s in site_ids])


def design_from_ids(site_ids, coords) -> LatticeDesign:
    """Lattice design when every id encodes a multi-index ``i1-i2-...``, irregular otherwise."""
    coords = np.atleast_2d(coords)
    try:
        sites = np.array([[int(x) for x in s.split("-")] for s in site_ids])
    except ValueError:
        return irregular_design(coords)
    if sites.ndim != 2 or sites.shape[1] != coords.shape[1] or np.any(sites < 1):
        return irregular_design(coords)
    return LatticeDesign(tuple(int(v) for v in sites.max(axis=0)), sites, coords)


def _clean(obj):
    if isinstance(obj, dict):
        return {k: _clean(v) for k, v in obj.items()}
    if isinstance(obj, (list, tuple)):
        return [_clean(v) for v in obj]
    if isinstance(obj, np.ndarray):
        return _clean(obj.tolist())
    if isinstance(obj, (np.floating, float)):
        return float(obj) if math.isfinite(obj) else None
    if isinstance(obj, np.integer):
        return int(obj)
    return obj


def write_json(path, payload: dict, config=None):
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    body = {"format_version": FORMAT_VERSION}
    if config is not None:
        body["config"] = config.to_dict(execution=False)
    body.update(payload)
    with open(path, "w", encoding="utf-8") as fh:
        json.dump(_clean(body), fh, indent=2, allow_nan=False)
        fh.write("\n")


def read_json(path) -> dict:
    try:
        with open(path, encoding="utf-8") as fh:
            body = json.load(fh)
    except json.JSONDecodeError as exc:
        raise DataFormatError(f"invalid JSON: {exc.msg}", path, exc.lineno) from None
    if not isinstance(body, dict):
        raise DataFormatError("top level must be an object", path, 1)
    _check_version(body.get("format_version"), path)
    return body


def truth_to_dict(truth, site_ids) -> dict:
    return {
        "site_ids": list(site_ids),
        "phi": truth.phi.values,
        "gamma": truth.gamma.values,
        "r": truth.r_values,
        "eps": truth.eps,
        "linear": truth.linear,
    }


def fit_to_dict(fit, site_ids) -> dict:
    """Everything needed to predict from ``fit`` without the training curves."""
    design = fit.design
    out = {
        "model": fit.model,
        "p": fit.grid.p,
        "phi_inner": fit.phi_inner,
        "index_set": fit.index_set,
        "phi_hat": {"values": fit.coeffs.phi_hat.values, "deriv": fit.coeffs.phi_hat.deriv},
        "gamma_hat": {"values": fit.coeffs.gamma_hat.values, "deriv": fit.coeffs.gamma_hat.deriv},
        "regularization": {"psi": fit.coeffs.params.psi, "w": fit.coeffs.params.w, **fit.regularization.to_dict()},
        "site_ids": list(site_ids),
        "coords": design.coords,
        "sites": design.sites if design.sites is not None else None,
        "dims": list(design.dims) if design.dims is not None else None,
        "responses": fit.responses,
        "residuals": fit.residuals,
        "kernel": {"family": fit.kernel.family, "dimension": fit.kernel.dimension},
        "cov_model": {
            "sigma2": fit.cov_model.sigma2, "a": fit.cov_model.a, "norm": fit.cov_model.norm,
            "scale": fit.cov_model.scale, "offdiag": fit.cov_model.offdiag,
            "coord_factor": fit.cov_model.coord_factor,
        },
    }
    if fit.model == "ssflrd" and fit.h is not None:
        out["bandwidth"] = {"h": fit.h, **(fit.bandwidth.to_dict() if fit.bandwidth else {})}
    return out


def _array(body, key, path):
    try:
        arr = np.array(body[key], dtype=float)
    except (KeyError, TypeError, ValueError):
        raise DataFormatError(f"missing or malformed field {key!r}", path) from None
    if not np.all(np.isfinite(arr)):
        raise DataFormatError(f"non-finite entries in {key!r}", path)
    return arr


def fit_from_dict(body: dict, path="<fit>"):
    """Rebuild a prediction-ready :class:`SsflrdFit` from :func:`fit_to_dict` output."""
    from .model import SsflrdFit

    try:
        grid = make_grid(int(body["p"]))
        phi = FunctionalCurve(grid, _array(body["phi_hat"], "values", path), _array(body["phi_hat"], "deriv", path))
        gamma = FunctionalCurve(grid, _array(body["gamma_hat"], "values", path),
                                _array(body["gamma_hat"], "deriv", path))
        reg = body["regularization"]
        params = RegularizationParams(float(reg["psi"]), float(reg["w"]))
        coords = _array(body, "coords", path)
        sites = body.get("sites")
        dims = body.get("dims")
        design = LatticeDesign(tuple(dims) if dims else None, np.array(sites) if sites else None, coords)
        kernel = KernelSpec(**body["kernel"])
        cov = SpatialCovModel(**body["cov_model"])
        h = float(body["bandwidth"]["h"]) if "bandwidth" in body else None
        residuals = _array(body, "residuals", path)
        responses = _array(body, "responses", path)
        tuning = TuningResult(best=(params.psi, params.w), scores=np.array(reg.get("scores", []), dtype=float),
                              values=tuple(tuple(v) for v in reg.get("values", [])),
                              ties_broken=reg.get("ties_broken", ""))
        return SsflrdFit(body["model"], CoefficientEstimates(phi, gamma, params), residuals, design, [],
                         responses, h, kernel, cov, body["phi_inner"], body["index_set"], tuning)
    except DataFormatError:
        raise
    except (KeyError, TypeError, ValueError) as exc:
        raise DataFormatError(f"malformed fit file: {exc}", path) from None


def write_predictions(path, predictions, coords, site_ids, config=None):
    """``site_id,c1..cd,y_hat,linear_h,linear_g,spatial``."""
    coords = np.atleast_2d(coords)
    header = ["site_id"] + [f"c{k + 1}" for k in range(coords.shape[1])] + ["y_hat", "linear_h", "linear_g", "spatial"]
    rows = [[str(s)] + [_fmt(x) for x in c] + [_fmt(q.y_hat), _fmt(q.linear_h), _fmt(q.linear_g), _fmt(q.spatial)]
            for s, c, q in zip(site_ids, coords, predictions)]
    _write_csv(path, config, header, rows)


def read_predictions(path):
    """Site ids and a ``(n, 4)`` array of ``y_hat, linear_h, linear_g, spatial``."""
    _, header, rows = _read_csv(path)
    if header[0] != "site_id" or header[-4:] != ["y_hat", "linear_h", "linear_g", "spatial"]:
        raise DataFormatError("unexpected predictions header", path, _header_line(path))
    ids = [f[0] for _, f in rows]
    values = np.array([[_float(t, path, ln, header[len(f) - 4 + k]) for k, t in enumerate(f[-4:])] for ln, f in rows])
    return ids, values.reshape(len(ids), 4)


TABLE_HEADER = ["n2", "a", "metric", "mean", "sd", "replications", "failures"]


def write_table(path, rows, config=None):
    """Benchmark table ``n2,a,metric,mean,sd,replications,failures``."""
    out = [[str(n2), repr(float(a)), metric, _fmt(mean), _fmt(sd), str(reps), str(fails)]
           for n2, a, metric, mean, sd, reps, fails in rows]
    _write_csv(path, config, TABLE_HEADER, out)


def read_table(path) -> list:
    _, header, rows = _read_csv(path)
    if header != TABLE_HEADER:
        raise DataFormatError("unexpected table header", path, _header_line(path))
    out = []
    for ln, (n2, a, metric, mean, sd, reps, fails) in rows:
        out.append((int(n2), float(a), metric, float(mean), float(sd), int(reps), int(fails)))
    return out


def write_series(directory, cells, config=None) -> list:
    """One ``replication,mse1,mse2`` file per benchmark cell; returns the paths."""
    directory = Path(directory)
    os.makedirs(directory, exist_ok=True)
    paths = []
    for c in cells:
        path = directory / f"cell_n2-{c.n2}_a-{float(c.a)!r}.csv"
        rows = [[str(k), _fmt(e1), _fmt(e2)] for k, (e1, e2) in enumerate(zip(c.mse1, c.mse2))]
        _write_csv(path, config, ["replication", "mse1", "mse2"], rows)
        paths.append(path)
    return paths
