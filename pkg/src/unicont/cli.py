"""Command-line experiment runner.

Every experiment reads a flat set of parameters (from a YAML config, from
flags, or both; flags win) and writes ``results.csv``, ``manifest.json`` and
``summary.txt`` into the output directory.  Exit status: 0 on success, 2 for
configuration errors, 3 for numerical failures, 4 when the output directory
cannot be written.
"""

from __future__ import annotations

import argparse
import csv
import hashlib
import io
import json
import math
import os
import platform
import sys
import time
from dataclasses import dataclass, field
from pathlib import Path

import numpy as np
import scipy
import yaml

from . import __version__
from .domains import Domain, Region, domain_from_dict, load_domain, region_from_dict
from .eigenbasis import build_basis, weyl_fit
from .errors import Infeasible, InvalidArgument, NumericFailure
from .geometry import geodesic_field, polyline_cover
from .kernels import eval_g, g_closed, g_series, theta_transform_residual
from .means import factorization_residual, mean_ode_residual, mean_profile, sample_mean_triples, sphere_quadrature
from .ucp import sigma_min_sweep
from .verify import run_verify
from .wave import (InitialData, SourceData, g_profile, parseval_energy, source_recover, wave_energy,
                   wave_eval_forced, wave_eval_ivp)

ENV_OUTPUT = "UNICONT_OUTPUT_DIR"
EXPERIMENTS = ("basis", "kernels", "means", "tmax", "cover", "ucp-sweep", "wave-ivp", "wave-recover", "verify")

EXIT_OK, EXIT_CONFIG, EXIT_NUMERIC, EXIT_OUTPUT = 0, 2, 3, 4


class ConfigError(Exception):
    def __init__(self, message: str, line: int | None = None, source: str | None = None):
        where = f"{source or 'config'}" + (f", line {line}" if line is not None else "")
        super().__init__(f"{where}: {message}")
        self.line = line


@dataclass
class Params:
    """Parameter mapping that reports the config line of a bad key."""

    values: dict
    lines: dict = field(default_factory=dict)
    source: str | None = None
    base_dir: Path = Path(".")

    def error(self, key: str, message: str) -> ConfigError:
        return ConfigError(f"{key}: {message}", self.lines.get(key), self.source)

    def get(self, key: str, kind=None, default=None, required: bool = False):
        if key not in self.values or self.values[key] is None:
            if required:
                raise ConfigError(f"missing required key {key!r}", None, self.source)
            return default
        raw = self.values[key]
        if kind is None:
            return raw
        try:
            if kind is list:
                return [float(v) for v in (raw if isinstance(raw, list) else [raw])]
            if kind is int and (isinstance(raw, bool) or float(raw) != int(float(raw))):
                raise ValueError("not an integer")
            return kind(raw)
        except (TypeError, ValueError) as exc:
            raise self.error(key, f"cannot read {raw!r} as {kind.__name__}: {exc}") from exc

    def domain(self) -> Domain:
        spec = self.get("domain", default={"kind": "interval", "a": 0.0, "b": math.pi})
        try:
            if isinstance(spec, str):
                path = Path(spec)
                return load_domain(path if path.is_absolute() else self.base_dir / path)
            if isinstance(spec, dict):
                return domain_from_dict(spec, self.base_dir)
        except (InvalidArgument, OSError, yaml.YAMLError) as exc:
            raise self.error("domain", str(exc)) from exc
        raise self.error("domain", "expected a mapping or a file path")

    def omega(self, dim: int) -> Region:
        spec = self.get("omega", required=True)
        if not isinstance(spec, dict):
            raise self.error("omega", "expected a mapping")
        try:
            return region_from_dict(spec, dim)
        except InvalidArgument as exc:
            raise self.error("omega", str(exc)) from exc


@dataclass
class Result:
    header: list[str]
    rows: list[list]
    summary: list[str]
    extra: dict = field(default_factory=dict)
    tables: dict = field(default_factory=dict)  # extra CSV files: name -> (header, rows)


# -- experiments --------------------------------------------------------------

def _coords(x) -> list[float]:
    return [float(v) for v in np.atleast_1d(x)]


def _xcols(dim: int) -> list[str]:
    return [f"x{k}" for k in range(dim)]


def exp_basis(p: Params) -> Result:
    dom = p.domain()
    K = p.get("K", int, 20)
    basis = build_basis(dom, K)
    rows = [[q.index, q.lambda_sq, q.lam, q.group] for q in basis.pairs]
    summary = [f"domain: {dom.describe()}", f"modes: {len(basis)}"]
    if len(basis) >= 50:
        fit = weyl_fit(basis)
        summary.append(f"Weyl exponent {fit.exponent:.6g} (expected {fit.expected_exponent:.6g}), "
                       f"constant {fit.constant:.6g} (expected {fit.expected_constant:.6g})")
    return Result(["n", "lambda_sq", "lambda", "group"], rows, summary)


def exp_kernels(p: Params) -> Result:
    xs = np.linspace(0.0, p.get("x_max", float, 40.0), p.get("num", int, 401))
    G = [g_closed(N, xs) for N in (1, 2, 3)]
    resid = np.max([np.abs(g_series(N, xs) - G[N - 1]) for N in (1, 2, 3)], axis=0)
    rows = [[x, g1, g2, g3, r] for x, g1, g2, g3, r in zip(xs, *G, resid)]
    theta = [[N, r, lam, theta_transform_residual(N, r, lam)]
             for N in (1, 2, 3) for r in (0.5, 1.0, 2.0) for lam in np.linspace(0.0, 20.0 / r, 21)]
    worst = max(row[-1] for row in theta)
    return Result(["x", "G1", "G2", "G3", "series_residual"], rows,
                  [f"max series residual on [0, {xs[-1]:g}]: {resid.max() if len(xs) else 0.0:.3e}",
                   f"max theta transform residual: {worst:.3e}"],
                  tables={"theta_residuals.csv": (["N", "r", "lambda", "residual"], theta)})


def _center(p: Params, dom: Domain) -> np.ndarray:
    c = p.get("center", list, None)
    if c is None:
        lo, hi = dom.bbox
        c = list(0.5 * (lo + hi))
    c = np.asarray(c, dtype=float)
    if c.size != dom.dim:
        raise p.error("center", f"expected {dom.dim} coordinates")
    if not np.all(dom.contains(c if dom.dim > 1 else c[0])):
        raise p.error("center", f"{c.tolist()} is not inside the domain; give a center explicitly")
    return c


def exp_means(p: Params) -> Result:
    """Radial profile of one mode's spherical mean, plus random factorization checks."""
    dom = p.domain()
    K = p.get("K", int, 10)
    basis = build_basis(dom, K)
    n = p.get("n", int, 1)
    if not 1 <= n <= len(basis):
        raise p.error("n", f"mode index must lie in 1..{len(basis)}")
    pair = basis[n - 1]
    center = _center(p, dom)
    xq = center if dom.dim > 1 else center[0]
    clear = float(np.atleast_1d(dom.clearance(xq))[0])
    r_max = p.get("r_max", float, 0.9 * clear)
    if not 0 <= r_max < clear:
        raise p.error("r_max", f"balls must stay inside the domain (clearance {clear:.6g})")
    quad = sphere_quadrature(dom.dim, p.get("order", int, None))
    radii = np.linspace(0.0, r_max, p.get("num", int, 201))
    prof = mean_profile(pair.eigenfunction, xq, radii, quad, dom)
    S0 = float(np.atleast_1d(pair.eigenfunction(center[None, :]))[0])
    SG = S0 * np.asarray(eval_g(dom.dim, pair.lam * radii), dtype=float)
    rows = [[r, phi, sg, abs(phi - sg)] for r, phi, sg in zip(radii, prof.values, SG)]

    rng = np.random.default_rng(p.get("seed", int, 0))
    checks = [[m, *_coords(x), r, factorization_residual(basis, m, x, r, quad)]
              for m, x, r in sample_mean_triples(basis, rng, p.get("samples", int, 20), K)]
    summary = [f"mode {n} (lambda^2 = {pair.lambda_sq:.10g}) at {center.tolist()}",
               f"max |Phi - S G_N| over r in [0, {r_max:.6g}]: {max((row[-1] for row in rows), default=0.0):.3e}"]
    if len(radii) >= 5 and r_max > 0:
        summary.append(f"radial ODE residual: {mean_ode_residual(prof, pair.lam, dom.dim):.3e}")
    summary.append(f"max factorization residual over {len(checks)} random triples: "
                   f"{max((row[-1] for row in checks), default=0.0):.3e}")
    return Result(["r", "Phi", "SG", "residual"], rows, summary,
                  tables={"factorization_checks.csv": (["n", *_xcols(dom.dim), "r", "residual"], checks)})


def exp_tmax(p: Params) -> Result:
    dom = p.domain()
    omega = p.omega(dom.dim)
    hs = [None] if dom.kind == "grid_mask" else p.get("h", list, [1e-3])
    rows, summary = [], []
    for h in hs:
        gf = geodesic_field(dom, omega, h)
        rows.append([gf.h, gf.t_max, gf.error_bound])
        summary.append(f"h = {gf.h:g}: T_max = {gf.t_max:.10g} +- {gf.error_bound:.3g}")
    # distance field of the last (normally finest) spacing
    idx = gf.lattice.interior_indices()
    coords = gf.lattice.node_coords(idx)
    dist = gf.distance[tuple(idx.T)]
    field_rows = [[*_coords(c), d] for c, d in zip(coords, dist)]
    return Result(["h", "T_max", "error"], rows, summary,
                  tables={"distance_field.csv": ([*_xcols(dom.dim), "distance"], field_rows)})


def exp_cover(p: Params) -> Result:
    dom = p.domain()
    omega = p.omega(dom.dim)
    h = p.get("h", float, None)
    field_ = geodesic_field(dom, omega, h)
    P = p.get("P", list, required=True)
    P = P[0] if dom.dim == 1 else P
    T = p.get("T", float, required=True)
    cover = polyline_cover(field_, P, T)
    rows = [[k, *_coords(c), r] for k, (c, r) in enumerate(zip(cover.waypoints, cover.radii))]
    summary = [f"geodesic distance of P: {field_.at(P):.10g}", f"balls: {len(cover.radii)}",
               f"radius sum {cover.total_radius:.10g} < T = {T:g}"]
    return Result(["k", *_xcols(dom.dim), "radius"], rows, summary)


def exp_ucp_sweep(p: Params) -> Result:
    dom = p.domain()
    omega = p.omega(dom.dim)
    K = p.get("K", int, 12)
    basis = build_basis(dom, K)
    table = sigma_min_sweep(basis, omega, p.get("Ts", list, required=True), K,
                            p.get("n_x", int, 16), p.get("density", float, 30.0))
    rows = [[r.T, r.sigma_min, r.cond, r.rows] for r in table]
    summary = [f"T = {r.T:.6g}: sigma_min = {r.sigma_min:.6e}, cond = {r.cond:.3e}" for r in table]
    return Result(["T", "sigma_min", "cond", "rows"], rows, summary)


def _sequence(p: Params, key: str, K: int, rng) -> np.ndarray:
    vals = p.get(key, list, None)
    if vals is None:
        return rng.normal(size=K)
    if len(vals) != K:
        raise p.error(key, f"expected {K} values, got {len(vals)}")
    return np.array(vals)


def _sample_points(p: Params, dom: Domain) -> np.ndarray:
    pts = p.get("points")
    if pts is None:
        return dom.quadrature(4)[0]
    arr = np.asarray(pts, dtype=float).reshape(-1, dom.dim)
    if not np.all(np.atleast_1d(dom.contains(arr if dom.dim > 1 else arr[:, 0]))):
        raise p.error("points", "every point must lie inside the domain")
    return arr


def _times(p: Params, default_stop: float) -> np.ndarray:
    spec = p.get("times", default={"start": 0.0, "stop": default_stop, "num": 11})
    if isinstance(spec, dict):
        try:
            return np.linspace(float(spec["start"]), float(spec["stop"]), int(spec["num"]))
        except (KeyError, TypeError, ValueError) as exc:
            raise p.error("times", "expected start, stop and num") from exc
    return np.array(p.get("times", list))


def exp_wave_ivp(p: Params) -> Result:
    dom = p.domain()
    K = p.get("K", int, 10)
    basis = build_basis(dom, K)
    rng = np.random.default_rng(p.get("seed", int, 0))
    data = InitialData(basis, _sequence(p, "A", K, rng), _sequence(p, "B", K, rng))
    times = _times(p, 10.0)
    pts = _sample_points(p, dom)
    X = pts if dom.dim > 1 else pts[:, 0]
    W = np.atleast_2d(wave_eval_ivp(data, times, X))
    rows = [[t, *_coords(x), w] for t, Wt in zip(times, W) for x, w in zip(pts, Wt)]
    summary = []
    if all(q.gradient is not None for q in basis.pairs):
        E0 = parseval_energy(data)
        drift = max(abs(wave_energy(data, t) - E0) / E0 for t in times)
        summary.append(f"relative energy drift over the time samples: {drift:.3e}")
    return Result(["t", *_xcols(dom.dim), "w"], rows, summary)


def read_observations(path, dim: int):
    """Long-format CSV ``t, x0[, x1], value`` into times, points and a (time, point) array."""
    table = np.loadtxt(path, delimiter=",", skiprows=1, ndmin=2)
    if table.shape[1] != dim + 2:
        raise InvalidArgument(f"{path}: expected {dim + 2} columns (t, x..., value)")
    times = np.unique(table[:, 0])
    pts = np.unique(table[:, 1:-1], axis=0)
    if len(times) * len(pts) != len(table):
        raise InvalidArgument(f"{path}: observations must form a full time x point grid")
    order = np.lexsort(tuple(table[:, k] for k in range(dim, -1, -1)))
    return times, pts, table[order, -1].reshape(len(times), len(pts))


def exp_wave_recover(p: Params) -> Result:
    dom = p.domain()
    K = p.get("K", int, 8)
    basis = build_basis(dom, K)
    gspec = p.get("g", default={"name": "affine"})
    try:
        if isinstance(gspec, dict):
            gspec = dict(gspec)
            g = g_profile(gspec.pop("name", "affine"), **gspec)
        else:
            g = g_profile(str(gspec))
    except (InvalidArgument, TypeError, ValueError) as exc:
        raise p.error("g", str(exc)) from exc
    C_true = None
    obs_path = p.get("observations")
    if obs_path is not None:
        times, pts, y = read_observations(p.base_dir / obs_path, dom.dim)
        dt = float(times[1] - times[0])
        if not np.allclose(np.diff(times), dt, rtol=1e-9, atol=0) or times[0] != 0:
            raise p.error("observations", "times must be uniform and start at 0")
    else:
        rng = np.random.default_rng(p.get("seed", int, 0))
        C_true = _sequence(p, "C", K, rng)
        dt = p.get("dt", float, 1e-3)
        times = dt * np.arange(int(p.get("T", float, required=True) / dt))
        pts = p.omega(dom.dim).sample(p.get("n_x", int, 8))
        y = wave_eval_forced(SourceData(basis, C_true, g), times, pts if dom.dim > 1 else pts[:, 0])
        y = y.reshape(len(times), len(pts))
    rec = source_recover(y, g, basis, K, dt, points=pts if dom.dim > 1 else pts[:, 0])
    header = ["n", "lambda", "C_est"] + (["C_true"] if C_true is not None else [])
    rows = [[n + 1, lam, c] + ([C_true[n]] if C_true is not None else [])
            for n, (lam, c) in enumerate(zip(basis.lambdas(K), rec.C))]
    summary = [f"fit residual {rec.residual:.3e}, rank {rec.rank}, condition {rec.cond:.3e}"]
    if C_true is not None:
        rel = np.linalg.norm(rec.C - C_true) / np.linalg.norm(C_true)
        summary.append(f"relative coefficient error {rel:.3e}")
    return Result(header, rows, summary)


def exp_verify(p: Params) -> Result:
    suites = p.get("suites")
    try:
        checks = run_verify(p.get("seed", int, 0), suites)
    except InvalidArgument as exc:
        raise p.error("suites", str(exc)) from exc
    rows = [[c.name, c.value, c.threshold, c.mode, "pass" if c.passed else "FAIL"] for c in checks]
    failed = [c.name for c in checks if not c.passed]
    summary = [f"{len(checks) - len(failed)}/{len(checks)} checks passed"] + [f"FAILED: {n}" for n in failed]
    return Result(["check", "value", "threshold", "mode", "status"], rows, summary, {"failed": failed})


RUNNERS = {
    "basis": exp_basis, "kernels": exp_kernels, "means": exp_means, "tmax": exp_tmax,
    "cover": exp_cover, "ucp-sweep": exp_ucp_sweep, "wave-ivp": exp_wave_ivp,
    "wave-recover": exp_wave_recover, "verify": exp_verify,
}


# -- reporting ----------------------------------------------------------------

def _fmt(v) -> str:
    if isinstance(v, (bool, np.bool_)):
        return str(bool(v)).lower()
    if isinstance(v, (int, np.integer)):
        return str(int(v))
    if isinstance(v, (float, np.floating)):
        return format(float(v), ".17g")
    return str(v)


def render_csv(header, rows) -> str:
    buf = io.StringIO()
    writer = csv.writer(buf, lineterminator="\n")
    writer.writerow(header)
    writer.writerows([[_fmt(v) for v in row] for row in rows])
    return buf.getvalue()


def emit_report(result: Result, manifest: dict, out_dir: Path) -> dict:
    """Write the three output files; returns their paths."""
    out_dir.mkdir(parents=True, exist_ok=True)
    text = render_csv(result.header, result.rows)
    paths = {"results": out_dir / "results.csv", "manifest": out_dir / "manifest.json",
             "summary": out_dir / "summary.txt"}
    paths["results"].write_text(text)
    digests = {"results.csv": hashlib.sha256(text.encode()).hexdigest()}
    for name, (header, rows) in result.tables.items():
        extra = render_csv(header, rows)
        paths[name] = out_dir / name
        paths[name].write_text(extra)
        digests[name] = hashlib.sha256(extra.encode()).hexdigest()
    manifest = {**manifest, "sha256": digests, "rows": len(result.rows), "columns": result.header}
    paths["manifest"].write_text(json.dumps(manifest, indent=2, sort_keys=True, default=_fmt) + "\n")
    paths["summary"].write_text("\n".join([f"experiment: {manifest['experiment']}", *result.summary]) + "\n")
    return paths


def versions() -> dict:
    return {"unicont": __version__, "python": platform.python_version(), "numpy": np.__version__,
            "scipy": scipy.__version__, "pyyaml": yaml.__version__}


# -- config -------------------------------------------------------------------

def _key_lines(text: str) -> dict:
    node = yaml.compose(text)
    if not isinstance(node, yaml.MappingNode):
        return {}
    return {k.value: k.start_mark.line + 1 for k, _ in node.value}


def load_config(path) -> Params:
    path = Path(path)
    try:
        text = path.read_text()
    except OSError as exc:
        raise ConfigError(f"cannot read config: {exc}", source=str(path)) from exc
    try:
        values = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        mark = getattr(exc, "problem_mark", None)
        raise ConfigError(f"YAML syntax: {getattr(exc, 'problem', exc)}",
                          mark.line + 1 if mark else None, str(path)) from exc
    if values is None:
        values = {}
    if not isinstance(values, dict):
        raise ConfigError("top level must be a mapping", 1, str(path))
    return Params(values, _key_lines(text), str(path), path.parent)


def _flag_value(text: str):
    if "," in text and not text.lstrip().startswith(("[", "{")):
        text = f"[{text}]"
    try:
        return yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"cannot parse flag value {text!r}: {exc}") from exc


def run_experiment(params: Params, out_override: str | None = None) -> int:
    """Run the experiment named in ``params`` and write its report."""
    kind = params.get("experiment", required=True)
    if kind not in RUNNERS:
        raise params.error("experiment", f"unknown experiment {kind!r}; expected one of {list(EXPERIMENTS)}")
    out = out_override or os.environ.get(ENV_OUTPUT) or params.get("output", str, None) or f"out/{kind}"
    t0 = time.perf_counter()
    try:
        result = RUNNERS[kind](params)
    except InvalidArgument as exc:
        raise ConfigError(str(exc), None, params.source) from exc
    elapsed = time.perf_counter() - t0
    manifest = {"experiment": kind, "config": params.values, "seed": params.get("seed", int, 0),
                "versions": versions(), "timings": {"run_seconds": elapsed}, **result.extra}
    try:
        paths = emit_report(result, manifest, Path(out))
    except OSError as exc:
        print(f"error: cannot write output to {out}: {exc}", file=sys.stderr)
        return EXIT_OUTPUT
    for line in result.summary:
        print(line)
    print(f"wrote {paths['results']}")
    return EXIT_NUMERIC if result.extra.get("failed") else EXIT_OK


# -- argument parsing ---------------------------------------------------------

_FLAGS = ("domain", "omega", "K", "Ts", "h", "P", "T", "n_x", "density", "dt", "g", "seed", "samples",
          "order", "times", "points", "A", "B", "C", "observations", "x_max", "num", "suites", "n", "center",
          "r_max")


def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="unicont", description=__doc__.splitlines()[0])
    sub = parser.add_subparsers(dest="command", required=True)
    run = sub.add_parser("run", help="run the experiment described by a YAML config")
    run.add_argument("config")
    run.add_argument("--out", help=f"output directory (beats ${ENV_OUTPUT} and the config)")
    for kind in EXPERIMENTS:
        sp = sub.add_parser(kind, help=f"run the {kind} experiment")
        sp.add_argument("--config", help="YAML config supplying defaults for the flags")
        sp.add_argument("--out", help="output directory")
        for key in _FLAGS:
            sp.add_argument(f"--{key.replace('_', '-')}", dest=key, metavar="VALUE",
                            help=f"config key {key!r} (YAML syntax; comma lists allowed)")
    return parser


def _origin(exc: BaseException) -> str:
    """Module of the innermost frame that raised ``exc``."""
    tb = exc.__traceback__
    name = "unicont"
    while tb is not None:
        name = tb.tb_frame.f_globals.get("__name__", name)
        tb = tb.tb_next
    return name


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        if args.command == "run":
            params = load_config(args.config)
        else:
            params = load_config(args.config) if args.config else Params({})
            params.values["experiment"] = args.command
            for key in _FLAGS:
                raw = getattr(args, key)
                if raw is not None:
                    params.values[key] = _flag_value(raw)
        return run_experiment(params, args.out)
    except ConfigError as exc:
        print(f"error: {exc}", file=sys.stderr)
        return EXIT_CONFIG
    except (NumericFailure, Infeasible) as exc:
        print(f"error: {type(exc).__name__} in {_origin(exc)}: {exc}", file=sys.stderr)
        return EXIT_NUMERIC


if __name__ == "__main__":
    sys.exit(main())
