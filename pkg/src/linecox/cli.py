"""Experiment runner: every analytic and Monte Carlo quantity as a subcommand.

Configuration is layered with precedence flag > config file > preset >
default.  Config files are INI-style with [params], [run] and [grid]
sections; unknown sections or keys are hard errors.  Every run writes one or
two CSV files plus a JSON manifest of the fully resolved configuration.
CSV output for a given seed is byte-identical across reruns and thread
counts; the manifest's wall-time field is the only non-reproducible output.

Exit codes: 0 success, 1 numerical failure (quadrature or window not
converged, empty feasible set), 2 usage or configuration error.
"""
from __future__ import annotations

import argparse
import configparser
import csv
import json
import math
import os
import subprocess
import sys
import time
from dataclasses import replace
from typing import IO, Optional, Sequence

import numpy as np

from . import __version__
from .core import (
    SCHEMA_VERSION,
    EmptyFeasibleSet,
    LatencyVariant,
    NetworkParams,
    NumericalError,
    ParameterError,
    QuadratureSpec,
    UnitParseError,
    convert_units,
    params_digest,
    substream,
    validate,
)
from . import analytic, geometry, montecarlo, optimize
from .analytic import AFVariant, DivergenceReport

QUANTITIES = (
    "laplace",
    "coverage",
    "ase",
    "af-snapshot",
    "af-cumulative",
    "latency",
    "optimize",
    "geometry-dump",
    "validate",
)

_PARAM_KEYS = ("lambda_l", "mu", "nu", "speed", "power", "alpha", "device_density")
_RUN_KEYS = (
    "mode",
    "n",
    "seed",
    "threads",
    "out",
    "variant",
    "rel_tol",
    "abs_tol",
    "target",
    "w1",
    "w2",
    "w3",
    "tau",
    "constraint",
    "refine",
    "radius",
    "half_length",
    "palm",
    "manhattan",
    "devices",
    "sigma",
)
_GRID_KEYS = ("s", "tau", "tau_db", "t", "w", "nu", "mu")

_DEFAULTS: dict[str, dict[str, str]] = {
    "params": {
        "lambda_l": "3",
        "mu": "3",
        "nu": "0.1",
        "speed": "30 km/h",
        "power": "1",
        "alpha": "3",
    },
    "run": {
        "mode": "analytic",
        "n": "10000",
        "out": ".",
        "variant": "auto",
        "rel_tol": "1e-6",
        "abs_tol": "1e-10",
        "w1": "0.7",
        "w2": "0.3",
        "w3": "0",
        "tau": "1",
        "refine": "true",
        "radius": "2",
        "half_length": "2",
        "palm": "true",
        "manhattan": "false",
        "devices": "true",
        "sigma": "0",
    },
    "grid": {},
}

# Canonical scenario presets; every value can be overridden per run.
_PRESETS: dict[str, dict[str, dict[str, str]]] = {
    "fig3": {
        "params": {"lambda_l": "5", "mu": "5", "nu": "0.1", "power": "0.01", "alpha": "3"},
        "run": {"target": "laplace", "n": "10000"},
        "grid": {"s": "geom:1e-4,0.1,10"},
    },
    "fig5": {
        "params": {"lambda_l": "3", "mu": "3", "nu": "0.1", "power": "1", "alpha": "3"},
        "run": {"target": "coverage"},
        "grid": {"tau_db": "lin:0,20,11"},
    },
    "fig7": {
        "params": {"lambda_l": "9", "mu": "3", "nu": "0.1", "speed": "30 km/h"},
        "run": {"target": "af-cumulative"},
        "grid": {"t": "lin:0,400,9"},
    },
    "fig8": {
        "params": {"lambda_l": "3", "mu": "3", "nu": "0.1", "speed": "30 km/h"},
        "run": {"target": "latency"},
        "grid": {"w": "lin:0,100,11"},
    },
    "fig10": {
        "params": {"lambda_l": "3", "mu": "0.5", "nu": "0.5", "power": "1", "alpha": "3"},
        "run": {"target": "optimize", "w1": "0.7", "w2": "0.3", "tau": "1"},
        "grid": {"nu": "lin:0.1,1.5,8", "mu": "lin:0.25,0.75,4"},
    },
}


class ConfigError(Exception):
    """Configuration or usage problem; maps to exit code 2."""


def _merge(base: dict[str, dict[str, str]], extra: dict[str, dict[str, str]]) -> None:
    for section, values in extra.items():
        base.setdefault(section, {}).update(values)


def _check_keys(config: dict[str, dict[str, str]]) -> None:
    known = {"params": _PARAM_KEYS, "run": _RUN_KEYS, "grid": _GRID_KEYS}
    for section, values in config.items():
        if section not in known:
            raise ConfigError(f"unknown config section [{section}]")
        for key in values:
            if key not in known[section]:
                raise ConfigError(f"unknown key '{key}' in section [{section}]")


def _load_config_file(path: str) -> dict[str, dict[str, str]]:
    parser = configparser.ConfigParser(inline_comment_prefixes=("#", ";"))
    read = parser.read(path)
    if not read:
        raise ConfigError(f"config file not found: {path}")
    return {s: dict(parser.items(s)) for s in parser.sections()}


def _parse_set(items: Sequence[str]) -> dict[str, dict[str, str]]:
    out: dict[str, dict[str, str]] = {}
    for item in items:
        if "=" not in item or "." not in item.split("=", 1)[0]:
            raise ConfigError(f"--set expects section.key=value, got '{item}'")
        dotted, value = item.split("=", 1)
        section, key = dotted.split(".", 1)
        out.setdefault(section.strip(), {})[key.strip()] = value.strip()
    return out


def _parse_grid(text: str, name: str) -> np.ndarray:
    text = text.strip()
    try:
        if text.startswith("lin:") or text.startswith("geom:"):
            kind, _, rest = text.partition(":")
            lo_s, hi_s, n_s = [p.strip() for p in rest.split(",")]
            lo, hi, count = float(lo_s), float(hi_s), int(n_s)
            if count < 1:
                raise ValueError("count must be >= 1")
            space = np.linspace if kind == "lin" else np.geomspace
            return space(lo, hi, count)
        return np.array([float(p) for p in text.split(",") if p.strip()])
    except (ValueError, TypeError) as exc:
        raise ConfigError(f"bad grid '{name}': {text!r} ({exc})") from None


def _float(config: dict[str, dict[str, str]], section: str, key: str) -> float:
    raw = config[section][key]
    try:
        return float(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not a number: {raw!r}") from None


def _int(config: dict[str, dict[str, str]], section: str, key: str) -> int:
    raw = config[section][key]
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"[{section}] {key}: not an integer: {raw!r}") from None


def _bool(config: dict[str, dict[str, str]], section: str, key: str) -> bool:
    raw = config[section][key].strip().lower()
    if raw in ("1", "true", "yes", "on"):
        return True
    if raw in ("0", "false", "no", "off"):
        return False
    raise ConfigError(f"[{section}] {key}: not a boolean: {raw!r}")


def _build_params(config: dict[str, dict[str, str]]) -> NetworkParams:
    fields = {}
    for key, raw in config["params"].items():
        try:
            fields[key] = convert_units(raw, key)
        except UnitParseError as exc:
            raise ConfigError(f"[params] {key}: {exc}") from None
    return validate(NetworkParams(**fields))


def _quad(config: dict[str, dict[str, str]]) -> QuadratureSpec:
    return QuadratureSpec(
        rel_tol=_float(config, "run", "rel_tol"),
        abs_tol=_float(config, "run", "abs_tol"),
    )


def _af_variant(name: str) -> AFVariant:
    try:
        return AFVariant(name)
    except ValueError:
        raise ConfigError(
            f"unknown variant '{name}'; expected one of "
            f"{[v.value for v in AFVariant]}"
        ) from None


def _latency_variant(name: str) -> LatencyVariant:
    try:
        return LatencyVariant(name)
    except ValueError:
        raise ConfigError(
            f"unknown variant '{name}'; expected one of "
            f"{[v.value for v in LatencyVariant]}"
        ) from None


def _need_seed(config: dict[str, dict[str, str]], quantity: str) -> Optional[int]:
    mode = config["run"]["mode"]
    needs = quantity == "geometry-dump" or quantity == "validate" or mode in (
        "montecarlo",
        "both",
    )
    raw = config["run"].get("seed")
    if raw is None:
        if needs:
            raise ConfigError("seed is required for Monte Carlo runs (--seed)")
        return None
    try:
        return int(raw)
    except ValueError:
        raise ConfigError(f"seed must be an integer, got {raw!r}") from None


# ---------------------------------------------------------------------------
# CSV writers (one row format per engine; schema_version leads every file)


def _open_csv(path: str, header: list[str]) -> tuple[IO[str], csv.writer]:
    handle = open(path, "w", newline="", encoding="utf-8")
    writer = csv.writer(handle, lineterminator="\n")
    writer.writerow(header)
    return handle, writer


def _fmt(value: float) -> str:
    if isinstance(value, float) and math.isnan(value):
        return "nan"
    return repr(float(value))


def _write_analytic(
    path: str,
    quantity: str,
    variant: str,
    rows: list[tuple[float, float]],
    bound_of,
    digest: str,
) -> None:
    handle, writer = _open_csv(
        path,
        [
            "schema_version",
            "quantity",
            "variant",
            "grid_value",
            "value",
            "est_error_bound",
            "params_hash",
        ],
    )
    with handle:
        for grid_value, value in rows:
            writer.writerow(
                [
                    SCHEMA_VERSION,
                    quantity,
                    variant,
                    _fmt(grid_value),
                    _fmt(value),
                    _fmt(bound_of(value)),
                    digest,
                ]
            )


def _write_mc(
    path: str,
    rows: list[tuple[str, float, montecarlo.Estimate]],
    seed: int,
    digest: str,
) -> None:
    handle, writer = _open_csv(
        path,
        [
            "schema_version",
            "quantity",
            "grid_value",
            "estimate",
            "std_error",
            "n",
            "seed",
            "params_hash",
        ],
    )
    with handle:
        for quantity, grid_value, est in rows:
            writer.writerow(
                [
                    SCHEMA_VERSION,
                    quantity,
                    _fmt(grid_value),
                    _fmt(est.value),
                    _fmt(est.std_error),
                    est.n_samples,
                    seed,
                    digest,
                ]
            )


# ---------------------------------------------------------------------------
# per-quantity evaluation, returning rows for either engine


def _analytic_rows(
    quantity: str,
    params: NetworkParams,
    config: dict[str, dict[str, str]],
    quad: QuadratureSpec,
) -> tuple[list[tuple[float, float]], str]:
    """(grid_value, value) rows plus the variant label actually used."""
    grid_cfg = config["grid"]
    variant = config["run"]["variant"]
    if quantity == "laplace":
        grid = _parse_grid(grid_cfg.get("s", "geom:1e-4,0.1,10"), "s")
        return [(float(s), analytic.laplace(params, float(s), quad)) for s in grid], ""
    if quantity == "coverage":
        grid = _coverage_grid(grid_cfg)
        return [
            (float(t), analytic.coverage_probability(params, float(t), quad))
            for t in grid
        ], ""
    if quantity == "ase":
        rows = []
        for label, cell in _sweep(params, grid_cfg):
            rows.append((label, analytic.area_spectral_efficiency(cell, quad)))
        return rows, ""
    if quantity == "af-snapshot":
        return [(math.nan, analytic.af_snapshot(params, quad))], ""
    if quantity == "af-cumulative":
        af_var = _af_variant("direction-aware" if variant == "auto" else variant)
        grid = _parse_grid(grid_cfg.get("t", "lin:0,400,9"), "t")
        rows = [
            (float(t), analytic.af_cumulative(params, float(t), quad, af_var))
            for t in grid
        ]
        # closing row: the t -> infinity limit every curve approaches
        rows.append((math.inf, analytic.af_limit(params)))
        return rows, af_var.value
    if quantity == "latency":
        # auto picks the conditioned law, the one the sampler estimates
        lat_var = _latency_variant(
            "direction-aware-conditioned" if variant == "auto" else variant
        )
        grid = _parse_grid(grid_cfg.get("w", "lin:0,100,11"), "w")
        rows = [
            (float(w), analytic.latency_ccdf(params, float(w), quad, lat_var))
            for w in grid
        ]
        return rows, lat_var.value
    raise ConfigError(f"quantity {quantity} has no analytic table")


def _coverage_grid(grid_cfg: dict[str, str]) -> np.ndarray:
    if "tau" in grid_cfg and "tau_db" in grid_cfg:
        raise ConfigError("give either grid tau or tau_db, not both")
    if "tau" in grid_cfg:
        return _parse_grid(grid_cfg["tau"], "tau")
    db = _parse_grid(grid_cfg.get("tau_db", "lin:0,20,11"), "tau_db")
    return 10.0 ** (db / 10.0)


def _sweep(params: NetworkParams, grid_cfg: dict[str, str]):
    """ASE sweep over nu or mu; a single nan-labelled point when no grid."""
    if "nu" in grid_cfg and "mu" in grid_cfg:
        raise ConfigError("ase sweeps over nu or mu, not both")
    if "nu" in grid_cfg:
        for nu in _parse_grid(grid_cfg["nu"], "nu"):
            yield float(nu), replace(params, nu=float(nu))
    elif "mu" in grid_cfg:
        for mu in _parse_grid(grid_cfg["mu"], "mu"):
            yield float(mu), replace(params, mu=float(mu))
    else:
        yield math.nan, params


def _mc_rows(
    quantity: str,
    params: NetworkParams,
    config: dict[str, dict[str, str]],
    seed: int,
) -> tuple[list[tuple[str, float, montecarlo.Estimate]], Optional[montecarlo.WindowReport]]:
    grid_cfg = config["grid"]
    n = _int(config, "run", "n")
    if quantity == "laplace":
        grid = _parse_grid(grid_cfg.get("s", "geom:1e-4,0.1,10"), "s")
        res = montecarlo.estimate_laplace(params, grid, n=n, seed=seed)
        rows = [
            ("laplace", float(s), est) for s, est in zip(res.grid, res.estimates)
        ]
        return rows, res.window
    if quantity == "coverage":
        grid = _coverage_grid(grid_cfg)
        res = montecarlo.estimate_coverage(params, grid, n=n, seed=seed)
        rows = [
            ("coverage", float(t), est) for t, est in zip(res.grid, res.estimates)
        ]
        return rows, res.window
    if quantity == "ase":
        rows = []
        report = None
        for label, cell in _sweep(params, grid_cfg):
            est, report = montecarlo.estimate_ase(cell, n=n, seed=seed)
            rows.append(("ase", label, est))
        return rows, report
    if quantity == "af-snapshot":
        est = montecarlo.estimate_af_snapshot(params, n=n, seed=seed)
        return [("af-snapshot", math.nan, est)], None
    if quantity == "af-cumulative":
        grid = _parse_grid(grid_cfg.get("t", "lin:0,400,9"), "t")
        sigma = _float(config, "run", "sigma")
        ests = montecarlo.estimate_af_cumulative(params, grid, n=n, seed=seed, sigma=sigma)
        return [("af-cumulative", float(t), e) for t, e in zip(grid, ests)], None
    if quantity == "latency":
        grid = _parse_grid(grid_cfg.get("w", "lin:0,100,11"), "w")
        res = montecarlo.estimate_latency(params, grid, n=n, seed=seed)
        rows = [("latency-ccdf", float(w), e) for w, e in zip(res.grid, res.ccdf)]
        rows.append(("latency-mean", math.nan, res.mean))
        rows.append(("latency-pzero", math.nan, res.p_zero))
        return rows, None
    raise ConfigError(f"quantity {quantity} has no Monte Carlo estimator")


# ---------------------------------------------------------------------------
# subcommand drivers


def _run_plain(
    quantity: str, config: dict[str, dict[str, str]], out_dir: str
) -> tuple[list[str], dict]:
    params = _build_params(config)
    quad = _quad(config)
    mode = config["run"]["mode"]
    if mode not in ("analytic", "montecarlo", "both"):
        raise ConfigError(f"unknown mode '{mode}'")
    digest = params_digest(params)
    outputs: list[str] = []
    extra: dict = {}
    bound = lambda v: quad.rel_tol * abs(v) + quad.abs_tol
    if mode in ("analytic", "both"):
        rows, variant = _analytic_rows(quantity, params, config, quad)
        path = os.path.join(out_dir, f"{quantity}_analytic.csv")
        _write_analytic(path, quantity, variant, rows, bound, digest)
        outputs.append(path)
    if mode in ("montecarlo", "both"):
        seed = _need_seed(config, quantity)
        assert seed is not None
        rows, report = _mc_rows(quantity, params, config, seed)
        path = os.path.join(out_dir, f"{quantity}_mc.csv")
        _write_mc(path, rows, seed, digest)
        outputs.append(path)
        if report is not None:
            extra["window"] = {
                "final_radius": report.final_radius,
                "stages": report.stages,
                "max_shift_over_se": report.max_shift_over_se,
            }
    return outputs, extra


def _run_optimize(
    config: dict[str, dict[str, str]], out_dir: str, threads: int
) -> tuple[list[str], dict]:
    params = _build_params(config)
    quad = _quad(config)
    weights = optimize.UtilityWeights(
        w1=_float(config, "run", "w1"),
        w2=_float(config, "run", "w2"),
        w3=_float(config, "run", "w3"),
        tau=_float(config, "run", "tau"),
    )
    grid_cfg = config["grid"]
    nus = _parse_grid(grid_cfg.get("nu", "lin:0.1,1.5,8"), "nu")
    mus = _parse_grid(grid_cfg.get("mu", "lin:0.25,0.75,4"), "mu")
    spec = optimize.GridSpec(
        nu_range=(float(nus[0]), float(nus[-1])),
        mu_range=(float(mus[0]), float(mus[-1])),
        n_nu=len(nus),
        n_mu=len(mus),
    )
    constraint = None
    raw_c = config["run"].get("constraint", "").strip()
    if raw_c:
        constraint = float(raw_c)
    result = optimize.optimize_grid(
        params,
        weights,
        spec,
        constraint=constraint,
        quad=quad,
        refine=_bool(config, "run", "refine"),
        threads=threads,
    )
    path = os.path.join(out_dir, "optimize.csv")
    handle, writer = _open_csv(
        path,
        [
            "schema_version",
            "nu",
            "mu",
            "p_c",
            "af_limit",
            "mean_latency",
            "utility",
            "feasible",
        ],
    )
    with handle:
        for cell in result.surface:
            writer.writerow(
                [
                    SCHEMA_VERSION,
                    _fmt(cell.nu),
                    _fmt(cell.mu),
                    _fmt(cell.p_c),
                    _fmt(cell.af),
                    _fmt(cell.latency),
                    _fmt(cell.utility),
                    int(cell.feasible),
                ]
            )
    extra = {
        "optimum": {
            "nu": result.nu_opt,
            "mu": result.mu_opt,
            "value": result.value,
            "coarse_nu": result.coarse_nu_opt,
            "coarse_mu": result.coarse_mu_opt,
        }
    }
    print(
        f"optimum nu={result.nu_opt:.6g} mu={result.mu_opt:.6g} "
        f"value={result.value:.6g}"
    )
    return [path], extra


def _run_geometry(
    config: dict[str, dict[str, str]], out_dir: str
) -> tuple[list[str], dict]:
    params = _build_params(config)
    seed = _need_seed(config, "geometry-dump")
    assert seed is not None
    radius = _float(config, "run", "radius")
    half_length = _float(config, "run", "half_length")
    rng = substream(seed, 0)
    if _bool(config, "run", "manhattan"):
        lines = geometry.sample_manhattan_lines(params.lambda_l, radius, rng)
        snap = geometry.snapshot_from_lines(lines, params, radius, half_length, rng)
    elif _bool(config, "run", "palm"):
        snap = geometry.palm_snapshot(params, radius, half_length, rng)
    else:
        snap = geometry.ordinary_snapshot(params, radius, half_length, rng)
    if _bool(config, "run", "devices"):
        snap = geometry.place_devices(snap, params.nu, rng)
    path = os.path.join(out_dir, "geometry.csv")
    geometry.snapshot_to_csv(snap, path)
    return [path], {"lines": snap.n_lines, "vehicles": snap.n_vehicles}


def _run_validate(
    config: dict[str, dict[str, str]], out_dir: str
) -> tuple[list[str], dict, int]:
    target = config["run"].get("target", "laplace")
    if target not in ("laplace", "coverage", "ase", "af-snapshot", "af-cumulative", "latency"):
        raise ConfigError(f"validate target must be an estimable quantity, got '{target}'")
    params = _build_params(config)
    quad = _quad(config)
    seed = _need_seed(config, "validate")
    assert seed is not None
    digest = params_digest(params)
    ana_rows, variant = _analytic_rows(target, params, config, quad)
    mc_rows, _ = _mc_rows(target, params, config, seed)
    # align by grid value; analytic af-cumulative carries a closing inf row
    # and latency a mean/pzero pair that need bespoke pairing
    ana_map = {g: v for g, v in ana_rows if math.isfinite(g)}
    pairs: list[tuple[float, float, montecarlo.Estimate]] = []
    for quantity, grid_value, est in mc_rows:
        if quantity == "latency-mean":
            value = analytic.mean_latency(params, quad)
            if isinstance(value, DivergenceReport):
                continue
            pairs.append((math.nan, value, est))
        elif quantity == "latency-pzero":
            continue
        elif quantity == "af-snapshot" or (quantity == "ase" and math.isnan(grid_value)):
            pairs.append((grid_value, ana_rows[0][1], est))
        else:
            if math.isnan(grid_value):
                continue
            pairs.append((grid_value, ana_map[grid_value], est))
    path = os.path.join(out_dir, f"validate_{target}.csv")
    handle, writer = _open_csv(
        path,
        [
            "schema_version",
            "quantity",
            "grid_value",
            "analytic",
            "mc",
            "std_error",
            "z_abs",
            "params_hash",
        ],
    )
    worst = 0.0
    with handle:
        for grid_value, value, est in pairs:
            if est.std_error > 0:
                z = abs(est.value - value) / est.std_error
            else:
                z = 0.0 if est.value == value else math.inf
            worst = max(worst, z)
            writer.writerow(
                [
                    SCHEMA_VERSION,
                    target,
                    _fmt(grid_value),
                    _fmt(value),
                    _fmt(est.value),
                    _fmt(est.std_error),
                    _fmt(z),
                    digest,
                ]
            )
    status = 0
    if worst > 3.0:
        print(f"validation FAILED: max |z| = {worst:.2f} > 3", file=sys.stderr)
        status = 1
    elif worst > 2.0:
        print(f"validation warning: max |z| = {worst:.2f} > 2", file=sys.stderr)
    print(f"validate {target}: max |z| = {worst:.3f} over {len(pairs)} points")
    return [path], {"max_abs_z": worst, "variant": variant}, status


# ---------------------------------------------------------------------------
# entry point


def _git_describe() -> str:
    try:
        out = subprocess.run(
            ["git", "describe", "--always", "--dirty"],
            capture_output=True,
            text=True,
            timeout=5,
            cwd=os.path.dirname(os.path.abspath(__file__)),
        )
        if out.returncode == 0:
            return out.stdout.strip()
    except (OSError, subprocess.TimeoutExpired):
        pass
    return "unknown"


def _write_manifest(
    out_dir: str,
    quantity: str,
    config: dict[str, dict[str, str]],
    outputs: list[str],
    extra: dict,
    wall_time: float,
) -> str:
    manifest = {
        "schema_version": SCHEMA_VERSION,
        "tool_version": __version__,
        "build": _git_describe(),
        "quantity": quantity,
        "resolved_config": config,
        "outputs": [os.path.basename(p) for p in outputs],
        "wall_time_s": wall_time,
    }
    manifest.update(extra)
    path = os.path.join(out_dir, f"{quantity}_manifest.json")
    with open(path, "w", encoding="utf-8") as handle:
        json.dump(manifest, handle, indent=2, sort_keys=True)
        handle.write("\n")
    return path


def _parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(
        prog="linecox",
        description="Vehicular line-network simulator and analytic evaluator",
    )
    sub = parser.add_subparsers(dest="quantity", required=True)
    for name in QUANTITIES:
        p = sub.add_parser(name)
        p.add_argument("--config", help="INI config file")
        p.add_argument("--preset", choices=sorted(_PRESETS),
                       help="named scenario preset")
        p.add_argument("--seed", type=int, help="Monte Carlo seed")
        p.add_argument("--n", type=int, help="Monte Carlo realisations")
        p.add_argument("--threads", type=int, default=None,
                       help="worker threads (results never depend on it)")
        p.add_argument("--out", help="output directory")
        p.add_argument("--variant",
                       help="analytic variant name (default auto: the variant "
                            "the Monte Carlo estimator targets)")
        p.add_argument("--rel-tol", type=float, help="quadrature relative tolerance")
        p.add_argument("--mode", choices=["analytic", "montecarlo", "both"])
        p.add_argument("--set", action="append", default=[], metavar="SEC.KEY=VAL",
                       help="override any config value")
    return parser


def _resolve_config(args: argparse.Namespace) -> dict[str, dict[str, str]]:
    config: dict[str, dict[str, str]] = {s: dict(v) for s, v in _DEFAULTS.items()}
    if args.preset:
        _merge(config, _PRESETS[args.preset])
    if args.config:
        file_cfg = _load_config_file(args.config)
        _check_keys(file_cfg)
        _merge(config, file_cfg)
    overrides = _parse_set(args.set)
    _check_keys(overrides)
    _merge(config, overrides)
    run = config["run"]
    if args.seed is not None:
        run["seed"] = str(args.seed)
    if args.n is not None:
        run["n"] = str(args.n)
    if args.out is not None:
        run["out"] = args.out
    if args.variant is not None:
        run["variant"] = args.variant
    if args.rel_tol is not None:
        run["rel_tol"] = repr(args.rel_tol)
    if args.mode is not None:
        run["mode"] = args.mode
    if args.threads is not None:
        run["threads"] = str(args.threads)
    _check_keys(config)
    return config


def main(argv: Optional[Sequence[str]] = None) -> int:
    args = _parser().parse_args(argv)
    quantity = args.quantity
    started = time.time()
    try:
        config = _resolve_config(args)
        out_dir = config["run"]["out"]
        os.makedirs(out_dir, exist_ok=True)
        threads = int(config["run"].get("threads") or os.cpu_count() or 1)
        status = 0
        if quantity == "optimize":
            outputs, extra = _run_optimize(config, out_dir, threads)
        elif quantity == "geometry-dump":
            outputs, extra = _run_geometry(config, out_dir)
        elif quantity == "validate":
            outputs, extra, status = _run_validate(config, out_dir)
        else:
            outputs, extra = _run_plain(quantity, config, out_dir)
        manifest = _write_manifest(
            out_dir, quantity, config, outputs, extra, time.time() - started
        )
        for path in outputs + [manifest]:
            print(f"wrote {path}")
        return status
    except (ConfigError, ParameterError, UnitParseError) as exc:
        print(f"error: {exc}", file=sys.stderr)
        return 2
    except (NumericalError, EmptyFeasibleSet) as exc:
        print(f"numerical failure: {exc}", file=sys.stderr)
        return 1


if __name__ == "__main__":
    sys.exit(main())
