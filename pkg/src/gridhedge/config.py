"""Flat key=value scenario configuration files and run manifests.

Config keys mirror the scenario fields one-to-one; numbers are decimal with
units fixed by the key name (kW, hours).  Lists are comma separated and a
correlation matrix writes its rows separated by semicolons.  Example::

    # two-microgrid demo
    mu              = 0.006, 0.005      # drift per hour
    sigma           = 0.03, 0.04        # volatility per sqrt-hour
    correlation     = 0.6               # scalar, or rows "1,0.6; 0.6,1"
    demand_kw       = 20, 25
    initial_kw      = 20, 25
    battery_unit_kw = 1
    horizon_hours   = 5
    rebalance_steps = 5
    n_paths         = 10000
    seed            = 42
    case_filter     = ge, lt            # optional
"""
import os
from datetime import datetime, timezone

import numpy as np

from .gbm import CorrelationMatrix, GbmParams
from .grid import GridEnsemble
from .scenario import ScenarioConfig, parse_case

REQUIRED_KEYS = (
    "mu",
    "sigma",
    "correlation",
    "demand_kw",
    "initial_kw",
    "battery_unit_kw",
    "horizon_hours",
    "rebalance_steps",
    "n_paths",
    "seed",
)


def parse_flat_file(path) -> "dict[str, str]":
    """Read ``key = value`` lines; '#' starts a comment, blanks ignored."""
    entries = {}
    with open(path) as handle:
        for line_no, raw in enumerate(handle, start=1):
            line = raw.split("#", 1)[0].strip()
            if not line:
                continue
            if "=" not in line:
                raise ValueError(f"{path}:{line_no}: expected 'key = value'")
            key, value = line.split("=", 1)
            entries[key.strip().lower()] = value.strip()
    return entries


def _floats(text: str) -> np.ndarray:
    return np.array([float(part) for part in text.split(",") if part.strip() != ""])


def _correlation(text: str, n: int) -> CorrelationMatrix:
    if ";" in text:
        rows = [_floats(row) for row in text.split(";")]
        return CorrelationMatrix(np.array(rows))
    values = _floats(text)
    if values.size == 1:
        if n == 1:
            return CorrelationMatrix.identity(1)
        return CorrelationMatrix.pairwise(float(values[0]), n)
    raise ValueError("correlation must be a scalar or ';'-separated matrix rows")


def load_scenario_config(path) -> ScenarioConfig:
    entries = parse_flat_file(path)
    missing = [key for key in REQUIRED_KEYS if key not in entries]
    if missing:
        raise ValueError(f"config missing keys: {', '.join(missing)}")
    mu = _floats(entries["mu"])
    sigma = _floats(entries["sigma"])
    if mu.size != sigma.size:
        raise ValueError("mu and sigma must have the same length")
    params = tuple(GbmParams(m, s) for m, s in zip(mu, sigma))
    grid = GridEnsemble(
        params=params,
        corr=_correlation(entries["correlation"], mu.size),
        demands=_floats(entries["demand_kw"]),
        battery_unit_kw=float(entries["battery_unit_kw"]),
    )
    case_filter = None
    if entries.get("case_filter"):
        case_filter = parse_case(entries["case_filter"])
        if len(case_filter) != grid.n_microgrids:
            raise ValueError("case_filter length must match the number of microgrids")
    return ScenarioConfig(
        grid=grid,
        initial_kw=_floats(entries["initial_kw"]),
        horizon_hours=float(entries["horizon_hours"]),
        rebalance_steps=int(entries["rebalance_steps"]),
        n_paths=int(entries["n_paths"]),
        seed=int(entries["seed"]),
        case_filter=case_filter,
        n_resamples=int(entries.get("n_resamples", 10_000)),
        max_simulated_paths=int(entries.get("max_simulated_paths", 2_000_000)),
    )


def config_snapshot(config: ScenarioConfig) -> "dict[str, str]":
    """Flat representation sufficient to reproduce the run bit-for-bit."""
    grid = config.grid
    rows = ";".join(",".join(format(v, ".17g") for v in row) for row in grid.corr.rho)
    snap = {
        "mu": ",".join(format(p.mu, ".17g") for p in grid.params),
        "sigma": ",".join(format(p.sigma, ".17g") for p in grid.params),
        "correlation": rows,
        "demand_kw": ",".join(format(v, ".17g") for v in grid.demands),
        "initial_kw": ",".join(format(v, ".17g") for v in config.initial_kw),
        "battery_unit_kw": format(grid.battery_unit_kw, ".17g"),
        "horizon_hours": format(config.horizon_hours, ".17g"),
        "rebalance_steps": str(config.rebalance_steps),
        "n_paths": str(config.n_paths),
        "seed": str(config.seed),
        "n_resamples": str(config.n_resamples),
    }
    if config.case_filter:
        snap["case_filter"] = ",".join(config.case_filter)
    return snap


def write_manifest(path, command: str, config: ScenarioConfig, outputs) -> None:
    """Atomically write the flat key=value manifest next to the outputs."""
    from . import __version__

    lines = [
        f"command = {command}",
        f"tool_version = {__version__}",
        f"created_utc = {datetime.now(timezone.utc).isoformat()}",
        f"seed = {config.seed}",
    ]
    for key, value in config_snapshot(config).items():
        lines.append(f"config.{key} = {value}")
    for name in outputs:
        lines.append(f"output = {name}")
    tmp = f"{path}.tmp"
    with open(tmp, "w") as handle:
        handle.write("\n".join(lines) + "\n")
    os.replace(tmp, path)
