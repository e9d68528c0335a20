"""Run configuration: schema, defaults, overrides, and the field registry.

A configuration is one JSON document (`schema_version` 1).  Any key can be
overridden from the command line with `--set path.to.key=value`, where the
value is parsed as JSON and falls back to a bare string.
"""
from __future__ import annotations

import copy
import hashlib
import json
import math
from pathlib import Path

from .errors import ConfigError
from .flows import (
    BenchmarkCoupling,
    CoordinateProjection,
    FlowSystem,
    LinearDecay,
    LorenzField,
    LorenzParams,
    LorenzProjection,
    SlowOnly,
    TanhDecay,
    ZeroCoupling,
    ZeroFast,
)
from .lab import LadderConfig
from .measure import MuSampler
from .ode import IntegratorConfig

SCHEMA_VERSION = 1

DEFAULTS: dict = {
    "schema_version": SCHEMA_VERSION,
    "root_seed": 0,
    "output_dir": "runs/default",
    "system": {
        "d": 1,
        "ell": 3,
        "eps": 0.125,
        "fast_flow": {"name": "lorenz", "sigma": 10.0, "rho": 28.0, "beta": 8.0 / 3.0, "trap_radius": 100.0, "rate": 1.0},
        "f0": {"name": "lorenz_projection", "centering": "none", "calibration_T": 2000.0, "index": [1]},
        "f": {"name": "benchmark", "c": 1.0, "kappa": 1.0},
    },
    "integrator": {"h_tau": 0.005, "method": "rk4", "record_stride": 1, "max_bytes": 1 << 30, "frame": "fast"},
    "sampler": {"burn_in": 100.0, "spacing": 5.0, "seed_point": [1.0, 1.0, 1.0], "dispersion": 1e-3, "chains": None},
    "simulate": {"T": 1.0, "xi": [0.0], "eta": None, "formats": ["csv", "trj"]},
    "estimate": {
        "sigma": {
            "n": 200.0,
            "M": 2000,
            "T": 2.0,
            "green_kubo": {"T_corr": 10.0, "T_run": 2000.0, "chains": 32, "sample_dt": 0.05},
            "tolerance": 0.15,
        },
        "F": {"x_grid": [[-2.0], [-1.0], [0.0], [1.0], [2.0]], "T": 10000.0, "chains": 20},
        "ldp": {
            "x_grid": [[-2.0], [-1.0], [0.0], [1.0], [2.0]],
            "a_grid": [0.05, 0.1, 0.2, 0.4, 0.8, 1.6, 4.5],
            "T_grid": [10.0, 40.0, 160.0, 640.0],
            "n_windows": 400,
            "F_T": 10000.0,
            "window_bound": {"a": 0.1, "T": 100.0, "shift_n": 3, "n_windows": 400},
        },
    },
    "ladder": {
        "eps_ladder": [0.5, 0.25, 0.125],
        "M": 2000,
        "T": 1.0,
        "eval_times": [0.25, 0.5, 1.0],
        "delta_exponent": 1.5,
        "xi": [0.0],
        "sde_h": 0.001,
        "chunk_size": 250,
        "oracle_count": 50,
        "sigma": None,
        "drift_T": 10000.0,
    },
    "tolerances": {"oracle": 1e-4, "ks_final": 0.10},
}


def default_config() -> dict:
    return copy.deepcopy(DEFAULTS)


def _merge(base: dict, over: dict, path="") -> dict:
    out = copy.deepcopy(base)
    for key, value in over.items():
        where = f"{path}.{key}" if path else key
        if key not in base:
            raise ConfigError(f"unknown config key {where!r}")
        if isinstance(base[key], dict) and isinstance(value, dict):
            out[key] = _merge(base[key], value, where)
        else:
            out[key] = copy.deepcopy(value)
    return out


def parse_config(text: str) -> dict:
    """Parse a JSON config and fill defaults; unknown keys are errors."""
    try:
        raw = json.loads(text) if text.strip() else {}
    except json.JSONDecodeError as exc:
        raise ConfigError(f"config is not valid JSON: {exc}") from exc
    if not isinstance(raw, dict):
        raise ConfigError("config must be a JSON object")
    version = raw.get("schema_version", SCHEMA_VERSION)
    if version != SCHEMA_VERSION:
        raise ConfigError(f"unsupported schema_version {version}")
    cfg = _merge(DEFAULTS, raw)
    validate(cfg)
    return cfg


def load_config(path=None) -> dict:
    return parse_config(Path(path).read_text()) if path else default_config()


def dump_config(cfg: dict) -> str:
    return json.dumps(cfg, sort_keys=True, indent=2, allow_nan=False) + "\n"


def config_hash(cfg: dict) -> str:
    canonical = json.dumps(cfg, sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(canonical.encode()).hexdigest()


def apply_overrides(cfg: dict, assignments) -> dict:
    cfg = copy.deepcopy(cfg)
    for item in assignments or ():
        key, sep, text = item.partition("=")
        if not sep:
            raise ConfigError(f"--set expects path.to.key=value, got {item!r}")
        try:
            value = json.loads(text)
        except json.JSONDecodeError:
            value = text
        node = cfg
        parts = key.split(".")
        for part in parts[:-1]:
            if not isinstance(node.get(part), dict):
                raise ConfigError(f"unknown config key {key!r}")
            node = node[part]
        if parts[-1] not in node:
            raise ConfigError(f"unknown config key {key!r}")
        node[parts[-1]] = value
    validate(cfg)
    return cfg


FAST_FLOWS = ("lorenz", "linear_decay")
F0_NAMES = ("lorenz_projection", "zero", "coordinates")
F_NAMES = ("benchmark", "zero", "tanh_decay")


def validate(cfg: dict) -> None:
    """Check registry names and every precondition that can be checked statically."""
    try:
        s = cfg["system"]
        if s["fast_flow"]["name"] not in FAST_FLOWS:
            raise ConfigError(f"unknown fast flow {s['fast_flow']['name']!r}; choose from {FAST_FLOWS}")
        if s["f0"]["name"] not in F0_NAMES:
            raise ConfigError(f"unknown f0 {s['f0']['name']!r}; choose from {F0_NAMES}")
        if s["f"]["name"] not in F_NAMES:
            raise ConfigError(f"unknown f {s['f']['name']!r}; choose from {F_NAMES}")
        if s["f0"]["centering"] not in ("none", "runtime"):
            raise ConfigError("f0.centering must be 'none' or 'runtime'")
        if s["fast_flow"]["name"] == "lorenz" and s["ell"] != 3:
            raise ConfigError("the Lorenz flow needs ell = 3")
        if s["f0"]["name"] == "coordinates" and len(s["f0"]["index"]) != s["d"]:
            raise ConfigError("f0.index must list d coordinates")
        if not isinstance(cfg["root_seed"], int) or not 0 <= cfg["root_seed"] < 2**64:
            raise ConfigError("root_seed must be an integer in [0, 2^64)")
        if cfg["integrator"]["frame"] not in ("fast", "slow"):
            raise ConfigError("integrator.frame must be 'fast' or 'slow'")
        build_system(cfg)
        build_integrator(cfg)
        build_sampler(cfg)
        build_ladder(cfg)
        sim = cfg["simulate"]
        if not sim["T"] > 0:
            raise ConfigError("simulate.T must be positive")
        if len(sim["xi"]) != s["d"]:
            raise ConfigError("simulate.xi must have d entries")
        if sim["eta"] is not None and len(sim["eta"]) != s["ell"]:
            raise ConfigError("simulate.eta must have ell entries")
        if len(cfg["ladder"]["xi"]) != s["d"]:
            raise ConfigError("ladder.xi must have d entries")
        est = cfg["estimate"]
        if est["sigma"]["M"] < 30:
            raise ConfigError("estimate.sigma.M must be >= 30")
        gk = est["sigma"]["green_kubo"]
        if not 0 < gk["T_corr"] < gk["T_run"] / 10:
            raise ConfigError("green_kubo.T_corr must be below T_run/10")
        if est["ldp"]["n_windows"] < 100 or est["ldp"]["window_bound"]["n_windows"] < 100:
            raise ConfigError("ldp n_windows must be >= 100")
        for grid_key in ("F", "ldp"):
            for x in est[grid_key]["x_grid"]:
                if len(x) != s["d"]:
                    raise ConfigError(f"estimate.{grid_key}.x_grid points must have d entries")
    except (KeyError, TypeError) as exc:
        raise ConfigError(f"malformed config: {exc!r}") from exc


def build_system(cfg: dict) -> FlowSystem:
    s = cfg["system"]
    d, ell = int(s["d"]), int(s["ell"])
    ff = s["fast_flow"]
    if ff["name"] == "lorenz":
        params = LorenzParams(ff["sigma"], ff["rho"], ff["beta"], ff["trap_radius"])
        g, radius = LorenzField(params), params.trap_radius
    else:
        g, radius = LinearDecay(ff["rate"]), ff["trap_radius"]

    f0c = s["f0"]
    if f0c["name"] == "lorenz_projection":
        if ell != 3:
            raise ConfigError("lorenz_projection needs ell = 3")
        f0, f0_sup = LorenzProjection(d), radius
    elif f0c["name"] == "zero":
        f0, f0_sup = ZeroFast(d), 0.0
    else:
        idx = tuple(int(i) for i in f0c["index"])
        if any(not 0 <= i < ell for i in idx):
            raise ConfigError("f0.index out of range")
        f0, f0_sup = CoordinateProjection(idx), radius

    fc = s["f"]
    if fc["name"] == "benchmark":
        f = BenchmarkCoupling(fc["c"], fc["kappa"])
        f_sup, lip = f.sup_norm(d), f.lipschitz()
    elif fc["name"] == "zero":
        f, f_sup, lip = ZeroCoupling(), 0.0, 0.0
    else:
        f, f_sup, lip = SlowOnly(TanhDecay(fc["c"])), math.sqrt(d) * fc["c"], fc["c"]
    return FlowSystem(d, ell, g, f0, f, s["eps"], f_sup, f0_sup, lip, radius, name=f"{ff['name']}/{f0c['name']}/{fc['name']}")


def build_integrator(cfg: dict) -> IntegratorConfig:
    i = cfg["integrator"]
    return IntegratorConfig(i["h_tau"], i["method"], i["record_stride"], i["max_bytes"])


def build_sampler(cfg: dict, seed: int | None = None) -> MuSampler:
    sm = cfg["sampler"]
    return MuSampler(
        sm["burn_in"], sm["spacing"], tuple(sm["seed_point"]), sm["dispersion"], sm["chains"],
        cfg["root_seed"] if seed is None else seed,
    )


def build_ladder(cfg: dict) -> LadderConfig:
    lc = cfg["ladder"]
    return LadderConfig(
        tuple(lc["eps_ladder"]), lc["M"], lc["T"], tuple(lc["eval_times"]), lc["delta_exponent"],
        tuple(lc["xi"]), lc["sde_h"], lc["chunk_size"], lc["oracle_count"],
    )
