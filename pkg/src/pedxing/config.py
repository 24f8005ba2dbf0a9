"""Configuration loading, validation and hashing.

One YAML file drives simulation, batch runs, stats, tuning and the live
service.  Validation reports field-precise messages ("controller.dt: must be
> 0") and rejects unknown keys.  The config hash is a sha256 over a
canonicalized JSON form (sorted keys, all numbers as floats), so key order
and numeric formatting do not change identity, and every artifact a run
emits embeds it.
"""

from __future__ import annotations

import copy
import hashlib
import importlib.resources
import json
from dataclasses import dataclass, field, fields, replace

import yaml

from .metrics import MetricsConfig
from .scenario import THETA_FIELDS, ControllerParams, ScenarioGeometry
from .simulate import CONTROLLER_NAMES, ScenarioScript, SimConfig

__all__ = [
    "Config",
    "ConfigError",
    "BatchSettings",
    "TuningSettings",
    "ServeSettings",
    "load_config",
    "build_config",
    "config_hash",
    "default_config_path",
    "with_controller_overrides",
]


class ConfigError(ValueError):
    """Validation failure; ``errors`` lists one message per offending field."""

    def __init__(self, errors: list[str]):
        self.errors = errors
        super().__init__("invalid configuration:\n  " + "\n  ".join(errors))


@dataclass(frozen=True)
class BatchSettings:
    scenarios: tuple[str, ...]
    controllers: tuple[str, ...]
    seeds: tuple[int, ...]
    workers: int = 1


@dataclass(frozen=True)
class TuningSettings:
    k_time: float = 1.0
    k_accel: float = 0.1
    k_separation: float = 0.5
    k_inv_ttc: float = 1.0
    budget: int = 60
    seed: int = 7
    scenarios: tuple[str, ...] = ("delayed_crossing",)
    episode_seeds: tuple[int, ...] = (0, 1, 2)
    free: tuple[str, ...] = ("w_safe", "w_com", "w_ref_ped", "w_ref_veh")
    bounds: dict = field(default_factory=dict)


@dataclass(frozen=True)
class ServeSettings:
    host: str = "127.0.0.1"
    port: int = 8700
    tick_hz: float = 20.0
    controller: str = "mpc"
    static_dir: str | None = None


@dataclass(frozen=True)
class Config:
    raw: dict
    hash: str
    geometry: ScenarioGeometry
    controller: ControllerParams
    sim: SimConfig
    metrics: MetricsConfig
    scripts: dict[str, ScenarioScript]
    batch: BatchSettings
    tuning: TuningSettings
    serve: ServeSettings


def default_config_path() -> str:
    return str(importlib.resources.files("pedxing.data") / "default_config.yaml")


def _canonical(obj):
    if isinstance(obj, bool):
        return obj
    if isinstance(obj, (int, float)):
        return float(obj)
    if isinstance(obj, dict):
        return {str(k): _canonical(v) for k, v in sorted(obj.items())}
    if isinstance(obj, (list, tuple)):
        return [_canonical(v) for v in obj]
    return obj


def config_hash(raw: dict) -> str:
    """12-hex-digit digest of the canonicalized config."""
    blob = json.dumps(_canonical(raw), sort_keys=True, separators=(",", ":"))
    return hashlib.sha256(blob.encode("utf-8")).hexdigest()[:12]


class _Checker:
    """Walks one config section collecting field-precise errors."""

    def __init__(self, section: str, data: dict, errors: list[str]):
        self.section = section
        self.data = data if isinstance(data, dict) else {}
        self.errors = errors
        self.seen: set[str] = set()
        if data is not None and not isinstance(data, dict):
            errors.append(f"{section}: must be a mapping")

    def _fail(self, key: str, msg: str) -> None:
        self.errors.append(f"{self.section}.{key}: {msg}")

    def get(self, key: str, default=None):
        self.seen.add(key)
        return self.data.get(key, default)

    def number(self, key: str, default=None, lo=None, hi=None, integer=False):
        self.seen.add(key)
        if key not in self.data:
            return default
        v = self.data[key]
        if isinstance(v, bool) or not isinstance(v, (int, float)):
            self._fail(key, f"must be a number, got {v!r}")
            return default
        if integer and int(v) != v:
            self._fail(key, f"must be an integer, got {v!r}")
            return default
        if lo is not None and v < lo:
            self._fail(key, f"must be >= {lo}, got {v}")
            return default
        if hi is not None and v > hi:
            self._fail(key, f"must be <= {hi}, got {v}")
            return default
        return int(v) if integer else float(v)

    def boolean(self, key: str, default=None):
        self.seen.add(key)
        if key not in self.data:
            return default
        v = self.data[key]
        if not isinstance(v, bool):
            self._fail(key, f"must be true or false, got {v!r}")
            return default
        return v

    def string(self, key: str, default=None, choices=None):
        self.seen.add(key)
        if key not in self.data:
            return default
        v = self.data[key]
        if not isinstance(v, str):
            self._fail(key, f"must be a string, got {v!r}")
            return default
        if choices is not None and v not in choices:
            self._fail(key, f"must be one of {list(choices)}, got {v!r}")
            return default
        return v

    def interval(self, key: str, default=None):
        self.seen.add(key)
        if key not in self.data:
            return default
        v = self.data[key]
        ok = isinstance(v, (list, tuple)) and len(v) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in v)
        if not ok:
            self._fail(key, f"must be a [lo, hi] pair of numbers, got {v!r}")
            return default
        return (float(v[0]), float(v[1]))

    def finish(self) -> None:
        for key in self.data:
            if key not in self.seen:
                self._fail(key, "unknown key")


def _kwargs(checker: _Checker, spec: dict) -> dict:
    """Collect present keys via the type-tagged spec; absent keys keep defaults."""
    out = {}
    for key, kind in spec.items():
        if isinstance(kind, tuple):
            method, kw = kind
        else:
            method, kw = kind, {}
        value = getattr(checker, method)(key, None, **kw)
        if value is not None:
            out[key] = value
    return out


def build_config(raw: dict, source: str = "<dict>") -> Config:
    """Validate a parsed YAML document and build the typed config."""
    if not isinstance(raw, dict):
        raise ConfigError([f"{source}: top level must be a mapping"])
    errors: list[str] = []
    known_sections = {"schema_version", "geometry", "controller", "simulation",
                      "metrics", "scenarios", "batch", "tuning", "serve"}
    for key in raw:
        if key not in known_sections:
            errors.append(f"{key}: unknown section")

    version = raw.get("schema_version")
    if version != 1:
        errors.append(f"schema_version: must be 1, got {version!r}")

    geo_c = _Checker("geometry", raw.get("geometry", {}), errors)
    geo_kwargs = _kwargs(geo_c, {
        "conflict_x": "number", "conflict_y": "number",
        "safe_zone": "interval", "near_zone": "interval", "crossing_zone": "interval",
        "veh_passed_clearance": "number", "sensing_range": "number",
    })
    geo_c.finish()

    ctl_c = _Checker("controller", raw.get("controller", {}), errors)
    ctl_kwargs = _kwargs(ctl_c, {
        "w_safe": "number", "w_com": "number", "w_ref_ped": "number", "w_ref_veh": "number",
        "d_min": "number", "k_discount": "number", "v_veh_max": "number",
        "a_min": "number", "a_max": "number",
        "c": "number", "v_ped_ref": "number", "v_eps": "number", "standstill_speed": "number",
        "n_horizon": ("number", {"integer": True, "lo": 1}), "dt": "number", "v_veh_ref": "number",
        "t_wait": "number", "ttc_threshold": "number", "intention_threshold": "number",
        "slow_speed": "number", "k_p_speed": "number", "comfort_decel": "number",
        "stop_buffer": "number",
        "prediction_mode": ("string", {"choices": ("rollout", "frozen_z")}),
        "ref_cost_literal": "boolean", "safety_floor": "number",
    })
    ctl_c.finish()

    sim_c = _Checker("simulation", raw.get("simulation", {}), errors)
    sim_kwargs = _kwargs(sim_c, {
        "dt_sim": "number", "t_max": "number", "ped_lag_tau": "number",
        "veh_start_x": "number", "veh_start_speed": "number",
        "ped_start_y": "number", "ped_start_speed": "number",
    })
    sim_c.finish()

    met_c = _Checker("metrics", raw.get("metrics", {}), errors)
    met_kwargs = _kwargs(met_c, {
        "kappa": "number", "t_safe": "number", "clamp_gaps": "boolean",
    })
    met_c.finish()

    scripts_raw = raw.get("scenarios", {})
    script_kwargs: dict[str, dict] = {}
    if not isinstance(scripts_raw, dict) or not scripts_raw:
        errors.append("scenarios: must be a non-empty mapping of scenario name to script")
        scripts_raw = {}
    for name, body in scripts_raw.items():
        sc = _Checker(f"scenarios.{name}", body, errors)
        kw = _kwargs(sc, {
            "hesitation_point": "number", "hesitation_duration": ("number", {"lo": 0.0}),
            "point_jitter_sd": ("number", {"lo": 0.0}), "duration_jitter_sd": ("number", {"lo": 0.0}),
            "approach_speed": "number", "crossing_speed": "number",
            "commit_gap_margin": "number", "curb_standoff": "number",
        })
        kind = sc.string("kind", name)
        sc.finish()
        kw["kind"] = kind
        script_kwargs[name] = kw

    bat_c = _Checker("batch", raw.get("batch", {}), errors)
    bat_scenarios = bat_c.get("scenarios", ["delayed_crossing", "delayed_remaining"])
    bat_controllers = bat_c.get("controllers", list(CONTROLLER_NAMES))
    seeds_spec = bat_c.get("seeds", {"start": 0, "count": 100})
    workers = bat_c.number("workers", 1, lo=0, integer=True)
    bat_c.finish()
    if not isinstance(bat_scenarios, list) or not all(isinstance(s, str) for s in bat_scenarios):
        errors.append("batch.scenarios: must be a list of scenario names")
        bat_scenarios = []
    if not isinstance(bat_controllers, list) or not all(isinstance(s, str) for s in bat_controllers):
        errors.append("batch.controllers: must be a list of controller names")
        bat_controllers = []
    for c in bat_controllers:
        if c not in CONTROLLER_NAMES:
            errors.append(f"batch.controllers: unknown controller {c!r}; expected one of {list(CONTROLLER_NAMES)}")
    seeds: tuple[int, ...] = ()
    if isinstance(seeds_spec, dict) and set(seeds_spec) <= {"start", "count"}:
        start, count = seeds_spec.get("start", 0), seeds_spec.get("count", 0)
        if isinstance(start, int) and isinstance(count, int) and count >= 0 and not isinstance(start, bool):
            seeds = tuple(range(start, start + count))
        else:
            errors.append("batch.seeds: start and count must be integers (count >= 0)")
    elif isinstance(seeds_spec, list) and all(isinstance(s, int) and not isinstance(s, bool) for s in seeds_spec):
        seeds = tuple(seeds_spec)
    else:
        errors.append("batch.seeds: must be a list of integers or {start, count}")

    tun_c = _Checker("tuning", raw.get("tuning", {}), errors)
    tun_kwargs = _kwargs(tun_c, {
        "k_time": "number", "k_accel": "number", "k_separation": "number", "k_inv_ttc": "number",
        "budget": ("number", {"integer": True, "lo": 1}),
        "seed": ("number", {"integer": True}),
    })
    tun_scenarios = tun_c.get("scenarios")
    tun_episode_seeds = tun_c.get("episode_seeds")
    tun_free = tun_c.get("free")
    tun_bounds = tun_c.get("bounds", {})
    tun_c.finish()
    if tun_scenarios is not None:
        tun_kwargs["scenarios"] = tuple(tun_scenarios)
    if tun_episode_seeds is not None:
        tun_kwargs["episode_seeds"] = tuple(tun_episode_seeds)
    if tun_free is not None:
        if not isinstance(tun_free, list) or not set(tun_free) <= set(THETA_FIELDS):
            errors.append(f"tuning.free: must be a subset of {list(THETA_FIELDS)}")
            tun_free = []
        tun_kwargs["free"] = tuple(tun_free)
    if not isinstance(tun_bounds, dict):
        errors.append("tuning.bounds: must be a mapping of parameter name to [lo, hi]")
        tun_bounds = {}
    bounds: dict[str, tuple[float, float]] = {}
    for name, pair in tun_bounds.items():
        if name not in THETA_FIELDS:
            errors.append(f"tuning.bounds.{name}: not a tunable parameter")
            continue
        ok = isinstance(pair, (list, tuple)) and len(pair) == 2 and all(
            isinstance(x, (int, float)) and not isinstance(x, bool) for x in pair) and pair[0] < pair[1]
        if not ok:
            errors.append(f"tuning.bounds.{name}: must be [lo, hi] with lo < hi, got {pair!r}")
            continue
        bounds[name] = (float(pair[0]), float(pair[1]))
    tun_kwargs["bounds"] = bounds

    srv_c = _Checker("serve", raw.get("serve", {}), errors)
    srv_kwargs = _kwargs(srv_c, {
        "host": "string",
        "port": ("number", {"integer": True, "lo": 1, "hi": 65535}),
        "tick_hz": ("number", {"lo": 0.1}),
        "controller": ("string", {"choices": CONTROLLER_NAMES}),
    })
    static_dir = srv_c.get("static_dir")
    srv_c.finish()
    if static_dir is not None and not isinstance(static_dir, str):
        errors.append(f"serve.static_dir: must be a path string or null, got {static_dir!r}")
        static_dir = None

    if errors:
        raise ConfigError(errors)

    # construct typed objects; their invariants produce the cross-field checks
    def _try(section: str, ctor, **kwargs):
        try:
            return ctor(**kwargs)
        except ValueError as exc:
            errors.append(f"{section}: {exc}")
            return None

    geometry = _try("geometry", ScenarioGeometry, **geo_kwargs)
    controller = _try("controller", ControllerParams, **ctl_kwargs)
    sim = _try("simulation", SimConfig, **sim_kwargs)
    metrics = _try("metrics", MetricsConfig, **met_kwargs)
    scripts: dict[str, ScenarioScript] = {}
    for name, kw in script_kwargs.items():
        script = _try(f"scenarios.{name}", ScenarioScript, **kw)
        if script is not None and geometry is not None:
            try:
                script.validate_against(geometry)
            except ValueError as exc:
                errors.append(f"scenarios.{name}: {exc}")
        if script is not None:
            scripts[name] = script

    if sim is not None and controller is not None:
        try:
            sim.controller_every(controller.dt)
        except ValueError as exc:
            errors.append(f"controller.dt: {exc}")

    for s in bat_scenarios:
        if s not in scripts:
            errors.append(f"batch.scenarios: {s!r} is not defined under scenarios")
    tuning = TuningSettings(**tun_kwargs)
    for s in tuning.scenarios:
        if s not in scripts:
            errors.append(f"tuning.scenarios: {s!r} is not defined under scenarios")

    if errors:
        raise ConfigError(errors)

    return Config(
        raw=raw,
        hash=config_hash(raw),
        geometry=geometry,
        controller=controller,
        sim=sim,
        metrics=metrics,
        scripts=scripts,
        batch=BatchSettings(
            scenarios=tuple(bat_scenarios),
            controllers=tuple(bat_controllers),
            seeds=seeds,
            workers=int(workers),
        ),
        tuning=tuning,
        serve=ServeSettings(**srv_kwargs, static_dir=static_dir),
    )


def load_config(path: str | None = None) -> Config:
    """Load and validate a YAML config file (the packaged default when None)."""
    actual = path or default_config_path()
    try:
        with open(actual, "r", encoding="utf-8") as fh:
            raw = yaml.safe_load(fh)
    except FileNotFoundError:
        raise ConfigError([f"{actual}: config file not found"]) from None
    except yaml.YAMLError as exc:
        raise ConfigError([f"{actual}: YAML parse error: {exc}"]) from None
    return build_config(raw, source=actual)


def with_controller_overrides(config: Config, overrides: dict) -> Config:
    """A new Config with controller fields replaced (hash recomputed).

    ``overrides`` maps ControllerParams field names to values, e.g. a tuned
    theta file.  Unknown names are a validation error.
    """
    valid = {f.name for f in fields(ControllerParams)}
    bad = sorted(set(overrides) - valid)
    if bad:
        raise ConfigError([f"controller.{name}: unknown parameter" for name in bad])
    raw = copy.deepcopy(config.raw)
    raw.setdefault("controller", {}).update(overrides)
    return build_config(raw, source="<override>")
