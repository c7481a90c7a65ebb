"""Scenario configuration files.

A YAML mapping with five blocks: ``plant``, ``controller``, ``simulation``,
``campaign`` and ``output``.  Every key has a default, so an empty file is a
valid configuration.  Unknown keys are rejected.  Keys ending in ``_c`` are
temperatures in degrees Celsius and are converted to kelvin when the model
objects are built; everything else is SI (lengths m, times s unless the key
ends in ``_h``, powers W, conductances W/(m^2 K), capacities J/K).

Per-zone plant entries accept a scalar (all 20 zones), a list of 20 values
(upper zones first), or ``{upper: a, lower: b}``.
"""
from __future__ import annotations

import copy
import math
from dataclasses import dataclass, field, fields

import numpy as np
import yaml

from .control import N_ELEMENTS, ControllerConfig
from .errors import ConfigError, ConfigParseError, ParameterError, ShapeError
from .thermal import KELVIN, N_HALF, N_ZONES, PlantParams, ProfileSpec
from .simulation import SimulationSettings

PER_ZONE_KEYS = (
    "node_volume",
    "blanket_heat_capacity",
    "heater_power",
    "h_contact",
    "a_contact",
    "h_blanket_ambient",
    "a_blanket_ambient",
    "h_shell_ambient",
    "a_shell_ambient",
    "h_rotor",
    "a_rotor",
)

UNITS = {
    "plant.alpha": "m^2/s",
    "plant.k_cond": "W/(m K)",
    "plant.shell_length": "m",
    "plant.node_volume": "m^3",
    "plant.blanket_heat_capacity": "J/K",
    "plant.heater_power": "W",
    "plant.h_contact": "W/(m^2 K)",
    "plant.a_contact": "m^2",
    "plant.h_blanket_ambient": "W/(m^2 K)",
    "plant.a_blanket_ambient": "m^2",
    "plant.h_shell_ambient": "W/(m^2 K)",
    "plant.a_shell_ambient": "m^2",
    "plant.h_rotor": "W/(m^2 K)",
    "plant.a_rotor": "m^2",
    "plant.rotor_heat_capacity": "J/K",
    "plant.t_ambient_c": "degC",
    "controller.k_outer": "gain (scalar diagonal or 5x5)",
    "controller.gain_scale": "K per unit fractional deflection error",
    "controller.hold_min_c": "degC",
    "controller.deadband": "K",
    "controller.min_dwell": "s",
    "controller.filter_tau": "s, 0 disables",
    "controller.ref_bounds_c": "degC pair",
    "controller.deflection_norm": "m or 'auto'",
    "controller.natural_profile": "K offsets (20) or 'auto'",
    "controller.y_desired": "m (5)",
    "simulation.dt": "s",
    "simulation.controller_period": "s",
    "simulation.horizon_h": "h",
    "simulation.baseline_horizon_h": "h",
    "simulation.peak_c": "degC",
    "simulation.peak_position": "normalized length",
    "simulation.end_c": "degC",
    "campaign.airgap_factor": "contact resistance multiplier",
}


def _compact_zone(arr):
    arr = np.asarray(arr, dtype=float)
    if np.all(arr == arr[0]):
        return float(arr[0])
    if np.all(arr[:N_HALF] == arr[0]) and np.all(arr[N_HALF:] == arr[N_HALF]):
        return {"upper": float(arr[0]), "lower": float(arr[N_HALF])}
    return [float(v) for v in arr]


def _plant_defaults():
    p = PlantParams()
    out = {
        "alpha": p.alpha,
        "k_cond": p.k_cond,
        "shell_length": p.shell_length,
        "rotor_heat_capacity": p.rotor_heat_capacity,
        "t_ambient_c": round(p.t_ambient - KELVIN, 10),
    }
    for key in PER_ZONE_KEYS:
        out[key] = _compact_zone(getattr(p, key))
    return out


def _controller_defaults():
    c = ControllerConfig()
    return {
        "heaters_enabled": True,
        "outer_loop": c.outer_loop,
        "k_outer": float(c.k_outer[0, 0]),
        "gain_scale": c.gain_scale,
        "hold_min_c": round(c.hold_min - KELVIN, 10),
        "deadband": c.deadband,
        "min_dwell": c.min_dwell,
        "filter_tau": c.filter_tau,
        "ref_bounds_c": [round(v - KELVIN, 10) for v in c.ref_bounds],
        "deflection_norm": "auto",
        "natural_profile": "auto",
        "y_desired": [float(v) for v in c.y_desired],
    }


def _simulation_defaults():
    s = SimulationSettings()
    prof = s.profile
    return {
        "dt": s.dt,
        "controller_period": s.controller_period,
        "horizon_h": s.horizon_h,
        "baseline_horizon_h": s.baseline_horizon_h,
        "peak_c": round(prof.peak_temperature - KELVIN, 10),
        "peak_position": prof.peak_position,
        "end_c": round(prof.end_temperature - KELVIN, 10),
    }


def _campaign_defaults():
    return {
        "k_range": [1, 4],
        "master_seed": 0,
        "workers": 1,
        "variability": True,
        "draws": 1,
        "chunk_size": 64,
        "airgap_zones": [N_HALF + N_HALF // 2 - 1, N_HALF + N_HALF // 2],
        "airgap_factor": 20.0,
        "five_failed_limit": None,
        "table1_variability": False,
        "coarse_dt": 120.0,
    }


def _output_defaults():
    return {"dir": "out", "trajectory": True, "plot_data": True, "svg": False}


def default_dict():
    return {
        "plant": _plant_defaults(),
        "controller": _controller_defaults(),
        "simulation": _simulation_defaults(),
        "campaign": _campaign_defaults(),
        "output": _output_defaults(),
    }


def _number(value, key, positive=False, nonneg=False, integer=False):
    if isinstance(value, bool) or not isinstance(value, (int, float)):
        raise ConfigError(f"{key}: expected a number ({UNITS.get(key, 'SI')}), got {value!r}", key)
    value = int(value) if integer else float(value)
    if not math.isfinite(value):
        raise ConfigError(f"{key}: must be finite", key)
    if positive and not value > 0:
        raise ConfigError(f"{key}: must be positive ({UNITS.get(key, 'SI')}), got {value}", key)
    if nonneg and value < 0:
        raise ConfigError(f"{key}: must be non-negative ({UNITS.get(key, 'SI')}), got {value}", key)
    return value


def _zone_values(value, key):
    if isinstance(value, dict):
        extra = set(value) - {"upper", "lower"}
        if extra or len(value) != 2:
            raise ConfigError(f"{key}: expected keys 'upper' and 'lower'", key)
        return np.concatenate(
            (
                np.full(N_HALF, _number(value["upper"], key + ".upper")),
                np.full(N_HALF, _number(value["lower"], key + ".lower")),
            )
        )
    if isinstance(value, list):
        if len(value) != N_ZONES:
            raise ConfigError(f"{key}: expected {N_ZONES} values, got {len(value)}", key)
        return np.array([_number(v, f"{key}[{i}]") for i, v in enumerate(value)])
    return np.full(N_ZONES, _number(value, key))


def _merge(defaults, user, prefix):
    if user is None:
        return copy.deepcopy(defaults)
    if not isinstance(user, dict):
        raise ConfigError(f"{prefix or 'config'}: expected a mapping", prefix or None)
    unknown = sorted(set(user) - set(defaults))
    if unknown:
        key = f"{prefix}.{unknown[0]}" if prefix else unknown[0]
        raise ConfigError(f"unknown key {key!r}", key)
    out = copy.deepcopy(defaults)
    for k, v in user.items():
        out[k] = copy.deepcopy(v)
    return out


@dataclass
class ScenarioConfig:
    plant: dict = field(default_factory=_plant_defaults)
    controller: dict = field(default_factory=_controller_defaults)
    simulation: dict = field(default_factory=_simulation_defaults)
    campaign: dict = field(default_factory=_campaign_defaults)
    output: dict = field(default_factory=_output_defaults)

    @classmethod
    def from_dict(cls, data):
        data = {} if data is None else data
        if not isinstance(data, dict):
            raise ConfigError("top level of the config must be a mapping")
        defaults = default_dict()
        unknown = sorted(set(data) - set(defaults))
        if unknown:
            raise ConfigError(f"unknown key {unknown[0]!r}", unknown[0])
        cfg = cls(**{name: _merge(defaults[name], data.get(name), name) for name in defaults})
        cfg.validate()
        return cfg

    def to_dict(self):
        return {f.name: copy.deepcopy(getattr(self, f.name)) for f in fields(self)}

    def validate(self):
        """Build every model object once so violations surface with their key."""
        self.plant_params()
        self.settings()
        self.controller_config()
        c = self.campaign
        k = c["k_range"]
        if not (isinstance(k, list) and len(k) == 2):
            raise ConfigError("campaign.k_range: expected [first, last]", "campaign.k_range")
        lo, hi = (_number(v, "campaign.k_range", integer=True) for v in k)
        if not 0 <= lo <= hi <= N_ZONES:
            raise ConfigError(f"campaign.k_range: need 0 <= first <= last <= {N_ZONES}", "campaign.k_range")
        _number(c["master_seed"], "campaign.master_seed", nonneg=True, integer=True)
        _number(c["workers"], "campaign.workers", positive=True, integer=True)
        _number(c["draws"], "campaign.draws", positive=True, integer=True)
        _number(c["chunk_size"], "campaign.chunk_size", positive=True, integer=True)
        _number(c["airgap_factor"], "campaign.airgap_factor", positive=True)
        _number(c["coarse_dt"], "campaign.coarse_dt", positive=True)
        if c["five_failed_limit"] is not None:
            _number(c["five_failed_limit"], "campaign.five_failed_limit", positive=True, integer=True)
        zones = c["airgap_zones"]
        if not isinstance(zones, list) or any(
            isinstance(z, bool) or not isinstance(z, int) or not 0 <= z < N_ZONES for z in zones
        ):
            raise ConfigError("campaign.airgap_zones: expected zone indices in [0, 20)", "campaign.airgap_zones")
        for key in ("variability", "table1_variability"):
            if not isinstance(c[key], bool):
                raise ConfigError(f"campaign.{key}: expected true/false", f"campaign.{key}")
        for key in ("trajectory", "plot_data", "svg"):
            if not isinstance(self.output[key], bool):
                raise ConfigError(f"output.{key}: expected true/false", f"output.{key}")
        if not isinstance(self.output["dir"], str):
            raise ConfigError("output.dir: expected a path", "output.dir")

    def plant_params(self):
        p = self.plant
        kwargs = {}
        for key in ("alpha", "k_cond", "shell_length", "rotor_heat_capacity"):
            kwargs[key] = _number(p[key], f"plant.{key}", positive=True)
        kwargs["t_ambient"] = _number(p["t_ambient_c"], "plant.t_ambient_c") + KELVIN
        for key in PER_ZONE_KEYS:
            arr = _zone_values(p[key], f"plant.{key}")
            ok = np.all(arr >= 0) if key == "heater_power" else np.all(arr > 0)
            if not ok:
                raise ConfigError(f"plant.{key}: values must be positive ({UNITS[f'plant.{key}']})", f"plant.{key}")
            kwargs[key] = arr
        if not kwargs["t_ambient"] > 0:
            raise ConfigError("plant.t_ambient_c: below absolute zero", "plant.t_ambient_c")
        try:
            return PlantParams(**kwargs)
        except (ParameterError, ShapeError) as exc:
            raise ConfigError(f"plant: {exc}", "plant.a_shell_ambient") from exc

    def profile_spec(self):
        s = self.simulation
        peak = _number(s["peak_c"], "simulation.peak_c") + KELVIN
        end = _number(s["end_c"], "simulation.end_c") + KELVIN
        pos = _number(s["peak_position"], "simulation.peak_position")
        if not 0.0 <= pos <= 1.0:
            raise ConfigError("simulation.peak_position: must lie in [0, 1]", "simulation.peak_position")
        t_amb = _number(self.plant["t_ambient_c"], "plant.t_ambient_c") + KELVIN
        if peak < t_amb:
            raise ConfigError("simulation.peak_c: peak below ambient", "simulation.peak_c")
        if not t_amb <= end <= peak:
            raise ConfigError("simulation.end_c: must lie between ambient and the peak", "simulation.end_c")
        return ProfileSpec(peak_temperature=peak, peak_position=pos, end_temperature=end)

    def settings(self, dt=None, horizon_h=None):
        s = self.simulation
        values = {}
        for key in ("dt", "controller_period", "horizon_h", "baseline_horizon_h"):
            values[key] = _number(s[key], f"simulation.{key}", positive=True)
        if dt is not None:
            values["dt"] = _number(dt, "simulation.dt", positive=True)
        if horizon_h is not None:
            values["horizon_h"] = _number(horizon_h, "simulation.horizon_h", positive=True)
        return SimulationSettings(profile=self.profile_spec(), **values)

    def controller_config(self):
        c = self.controller
        for key in ("heaters_enabled", "outer_loop"):
            if not isinstance(c[key], bool):
                raise ConfigError(f"controller.{key}: expected true/false", f"controller.{key}")
        k = c["k_outer"]
        if isinstance(k, list):
            k_arr = np.array(k, dtype=float)
            if k_arr.shape != (N_ELEMENTS, N_ELEMENTS) or not np.all(np.isfinite(k_arr)):
                raise ConfigError("controller.k_outer: expected a scalar or a finite 5x5 matrix", "controller.k_outer")
        else:
            k_arr = _number(k, "controller.k_outer") * np.eye(N_ELEMENTS)
        bounds = c["ref_bounds_c"]
        if not (isinstance(bounds, list) and len(bounds) == 2):
            raise ConfigError("controller.ref_bounds_c: expected [low, high]", "controller.ref_bounds_c")
        lo, hi = (_number(v, "controller.ref_bounds_c") + KELVIN for v in bounds)
        if not lo < hi:
            raise ConfigError("controller.ref_bounds_c: low must be below high", "controller.ref_bounds_c")
        hold = _number(c["hold_min_c"], "controller.hold_min_c") + KELVIN
        t_amb = _number(self.plant["t_ambient_c"], "plant.t_ambient_c") + KELVIN
        if hold < t_amb:
            raise ConfigError("controller.hold_min_c: below ambient", "controller.hold_min_c")
        kwargs = dict(
            k_outer=k_arr,
            gain_scale=_number(c["gain_scale"], "controller.gain_scale", nonneg=True),
            hold_min=hold,
            deadband=_number(c["deadband"], "controller.deadband", positive=True),
            min_dwell=_number(c["min_dwell"], "controller.min_dwell", nonneg=True),
            filter_tau=_number(c["filter_tau"], "controller.filter_tau", nonneg=True),
            ref_bounds=(lo, hi),
            outer_loop=c["outer_loop"],
        )
        yd = c["y_desired"]
        if not (isinstance(yd, list) and len(yd) == N_ELEMENTS):
            raise ConfigError("controller.y_desired: expected 5 values", "controller.y_desired")
        kwargs["y_desired"] = np.array([_number(v, "controller.y_desired") for v in yd])
        if c["deflection_norm"] != "auto":
            kwargs["deflection_norm"] = _number(c["deflection_norm"], "controller.deflection_norm", positive=True)
        prof = c["natural_profile"]
        if prof != "auto":
            if not (isinstance(prof, list) and len(prof) == N_ZONES):
                raise ConfigError("controller.natural_profile: expected 'auto' or 20 offsets", "controller.natural_profile")
            kwargs["natural_profile"] = np.array([_number(v, "controller.natural_profile") for v in prof])
        try:
            return ControllerConfig(**kwargs)
        except (ParameterError, ShapeError) as exc:
            raise ConfigError(f"controller: {exc}", "controller") from exc

    @property
    def auto_norm(self):
        return self.controller["deflection_norm"] == "auto"

    @property
    def auto_profile(self):
        return self.controller["natural_profile"] == "auto"

    def dump(self):
        return yaml.safe_dump(self.to_dict(), sort_keys=False)


def loads(text):
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigParseError(f"could not parse config: {exc}") from exc
    if data is not None and not isinstance(data, dict):
        raise ConfigParseError("top level of the config must be a mapping")
    return ScenarioConfig.from_dict(data)


def load_config(path=None):
    """Load and validate a scenario file; ``None`` gives the defaults."""
    if path is None:
        return ScenarioConfig.from_dict({})
    with open(path, encoding="utf-8") as fh:  # OSError propagates to the caller
        text = fh.read()
    return loads(text)


def save_config(cfg, path):
    with open(path, "w", encoding="utf-8") as fh:
        fh.write(cfg.dump())
