"""Configuration objects for the mmWave V2V simulator.

All angles are stored in radians, times in milliseconds, distances in
meters, speeds in km/h and rates in bits/s unless a field name says
otherwise. TOML files use degrees for beamwidths (``*_deg`` keys) because
they are easier to edit by hand.
"""

from __future__ import annotations

import dataclasses
import hashlib
import json
import math
from dataclasses import dataclass, field
from typing import Any

try:
    import tomllib as tomli
except ModuleNotFoundError:     # Python < 3.11
    import tomli

DEG = math.pi / 180.0
KMH_TO_MPS = 1000.0 / 3600.0


class ConfigError(ValueError):
    """Raised when a configuration value violates an invariant."""


def _check(cond: bool, msg: str) -> None:
    if not cond:
        raise ConfigError(msg)


@dataclass(frozen=True)
class HighwayConfig:
    segment_length: float = 500.0
    lane_count: int = 6
    lane_width: float = 3.0
    lane_speeds: tuple[float, ...] = (140.0, 130.0, 125.0, 110.0, 90.0, 70.0)
    density: float = 70.0            # vehicles/km
    car_truck_ratio: float = 0.8     # fraction of cars
    vtx_probability: float = 0.5
    coverage_radius: float = 100.0
    min_headway: float = 2.0         # bumper-to-bumper gap
    # Body dimensions (length, width). The car catalog is plumbing: five
    # models spanning 4.0-5.0 m, all configurable.
    car_models: tuple[tuple[float, float], ...] = (
        (4.0, 1.8), (4.25, 1.8), (4.5, 1.8), (4.75, 1.8), (5.0, 1.8))
    truck_model: tuple[float, float] = (12.0, 2.5)

    def validate(self) -> None:
        _check(self.segment_length > 0, "segment_length must be > 0")
        _check(len(self.lane_speeds) == self.lane_count,
               "lane_speeds length must equal lane_count")
        _check(all(v > 0 for v in self.lane_speeds), "lane speeds must be > 0")
        _check(self.density > 0, "density must be > 0")
        _check(0 <= self.car_truck_ratio <= 1, "car_truck_ratio out of [0,1]")
        _check(0 <= self.vtx_probability <= 1, "vtx_probability out of [0,1]")
        _check(self.coverage_radius > 0, "coverage_radius must be > 0")
        _check(self.min_headway >= 0, "min_headway must be >= 0")
        _check(len(self.car_models) > 0, "car catalog must not be empty")

    @property
    def target_count(self) -> int:
        return round(self.density * self.segment_length / 1000.0)


@dataclass(frozen=True)
class BlockageParams:
    """Log-distance pathloss parameters (exponent, intercept dB) indexed by
    blocker count, saturating at the last entry.

    The shipped defaults are documented placeholders, not measured ground
    truth; all computations must remain correct for any monotone table.
    """

    table: tuple[tuple[float, float], ...] = (
        (2.66, 68.0),   # line of sight
        (2.71, 78.6),   # 1 blocker
        (2.81, 86.0),   # 2 blockers
        (2.88, 91.6),   # 3 blockers
        (2.94, 95.8),   # 4 or more
    )

    def validate(self) -> None:
        _check(len(self.table) >= 1, "blockage table must have >= 1 entry")

    def lookup(self, blockers: int) -> tuple[float, float]:
        n = min(int(blockers), len(self.table) - 1)
        return self.table[n]


@dataclass(frozen=True)
class AntennaConfig:
    sector_beamwidth: float = 45.0 * DEG
    sidelobe_gain: float = 0.1
    min_beamwidth: float = 5.0 * DEG
    pilot_duration: float = 0.02     # T_p, ms

    def validate(self) -> None:
        _check(0 <= self.sidelobe_gain < 1, "sidelobe_gain out of [0,1)")
        _check(0 < self.min_beamwidth <= self.sector_beamwidth <= 2 * math.pi,
               "need 0 < min_beamwidth <= sector_beamwidth <= 2*pi")
        _check(self.pilot_duration > 0, "pilot_duration must be > 0")


@dataclass(frozen=True)
class RadioConfig:
    bandwidth: float = 2.16e9        # Hz
    noise_density: float = -174.0    # dBm/Hz
    tx_power: float = 15.0           # dBm, uniform across vTx
    carrier_ghz: float = 60.0        # informational
    transmission_slot: float = 2.0   # T_t, ms

    def validate(self) -> None:
        _check(self.bandwidth > 0, "bandwidth must be > 0")
        _check(self.transmission_slot > 0, "transmission_slot must be > 0")


@dataclass(frozen=True)
class TrafficConfig:
    packet_size: float = 3200.0      # bits
    arrival_rate: float = 0.5        # packets/ms
    max_queue: int = 1000            # packets
    deadline: float | None = None    # ms; defaults to 1/arrival_rate

    def validate(self) -> None:
        _check(self.packet_size > 0, "packet_size must be > 0")
        _check(self.arrival_rate > 0, "arrival_rate must be > 0")
        _check(self.max_queue > 0, "max_queue must be > 0")
        if self.deadline is not None:
            _check(self.deadline > 0, "deadline must be > 0")

    @property
    def deadline_ms(self) -> float:
        return self.deadline if self.deadline is not None else 1.0 / self.arrival_rate

    @property
    def influx_rate(self) -> float:
        """Traffic influx in bits/ms."""
        return self.arrival_rate * self.packet_size


@dataclass(frozen=True)
class MatchingConfig:
    recency: float = 0.9             # geometric recency base for CSI weights
    delta_v_max: float = 70.0        # km/h normalizer (max lane-speed spread)
    q_theta: float = 500.0           # queue normalizer
    exploration_beamwidth: float = 45.0 * DEG

    def validate(self) -> None:
        _check(0 < self.recency <= 1, "recency out of (0,1]")
        _check(self.delta_v_max > 0, "delta_v_max must be > 0")
        _check(self.q_theta > 0, "q_theta must be > 0")
        _check(self.exploration_beamwidth > 0, "exploration_beamwidth must be > 0")


@dataclass(frozen=True)
class PsoConfig:
    swarm_size: int = 30
    inertia: float = 0.5
    cognitive: float = 1.5
    social: float = 1.5
    iterations: int = 50
    init_beamwidth: float = 5.0 * DEG
    velocity_init: tuple[float, float] = (5.0 * DEG, 45.0 * DEG)

    def validate(self) -> None:
        _check(self.swarm_size >= 1, "swarm_size must be >= 1")
        _check(self.iterations >= 1, "iterations must be >= 1")
        _check(self.velocity_init[0] <= self.velocity_init[1],
               "velocity_init range must be ordered")


METHODS = ("waf", "pso", "mind", "asyn")


@dataclass(frozen=True)
class SimConfig:
    total_time: float = 30000.0      # ms
    scheduling_slot: float = 100.0   # T_s, ms
    method: str = "waf"
    fixed_beamwidth: float = 5.0 * DEG  # used by waf/mind/asyn
    seed: int = 1
    highway: HighwayConfig = field(default_factory=HighwayConfig)
    blockage: BlockageParams = field(default_factory=BlockageParams)
    antenna: AntennaConfig = field(default_factory=AntennaConfig)
    radio: RadioConfig = field(default_factory=RadioConfig)
    traffic: TrafficConfig = field(default_factory=TrafficConfig)
    matching: MatchingConfig = field(default_factory=MatchingConfig)
    pso: PsoConfig = field(default_factory=PsoConfig)

    def validate(self) -> None:
        for sub in (self.highway, self.blockage, self.antenna, self.radio,
                    self.traffic, self.matching, self.pso):
            sub.validate()
        _check(self.method in METHODS, f"unknown method {self.method!r}")
        tt = self.radio.transmission_slot
        _check(self.total_time > 0, "total_time must be > 0")
        _check(abs(self.total_time / tt - round(self.total_time / tt)) < 1e-9,
               "total_time must be an integer number of transmission slots")
        n = self.scheduling_slot / tt
        _check(abs(n - round(n)) < 1e-9 and round(n) >= 1,
               "scheduling_slot must be an integer multiple of the transmission slot")
        _check(self.fixed_beamwidth > 0, "fixed_beamwidth must be > 0")
        # Alignment must fit in one transmission slot for every beamwidth
        # the run can actually use: the fixed beams, the exploration beams,
        # and the swarm output (whose repair floor is T_p/T_t * psi^2).
        psi = self.antenna.sector_beamwidth
        required = (self.antenna.pilot_duration / tt) * psi * psi
        _check(self.antenna.pilot_duration <= tt + 1e-12,
               "pilot_duration must not exceed the transmission slot")
        _check(self.fixed_beamwidth ** 2 >= required - 1e-12,
               "fixed_beamwidth too narrow: alignment would overrun the slot")
        _check(self.matching.exploration_beamwidth ** 2 >= required - 1e-12,
               "exploration_beamwidth too narrow: alignment would overrun the slot")

    @property
    def slots_per_scheduling(self) -> int:
        return round(self.scheduling_slot / self.radio.transmission_slot)

    @property
    def total_slots(self) -> int:
        return round(self.total_time / self.radio.transmission_slot)

    def to_dict(self) -> dict:
        return dataclasses.asdict(self)

    def hash(self) -> str:
        payload = json.dumps(self.to_dict(), sort_keys=True, default=str)
        return hashlib.sha256(payload.encode()).hexdigest()[:16]


# --- TOML ingestion -------------------------------------------------------

_DEG_KEYS = {
    "sector_beamwidth", "min_beamwidth", "exploration_beamwidth",
    "fixed_beamwidth", "init_beamwidth",
}


def _convert_section(cls, raw: dict) -> Any:
    names = {f.name for f in dataclasses.fields(cls)}
    kwargs = {}
    for key, value in raw.items():
        base = key[:-4] if key.endswith("_deg") else key
        if base not in names:
            raise ConfigError(f"unknown key {key!r} for {cls.__name__}")
        if key.endswith("_deg"):
            if isinstance(value, list):
                value = [v * DEG for v in value]
            else:
                value = value * DEG
        if isinstance(value, list):
            value = tuple(tuple(v) if isinstance(v, list) else v for v in value)
        kwargs[base] = value
    return cls(**kwargs)


_SECTIONS = {
    "highway": HighwayConfig,
    "blockage": BlockageParams,
    "antenna": AntennaConfig,
    "radio": RadioConfig,
    "traffic": TrafficConfig,
    "matching": MatchingConfig,
    "pso": PsoConfig,
}


def config_from_dict(data: dict) -> SimConfig:
    data = dict(data)
    sim_raw = dict(data.pop("sim", {}))
    kwargs: dict[str, Any] = {}
    for name, cls in _SECTIONS.items():
        if name in data:
            kwargs[name] = _convert_section(cls, data.pop(name))
    if data:
        raise ConfigError(f"unknown config sections: {sorted(data)}")
    sim_names = {f.name for f in dataclasses.fields(SimConfig)}
    for key, value in sim_raw.items():
        base = key[:-4] if key.endswith("_deg") else key
        if base not in sim_names:
            raise ConfigError(f"unknown key {key!r} in [sim]")
        kwargs[base] = value * DEG if key.endswith("_deg") else value
    cfg = SimConfig(**kwargs)
    cfg.validate()
    return cfg


def load_config(path: str) -> SimConfig:
    with open(path, "rb") as fh:
        return config_from_dict(tomli.load(fh))


def _parse_scalar(text: str):
    low = text.lower()
    if low in ("true", "false"):
        return low == "true"
    try:
        return int(text)
    except ValueError:
        pass
    try:
        return float(text)
    except ValueError:
        return text


def apply_overrides(cfg: SimConfig, overrides: list[str]) -> SimConfig:
    """Apply dotted ``section.key=value`` overrides on top of a config."""
    data: dict[str, Any] = {}
    for item in overrides:
        if "=" not in item:
            raise ConfigError(f"override {item!r} is not key=value")
        key, _, value = item.partition("=")
        parts = key.split(".")
        if len(parts) == 1:
            parts = ["sim"] + parts
        if len(parts) != 2:
            raise ConfigError(f"override key {key!r} must be section.key")
        data.setdefault(parts[0], {})[parts[1]] = _parse_scalar(value)
    merged = _as_toml_dict(cfg)
    for section, values in data.items():
        merged.setdefault(section, {}).update(values)
    return config_from_dict(merged)


def _as_toml_dict(cfg: SimConfig) -> dict:
    """Round-trip a SimConfig into the nested dict shape of the TOML schema."""
    out: dict[str, Any] = {"sim": {}}
    for f in dataclasses.fields(SimConfig):
        value = getattr(cfg, f.name)
        if f.name in _SECTIONS:
            section = {}
            for sf in dataclasses.fields(value):
                v = getattr(value, sf.name)
                if isinstance(v, tuple):
                    v = [list(x) if isinstance(x, tuple) else x for x in v]
                section[sf.name] = v
            out[f.name] = section
        else:
            out["sim"][f.name] = value
    return out
