"""Simulation configuration: defaults, INI ingestion, validation and hashing.

The file format is INI with one section per subsystem::

    [spatial]
    c1 = 0.5
    covariance_samples = 200

    [run]
    antennas = 32,64,128
    drops = 1000

Keys that are omitted keep their defaults. Unknown sections or keys are
rejected so that typos never silently fall back to a default.
"""

import configparser
import dataclasses
import hashlib
import json
from dataclasses import dataclass, field
from pathlib import Path
from typing import Tuple

from .errors import ConfigError
from .units import dbm2w

SCHEMES = ("mmimo-u", "lbt")
CRITERIA = ("fixed-k", "threshold")
ASSOCIATIONS = ("realized", "mean")


@dataclass(frozen=True)
class ScenarioParams:
    inter_site_distance: float = 500.0
    rings: int = 2
    bs_height: float = 25.0
    device_height: float = 1.5
    ue_density: float = 8.0
    ue_min_distance: float = 25.0
    ue_max_distance: float = 150.0
    ue_hotspot_clearance: float = 60.0
    hotspots_per_sector: int = 2
    hotspot_radius: float = 20.0
    hotspot_separation: float = 40.0
    devices_per_hotspot: int = 8
    max_attempts: int = 10000
    association: str = "mean"  # "realized" (with shadowing) or "mean"


@dataclass(frozen=True)
class RadioParams:
    carrier_ghz: float = 5.15
    bandwidth_hz: float = 20e6
    bs_power_dbm: float = 30.0
    ap_power_dbm: float = 24.0
    sta_power_dbm: float = 18.0
    noise_density_dbm_hz: float = -174.0
    ue_noise_figure_db: float = 9.0
    bs_noise_figure_db: float = 5.0
    ue_sensitivity_dbm: float = -94.0
    # one device per cluster on air at a time (CSMA inside the cluster);
    # False keys every device of an active cluster simultaneously
    wifi_single_talker: bool = True


@dataclass(frozen=True)
class ChannelParams:
    element_gain_dbi: float = 6.0
    azimuth_beamwidth_deg: float = 70.0
    elevation_beamwidth_deg: float = 10.0
    front_to_back_db: float = 25.0
    vertical_sidelobe_db: float = 20.0
    downtilt_deg: float = 12.0
    element_spacing: float = 0.5
    shadowing_uma_los_db: float = 4.0
    shadowing_uma_nlos_db: float = 6.0
    shadowing_d2d_db: float = 7.0
    k_factor_intercept_db: float = 13.0
    k_factor_slope_db_per_m: float = 0.03
    # Ricean K on LOS links only; NLOS links are Rayleigh
    ricean_los_only: bool = False
    csi_error_tau2: float = 0.1


@dataclass(frozen=True)
class SpatialParams:
    criterion: str = "fixed-k"
    c1: float = 0.5
    c2: float = 0.5
    gamma_dbm: float = -90.0
    covariance_samples: int = 200
    # 0 schedules every associated UE (up to N)
    max_scheduled: int = 8
    # hotspots weaker than noise + sensing_range_db per antenna stay silent
    sensing_range_db: float = -20.0
    regularization_eps: float = 1e-10
    condition_cap: float = 1e12


@dataclass(frozen=True)
class LbtParams:
    gamma_lbt_dbm: float = -62.0


@dataclass(frozen=True)
class RateParams:
    wifi_cluster_rate_bps: float = 65e6


@dataclass(frozen=True)
class RunParams:
    schemes: Tuple[str, ...] = SCHEMES
    antennas: Tuple[int, ...] = (32, 64, 128)
    drops: int = 1000
    seed: int = 42
    workers: int = 1
    output_dir: str = "results"
    max_resamples: int = 10


@dataclass(frozen=True)
class SimConfig:
    scenario: ScenarioParams = field(default_factory=ScenarioParams)
    radio: RadioParams = field(default_factory=RadioParams)
    channel: ChannelParams = field(default_factory=ChannelParams)
    spatial: SpatialParams = field(default_factory=SpatialParams)
    lbt: LbtParams = field(default_factory=LbtParams)
    rates: RateParams = field(default_factory=RateParams)
    run: RunParams = field(default_factory=RunParams)

    def replace(self, **sections):
        """Return a copy with some fields overridden, e.g. ``run={"drops": 5}``."""
        updates = {}
        for name, values in sections.items():
            current = getattr(self, name)
            updates[name] = dataclasses.replace(current, **values)
        cfg = dataclasses.replace(self, **updates)
        validate(cfg)
        return cfg

    # Derived quantities used throughout the pipeline.
    @property
    def bs_power_w(self) -> float:
        return float(dbm2w(self.radio.bs_power_dbm))

    @property
    def gamma_lbt_w(self) -> float:
        return float(dbm2w(self.lbt.gamma_lbt_dbm))

    @property
    def wifi_activity(self) -> float:
        """Fraction of time a given device of an active cluster is on air."""
        return 1.0 / self.scenario.devices_per_hotspot if self.radio.wifi_single_talker else 1.0

    @property
    def gamma_w(self) -> float:
        return float(dbm2w(self.spatial.gamma_dbm))


_SECTIONS = {f.name: f.type for f in dataclasses.fields(SimConfig)}


def _parse_value(raw: str, kind, key: str):
    raw = raw.strip()
    try:
        if kind is bool:
            if raw.lower() in ("1", "true", "yes", "on"):
                return True
            if raw.lower() in ("0", "false", "no", "off"):
                return False
            raise ValueError("expected a boolean")
        if kind is int:
            return int(raw)
        if kind is float:
            return float(raw)
        if kind is str:
            return raw
        if kind == Tuple[int, ...]:
            return tuple(int(x) for x in raw.split(",") if x.strip())
        if kind == Tuple[str, ...]:
            return tuple(x.strip() for x in raw.split(",") if x.strip())
    except ValueError as exc:
        raise ConfigError(f"{key}: cannot parse {raw!r} ({exc})") from None
    raise ConfigError(f"{key}: unsupported field type {kind}")


def _format_value(value) -> str:
    if isinstance(value, tuple):
        return ",".join(str(v) for v in value)
    if isinstance(value, float):
        return repr(value)
    return str(value)


def _check(cond: bool, message: str) -> None:
    if not cond:
        raise ConfigError(message)


def validate(cfg: SimConfig) -> None:
    """Raise :class:`ConfigError` naming the offending key and its bound."""
    s, r, c, sp, run = cfg.scenario, cfg.radio, cfg.channel, cfg.spatial, cfg.run
    _check(s.inter_site_distance > 0, "scenario.inter_site_distance must be > 0")
    _check(s.rings >= 0, "scenario.rings must be >= 0")
    _check(s.ue_density >= 0, "scenario.ue_density must be >= 0")
    _check(0 <= s.ue_min_distance < s.ue_max_distance,
           "scenario.ue_min_distance must satisfy 0 <= ue_min_distance < ue_max_distance")
    _check(s.hotspots_per_sector >= 0, "scenario.hotspots_per_sector must be >= 0")
    _check(s.devices_per_hotspot >= 1, "scenario.devices_per_hotspot must be >= 1")
    _check(s.hotspot_radius > 0, "scenario.hotspot_radius must be > 0")
    _check(s.max_attempts >= 1, "scenario.max_attempts must be >= 1")
    _check(s.association in ASSOCIATIONS, f"scenario.association must be one of {ASSOCIATIONS}")
    _check(s.bs_height > 0 and s.device_height > 0, "scenario heights must be > 0")
    _check(r.bandwidth_hz > 0, "radio.bandwidth_hz must be > 0")
    _check(r.carrier_ghz > 0, "radio.carrier_ghz must be > 0")
    _check(0 <= c.csi_error_tau2 <= 1, "channel.csi_error_tau2 must be in [0, 1]")
    _check(c.element_spacing > 0, "channel.element_spacing must be > 0")
    _check(c.k_factor_slope_db_per_m >= 0, "channel.k_factor_slope_db_per_m must be >= 0")
    _check(sp.criterion in CRITERIA, f"spatial.criterion must be one of {CRITERIA}")
    _check(0 < sp.c1 < 1, "spatial.c1 must be in (0, 1)")
    _check(0 < sp.c2 < 1, "spatial.c2 must be in (0, 1)")
    _check(sp.covariance_samples >= 1, "spatial.covariance_samples must be >= 1")
    _check(sp.max_scheduled >= 0, "spatial.max_scheduled must be >= 0")
    _check(sp.regularization_eps > 0, "spatial.regularization_eps must be > 0")
    _check(sp.condition_cap > 1, "spatial.condition_cap must be > 1")
    _check(cfg.rates.wifi_cluster_rate_bps >= 0, "rates.wifi_cluster_rate_bps must be >= 0")
    _check(len(run.antennas) > 0, "run.antennas must be nonempty")
    _check(all(n >= 1 for n in run.antennas), "run.antennas entries must be >= 1")
    _check(len(set(run.antennas)) == len(run.antennas), "run.antennas entries must be distinct")
    _check(len(run.schemes) > 0 and all(x in SCHEMES for x in run.schemes),
           f"run.schemes entries must be among {SCHEMES}")
    _check(run.drops >= 1, "run.drops must be >= 1")
    _check(run.workers >= 1, "run.workers must be >= 1")
    _check(run.max_resamples >= 0, "run.max_resamples must be >= 0")
    _check(0 <= run.seed < 2**64, "run.seed must be in [0, 2**64)")


def config_from_mapping(data: dict) -> SimConfig:
    sections = {}
    for section, values in data.items():
        if section not in _SECTIONS:
            raise ConfigError(
                f"unknown section [{section}]; valid sections: {', '.join(_SECTIONS)}")
        cls = _SECTIONS[section]
        kinds = {f.name: f.type for f in dataclasses.fields(cls)}
        parsed = {}
        for key, raw in values.items():
            if key not in kinds:
                raise ConfigError(
                    f"unknown key {section}.{key}; valid keys: {', '.join(kinds)}")
            parsed[key] = raw if not isinstance(raw, str) else _parse_value(
                raw, kinds[key], f"{section}.{key}")
        sections[section] = cls(**parsed)
    cfg = SimConfig(**sections)
    validate(cfg)
    return cfg


def load_config(path) -> SimConfig:
    path = Path(path)
    if not path.is_file():
        raise ConfigError(f"config file not found: {path}")
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    try:
        parser.read(path, encoding="utf-8")
    except configparser.Error as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return config_from_mapping({s: dict(parser.items(s)) for s in parser.sections()})


def save_config(cfg: SimConfig, path) -> None:
    parser = configparser.ConfigParser(interpolation=None)
    parser.optionxform = str
    for section in _SECTIONS:
        params = getattr(cfg, section)
        parser[section] = {f.name: _format_value(getattr(params, f.name))
                           for f in dataclasses.fields(params)}
    with open(path, "w", encoding="utf-8") as fh:
        parser.write(fh)


def config_hash(cfg: SimConfig) -> str:
    """SHA-256 over every field that influences results.

    ``run.workers`` and ``run.output_dir`` are excluded: they change where and
    how fast results are produced, not what they are.
    """
    data = dataclasses.asdict(cfg)
    data["run"].pop("workers")
    data["run"].pop("output_dir")
    blob = json.dumps(data, sort_keys=True, default=list).encode()
    return hashlib.sha256(blob).hexdigest()
