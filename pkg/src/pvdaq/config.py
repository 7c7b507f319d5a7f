"""Run configuration: a TOML file, validated into :class:`RunConfig`.

Lookup order for the file: ``--config`` on the command line, then the
``DAQ_CONFIG`` environment variable, then ``./daq.toml``. Relative paths
in the file are resolved against the file's directory.

Example::

    backend = "sim"                     # "sim" | "hw"
    timezone = "America/Costa_Rica"

    [window]
    start = "05:00"
    end = "18:00"

    [paths]
    archive = "data"
    state = "state"
    log = "logs"

    [storage]
    fsync = true

    [sink]
    kind = "file"                       # "file" | "http" | "none"
    path = "sink_export.lp"             # file sink
    url = "http://localhost:8086"       # http sink
    org = "lab"
    bucket = "pv"
    token = ""
    backlog_limit = 1440

    [sync]
    kind = "directory"                  # "directory" | "none"
    target = "remote"

    [sim]
    seed = 1
    fault_script = "faults.toml"
    start_date = "2025-03-10"
    start_time = "05:00"
    clock_speedup = 0                   # 0 = as fast as possible

    [calibration.thermistor]            # r_fixed, v_supply, r0, t0, beta, fixed_on_low_side
    [calibration.electrical]            # current_lsb, bus_voltage_lsb
    [calibration.meteo]                 # irradiance_gain, wind_speed_per_hz, rain_mm_per_tip

    [adc]                               # full_scale, conversion_ms, settle_ms, irradiance_settle_ms
    [power_monitor]                     # averaging, conversion_us
    [channels]                          # power_monitor_addresses = [0x40, 0x41]
    [recovery]                          # threshold = 10
"""

from __future__ import annotations

import os
import sys
from dataclasses import dataclass, field, fields
from datetime import date, time
from pathlib import Path
from zoneinfo import ZoneInfo, ZoneInfoNotFoundError

if sys.version_info >= (3, 11):
    import tomllib
else:
    import tomli as tomllib

from .acquire.scheduler import Calibration
from .convert import ElectricalCal, MeteoCal, ThermistorCal
from .errors import ConfigError
from .hal.backend import AdcSettings, PowerMonitorSettings
from .hal.channels import DEFAULT_CHANNEL_MAP, ChannelMap
from .recover.policy import DEFAULT_THRESHOLD
from .store.sink import DEFAULT_BACKLOG_LIMIT
from .window import OperatingWindow

ENV_VAR = "DAQ_CONFIG"
DEFAULT_NAME = "daq.toml"


def load_toml(path: str | Path) -> dict:
    with open(path, "rb") as fh:
        return tomllib.load(fh)


@dataclass(frozen=True)
class SinkConfig:
    kind: str = "none"
    path: Path | None = None
    url: str = ""
    org: str = ""
    bucket: str = ""
    token: str = ""
    backlog_limit: int = DEFAULT_BACKLOG_LIMIT


@dataclass(frozen=True)
class SyncConfig:
    kind: str = "none"
    target: Path | None = None


@dataclass(frozen=True)
class SimConfig:
    seed: int = 1
    fault_script: Path | None = None
    start_date: date = date(2025, 3, 10)
    start_time: time = time(5, 0)
    clock_speedup: float = 0.0


@dataclass(frozen=True)
class RunConfig:
    archive_dir: Path
    state_dir: Path
    log_dir: Path
    backend: str = "sim"
    timezone: str = "UTC"
    window: OperatingWindow = OperatingWindow()
    calibration: Calibration = Calibration()
    channel_map: ChannelMap = DEFAULT_CHANNEL_MAP
    adc: AdcSettings = AdcSettings()
    monitor: PowerMonitorSettings = PowerMonitorSettings()
    sink: SinkConfig = SinkConfig()
    sync: SyncConfig = SyncConfig()
    sim: SimConfig = SimConfig()
    threshold: int = DEFAULT_THRESHOLD
    fsync: bool = True
    source: Path | None = field(default=None, compare=False)

    def check_paths(self) -> list[str]:
        """Startup check: every directory exists and is writable."""
        problems = []
        for label, path in (("paths.state", self.state_dir), ("paths.archive", self.archive_dir),
                            ("paths.log", self.log_dir)):
            if not path.is_dir():
                problems.append(f"{label}: directory {path} does not exist")
            elif not os.access(path, os.W_OK):
                problems.append(f"{label}: directory {path} is not writable")
        return problems


def resolve_config_path(cli_value: str | None) -> Path:
    if cli_value:
        return Path(cli_value)
    if os.environ.get(ENV_VAR):
        return Path(os.environ[ENV_VAR])
    return Path(DEFAULT_NAME)


class _Reader:
    """Pulls typed values out of nested tables, collecting every problem."""

    def __init__(self, data: dict, base: Path):
        self.data = data
        self.base = base
        self.problems: list[str] = []

    def table(self, dotted: str) -> dict:
        node = self.data
        for part in dotted.split("."):
            node = node.get(part, {}) if isinstance(node, dict) else {}
        if not isinstance(node, dict):
            self.problems.append(f"{dotted}: expected a table")
            return {}
        return node

    def get(self, dotted: str, kind, default):
        *head, key = dotted.split(".")
        tbl = self.table(".".join(head)) if head else self.data
        if key not in tbl:
            return default
        value = tbl[key]
        try:
            if kind is bool:
                if not isinstance(value, bool):
                    raise TypeError
                return value
            if kind is Path:
                p = Path(value)
                return p if p.is_absolute() else self.base / p
            if kind is date:
                return value if isinstance(value, date) else date.fromisoformat(str(value))
            if kind is time:
                return value if isinstance(value, time) else time.fromisoformat(str(value))
            if kind in (int, float) and isinstance(value, bool):
                raise TypeError
            return kind(value)
        except (TypeError, ValueError):
            self.problems.append(f"{dotted}: cannot use {value!r} as {kind.__name__}")
            return default

    def build(self, label: str, cls, values: dict):
        try:
            return cls(**values)
        except (TypeError, ValueError) as exc:
            self.problems.append(f"{label}: {exc}")
            return cls()


def _cal_block(r: _Reader, section: str, cls, skip=()):
    values = {}
    for f in fields(cls):
        if f.name in skip:
            continue
        kind = bool if isinstance(f.default, bool) else float
        value = r.get(f"{section}.{f.name}", kind, None)
        if value is not None:
            values[f.name] = value
    unknown = set(r.table(section)) - {f.name for f in fields(cls)}
    for key in sorted(unknown):
        r.problems.append(f"{section}.{key}: unknown key")
    return r.build(section, cls, values)


def parse_config(data: dict, base: Path = Path("."), source: Path | None = None) -> RunConfig:
    r = _Reader(data, base)
    backend = r.get("backend", str, "sim")
    if backend not in ("sim", "hw"):
        r.problems.append(f"backend: must be 'sim' or 'hw', not {backend!r}")
    tz = r.get("timezone", str, "UTC")
    try:
        ZoneInfo(tz)
    except (ZoneInfoNotFoundError, ValueError):
        r.problems.append(f"timezone: unknown zone {tz!r}")

    window = OperatingWindow()
    try:
        window = OperatingWindow.from_strings(r.get("window.start", str, "05:00"),
                                              r.get("window.end", str, "18:00"))
    except ValueError as exc:
        r.problems.append(f"window: {exc}")

    calibration = Calibration(
        thermistor=_cal_block(r, "calibration.thermistor", ThermistorCal),
        electrical=_cal_block(r, "calibration.electrical", ElectricalCal),
        meteo=_cal_block(r, "calibration.meteo", MeteoCal, skip=("vane_lookup",)),
    )

    adc = r.build("adc", AdcSettings, {
        "full_scale": r.get("adc.full_scale", float, 4.096),
        "conversion_s": r.get("adc.conversion_ms", float, 16.0) / 1000,
        "settle_s": r.get("adc.settle_ms", float, 5.0) / 1000,
        "irradiance_settle_s": r.get("adc.irradiance_settle_ms", float, 100.0) / 1000,
    })
    if adc.full_scale <= 0 or adc.conversion_s <= 0 or adc.settle_s < 0:
        r.problems.append("adc: full_scale and conversion_ms must be > 0, settle_ms >= 0")
    if adc.irradiance_settle_s < 0.1:
        r.problems.append("adc.irradiance_settle_ms: must be at least 100")
    monitor = PowerMonitorSettings(r.get("power_monitor.averaging", int, 1024),
                                   r.get("power_monitor.conversion_us", int, 1052))

    channel_map = DEFAULT_CHANNEL_MAP
    addrs = r.table("channels").get("power_monitor_addresses")
    if addrs is not None:
        try:
            channel_map = ChannelMap(power_monitor_addresses=tuple(int(a) for a in addrs))
        except (TypeError, ValueError) as exc:
            r.problems.append(f"channels.power_monitor_addresses: {exc}")

    sink = SinkConfig(
        kind=r.get("sink.kind", str, "none"),
        path=r.get("sink.path", Path, None),
        url=r.get("sink.url", str, ""),
        org=r.get("sink.org", str, ""),
        bucket=r.get("sink.bucket", str, ""),
        token=r.get("sink.token", str, ""),
        backlog_limit=r.get("sink.backlog_limit", int, DEFAULT_BACKLOG_LIMIT),
    )
    if sink.kind not in ("file", "http", "none"):
        r.problems.append(f"sink.kind: must be file, http or none, not {sink.kind!r}")
    if sink.kind == "file" and sink.path is None:
        r.problems.append("sink.path: required for a file sink")
    if sink.kind == "http" and not sink.url:
        r.problems.append("sink.url: required for an http sink")
    if sink.backlog_limit < 1:
        r.problems.append("sink.backlog_limit: must be positive")

    sync = SyncConfig(kind=r.get("sync.kind", str, "none"), target=r.get("sync.target", Path, None))
    if sync.kind not in ("directory", "none"):
        r.problems.append(f"sync.kind: must be directory or none, not {sync.kind!r}")
    if sync.kind == "directory" and sync.target is None:
        r.problems.append("sync.target: required for a directory sync")

    sim = SimConfig(
        seed=r.get("sim.seed", int, 1),
        fault_script=r.get("sim.fault_script", Path, None),
        start_date=r.get("sim.start_date", date, date(2025, 3, 10)),
        start_time=r.get("sim.start_time", time, time(5, 0)),
        clock_speedup=r.get("sim.clock_speedup", float, 0.0),
    )
    if sim.clock_speedup < 0:
        r.problems.append("sim.clock_speedup: must be >= 0")

    threshold = r.get("recovery.threshold", int, DEFAULT_THRESHOLD)
    if threshold < 1:
        r.problems.append("recovery.threshold: must be >= 1")

    cfg = RunConfig(
        archive_dir=r.get("paths.archive", Path, base / "data"),
        state_dir=r.get("paths.state", Path, base / "state"),
        log_dir=r.get("paths.log", Path, base / "logs"),
        backend=backend, timezone=tz, window=window, calibration=calibration,
        channel_map=channel_map, adc=adc, monitor=monitor, sink=sink, sync=sync, sim=sim,
        threshold=threshold, fsync=r.get("storage.fsync", bool, True), source=source,
    )
    if r.problems:
        raise ConfigError(r.problems)
    return cfg


def load_config(path: str | Path) -> RunConfig:
    path = Path(path)
    try:
        data = load_toml(path)
    except FileNotFoundError:
        raise ConfigError(f"config file {path} not found") from None
    except tomllib.TOMLDecodeError as exc:
        raise ConfigError(f"{path}: {exc}") from None
    return parse_config(data, path.resolve().parent, path)
