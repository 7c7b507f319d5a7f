"""The one-minute archived record and its field schema."""

from __future__ import annotations

from dataclasses import dataclass, field
from datetime import datetime
from types import MappingProxyType

THERMAL_FIELDS = tuple(f"t{i:02d}" for i in range(20))
PANEL_QUANTITIES = ("volts", "amps", "watts", "joules")
PANEL_FIELDS = tuple(f"p{p}_{q}" for p in (0, 1) for q in PANEL_QUANTITIES)
WEATHER_FIELDS = ("ambient_temp", "humidity", "irradiance", "wind_speed", "wind_dir", "rain_mm")
FIELDS = THERMAL_FIELDS + PANEL_FIELDS + WEATHER_FIELDS
CSV_HEADER = ("timestamp",) + FIELDS

# decimals kept when archiving; chosen just below each sensor's resolution
PRECISION = {
    **{f: 3 for f in THERMAL_FIELDS},
    **{f"p{p}_volts": 4 for p in (0, 1)},
    **{f"p{p}_amps": 6 for p in (0, 1)},
    **{f"p{p}_watts": 5 for p in (0, 1)},
    **{f"p{p}_joules": 2 for p in (0, 1)},
    "ambient_temp": 1,
    "humidity": 1,
    "irradiance": 2,
    "wind_speed": 3,
    "wind_dir": 1,
    "rain_mm": 4,
}


def quantize(name: str, value: float | None) -> float | None:
    if value is None:
        return None
    q = round(float(value), PRECISION[name])
    return q + 0.0  # folds -0.0 into 0.0


def format_fixed(name: str, value: float | None) -> str:
    return "" if value is None else f"{value:.{PRECISION[name]}f}"


@dataclass(frozen=True)
class MeasurementFrame:
    timestamp: datetime
    values: MappingProxyType = field(repr=False)
    rain_day_accum: float = 0.0

    def __post_init__(self):
        if self.timestamp.second or self.timestamp.microsecond:
            raise ValueError(f"frame timestamp {self.timestamp} is not on a minute boundary")

    @classmethod
    def build(cls, timestamp: datetime, values: dict, rain_day_accum: float = 0.0):
        unknown = set(values) - set(FIELDS)
        if unknown:
            raise KeyError(f"unknown frame fields {sorted(unknown)}")
        clean = {name: quantize(name, values.get(name)) for name in FIELDS}
        return cls(timestamp, MappingProxyType(clean), rain_day_accum)

    def __getitem__(self, name: str) -> float | None:
        return self.values[name]

    @property
    def flags(self) -> frozenset[str]:
        return frozenset(name for name, v in self.values.items() if v is None)

    @property
    def temps(self) -> tuple[float | None, ...]:
        return tuple(self.values[f] for f in THERMAL_FIELDS)

    def panel(self, index: int) -> tuple[float | None, ...]:
        return tuple(self.values[f"p{index}_{q}"] for q in PANEL_QUANTITIES)

    def key(self):
        return self.timestamp, tuple(self.values[f] for f in FIELDS)

    def __eq__(self, other):
        return isinstance(other, MeasurementFrame) and self.key() == other.key()

    def __hash__(self):
        return hash(self.key())
