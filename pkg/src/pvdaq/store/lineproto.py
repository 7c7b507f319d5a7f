"""Line-protocol encoding of frames for the time-series sink.

Per frame::

    pv_electrical,panel=0 volts=18,amps=0.333333,watts=6,joules=1234.5 1741604400
    pv_thermal,sensor=t00 temp=41.25 1741604400
    weather ambient=24.3,humidity=73.5,irradiance=998.4,wind_speed=2.1,wind_dir=90,rain=0 1741604400

Timestamps are epoch seconds of the frame's local time in the site
timezone. Values are the archived (rounded) values with trailing zeros
trimmed, so CSV and sink carry identical numbers. Flagged fields are left
out and a line with no fields is not emitted.
"""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime, timezone
from zoneinfo import ZoneInfo

from ..acquire.frame import THERMAL_FIELDS, MeasurementFrame, format_fixed

# (measurement, tag key, tag value, ((line field, frame field), ...))
SERIES = (
    *(("pv_electrical", "panel", str(p),
       tuple((q, f"p{p}_{q}") for q in ("volts", "amps", "watts", "joules"))) for p in (0, 1)),
    *(("pv_thermal", "sensor", name, (("temp", name),)) for name in THERMAL_FIELDS),
    ("weather", None, None, (("ambient", "ambient_temp"), ("humidity", "humidity"),
                             ("irradiance", "irradiance"), ("wind_speed", "wind_speed"),
                             ("wind_dir", "wind_dir"), ("rain", "rain_mm"))),
)

# series key ("pv_thermal,sensor=t03") + line field -> frame field
FIELD_OF = {
    (_m if _k is None else f"{_m},{_k}={_v}", lf): ff
    for _m, _k, _v, pairs in SERIES for lf, ff in pairs
}


def trim_number(text: str) -> str:
    if "." in text:
        text = text.rstrip("0").rstrip(".")
    return "0" if text in ("-0", "") else text


def epoch_seconds(ts: datetime, tz: str | ZoneInfo) -> int:
    zone = tz if isinstance(tz, ZoneInfo) else ZoneInfo(tz)
    return int(ts.replace(tzinfo=zone).timestamp())


def from_epoch(seconds: int, tz: str | ZoneInfo) -> datetime:
    zone = tz if isinstance(tz, ZoneInfo) else ZoneInfo(tz)
    return datetime.fromtimestamp(seconds, timezone.utc).astimezone(zone).replace(tzinfo=None)


def encode_frame(frame: MeasurementFrame, tz: str | ZoneInfo = "UTC") -> list[str]:
    ts = epoch_seconds(frame.timestamp, tz)
    lines = []
    for measurement, tag, tag_value, pairs in SERIES:
        fields = [f"{lf}={trim_number(format_fixed(ff, frame.values[ff]))}"
                  for lf, ff in pairs if frame.values[ff] is not None]
        if not fields:
            continue
        head = measurement if tag is None else f"{measurement},{tag}={tag_value}"
        lines.append(f"{head} {','.join(fields)} {ts}")
    return lines


@dataclass(frozen=True)
class Point:
    series: str
    fields: dict
    timestamp: int


def parse_line(line: str) -> Point:
    try:
        head, field_text, ts = line.split(" ")
        fields = {}
        for item in field_text.split(","):
            key, sep, value = item.partition("=")
            if not sep or not key:
                raise ValueError(f"bad field {item!r}")
            fields[key] = float(value)
        return Point(head, fields, int(ts))
    except ValueError as exc:
        raise ValueError(f"unparsable line protocol: {exc}") from exc


def parse_lines(text: str) -> list[Point]:
    """Parse a dump; errors carry the 1-based line number."""
    points = []
    for lineno, line in enumerate(text.splitlines(), start=1):
        if not line.strip():
            continue
        try:
            points.append(parse_line(line))
        except ValueError as exc:
            raise ValueError(f"line {lineno}: {exc}") from exc
    return points
