"""Scripted faults for the simulator: sensor failures, power cycles, network outages."""

from __future__ import annotations

import bisect
from dataclasses import dataclass
from datetime import date, datetime, time
from enum import Enum
from pathlib import Path

from ..clock import from_seconds, to_seconds
from .channels import THERMISTORS

SENSOR_SIGNALS = frozenset(THERMISTORS) | {"IRR+", "IRR-", "DHT", "VANE", "SEL", "0x40", "0x41"}


class FaultKind(str, Enum):
    SENSOR_FAIL = "SENSOR_FAIL"
    POWER_CYCLE = "POWER_CYCLE"
    NET_OUTAGE = "NET_OUTAGE"


@dataclass(frozen=True)
class FaultEntry:
    at: float
    kind: FaultKind
    signal: str | None = None
    duration: float = 0.0
    downtime: float = 120.0   # POWER_CYCLE only: seconds the node stays off

    def __post_init__(self):
        if self.kind is FaultKind.POWER_CYCLE:
            if self.downtime <= 0:
                raise ValueError("POWER_CYCLE downtime must be positive")
        elif self.duration <= 0:
            raise ValueError(f"{self.kind.value} duration must be positive")
        if self.kind is FaultKind.SENSOR_FAIL and self.signal not in SENSOR_SIGNALS:
            raise ValueError(f"unknown fault signal {self.signal!r}")

    @property
    def end(self) -> float:
        return self.at + (self.downtime if self.kind is FaultKind.POWER_CYCLE else self.duration)

    def active(self, t: float) -> bool:
        return self.at <= t < self.end

    def describe(self) -> str:
        when = from_seconds(self.at).isoformat(timespec="seconds")
        if self.kind is FaultKind.SENSOR_FAIL:
            return f"{when} SENSOR_FAIL {self.signal} {self.duration:g}s"
        if self.kind is FaultKind.NET_OUTAGE:
            return f"{when} NET_OUTAGE {self.duration:g}s"
        return f"{when} POWER_CYCLE off {self.downtime:g}s"


def parse_when(value, day: date | None) -> float:
    """``HH:MM[:SS]`` on ``day`` or a full ISO timestamp -> local seconds."""
    if isinstance(value, datetime):
        return to_seconds(value)
    if isinstance(value, time):
        if day is None:
            raise ValueError("time-of-day given without a reference date")
        return to_seconds(datetime.combine(day, value))
    text = str(value)
    if "T" in text or "-" in text:
        return to_seconds(datetime.fromisoformat(text))
    if day is None:
        raise ValueError("time-of-day given without a reference date")
    return to_seconds(datetime.combine(day, time.fromisoformat(text)))


class FaultScript:
    def __init__(self, entries=()):
        self.entries = tuple(sorted(entries, key=lambda e: (e.at, e.kind.value, e.signal or "")))
        self._by_signal: dict[str, list[FaultEntry]] = {}
        self._outages = []
        for e in self.entries:
            if e.kind is FaultKind.SENSOR_FAIL:
                self._by_signal.setdefault(e.signal, []).append(e)
            elif e.kind is FaultKind.NET_OUTAGE:
                self._outages.append(e)
        self._starts = [e.at for e in self.entries]

    def __len__(self):
        return len(self.entries)

    def __iter__(self):
        return iter(self.entries)

    @classmethod
    def from_records(cls, records, day: date | None = None) -> "FaultScript":
        entries = []
        for i, rec in enumerate(records):
            try:
                kind = FaultKind(str(rec["kind"]).upper())
                entries.append(FaultEntry(
                    at=parse_when(rec["at"], day),
                    kind=kind,
                    signal=rec.get("signal"),
                    duration=float(rec.get("duration", 0.0)),
                    downtime=float(rec.get("downtime", 120.0)),
                ))
            except (KeyError, ValueError) as exc:
                raise ValueError(f"fault entry {i}: {exc}") from exc
        return cls(entries)

    @classmethod
    def load(cls, path: str | Path, day: date | None = None) -> "FaultScript":
        from ..config import load_toml

        data = load_toml(path)
        return cls.from_records(data.get("fault", []), day)

    def to_records(self) -> list[dict]:
        out = []
        for e in self.entries:
            rec = {"kind": e.kind.value, "at": from_seconds(e.at).isoformat(timespec="seconds")}
            if e.kind is FaultKind.SENSOR_FAIL:
                rec["signal"] = e.signal
            if e.kind is FaultKind.POWER_CYCLE:
                rec["downtime"] = e.downtime
            else:
                rec["duration"] = e.duration
            out.append(rec)
        return out

    def sensor_failed(self, signal: str, t: float) -> bool:
        entries = self._by_signal.get(signal)
        return bool(entries) and any(e.active(t) for e in entries)

    def network_up(self, t: float) -> bool:
        return not any(e.active(t) for e in self._outages)

    def power_cycles(self) -> list[FaultEntry]:
        return [e for e in self.entries if e.kind is FaultKind.POWER_CYCLE]

    def activated_by(self, t: float) -> tuple[FaultEntry, ...]:
        """Entries whose activation time is at or before ``t``."""
        return self.entries[: bisect.bisect_right(self._starts, t)]

    def active_at(self, t: float) -> list[FaultEntry]:
        return [e for e in self.activated_by(t) if e.active(t)]
