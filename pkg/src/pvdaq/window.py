from __future__ import annotations

from dataclasses import dataclass
from datetime import time

from .clock import DAY, day_start


def parse_hhmm(value: str | time) -> float:
    if isinstance(value, time):
        t = value
    else:
        t = time.fromisoformat(str(value))
    return t.hour * 3600 + t.minute * 60 + t.second


@dataclass(frozen=True)
class OperatingWindow:
    """Daily acquisition window ``[start, end)`` in seconds after local midnight."""

    start_s: float = 5 * 3600
    end_s: float = 18 * 3600

    def __post_init__(self):
        if not 0 <= self.start_s < self.end_s <= DAY:
            raise ValueError("window start must precede end within one day")

    @classmethod
    def from_strings(cls, start="05:00", end="18:00"):
        return cls(parse_hhmm(start), parse_hhmm(end))

    def contains(self, t: float) -> bool:
        tod = t - day_start(t)
        return self.start_s <= tod < self.end_s

    def start_of(self, t: float) -> float:
        return day_start(t) + self.start_s

    def end_of(self, t: float) -> float:
        return day_start(t) + self.end_s

    def next_start(self, t: float) -> float:
        """First window start at or after ``t``."""
        s = self.start_of(t)
        return s if s >= t else s + DAY

    @property
    def minutes(self) -> int:
        return int((self.end_s - self.start_s) // 60)
