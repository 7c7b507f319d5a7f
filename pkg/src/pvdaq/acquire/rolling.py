from __future__ import annotations

import bisect
import math
from dataclasses import dataclass, field

from ..errors import EmptyWindow


@dataclass
class RollingWindow:
    """Timestamped samples covering at most ``horizon`` seconds.

    A sample is kept while ``newest - ts < horizon``; with 5 s sampling and
    a 60 s horizon that is twelve samples.
    """

    horizon: float = 60.0
    capacity: int = 64
    samples: list[tuple[float, float]] = field(default_factory=list)

    def __len__(self):
        return len(self.samples)

    @property
    def newest(self) -> float | None:
        return self.samples[-1][0] if self.samples else None

    def append(self, ts: float, value: float) -> bool:
        """Add a sample. Returns False when it is already outside the horizon."""
        if self.samples and self.samples[-1][0] - ts >= self.horizon:
            return False
        if not self.samples or ts >= self.samples[-1][0]:
            self.samples.append((ts, value))
        else:
            bisect.insort(self.samples, (ts, value))
        self._evict(self.samples[-1][0])
        if len(self.samples) > self.capacity:
            del self.samples[: len(self.samples) - self.capacity]
        return True

    def _evict(self, reference: float) -> None:
        cut = 0
        for ts, _ in self.samples:
            if reference - ts < self.horizon:
                break
            cut += 1
        if cut:
            del self.samples[:cut]

    def expire(self, now: float) -> None:
        """Drop samples that are a full horizon older than ``now``."""
        self._evict(now)

    def values(self) -> list[float]:
        return [v for _, v in self.samples]

    def total(self) -> float:
        return math.fsum(self.values())

    def clear(self) -> None:
        self.samples.clear()


def rolling_average(window: RollingWindow) -> float:
    if not window.samples:
        raise EmptyWindow("no samples in window")
    return math.fsum(window.values()) / len(window.samples)
