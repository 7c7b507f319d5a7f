"""Fast sampling task: 1 Hz pulse polling, 0.2 Hz thermistor and ambient sampling."""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field

from ..convert import ThermistorCal
from ..errors import ReadTimeout
from ..hal import Hal
from ..window import OperatingWindow
from .rolling import RollingWindow
from .scan import scan_thermistors

log = logging.getLogger(__name__)

POLL_PERIOD_S = 1
SCAN_PERIOD_S = 5


@dataclass
class Buffers:
    """State shared between the sampler and the scheduler. Guard with ``lock``."""

    thermal: list[RollingWindow]
    ambient: RollingWindow
    humidity: RollingWindow
    wind: RollingWindow
    rain_tips: int = 0
    read_failures: int = 0
    failed_signals: set[str] = field(default_factory=set)
    lock: threading.Lock = field(default_factory=threading.Lock, repr=False)

    @classmethod
    def allocate(cls, horizon: float = 60.0) -> "Buffers":
        return cls(
            thermal=[RollingWindow(horizon) for _ in range(20)],
            ambient=RollingWindow(horizon),
            humidity=RollingWindow(horizon),
            wind=RollingWindow(horizon, capacity=128),
        )

    def note_failure(self, signal: str, count: int = 1) -> None:
        with self.lock:
            self.read_failures += count
            self.failed_signals.add(signal)

    def take_failures(self) -> tuple[int, set[str]]:
        with self.lock:
            n, names = self.read_failures, self.failed_signals
            self.read_failures, self.failed_signals = 0, set()
        return n, names

    def take_rain_tips(self) -> int:
        with self.lock:
            tips, self.rain_tips = self.rain_tips, 0
        return tips


class FastSampler:
    def __init__(self, hal: Hal, buffers: Buffers, cal: ThermistorCal,
                 window: OperatingWindow = OperatingWindow()):
        self.hal = hal
        self.buffers = buffers
        self.cal = cal
        self.window = window
        self.ticks = 0
        self._last_poll: float | None = None
        self.next_due = self._align(hal.clock.time())

    def _align(self, t: float) -> float:
        t = float(math.ceil(t))
        return t if self.window.contains(t) else self.window.next_start(t)

    def tick(self, t: float) -> None:
        if not self.window.contains(t):
            self._last_poll = None
            self.next_due = self.window.next_start(t)
            return
        self.ticks += 1
        try:
            self._poll(t)
            if int(t) % SCAN_PERIOD_S == 0:
                self._scan(t)
        finally:
            self.next_due = self._align(t + POLL_PERIOD_S)

    def _poll(self, t: float) -> None:
        if self._last_poll is None:
            self.hal.ensure_initialized()
        counts = self.hal.poll_pulse_counters()
        # after a gap (boot, overnight idle) the first delta covers unknown time
        baseline = self._last_poll is None or t - self._last_poll > 1.5 * POLL_PERIOD_S
        self._last_poll = t
        if baseline:
            return
        with self.buffers.lock:
            self.buffers.wind.append(t, counts.anemometer_pulses)
            self.buffers.rain_tips += counts.rain_tips

    def _scan(self, t: float) -> None:
        result = scan_thermistors(self.hal, self.cal)
        b = self.buffers
        with b.lock:
            for i, temp in enumerate(result.temps):
                if temp is not None:
                    b.thermal[i].append(t, temp)
        for err in result.errors:
            b.note_failure(err.split(":", 1)[0])
        try:
            ambient, humidity = self.hal.read_ambient()
        except ReadTimeout:
            b.note_failure("DHT")
        else:
            with b.lock:
                b.ambient.append(t, ambient)
                b.humidity.append(t, humidity)


def run_fast_sampler(clock, hal: Hal, buffers: Buffers, stop: threading.Event, *,
                     cal: ThermistorCal = ThermistorCal(),
                     window: OperatingWindow = OperatingWindow(),
                     sampler: FastSampler | None = None) -> FastSampler:
    """Sampling loop; returns once ``stop`` is set. Sensor errors never end it."""
    sampler = sampler or FastSampler(hal, buffers, cal, window)
    while not stop.is_set():
        due = sampler.next_due
        if not clock.sleep_until(due, stop):
            break
        try:
            sampler.tick(due)
        except Exception:
            log.exception("sampler tick at %s failed", due)
            sampler.next_due = sampler._align(due + POLL_PERIOD_S)
    return sampler
