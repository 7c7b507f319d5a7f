"""Minute-cycle scheduler and frame assembly.

The scheduler only knows the daily timeline. What happens at each point
is delegated to a handler (the daemon node), which keeps this module free
of persistence concerns:

* ``start_day(t)`` when a minute inside the window arrives and no session
  is recording for that day,
* ``minute_cycle(t)`` at every minute boundary inside the window,
* ``periodic_check(t)`` after the cycle on every fifth minute,
* ``end_day(t, cause)`` at the first boundary outside the window while a
  session is still recording.
"""

from __future__ import annotations

import logging
import math
import threading
from dataclasses import dataclass, field
from typing import Protocol

from .. import convert
from ..clock import Clock, from_seconds
from ..convert import ElectricalCal, MeteoCal, ThermistorCal
from ..errors import EmptyWindow
from ..hal import Hal
from ..window import OperatingWindow
from .frame import THERMAL_FIELDS, MeasurementFrame
from .rolling import rolling_average
from .sampler import Buffers
from .scan import READ_ERRORS, read_irradiance_pass, read_panel, read_wind_direction

log = logging.getLogger(__name__)

MINUTE = 60
HEALTH_EVERY_MIN = 5
WIND_AVERAGE_S = 60.0


@dataclass(frozen=True)
class Calibration:
    thermistor: ThermistorCal = ThermistorCal()
    electrical: ElectricalCal = ElectricalCal()
    meteo: MeteoCal = MeteoCal()


@dataclass
class MinuteResult:
    frame: MeasurementFrame
    failures: int = 0
    failed_signals: set[str] = field(default_factory=set)
    monitor_joules: tuple[float | None, ...] = ()

    @property
    def ok(self) -> bool:
        return self.failures == 0


def _average(window) -> float | None:
    try:
        return rolling_average(window)
    except EmptyWindow:
        return None


def assemble_minute_frame(t: float, hal: Hal, buffers: Buffers, cal: Calibration,
                          energy_offsets=(0.0, 0.0), rain_day_accum: float = 0.0) -> MinuteResult:
    """Build the frame for minute ``t``.

    Buffered channels come from the rolling windows, the rest is read now:
    irradiance and vane first, then the power monitors. Failed sub-reads
    become flagged (``None``) fields; the frame is always produced.
    """
    values: dict[str, float | None] = {}
    failures, failed = buffers.take_failures()
    failed = set(failed)

    with buffers.lock:
        for window in buffers.thermal:
            window.expire(t)
        buffers.ambient.expire(t)
        buffers.humidity.expire(t)
        buffers.wind.expire(t)
        for name, window in zip(THERMAL_FIELDS, buffers.thermal):
            values[name] = _average(window)
        values["ambient_temp"] = _average(buffers.ambient)
        values["humidity"] = _average(buffers.humidity)
        pulses = buffers.wind.total()
        tips, buffers.rain_tips = buffers.rain_tips, 0

    values["wind_speed"] = convert.pulses_to_wind_speed(pulses, WIND_AVERAGE_S, cal.meteo)
    rain = convert.tips_to_rain_depth(tips, cal.meteo)
    values["rain_mm"] = rain

    def attempt(name, signal, fn):
        nonlocal failures
        try:
            return fn()
        except READ_ERRORS as exc:
            log.debug("%s read failed: %s", name, exc)
            failures += 1
            failed.add(signal)
            return None

    values["irradiance"] = attempt("irradiance", "IRR", lambda: read_irradiance_pass(hal, cal.meteo))
    values["wind_dir"] = attempt("wind_dir", "VANE", lambda: read_wind_direction(hal, cal.meteo))

    monitor_joules = []
    for panel, address in enumerate(hal.map.power_monitor_addresses):
        reading = attempt(f"panel {panel}", f"0x{address:02x}",
                          lambda a=address: read_panel(hal, a, cal.electrical))
        keys = [f"p{panel}_{q}" for q in ("volts", "amps", "watts", "joules")]
        if reading is None:
            values.update(dict.fromkeys(keys, None))
            monitor_joules.append(None)
            continue
        volts, amps, watts, joules = reading
        monitor_joules.append(joules)
        values.update(zip(keys, (volts, amps, watts, joules + energy_offsets[panel])))

    frame = MeasurementFrame.build(from_seconds(t), values, rain_day_accum + rain)
    return MinuteResult(frame, failures, failed, tuple(monitor_joules))


class ScheduleHandler(Protocol):
    recording: bool

    def session_open_for(self, t: float) -> bool: ...
    def start_day(self, t: float) -> None: ...
    def minute_cycle(self, t: float) -> None: ...
    def periodic_check(self, t: float) -> None: ...
    def end_day(self, t: float, cause: str) -> None: ...


def next_minute(t: float) -> float:
    return float(math.ceil(t / MINUTE - 1e-9) * MINUTE)


class Scheduler:
    def __init__(self, clock: Clock, handler: ScheduleHandler,
                 window: OperatingWindow = OperatingWindow()):
        self.clock = clock
        self.handler = handler
        self.window = window
        self.errors = 0
        self.next_due = next_minute(clock.time())

    def step(self, t: float) -> None:
        """Run whatever is due at boundary ``t`` and schedule the next one."""
        h = self.handler
        try:
            if self.window.contains(t):
                if not h.session_open_for(t):
                    h.start_day(t)
                self._guarded(h.minute_cycle, t)
                if int(t // MINUTE) % HEALTH_EVERY_MIN == 0:
                    self._guarded(h.periodic_check, t)
            elif h.recording:
                h.end_day(t, "end-of-day")
        finally:
            self.next_due = self._following(t)

    def _guarded(self, fn, t):
        try:
            fn(t)
        except Exception:
            self.errors += 1
            log.exception("scheduled task %s at %s failed", fn.__name__, from_seconds(t))

    def _following(self, t: float) -> float:
        nxt = t + MINUTE
        if self.window.contains(nxt) or self.handler.recording:
            return nxt
        return self.window.next_start(nxt)


def run_scheduler(clock: Clock, handler: ScheduleHandler, stop: threading.Event, *,
                  window: OperatingWindow = OperatingWindow(),
                  scheduler: Scheduler | None = None) -> Scheduler:
    """Scheduler loop; returns once ``stop`` is set. Task errors never end it."""
    scheduler = scheduler or Scheduler(clock, handler, window)
    while not stop.is_set():
        due = scheduler.next_due
        if not clock.sleep_until(due, stop):
            break
        try:
            scheduler.step(due)
        except Exception:
            scheduler.errors += 1
            log.exception("scheduler step at %s failed", from_seconds(due))
    return scheduler
