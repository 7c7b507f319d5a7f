"""Hardware abstraction layer.

:class:`Hal` is what the rest of the daemon talks to. It enforces the
operation preconditions, serializes bus access behind one re-entrant
token and optionally records every backend call for later inspection.
"""

from __future__ import annotations

import logging
import threading
from collections import deque

from ..clock import Clock
from ..errors import BusFault, ReadTimeout
from .backend import (AdcSettings, Backend, PowerMonitorSettings,
                      PulseCounters, RawPowerReading)
from .channels import ADC_INPUTS, DEFAULT_CHANNEL_MAP, ChannelMap
from .faults import FaultEntry, FaultKind, FaultScript

__all__ = [
    "AdcSettings", "Backend", "BusFault", "ChannelMap", "DEFAULT_CHANNEL_MAP",
    "FaultEntry", "FaultKind", "FaultScript", "Hal", "PowerMonitorSettings",
    "PulseCounters", "RawPowerReading", "ReadTimeout",
]

log = logging.getLogger(__name__)

DHT_MIN_INTERVAL_S = 2.0
_EPS = 1e-6   # clocks are float epoch seconds; SimClock resolves 1 us


class Hal:
    def __init__(self, backend: Backend, clock: Clock, *,
                 channel_map: ChannelMap = DEFAULT_CHANNEL_MAP,
                 adc: AdcSettings = AdcSettings(),
                 monitor: PowerMonitorSettings = PowerMonitorSettings(),
                 record_calls: bool | int = False):
        self.backend = backend
        self.clock = clock
        self.map = channel_map
        self.adc = adc
        self.monitor = monitor
        self.token = threading.RLock()
        if record_calls is True:
            self.calls = deque()
        elif record_calls:
            self.calls = deque(maxlen=int(record_calls))
        else:
            self.calls = None
        self._adc_busy_since = float("-inf")
        self._last_dht = None
        self.initialized = False

    def exclusive(self):
        """Hold the bus token across several operations (``with hal.exclusive(): ...``)."""
        return self.token

    def _call(self, op, arg, fn, *args):
        with self.token:
            t = self.clock.time()
            try:
                result = fn(*args)
            except (BusFault, ReadTimeout) as exc:
                if self.calls is not None:
                    self.calls.append((t, op, arg, f"!{type(exc).__name__}"))
                raise
            if self.calls is not None:
                self.calls.append((t, op, arg, result))
            return result

    def call_log_lines(self) -> list[str]:
        return [f"{t:.6f} {op} {arg} -> {res}" for t, op, arg, res in (self.calls or ())]

    # -- operations ------------------------------------------------------------

    def initialize(self) -> None:
        """Mux reset, ADC config, power-monitor averaging setup, GPIO inputs.

        Every step is attempted even if an earlier one fails, so one dead
        device does not leave the others unconfigured. The first failure is
        re-raised afterwards.
        """
        steps = [("reset_mux", None, self.backend.reset_mux, ()),
                 ("configure_adc", self.adc.full_scale, self.backend.configure_adc, (self.adc,))]
        for addr in self.map.power_monitor_addresses:
            steps.append(("configure_power_monitor",
                          f"0x{addr:02x}/avg{self.monitor.averaging}/{self.monitor.conversion_us}us",
                          self.backend.configure_power_monitor, (addr, self.monitor)))
        steps.append(("init_gpio", None, self.backend.init_gpio, ()))
        first_error = None
        with self.token:
            for op, arg, fn, args in steps:
                try:
                    self._call(op, arg, fn, *args)
                except (BusFault, ReadTimeout) as exc:
                    first_error = first_error or exc
                if op == "reset_mux":
                    self._adc_busy_since = self.clock.time()
            self.initialized = True
        if first_error is not None:
            raise first_error

    def ensure_initialized(self) -> None:
        """Initialize if never done or released since; device errors are only logged."""
        if not self.initialized:
            try:
                self.initialize()
            except (BusFault, ReadTimeout) as exc:
                log.warning("hardware initialization incomplete: %s", exc)

    def select_mux_channel(self, select_code: int) -> None:
        if not isinstance(select_code, int) or not 0 <= select_code <= 7:
            raise ValueError(f"select code {select_code!r} outside 0..7")
        with self.token:
            self._call("select", select_code, self.backend.write_select, select_code)
            self._adc_busy_since = self.clock.time()

    def read_adc(self, adc_input: str) -> int:
        if adc_input not in ADC_INPUTS:
            raise ValueError(f"unknown ADC input {adc_input!r}")
        with self.token:
            waited = self.clock.time() - self._adc_busy_since
            if waited + _EPS < self.adc.conversion_s:
                raise ValueError(
                    f"read_adc {adc_input} after {waited * 1000:.1f} ms; "
                    f"conversion needs {self.adc.conversion_s * 1000:.0f} ms")
            try:
                return self._call("read_adc", adc_input, self.backend.read_adc, adc_input)
            finally:
                self._adc_busy_since = self.clock.time()

    def read_power_monitor(self, address: int) -> RawPowerReading:
        if address not in self.map.power_monitor_addresses:
            raise ValueError(f"0x{address:02x} is not a configured power monitor")
        return self._call("read_power", f"0x{address:02x}", self.backend.read_power, address)

    def read_ambient(self) -> tuple[float, float]:
        with self.token:
            now = self.clock.time()
            if self._last_dht is not None and now - self._last_dht + _EPS < DHT_MIN_INTERVAL_S:
                raise ValueError(
                    f"humidity sensor queried {now - self._last_dht:.2f} s after the previous "
                    f"query; minimum is {DHT_MIN_INTERVAL_S:g} s")
            self._last_dht = now
            return self._call("read_dht", None, self.backend.read_dht)

    def poll_pulse_counters(self) -> PulseCounters:
        return self._call("poll_pulses", None, self.backend.poll_pulses)

    def release(self) -> None:
        self.initialized = False
        self._call("release", None, self.backend.release)
