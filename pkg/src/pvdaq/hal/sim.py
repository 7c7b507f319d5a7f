"""Deterministic simulated backend.

Models the board (three 8:1 muxes on shared select lines into a 16-bit
ADC, two power monitors, a single-wire humidity sensor and two pulse
inputs) on top of an :class:`~pvdaq.hal.environment.Environment`. Faults
come from a :class:`~pvdaq.hal.faults.FaultScript`. Given the same seed,
script and call sequence the responses are identical.
"""

from __future__ import annotations

import math
import threading
import time as _time

from ..clock import Clock, SimClock
from ..convert import (ADC_FULL_COUNTS, KELVIN, ElectricalCal, MeteoCal,
                       ThermistorCal)
from ..errors import BusFault, ReadTimeout
from .backend import (ENERGY_BITS, AdcSettings, Backend, PowerMonitorSettings,
                      PulseCounters, RawPowerReading)
from .channels import DEFAULT_CHANNEL_MAP, ChannelMap
from .environment import ConstantEnvironment, Environment
from .faults import FaultScript


class Simulator(Backend):
    def __init__(self, clock: Clock, environment: Environment | None = None,
                 faults: FaultScript | None = None, *,
                 channel_map: ChannelMap = DEFAULT_CHANNEL_MAP,
                 thermistor: ThermistorCal = ThermistorCal(),
                 meteo: MeteoCal = MeteoCal(),
                 electrical: ElectricalCal = ElectricalCal(),
                 irradiance_offset_v: float = 0.1,
                 io_delay: float = 0.0):
        self.clock = clock
        self.env = environment or ConstantEnvironment()
        self.faults = faults or FaultScript()
        self.map = channel_map
        self.thermistor = thermistor
        self.meteo = meteo
        self.electrical = electrical
        self.irradiance_offset_v = irradiance_offset_v
        # real seconds slept inside each device call; lets threaded tests interleave
        self.io_delay = io_delay
        self._pulse_lock = threading.Lock()
        self._therm_index = {f"T{i}": i for i in range(20)}
        self.power_on()

    # -- simulation control ---------------------------------------------------

    def power_on(self) -> None:
        """(Re)apply power: volatile device state is lost, counters restart."""
        t = self.clock.time()
        self.select_code = 0
        self.adc_settings: AdcSettings | None = None
        self.monitor_settings: dict[int, PowerMonitorSettings] = {}
        self.gpio_ready = False
        self._powered_at = t
        with self._pulse_lock:
            self._wind_base = math.floor(self.env.wind_pulses(t))
            self._rain_base = math.floor(self.env.rain_tips(t))

    power_cycle = power_on

    def sim_advance(self, duration: float):
        """Advance the owned simulated clock and bring the model up to date."""
        if not isinstance(self.clock, SimClock):
            raise TypeError("sim_advance needs a SimClock")
        self.clock.advance(duration)
        return self.env.sample(self.clock.time())

    def active_faults(self):
        return self.faults.active_at(self.clock.time())

    def network_up(self) -> bool:
        return self.faults.network_up(self.clock.time())

    def energy_joules(self, panel: int, t: float) -> float:
        """Energy delivered by ``panel`` since the monitors were powered."""
        return self.env.panel.efficiency[panel] * self.env.irradiance_integral(self._powered_at, t)

    def _failed(self, signal: str, t: float) -> bool:
        return self.faults.sensor_failed(signal, t)

    def _io(self):
        if self.io_delay:
            _time.sleep(self.io_delay)

    # -- signal model ----------------------------------------------------------

    def signal_voltage(self, signal: str, t: float) -> float:
        if signal in self._therm_index:
            return self.thermistor_voltage(self.env.panel_temp(self._therm_index[signal], t))
        if signal == "IRR-":
            return self.irradiance_offset_v
        if signal == "IRR+":
            return self.irradiance_offset_v + self.env.irradiance_at(t) / self.meteo.irradiance_gain
        if signal == "WIND_VANE":
            direction = self.env.sample(t).wind_dir
            return min(self.meteo.vane_lookup, key=lambda e: abs(e[1] - direction))[0]
        return 0.0

    def thermistor_voltage(self, temp_c: float) -> float:
        cal = self.thermistor
        r = cal.r0 * math.exp(cal.beta * (1.0 / (temp_c + KELVIN) - 1.0 / cal.t0))
        if cal.fixed_on_low_side:
            return cal.v_supply * cal.r_fixed / (cal.r_fixed + r)
        return cal.v_supply * r / (cal.r_fixed + r)

    def _to_code(self, volts: float) -> int:
        fs = self.adc_settings.full_scale if self.adc_settings else AdcSettings().full_scale
        return min(ADC_FULL_COUNTS - 1, max(0, round(volts / fs * ADC_FULL_COUNTS)))

    # -- Backend ----------------------------------------------------------------

    def reset_mux(self):
        self._io()
        if self._failed("SEL", self.clock.time()):
            raise BusFault("select lines stuck")
        self.select_code = 0

    def configure_adc(self, settings):
        self._io()
        self.adc_settings = settings

    def configure_power_monitor(self, address, settings):
        self._io()
        t = self.clock.time()
        if address not in self.map.power_monitor_addresses or self._failed(f"0x{address:02x}", t):
            raise BusFault(f"no ACK from 0x{address:02x}")
        self.monitor_settings[address] = settings

    def init_gpio(self):
        self.gpio_ready = True

    def write_select(self, code):
        self._io()
        if self._failed("SEL", self.clock.time()):
            raise BusFault("select lines stuck")
        self.select_code = code

    def read_adc(self, adc_input):
        self._io()
        t = self.clock.time()
        signal = self.map.routed_signal(adc_input, self.select_code)
        if signal is None:
            return 0
        fault_name = "VANE" if signal == "WIND_VANE" else signal
        if self.faults.sensor_failed(fault_name, t):
            raise BusFault(f"{adc_input} read failed ({signal})")
        index = self._therm_index.get(signal)
        if index is not None:
            volts = self.thermistor_voltage(self.env.panel_temp(index, t))
        else:
            volts = self.signal_voltage(signal, t)
        return self._to_code(volts)

    def read_power(self, address):
        self._io()
        t = self.clock.time()
        if address not in self.map.power_monitor_addresses or self._failed(f"0x{address:02x}", t):
            raise BusFault(f"no ACK from 0x{address:02x}")
        panel = self.map.power_monitor_addresses.index(address)
        g = self.env.irradiance_at(t)
        volts = self.env.panel.volts(g)
        watts = self.env.panel.power(panel, g)
        amps = watts / volts if volts > 0 else 0.0
        cal = self.electrical
        energy = math.floor(self.energy_joules(panel, t) / cal.energy_factor) % 2**ENERGY_BITS
        return RawPowerReading(
            bus_voltage_code=round(volts / cal.bus_voltage_lsb),
            current_code=round(amps / cal.current_lsb),
            power_code=round(watts / cal.power_factor),
            energy_code=energy,
        )

    def read_dht(self):
        self._io()
        t = self.clock.time()
        if self._failed("DHT", t):
            raise ReadTimeout("DHT22 did not answer")
        s = self.env.sample(t)
        return round(s.ambient_c, 1), round(s.humidity, 1)

    def poll_pulses(self):
        t = self.clock.time()
        with self._pulse_lock:
            wind = math.floor(self.env.wind_pulses(t))
            rain = math.floor(self.env.rain_tips(t))
            out = PulseCounters(max(0, wind - self._wind_base), max(0, rain - self._rain_base))
            self._wind_base = max(wind, self._wind_base)
            self._rain_base = max(rain, self._rain_base)
        return out

    def release(self):
        self.gpio_ready = False
