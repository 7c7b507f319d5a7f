"""Raw backend values -> physical units.

Everything here is a pure function of its arguments.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field

from .errors import RangeError

ADC_FULL_COUNTS = 32768  # 2**15, signed 16-bit
KELVIN = 273.15


@dataclass(frozen=True)
class ThermistorCal:
    r_fixed: float = 10_000.0
    v_supply: float = 3.3
    r0: float = 10_000.0
    t0: float = 298.15
    beta: float = 3950.0
    # True: fixed resistor between output and ground, NTC on the supply side.
    fixed_on_low_side: bool = True

    def __post_init__(self):
        for name in ("r_fixed", "v_supply", "r0", "t0", "beta"):
            if not getattr(self, name) > 0:
                raise ValueError(f"ThermistorCal.{name} must be > 0")


@dataclass(frozen=True)
class ElectricalCal:
    current_lsb: float = 2.0 / 2**19
    bus_voltage_lsb: float = 195.3125e-6

    def __post_init__(self):
        if not (self.current_lsb > 0 and self.bus_voltage_lsb > 0):
            raise ValueError("ElectricalCal LSBs must be > 0")

    @property
    def power_factor(self) -> float:
        return 3.2 * self.current_lsb

    @property
    def energy_factor(self) -> float:
        return 16 * self.power_factor


def _vane_table(pullup=10_000.0, v_ref=3.3):
    # Resistor-ladder vane, 16 positions, read against a pull-up.
    ohms = [33000, 6570, 8200, 891, 1000, 688, 2200, 1410,
            3900, 3140, 16000, 14120, 120000, 42120, 64900, 21880]
    return tuple((v_ref * r / (r + pullup), i * 22.5) for i, r in enumerate(ohms))


DEFAULT_VANE_TABLE = _vane_table()


@dataclass(frozen=True)
class MeteoCal:
    irradiance_gain: float = 1000.0          # (W/m^2) per V
    wind_speed_per_hz: float = 0.667         # (m/s) per Hz
    rain_mm_per_tip: float = 0.2794
    vane_lookup: tuple[tuple[float, float], ...] = field(default=DEFAULT_VANE_TABLE)

    def __post_init__(self):
        if not self.irradiance_gain > 0:
            raise ValueError("MeteoCal.irradiance_gain must be > 0")
        if not self.vane_lookup:
            raise ValueError("MeteoCal.vane_lookup is empty")
        volts = [v for v, _ in self.vane_lookup]
        if len(set(volts)) != len(volts):
            raise ValueError("MeteoCal.vane_lookup voltages must be distinct")
        if any(not 0 <= d < 360 for _, d in self.vane_lookup):
            raise ValueError("MeteoCal.vane_lookup directions must lie in [0, 360)")


def adc_code_to_voltage(code: int, full_scale: float) -> float:
    if full_scale <= 0:
        raise ValueError("full_scale must be positive")
    return max(code, 0) * full_scale / ADC_FULL_COUNTS


def divider_to_resistance(v_out: float, cal: ThermistorCal) -> float:
    """Resistance of the NTC leg of the divider given its output voltage.

    Raises RangeError for an output pinned at either rail, which is what an
    open or shorted sensor looks like.
    """
    if not 0 < v_out < cal.v_supply:
        raise RangeError(f"divider output {v_out:.4f} V outside (0, {cal.v_supply}) V")
    if cal.fixed_on_low_side:
        return cal.r_fixed * (cal.v_supply / v_out - 1.0)
    return cal.r_fixed * v_out / (cal.v_supply - v_out)


def resistance_to_temperature(r: float, cal: ThermistorCal) -> float:
    """Beta-model NTC temperature in degrees Celsius."""
    if r <= 0:
        raise ValueError("resistance must be positive")
    return 1.0 / (1.0 / cal.t0 + math.log(r / cal.r0) / cal.beta) - KELVIN


def differential_to_irradiance(v_plus: float, v_minus: float, cal: MeteoCal) -> float:
    return max(0.0, cal.irradiance_gain * (v_plus - v_minus))


def pulses_to_wind_speed(pulses: int, window: float, cal: MeteoCal) -> float:
    if window <= 0:
        raise ValueError("window must be positive")
    return cal.wind_speed_per_hz * pulses / window


def tips_to_rain_depth(tips: int, cal: MeteoCal) -> float:
    return tips * cal.rain_mm_per_tip


def vane_voltage_to_direction(v: float, cal: MeteoCal) -> float:
    """Nearest table entry; equal distances resolve to the smaller direction."""
    return min(cal.vane_lookup, key=lambda e: (abs(e[0] - v), e[1]))[1]


def power_registers_to_si(raw, cal: ElectricalCal) -> tuple[float, float, float, float]:
    """(volts, amps, watts, joules) from an INA228 register image."""
    return (
        raw.bus_voltage_code * cal.bus_voltage_lsb,
        raw.current_code * cal.current_lsb,
        raw.power_code * cal.power_factor,
        raw.energy_code * cal.energy_factor,
    )
