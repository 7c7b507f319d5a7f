"""Bus-level read sequences: thermistor scan, irradiance pass, instantaneous reads."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field

from .. import convert
from ..convert import ElectricalCal, MeteoCal, ThermistorCal
from ..errors import BusFault, RangeError, ReadTimeout
from ..hal import Hal

log = logging.getLogger(__name__)

READ_ERRORS = (BusFault, ReadTimeout, RangeError)


@dataclass
class ScanResult:
    temps: list[float | None]
    errors: list[str] = field(default_factory=list)

    @property
    def valid(self) -> int:
        return sum(t is not None for t in self.temps)


def _settled_read(hal: Hal, adc_input: str, settle: float) -> int:
    hal.clock.sleep(settle + hal.adc.conversion_s)
    return hal.read_adc(adc_input)


def scan_thermistors(hal: Hal, cal: ThermistorCal) -> ScanResult:
    """One pass over all 20 thermistors; a failed channel only blanks itself."""
    temps: list[float | None] = [None] * 20
    errors = []
    with hal.exclusive():
        for code, reads in hal.map.thermistor_scan_plan():
            try:
                hal.select_mux_channel(code)
            except BusFault as exc:
                errors.extend(f"{name}: {exc}" for _, name in reads)
                continue
            for adc_input, name in reads:
                try:
                    raw = _settled_read(hal, adc_input, hal.adc.settle_s)
                    volts = convert.adc_code_to_voltage(raw, hal.adc.full_scale)
                    ohms = convert.divider_to_resistance(volts, cal)
                    temps[int(name[1:])] = convert.resistance_to_temperature(ohms, cal)
                except READ_ERRORS as exc:
                    errors.append(f"{name}: {exc}")
    return ScanResult(temps, errors)


def read_irradiance_pass(hal: Hal, cal: MeteoCal) -> float:
    """IRR- then IRR+ through MUX3, each after the long settling delay. Raises on failure."""
    mux_minus, code_minus = hal.map.locate("IRR-")
    mux_plus, code_plus = hal.map.locate("IRR+")
    with hal.exclusive():
        hal.select_mux_channel(code_minus)
        v_minus = convert.adc_code_to_voltage(
            _settled_read(hal, hal.map.input_for_mux(mux_minus), hal.adc.irradiance_settle_s),
            hal.adc.full_scale)
        hal.select_mux_channel(code_plus)
        v_plus = convert.adc_code_to_voltage(
            _settled_read(hal, hal.map.input_for_mux(mux_plus), hal.adc.irradiance_settle_s),
            hal.adc.full_scale)
    return convert.differential_to_irradiance(v_plus, v_minus, cal)


def read_wind_direction(hal: Hal, cal: MeteoCal) -> float:
    vane_input = next(i for i, src in hal.map.adc_assignments.items() if src == "WIND_VANE")
    with hal.exclusive():
        raw = _settled_read(hal, vane_input, 0.0)
    return convert.vane_voltage_to_direction(
        convert.adc_code_to_voltage(raw, hal.adc.full_scale), cal)


def read_panel(hal: Hal, address: int, cal: ElectricalCal) -> tuple[float, float, float, float]:
    return convert.power_registers_to_si(hal.read_power_monitor(address), cal)
