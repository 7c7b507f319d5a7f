"""Real-bus backend: register semantics only.

No driver is vendored. The caller injects

* ``i2c`` with ``read_i2c_block_data(addr, reg, n)`` and
  ``write_i2c_block_data(addr, reg, data)`` (smbus2-compatible),
* ``gpio`` with ``write(pin, level)``,
* ``dht`` a callable returning ``(celsius, %RH)`` or raising,
* ``pulses`` a callable returning ``(anemometer, rain)`` deltas since the
  previous call (interrupt counters live in the caller's GPIO layer).

Devices
-------
ADS1115 (0x48)
    Config register 0x01 (16 bit, MSB first), conversion register 0x00
    (signed 16 bit, MSB first). Single-shot, single-ended AINx vs GND.
INA228 (0x40, 0x41)
    CONFIG 0x00, ADC_CONFIG 0x01 (16 bit), SHUNT_CAL 0x02.
    VBUS 0x05: 24-bit frame, value in bits 23..4 (20 bit).
    CURRENT 0x07: 24-bit frame, signed 20-bit value in bits 23..4.
    POWER 0x08: 24-bit unsigned. ENERGY 0x09: 40-bit unsigned.
"""

from __future__ import annotations

import time

from ..errors import BusFault, ReadTimeout
from .backend import (AdcSettings, Backend, PowerMonitorSettings,
                      PulseCounters, RawPowerReading)

ADS1115_ADDR = 0x48
ADS_REG_CONVERSION = 0x00
ADS_REG_CONFIG = 0x01
# single-ended mux field (bits 14..12) per input
ADS_MUX = {"A0": 0b100, "A1": 0b101, "A2": 0b110, "A3": 0b111}
ADS_PGA = {6.144: 0b000, 4.096: 0b001, 2.048: 0b010, 1.024: 0b011, 0.512: 0b100, 0.256: 0b101}
ADS_DR_64SPS = 0b011   # ~15.6 ms per conversion

INA_REG_CONFIG = 0x00
INA_REG_ADC_CONFIG = 0x01
INA_REG_VBUS = 0x05
INA_REG_CURRENT = 0x07
INA_REG_POWER = 0x08
INA_REG_ENERGY = 0x09
INA_AVG = {1: 0, 4: 1, 16: 2, 64: 3, 128: 4, 256: 5, 512: 6, 1024: 7}
INA_CT_US = {50: 0, 84: 1, 150: 2, 280: 3, 540: 4, 1052: 5, 2074: 6, 4120: 7}

SELECT_PINS = (17, 27, 22)   # S0, S1, S2 (BCM numbering)


def ads1115_config_word(adc_input: str, full_scale: float) -> int:
    """Config register value starting a single-shot conversion on ``adc_input``."""
    word = 1 << 15                     # OS: start conversion
    word |= ADS_MUX[adc_input] << 12
    word |= ADS_PGA[full_scale] << 9
    word |= 1 << 8                     # MODE: single-shot
    word |= ADS_DR_64SPS << 5
    word |= 0b11                       # comparator disabled
    return word


def ina228_adc_config_word(settings: PowerMonitorSettings) -> int:
    ct = INA_CT_US[settings.conversion_us]
    # continuous bus+shunt+temp, same conversion time on all three channels
    return (0xF << 12) | (ct << 9) | (ct << 6) | (ct << 3) | INA_AVG[settings.averaging]


def decode_ina_20bit(frame: bytes, signed: bool) -> int:
    value = int.from_bytes(frame[:3], "big") >> 4
    if signed and value & (1 << 19):
        value -= 1 << 20
    return value


def decode_ina_power(frame: bytes) -> RawPowerReading:
    """Decode VBUS(3) + CURRENT(3) + POWER(3) + ENERGY(5) bytes into a register image."""
    return RawPowerReading(
        bus_voltage_code=decode_ina_20bit(frame[0:3], signed=False),
        current_code=decode_ina_20bit(frame[3:6], signed=True),
        power_code=int.from_bytes(frame[6:9], "big"),
        energy_code=int.from_bytes(frame[9:14], "big"),
    )


class HardwareBackend(Backend):
    def __init__(self, i2c, gpio, dht, pulses, *, adc_address=ADS1115_ADDR,
                 select_pins=SELECT_PINS, sleep=time.sleep):
        self.sleep = sleep
        self.i2c = i2c
        self.gpio = gpio
        self.dht = dht
        self.pulses = pulses
        self.adc_address = adc_address
        self.select_pins = select_pins
        self.full_scale = AdcSettings().full_scale

    def _read(self, addr, reg, n) -> bytes:
        try:
            return bytes(self.i2c.read_i2c_block_data(addr, reg, n))
        except OSError as exc:
            raise BusFault(f"read 0x{addr:02x}/0x{reg:02x}: {exc}") from exc

    def _write(self, addr, reg, data) -> None:
        try:
            self.i2c.write_i2c_block_data(addr, reg, list(data))
        except OSError as exc:
            raise BusFault(f"write 0x{addr:02x}/0x{reg:02x}: {exc}") from exc

    def reset_mux(self):
        self.write_select(0)

    def configure_adc(self, settings):
        if settings.full_scale not in ADS_PGA:
            raise ValueError(f"unsupported ADS1115 range {settings.full_scale} V")
        self.full_scale = settings.full_scale

    def configure_power_monitor(self, address, settings):
        self._write(address, INA_REG_ADC_CONFIG, ina228_adc_config_word(settings).to_bytes(2, "big"))

    def init_gpio(self):
        for pin in self.select_pins:
            self.gpio.write(pin, 0)

    def write_select(self, code):
        try:
            for bit, pin in enumerate(self.select_pins):
                self.gpio.write(pin, (code >> bit) & 1)
        except OSError as exc:
            raise BusFault(f"select lines: {exc}") from exc

    def start_conversion(self, adc_input: str) -> None:
        word = ads1115_config_word(adc_input, self.full_scale)
        self._write(self.adc_address, ADS_REG_CONFIG, word.to_bytes(2, "big"))

    def read_adc(self, adc_input):
        # the Hal's wait covers mux settling; the conversion itself is polled here
        self.start_conversion(adc_input)
        for _ in range(25):
            if self._read(self.adc_address, ADS_REG_CONFIG, 2)[0] & 0x80:
                break
            self.sleep(0.002)
        else:
            raise BusFault("ADS1115 conversion never completed")
        raw = self._read(self.adc_address, ADS_REG_CONVERSION, 2)
        return int.from_bytes(raw, "big", signed=True)

    def read_power(self, address):
        frame = (self._read(address, INA_REG_VBUS, 3) + self._read(address, INA_REG_CURRENT, 3)
                 + self._read(address, INA_REG_POWER, 3) + self._read(address, INA_REG_ENERGY, 5))
        return decode_ina_power(frame)

    def read_dht(self):
        try:
            return self.dht()
        except (OSError, RuntimeError) as exc:
            raise ReadTimeout(str(exc)) from exc

    def poll_pulses(self):
        wind, rain = self.pulses()
        return PulseCounters(wind, rain)
