"""Backend contract shared by the simulator and the real-bus binding."""

from __future__ import annotations

from abc import ABC, abstractmethod
from dataclasses import dataclass

VBUS_BITS = 20
CURRENT_BITS = 20
POWER_BITS = 24
ENERGY_BITS = 40


@dataclass(frozen=True)
class RawPowerReading:
    bus_voltage_code: int
    current_code: int
    power_code: int
    energy_code: int

    def __post_init__(self):
        if not 0 <= self.bus_voltage_code < 2**VBUS_BITS:
            raise ValueError("bus_voltage_code exceeds 20-bit register")
        if not -(2 ** (CURRENT_BITS - 1)) <= self.current_code < 2 ** (CURRENT_BITS - 1):
            raise ValueError("current_code exceeds signed 20-bit register")
        if not 0 <= self.power_code < 2**POWER_BITS:
            raise ValueError("power_code exceeds 24-bit register")
        if not 0 <= self.energy_code < 2**ENERGY_BITS:
            raise ValueError("energy_code exceeds 40-bit register")


@dataclass(frozen=True)
class PulseCounters:
    anemometer_pulses: int = 0
    rain_tips: int = 0


@dataclass(frozen=True)
class AdcSettings:
    full_scale: float = 4.096
    conversion_s: float = 0.016
    settle_s: float = 0.005
    irradiance_settle_s: float = 0.100


@dataclass(frozen=True)
class PowerMonitorSettings:
    averaging: int = 1024
    conversion_us: int = 1052


class Backend(ABC):
    """Device-level operations. Callers serialize access; see :class:`pvdaq.hal.Hal`.

    Faults surface as :class:`~pvdaq.errors.BusFault` (I2C / select lines)
    or :class:`~pvdaq.errors.ReadTimeout` (single-wire sensor).
    """

    @abstractmethod
    def reset_mux(self) -> None: ...

    @abstractmethod
    def configure_adc(self, settings: AdcSettings) -> None: ...

    @abstractmethod
    def configure_power_monitor(self, address: int, settings: PowerMonitorSettings) -> None: ...

    @abstractmethod
    def init_gpio(self) -> None: ...

    @abstractmethod
    def write_select(self, code: int) -> None: ...

    @abstractmethod
    def read_adc(self, adc_input: str) -> int: ...

    @abstractmethod
    def read_power(self, address: int) -> RawPowerReading: ...

    @abstractmethod
    def read_dht(self) -> tuple[float, float]: ...

    @abstractmethod
    def poll_pulses(self) -> PulseCounters: ...

    def release(self) -> None:
        pass
