"""Physical environment models driving the simulator.

An environment answers "what is the world doing at local time t". Pulse
sources (anemometer, rain gauge) are expressed as cumulative counts so the
number of pulses in any interval does not depend on how often it is polled.
"""

from __future__ import annotations

import math
import random
from dataclasses import dataclass, field

from ..clock import DAY, day_start

N_THERMISTORS = 20


@dataclass(frozen=True)
class EnvSample:
    ambient_c: float
    humidity: float
    irradiance: float
    panel_temps: tuple[float, ...]
    wind_dir: float


@dataclass(frozen=True)
class PanelModel:
    # W delivered per W/m^2 of irradiance; panel 1 carries the cooling treatment.
    efficiency: tuple[float, float] = (0.0060, 0.0063)
    voltage: float = 18.0

    def power(self, panel: int, irradiance: float) -> float:
        return self.efficiency[panel] * irradiance

    def volts(self, irradiance: float) -> float:
        return self.voltage if irradiance > 0 else 0.0


class Environment:
    panel = PanelModel()

    def sample(self, t: float) -> EnvSample:
        raise NotImplementedError

    def panel_temp(self, index: int, t: float) -> float:
        return self.sample(t).panel_temps[index]

    def irradiance_at(self, t: float) -> float:
        return self.sample(t).irradiance

    def irradiance_integral(self, t0: float, t1: float) -> float:
        raise NotImplementedError

    def wind_pulses(self, t: float) -> float:
        raise NotImplementedError

    def rain_tips(self, t: float) -> float:
        raise NotImplementedError


@dataclass
class ConstantEnvironment(Environment):
    """Time-invariant world, for tests that want exact expected values."""

    ambient_c: float = 25.0
    humidity: float = 60.0
    irradiance: float = 0.0
    panel_temps: float | tuple[float, ...] | None = None
    wind_hz: float = 0.0
    rain_tips_per_min: float = 0.0
    wind_dir: float = 0.0
    panel: PanelModel = field(default_factory=PanelModel)

    def sample(self, t):
        temps = self.panel_temps
        if temps is None:
            temps = self.ambient_c
        if not isinstance(temps, tuple):
            temps = (float(temps),) * N_THERMISTORS
        return EnvSample(self.ambient_c, self.humidity, self.irradiance, temps, self.wind_dir)

    def irradiance_at(self, t):
        return self.irradiance

    def irradiance_integral(self, t0, t1):
        return self.irradiance * (t1 - t0)

    def wind_pulses(self, t):
        return self.wind_hz * t

    def rain_tips(self, t):
        return self.rain_tips_per_min * t / 60.0


@dataclass(frozen=True)
class DiurnalParams:
    sunrise_s: float = 5 * 3600
    sunset_s: float = 18 * 3600
    peak_irradiance: float = 1000.0
    night_ambient: float = 18.0
    ambient_swing: float = 10.0
    ambient_lag_s: float = 5400.0
    humidity_night: float = 90.0
    humidity_per_degree: float = 2.5
    panel_rise: tuple[float, float] = (0.030, 0.022)   # degC per W/m^2
    panel_gradient: float = 0.15
    wind_mean: float = 2.5                              # m/s
    wind_per_hz: float = 0.667
    rain_probability: float = 0.6


class DiurnalEnvironment(Environment):
    """Half-sine irradiance between sunrise and sunset, lagged ambient
    temperature, seeded wind and showers, panels heated in proportion to
    irradiance (the treated panel less so).
    """

    # (amplitude m/s, period s) of the wind components; amplitudes sum below the mean
    _WIND_TERMS = ((1.0, 6 * 3600.0), (0.5, 47 * 60.0), (0.4, 7 * 60.0))

    def __init__(self, seed: int = 0, params: DiurnalParams | None = None,
                 origin: float = 0.0, panel: PanelModel | None = None):
        self.seed = seed
        self.p = params or DiurnalParams()
        self.origin = day_start(origin)
        self.panel = panel or PanelModel()
        rng = random.Random(f"wind:{seed}")
        self._wind = [(a, 2 * math.pi / period, rng.uniform(0, 2 * math.pi))
                      for a, period in self._WIND_TERMS]
        self._dir_phase = (rng.uniform(0, 2 * math.pi), rng.uniform(0, 2 * math.pi))
        self._dir_base = rng.choice(range(16)) * 22.5
        self._showers: dict[int, tuple[float, float, float] | None] = {}
        self._gradient = tuple(
            self.p.panel_gradient * math.sin(1.7 * (i % 10) + 0.3) for i in range(N_THERMISTORS)
        )
        self._rise = tuple(self.p.panel_rise[i // 10] * (1.0 + self._gradient[i])
                           for i in range(N_THERMISTORS))
        self._cached_t = None

    # -- deterministic curves ------------------------------------------------

    def irradiance_at(self, t: float) -> float:
        tod = t - day_start(t)
        length = self.p.sunset_s - self.p.sunrise_s
        if not self.p.sunrise_s < tod < self.p.sunset_s:
            return 0.0
        return self.p.peak_irradiance * math.sin(math.pi * (tod - self.p.sunrise_s) / length)

    def ambient_at(self, t: float) -> float:
        tod = t - day_start(t)
        length = self.p.sunset_s - self.p.sunrise_s
        phase = (tod - self.p.sunrise_s - self.p.ambient_lag_s) / length
        bump = math.sin(math.pi * phase) if 0 < phase < 1 else 0.0
        return self.p.night_ambient + self.p.ambient_swing * bump

    def panel_temp(self, index, t):
        if t != self._cached_t:
            self._cached_t = t
            self._cached = (self.ambient_at(t), self.irradiance_at(t))
        amb, g = self._cached
        return amb + g * self._rise[index]

    def sample(self, t):
        g = self.irradiance_at(t)
        amb = self.ambient_at(t)
        hum = self.p.humidity_night - self.p.humidity_per_degree * (amb - self.p.night_ambient)
        hum = min(100.0, max(20.0, hum))
        temps = tuple(amb + g * rise for rise in self._rise)
        return EnvSample(amb, hum, g, temps, self._wind_dir(t))

    def irradiance_integral(self, t0, t1):
        if t1 <= t0:
            return 0.0
        p = self.p
        length = p.sunset_s - p.sunrise_s
        total = 0.0
        d = day_start(t0)
        while d < t1:
            a = max(t0, d + p.sunrise_s)
            b = min(t1, d + p.sunset_s)
            if b > a:
                total += p.peak_irradiance * length / math.pi * (
                    math.cos(math.pi * (a - d - p.sunrise_s) / length)
                    - math.cos(math.pi * (b - d - p.sunrise_s) / length)
                )
            d += DAY
        return total

    # -- seeded stochastic sources -----------------------------------------

    def wind_speed(self, t: float) -> float:
        tau = t - self.origin
        return self.p.wind_mean + sum(a * math.sin(w * tau + ph) for a, w, ph in self._wind)

    def wind_pulses(self, t):
        tau = t - self.origin
        integral = self.p.wind_mean * tau
        for a, w, ph in self._wind:
            integral += a / w * (math.cos(ph) - math.cos(w * tau + ph))
        return integral / self.p.wind_per_hz

    def _wind_dir(self, t: float) -> float:
        tau = t - self.origin
        deg = (self._dir_base
               + 60.0 * math.sin(2 * math.pi * tau / 5400.0 + self._dir_phase[0])
               + 30.0 * math.sin(2 * math.pi * tau / 1300.0 + self._dir_phase[1]))
        return (round(deg / 22.5) % 16) * 22.5

    def _shower(self, day_index: int):
        if day_index not in self._showers:
            rng = random.Random(f"rain:{self.seed}:{day_index}")
            if rng.random() < self.p.rain_probability:
                start = rng.uniform(self.p.sunrise_s + 4 * 3600, self.p.sunset_s - 3600)
                self._showers[day_index] = (start, rng.uniform(1200, 5400), rng.uniform(0.3, 3.0))
            else:
                self._showers[day_index] = None
        return self._showers[day_index]

    def _tips_in_day(self, day_index: int, tod: float) -> float:
        shower = self._shower(day_index)
        if shower is None:
            return 0.0
        start, dur, per_min = shower
        return per_min / 60.0 * min(max(tod - start, 0.0), dur)

    def rain_tips(self, t):
        tau = t - self.origin
        day_index = math.floor(tau / DAY)
        total = self._tips_in_day(day_index, tau - day_index * DAY)
        if day_index >= 0:
            total += sum(self._tips_in_day(k, DAY) for k in range(day_index))
        else:
            total -= sum(self._tips_in_day(k, DAY) for k in range(day_index, 0))
        return total
