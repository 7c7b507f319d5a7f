"""Analog multiplexer / ADC / I2C wiring of the acquisition board."""

from __future__ import annotations

from dataclasses import dataclass, field

ADC_INPUTS = ("A0", "A1", "A2", "A3")
THERMISTORS = tuple(f"T{i}" for i in range(20))


def _default_mux():
    rows = [(1, code, f"T{code}") for code in range(8)]
    rows += [(2, code, f"T{code + 8}") for code in range(8)]
    rows += [(3, code, f"T{code + 16}") for code in range(4)]
    rows += [(3, 4, "IRR-"), (3, 5, "IRR+")]
    return tuple(rows)


@dataclass(frozen=True)
class ChannelMap:
    """Board wiring.

    ``mux_assignments`` rows are ``(mux_id, select_code, signal)``; select
    codes with no row are unconnected mux inputs.
    """

    mux_assignments: tuple[tuple[int, int, str], ...] = field(default_factory=_default_mux)
    adc_assignments: dict[str, str] = field(
        default_factory=lambda: {"A3": "MUX1", "A2": "MUX2", "A1": "MUX3", "A0": "WIND_VANE"}
    )
    power_monitor_addresses: tuple[int, ...] = (0x40, 0x41)

    def __post_init__(self):
        seen = set()
        for mux, code, name in self.mux_assignments:
            if mux not in (1, 2, 3) or not 0 <= code <= 7:
                raise ValueError(f"bad mux assignment {(mux, code, name)}")
            if (mux, code) in seen:
                raise ValueError(f"mux {mux} code {code} assigned twice")
            seen.add((mux, code))
        sources = list(self.adc_assignments.values())
        if len(set(sources)) != len(sources):
            raise ValueError("adc_assignments must map inputs to distinct sources")
        if set(self.adc_assignments) - set(ADC_INPUTS):
            raise ValueError("adc_assignments keys must be A0..A3")
        if len(set(self.power_monitor_addresses)) != len(self.power_monitor_addresses):
            raise ValueError("power monitor addresses must be distinct")
        routes = {}
        for adc_input, source in self.adc_assignments.items():
            for code in range(8):
                if source.startswith("MUX"):
                    routes[adc_input, code] = self.signal_at(int(source[3:]), code)
                else:
                    routes[adc_input, code] = source
        object.__setattr__(self, "_routes", routes)
        object.__setattr__(self, "_plan", self._build_scan_plan())

    def signal_at(self, mux_id: int, select_code: int) -> str | None:
        for mux, code, name in self.mux_assignments:
            if mux == mux_id and code == select_code:
                return name
        return None

    def input_for_mux(self, mux_id: int) -> str:
        for adc_input, source in self.adc_assignments.items():
            if source == f"MUX{mux_id}":
                return adc_input
        raise KeyError(f"MUX{mux_id} not wired to the ADC")

    def routed_signal(self, adc_input: str, select_code: int) -> str | None:
        """Signal seen on ``adc_input`` while the shared select lines hold ``select_code``."""
        return self._routes.get((adc_input, select_code))

    def locate(self, signal: str) -> tuple[int, int]:
        """(mux_id, select_code) carrying ``signal``."""
        for mux, code, name in self.mux_assignments:
            if name == signal:
                return mux, code
        raise KeyError(signal)

    def enumerate_signals(self) -> list[tuple[int, int, str]]:
        return sorted(self.mux_assignments)

    def thermistor_scan_plan(self) -> list[tuple[int, list[tuple[str, str]]]]:
        """Per select code, the (adc_input, thermistor) pairs to read, in scan order."""
        return self._plan

    def _build_scan_plan(self):
        plan = []
        for code in range(8):
            reads = []
            for mux in (1, 2, 3):
                name = self.signal_at(mux, code)
                if name in THERMISTORS and f"MUX{mux}" in self.adc_assignments.values():
                    reads.append((self.input_for_mux(mux), name))
            if reads:
                plan.append((code, reads))
        return plan


DEFAULT_CHANNEL_MAP = ChannelMap()
