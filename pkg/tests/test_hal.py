import math
import threading

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import at, make_hal, script
from pvdaq.acquire.scan import scan_thermistors
from pvdaq.clock import SimClock
from pvdaq.convert import ThermistorCal
from pvdaq.errors import BusFault, ReadTimeout
from pvdaq.hal import Hal, PulseCounters
from pvdaq.hal.backend import RawPowerReading
from pvdaq.hal.environment import ConstantEnvironment, DiurnalEnvironment
from pvdaq.hal.sim import Simulator

CONV = 0.016


def settle(clock):
    clock.advance(CONV)


# initialization -----------------------------------------------------------

def test_initialize_sequence():
    _, backend, hal = make_hal()
    ops = [op for _, op, _, _ in hal.calls]
    assert ops == ["reset_mux", "configure_adc", "configure_power_monitor",
                   "configure_power_monitor", "init_gpio"]
    assert [a for _, op, a, _ in hal.calls if op == "configure_power_monitor"] == [
        "0x40/avg1024/1052us", "0x41/avg1024/1052us"]
    assert backend.gpio_ready and hal.initialized


def test_ensure_initialized_only_once_until_release():
    _, _, hal = make_hal()
    n = len(hal.calls)
    hal.ensure_initialized()
    assert len(hal.calls) == n
    hal.release()
    assert not hal.initialized
    hal.ensure_initialized()
    assert hal.initialized and len(hal.calls) > n + 1


def test_initialize_configures_what_it_can():
    faults = script({"kind": "SENSOR_FAIL", "signal": "0x40", "at": "11:00", "duration": 7200})
    _, backend, hal = make_hal(faults=faults, initialize=False)
    with pytest.raises(BusFault):
        hal.initialize()
    assert hal.initialized and backend.gpio_ready
    assert set(backend.monitor_settings) == {0x41}


def test_ensure_initialized_tolerates_device_faults():
    faults = script({"kind": "SENSOR_FAIL", "signal": "SEL", "at": "11:00", "duration": 7200})
    _, _, hal = make_hal(faults=faults, initialize=False)
    hal.ensure_initialized()
    assert hal.initialized


# select / read_adc ---------------------------------------------------------

def test_select_out_of_range_rejected():
    _, _, hal = make_hal()
    for bad in (8, -1, 2.0):
        with pytest.raises(ValueError):
            hal.select_mux_channel(bad)


def test_zero_volt_source_reads_zero():
    clock, _, hal = make_hal(irradiance_offset_v=0.0)
    hal.select_mux_channel(4)        # IRR- at 0 V
    settle(clock)
    assert hal.read_adc("A1") == 0


def test_half_scale_source_reads_16384():
    clock, _, hal = make_hal(irradiance_offset_v=2.048)
    hal.select_mux_channel(4)
    settle(clock)
    assert hal.read_adc("A1") == 16384


def test_read_before_conversion_window_rejected():
    clock, _, hal = make_hal()
    hal.select_mux_channel(0)
    clock.advance(0.010)
    with pytest.raises(ValueError):
        hal.read_adc("A3")
    clock.advance(0.006)
    hal.read_adc("A3")


def test_unknown_adc_input_rejected():
    _, _, hal = make_hal()
    with pytest.raises(ValueError):
        hal.read_adc("A4")


def test_read_does_not_change_mux_state():
    clock, backend, hal = make_hal()
    hal.select_mux_channel(5)
    settle(clock)
    hal.read_adc("A1")
    assert backend.select_code == 5


def test_sensor_fail_t3_is_bus_fault():
    faults = script({"kind": "SENSOR_FAIL", "signal": "T3", "at": "11:00", "duration": 7200})
    clock, _, hal = make_hal(faults=faults)
    hal.select_mux_channel(3)
    settle(clock)
    with pytest.raises(BusFault):
        hal.read_adc("A3")
    settle(clock)
    assert hal.read_adc("A2") > 0      # T11 on the same select code is fine
    assert hal.calls[-2][3] == "!BusFault"


def test_select_line_fault():
    faults = script({"kind": "SENSOR_FAIL", "signal": "SEL", "at": "11:00", "duration": 7200})
    _, _, hal = make_hal(faults=faults, initialize=False)
    with pytest.raises(BusFault):
        hal.select_mux_channel(1)


def test_uniform_forty_degrees_scan():
    clock, _, hal = make_hal(env=ConstantEnvironment(panel_temps=40.0))
    result = scan_thermistors(hal, ThermistorCal())
    assert result.valid == 20
    # 4.096 V / 32768 codes around 1.9 V is well under 0.01 degC per code
    assert all(t == pytest.approx(40.0, abs=0.01) for t in result.temps)


# power monitors ---------------------------------------------------------------

def test_open_circuit_panel_reads_zero_current_and_power():
    _, _, hal = make_hal(env=ConstantEnvironment(irradiance=0.0))
    raw = hal.read_power_monitor(0x40)
    assert raw.current_code == 0 and raw.power_code == 0


def test_energy_accumulates_under_constant_power():
    clock, _, hal = make_hal(env=ConstantEnvironment(irradiance=800.0))
    clock.advance(60)
    e1 = hal.read_power_monitor(0x41).energy_code
    clock.advance(60)
    e2 = hal.read_power_monitor(0x41).energy_code
    assert e2 > e1 > 0


def test_unconfigured_monitor_address_rejected():
    _, _, hal = make_hal()
    with pytest.raises(ValueError):
        hal.read_power_monitor(0x42)


def test_monitor_fault_is_bus_fault():
    faults = script({"kind": "SENSOR_FAIL", "signal": "0x41", "at": "11:00", "duration": 7200})
    _, _, hal = make_hal(faults=faults, initialize=False)
    hal.read_power_monitor(0x40)
    with pytest.raises(BusFault):
        hal.read_power_monitor(0x41)


@pytest.mark.parametrize("kwargs", [
    {"bus_voltage_code": 2**20, "current_code": 0, "power_code": 0, "energy_code": 0},
    {"bus_voltage_code": 0, "current_code": 2**19, "power_code": 0, "energy_code": 0},
    {"bus_voltage_code": 0, "current_code": 0, "power_code": 2**24, "energy_code": 0},
    {"bus_voltage_code": 0, "current_code": 0, "power_code": 0, "energy_code": 2**40},
])
def test_register_widths_enforced(kwargs):
    with pytest.raises(ValueError):
        RawPowerReading(**kwargs)


# ambient ------------------------------------------------------------------------

def test_ambient_pass_through():
    _, _, hal = make_hal(env=ConstantEnvironment(ambient_c=25.0, humidity=60.0))
    assert hal.read_ambient() == (25.0, 60.0)


def test_ambient_fault_is_timeout():
    faults = script({"kind": "SENSOR_FAIL", "signal": "DHT", "at": "11:00", "duration": 7200})
    _, _, hal = make_hal(faults=faults)
    with pytest.raises(ReadTimeout):
        hal.read_ambient()


def test_ambient_rate_limit():
    clock, _, hal = make_hal()
    hal.read_ambient()
    clock.advance(0.5)
    with pytest.raises(ValueError):
        hal.read_ambient()
    clock.advance(1.5)
    hal.read_ambient()


# pulse counters -------------------------------------------------------------------

def test_no_wind_no_rain():
    clock, _, hal = make_hal()
    clock.advance(60)
    assert hal.poll_pulse_counters() == PulseCounters(0, 0)


def test_wind_one_hertz_for_sixty_seconds():
    clock, _, hal = make_hal(env=ConstantEnvironment(wind_hz=1.0))
    hal.poll_pulse_counters()
    clock.advance(60)
    assert hal.poll_pulse_counters().anemometer_pulses == 60


def test_back_to_back_polls():
    clock, _, hal = make_hal(env=ConstantEnvironment(wind_hz=3.0, rain_tips_per_min=2.0))
    clock.advance(30)
    assert hal.poll_pulse_counters() != PulseCounters(0, 0)
    assert hal.poll_pulse_counters() == PulseCounters(0, 0)


@given(st.lists(st.floats(min_value=0.01, max_value=30.0), min_size=1, max_size=30))
def test_pulses_neither_lost_nor_double_counted(gaps):
    env = ConstantEnvironment(wind_hz=2.3, rain_tips_per_min=1.7)
    clock, backend, hal = make_hal(env=env)
    t0 = clock.time()
    hal.poll_pulse_counters()
    wind = rain = 0
    for g in gaps:
        clock.advance(g)
        c = hal.poll_pulse_counters()
        assert c.anemometer_pulses >= 0 and c.rain_tips >= 0
        wind += c.anemometer_pulses
        rain += c.rain_tips
    t1 = clock.time()
    # the counters telescope: the sum equals whole pulses between the endpoints
    assert wind == math.floor(env.wind_pulses(t1)) - math.floor(env.wind_pulses(t0))
    assert rain == math.floor(env.rain_tips(t1)) - math.floor(env.rain_tips(t0))


# simulator model -------------------------------------------------------------------

def test_noon_irradiance_at_peak():
    clock = SimClock(at("05:00"))
    sim = Simulator(clock, DiurnalEnvironment(seed=3, origin=clock.time()))
    sample = sim.sim_advance(at("11:30") - at("05:00"))
    assert sample.irradiance == pytest.approx(1000.0, rel=1e-12)


def test_night_irradiance_zero():
    clock = SimClock(at("00:00"))
    sim = Simulator(clock, DiurnalEnvironment(seed=3, origin=clock.time()))
    assert sim.sim_advance(3 * 3600).irradiance == 0.0


def test_sim_advance_needs_sim_clock():
    from pvdaq.clock import ScaledClock
    sim = Simulator(ScaledClock(0.0, 1.0))
    with pytest.raises(TypeError):
        sim.sim_advance(1.0)


def test_faults_become_active_as_time_passes():
    faults = script({"kind": "SENSOR_FAIL", "signal": "T5", "at": "06:00", "duration": 60})
    clock = SimClock(at("05:59"))
    sim = Simulator(clock, faults=faults)
    assert sim.active_faults() == []
    sim.sim_advance(60)
    assert [e.signal for e in sim.active_faults()] == ["T5"]
    sim.sim_advance(60)
    assert sim.active_faults() == []


def _trace(seed):
    faults = script({"kind": "SENSOR_FAIL", "signal": "T7", "at": "10:00:10", "duration": 30})
    clock = SimClock(at("10:00"))
    env = DiurnalEnvironment(seed=seed, origin=clock.time())
    hal = Hal(Simulator(clock, env, faults), clock, record_calls=True)
    hal.initialize()
    for _ in range(12):
        clock.advance(5)
        scan_thermistors(hal, ThermistorCal())
        hal.poll_pulse_counters()
        hal.read_power_monitor(0x40)
        hal.read_ambient()
    return hal.call_log_lines()


def test_same_seed_same_call_log():
    assert _trace(11) == _trace(11)


def test_different_seed_differs():
    assert _trace(11) != _trace(12)


# fault scoping -------------------------------------------------------------------

SCOPED = [f"T{i}" for i in range(20)] + ["IRR+", "IRR-", "DHT", "VANE", "0x40", "0x41"]


def _snapshot(faults, t):
    env = DiurnalEnvironment(seed=5, origin=t)
    clock, backend, hal = make_hal(t0=t, env=env, faults=faults, record_calls=False,
                                   initialize=False)
    out = {}
    for code in range(8):
        backend.write_select(code)
        for adc_input in ("A0", "A1", "A2", "A3"):
            sig = backend.map.routed_signal(adc_input, code)
            try:
                out[sig] = backend.read_adc(adc_input)
            except BusFault:
                out[sig] = "fault"
    for addr in (0x40, 0x41):
        try:
            out[f"0x{addr:02x}"] = backend.read_power(addr)
        except BusFault:
            out[f"0x{addr:02x}"] = "fault"
    try:
        out["DHT"] = backend.read_dht()
    except ReadTimeout:
        out["DHT"] = "fault"
    return out


@settings(max_examples=40)
@given(st.sampled_from(SCOPED), st.integers(6 * 3600, 17 * 3600))
def test_fault_scoping(signal, tod):
    t = at("00:00") + tod
    faults = script({"kind": "SENSOR_FAIL", "signal": signal, "at": "00:00", "duration": 86399})
    clean, faulty = _snapshot(None, t), _snapshot(faults, t)
    name = {"VANE": "WIND_VANE"}.get(signal, signal)
    assert faulty[name] == "fault"
    for key in clean:
        if key != name:
            assert faulty[key] == clean[key], key


# bus exclusivity ------------------------------------------------------------------

class CountingSimulator(Simulator):
    """Tracks how many device calls are in flight at once."""

    def __init__(self, *a, **kw):
        super().__init__(*a, **kw)
        self.inflight = 0
        self.peak = 0
        self._guard = threading.Lock()

    def _io(self):
        with self._guard:
            self.inflight += 1
            self.peak = max(self.peak, self.inflight)
        try:
            super()._io()
        finally:
            with self._guard:
                self.inflight -= 1


def test_scan_and_monitor_poll_serialize():
    clock = SimClock(at("12:00"))
    backend = CountingSimulator(clock, ConstantEnvironment(irradiance=500.0), io_delay=0.0005)
    hal = Hal(backend, clock, record_calls=True)
    hal.initialize()
    start = threading.Barrier(2)

    def scanner():
        start.wait()
        for _ in range(3):
            scan_thermistors(hal, ThermistorCal())

    def poller():
        start.wait()
        for _ in range(30):
            hal.read_power_monitor(0x40)

    threads = [threading.Thread(target=scanner), threading.Thread(target=poller)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert backend.peak == 1
    # a scan is one contiguous block of 8 selects + 20 reads in the call log
    ops = [op for _, op, _, _ in hal.calls][5:]
    i = 0
    scans = 0
    while i < len(ops):
        if ops[i] == "select":
            block = ops[i:i + 28]
            assert block.count("select") == 8 and block.count("read_adc") == 20
            scans += 1
            i += 28
        else:
            assert ops[i] == "read_power"
            i += 1
    assert scans == 3
