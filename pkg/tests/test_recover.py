import random
import threading
from datetime import date, datetime, timedelta

import pytest
from hypothesis import given, settings
from hypothesis import strategies as st

from conftest import at, make_hal
from pvdaq.acquire import Buffers, Calibration, assemble_minute_frame
from pvdaq.acquire.frame import FIELDS, MeasurementFrame
from pvdaq.hal.environment import ConstantEnvironment
from pvdaq.recover import (Action, ErrorCounter, Mode, Reason, ShutdownCoordinator,
                           evaluate_recovery, health_check, record_cycle_result,
                           reinitialize_hardware)
from pvdaq.store import SinkBacklog
from pvdaq.store.csvarchive import HEADER_LINE, format_row, open_daily_csv
from pvdaq.store.state import SessionState

DAY = date(2025, 3, 10)


def write_archive(directory, rows, day=DAY, name=None):
    path = directory / (name or f"data_{day:%Y%m%d}.csv")
    start = datetime.combine(day, datetime.min.time()).replace(hour=5)
    body = [HEADER_LINE] + [
        format_row(MeasurementFrame.build(start + timedelta(minutes=i), dict.fromkeys(FIELDS, 1.0)))
        for i in range(rows)]
    path.write_text("\n".join(body) + "\n")
    return path


def saved(rows=10, day=DAY, recording=True, csv="data_20250310.csv"):
    return SessionState(day, csv, rows, 0.0, (0.0, 0.0), recording, None)


# decision examples ---------------------------------------------------------------

def test_mid_day_intact_resumes(tmp_path):
    write_archive(tmp_path, 10)
    d = evaluate_recovery(saved(), at("12:00"), tmp_path)
    assert (d.mode, d.reason) == (Mode.RESUME, Reason.ALL_CRITERIA_MET)
    assert d.csv.rows == 10


def test_early_restart_idles(tmp_path):
    write_archive(tmp_path, 10)
    d = evaluate_recovery(saved(), at("04:30"), tmp_path)
    assert (d.mode, d.reason) == (Mode.FRESH_IDLE, Reason.OUTSIDE_WINDOW)


def test_late_restart_idles(tmp_path):
    write_archive(tmp_path, 10)
    assert evaluate_recovery(saved(), at("19:00"), tmp_path).mode is Mode.FRESH_IDLE


def test_yesterdays_state_starts_fresh(tmp_path):
    write_archive(tmp_path, 10, day=DAY - timedelta(days=1))
    s = saved(day=DAY - timedelta(days=1), csv="data_20250309.csv")
    d = evaluate_recovery(s, at("09:00"), tmp_path)
    assert (d.mode, d.reason) == (Mode.FRESH_ACTIVE, Reason.DIFFERENT_DAY)
    assert not d.new_file_required


def test_truncated_csv_needs_new_file(tmp_path):
    path = write_archive(tmp_path, 10)
    path.write_bytes(path.read_bytes()[:-9])
    d = evaluate_recovery(saved(), at("12:00"), tmp_path)
    assert (d.mode, d.reason) == (Mode.FRESH_ACTIVE, Reason.CSV_CORRUPT)
    assert d.new_file_required


def test_fewer_rows_than_saved(tmp_path):
    write_archive(tmp_path, 8)
    d = evaluate_recovery(saved(rows=10), at("12:00"), tmp_path)
    assert (d.mode, d.reason) == (Mode.FRESH_ACTIVE, Reason.ROWS_MISSING)


def test_no_state_and_not_recording(tmp_path):
    write_archive(tmp_path, 10)
    assert evaluate_recovery(None, at("12:00"), tmp_path).reason is Reason.NO_STATE
    assert evaluate_recovery(saved(recording=False), at("12:00"), tmp_path).reason is Reason.NOT_RECORDING


def test_missing_file_and_foreign_header(tmp_path):
    assert evaluate_recovery(saved(), at("12:00"), tmp_path).reason is Reason.CSV_MISSING
    (tmp_path / "data_20250310.csv").write_text("a,b\n")
    assert evaluate_recovery(saved(), at("12:00"), tmp_path).reason is Reason.HEADER_MISMATCH


# totality ---------------------------------------------------------------------------

def independent_integrity(path, rows_written):
    """File present, exact header, every line a full row, enough rows."""
    if not path.is_file():
        return False
    text = path.read_text()
    if not text.endswith("\n"):
        return False
    lines = text[:-1].split("\n")
    if lines[0] != HEADER_LINE:
        return False
    for line in lines[1:]:
        cells = line.split(",")
        if len(cells) != 35:
            return False
        try:
            datetime.fromisoformat(cells[0])
            [float(c) for c in cells[1:] if c]
        except ValueError:
            return False
    return len(lines) - 1 >= rows_written


@settings(max_examples=150)
@given(
    has_state=st.booleans(),
    day_offset=st.integers(-2, 1),
    recording=st.booleans(),
    rows_written=st.integers(0, 12),
    archive=st.sampled_from(["none", "valid", "torn", "header", "garbage"]),
    file_rows=st.integers(0, 12),
    seconds=st.integers(0, 2 * 86400 - 1),
)
def test_recovery_is_total(tmp_path_factory, has_state, day_offset, recording, rows_written,
                           archive, file_rows, seconds):
    directory = tmp_path_factory.mktemp("rec")
    path = directory / "data_20250310.csv"
    if archive != "none":
        write_archive(directory, file_rows)
        if archive == "torn":
            path.write_bytes(path.read_bytes()[:-3])
        elif archive == "header":
            path.write_text("timestamp,x\n")
        elif archive == "garbage":
            path.write_bytes(path.read_bytes() + b"2025-03-10T99:00:00,1\n")
    state = saved(rows_written, DAY + timedelta(days=day_offset), recording) if has_state else None
    now = at("00:00") + seconds
    d = evaluate_recovery(state, now, directory)
    assert isinstance(d.reason, Reason)
    now_dt = datetime(2025, 3, 10) + timedelta(seconds=seconds)
    in_window = 5 <= now_dt.hour < 18
    assert (d.mode is Mode.FRESH_IDLE) == (not in_window)
    if d.mode is Mode.RESUME:
        assert state is not None
        assert state.session_date == now_dt.date()
        assert state.recording
        assert independent_integrity(path, rows_written)
    elif in_window and state is not None and state.session_date == now_dt.date() and state.recording:
        assert not independent_integrity(path, rows_written)


# error counter ------------------------------------------------------------------------

def test_nine_failures_then_success():
    c = ErrorCounter()
    assert [record_cycle_result(c, False) for _ in range(9)] == [Action.CONTINUE] * 9
    assert record_cycle_result(c, True) is Action.CONTINUE
    assert c.consecutive_failures == 0 and c.total_failures == 9


def test_tenth_failure_reinitializes():
    c = ErrorCounter()
    actions = [record_cycle_result(c, False) for _ in range(10)]
    assert actions[-1] is Action.REINITIALIZE and Action.REINITIALIZE not in actions[:-1]
    assert c.consecutive_failures == 0


def test_alternating_never_reinitializes():
    c = ErrorCounter()
    for i in range(1000):
        assert record_cycle_result(c, i % 2 == 0) is Action.CONTINUE


def reference_fires(stream, n):
    """Indices where a REINITIALIZE is due: every nth failure of an unbroken run."""
    fires, run = [], 0
    for i, ok in enumerate(stream):
        run = 0 if ok else run + 1
        if run == n:
            fires.append(i)
            run = 0
    return fires


@given(st.integers(1, 20), st.lists(st.booleans(), max_size=300))
def test_threshold_exact_for_any_n(n, stream):
    c = ErrorCounter(threshold=n)
    fired = []
    for i, ok in enumerate(stream):
        if record_cycle_result(c, ok) is Action.REINITIALIZE:
            fired.append(i)
        assert 0 <= c.consecutive_failures < n
    assert fired == reference_fires(stream, n)


def test_counter_rejects_bad_threshold():
    with pytest.raises(ValueError):
        ErrorCounter(threshold=0)


# reinitialization --------------------------------------------------------------------------

def test_reinit_runs_full_sequence():
    _, _, hal = make_hal()
    hal.calls.clear()
    assert reinitialize_hardware(hal) is True
    assert [op for _, op, _, _ in hal.calls] == ["reset_mux", "configure_adc", "configure_power_monitor",
                                                   "configure_power_monitor", "init_gpio"]


def test_reinit_failure_reported():
    from conftest import script
    faults = script({"kind": "SENSOR_FAIL", "signal": "SEL", "at": "11:00", "duration": 7200})
    _, _, hal = make_hal(faults=faults, initialize=False)
    assert reinitialize_hardware(hal) is False


def test_reinit_on_healthy_bus_changes_nothing():
    frames = []
    for reinit in (False, True):
        clock, _, hal = make_hal(t0=at("11:59"), env=ConstantEnvironment(irradiance=700.0, wind_hz=1.5))
        b = Buffers.allocate()
        from pvdaq.acquire import FastSampler
        from pvdaq.convert import ThermistorCal
        sampler = FastSampler(hal, b, ThermistorCal())
        while sampler.next_due <= at("12:00"):
            clock.advance_to(sampler.next_due)
            sampler.tick(sampler.next_due)
        if reinit:
            reinitialize_hardware(hal)
        clock.advance_to(at("12:00"))
        frames.append(assemble_minute_frame(at("12:00"), hal, b, Calibration()).frame)
    assert frames[0] == frames[1]


# health check ----------------------------------------------------------------------------------

def test_healthy_report(tmp_path):
    a = open_daily_csv(tmp_path, DAY)
    a.append(MeasurementFrame.build(datetime(2025, 3, 10, 5), dict.fromkeys(FIELDS, 1.0)))
    r = health_check(1, a, SinkBacklog(), ErrorCounter())
    assert r.ok and set(r.checks) == {"archive", "rows", "backlog", "errors"}
    a.close()


def test_truncated_archive_flags_row_mismatch(tmp_path):
    a = open_daily_csv(tmp_path, DAY)
    for i in range(3):
        a.append(MeasurementFrame.build(datetime(2025, 3, 10, 5, i), dict.fromkeys(FIELDS, 1.0)))
    lines = a.path.read_text().splitlines(keepends=True)
    a.path.write_text("".join(lines[:-1]))
    r = health_check(3, a, SinkBacklog(), ErrorCounter())
    assert not r.ok and r.checks["rows"] is False
    assert "rows file=2 state=3" in r.summary()
    a.close()


def test_backlog_and_streak_warnings(tmp_path):
    a = open_daily_csv(tmp_path, DAY)
    backlog = SinkBacklog(limit=4)
    for i in range(2):
        backlog.enqueue(str(i), ["weather rain=0 1"])
    counter = ErrorCounter()
    record_cycle_result(counter, False)
    r = health_check(0, a, backlog, counter)
    assert r.checks["backlog"] is False and r.checks["errors"] is False and r.checks["rows"]
    a.close()
    r = health_check(0, a, None, ErrorCounter())
    assert r.checks["archive"] is False


# shutdown -------------------------------------------------------------------------------------

def test_steps_run_in_order_and_survive_failures():
    ran = []

    def boom():
        ran.append("b")
        raise RuntimeError("disk gone")

    sc = ShutdownCoordinator([("a", lambda: ran.append("a")), ("b", boom), ("c", lambda: ran.append("c"))])
    assert sc.request("signal") is True
    assert ran == ["a", "b", "c"]
    assert sc.completed == ["a", "c"] and sc.failed == ["b"] and sc.done.is_set()


def test_second_request_ignored():
    calls = []
    sc = ShutdownCoordinator([("only", lambda: calls.append(1))])
    sc.request("first")
    assert sc.request("second") is False
    assert calls == [1] and sc.cause == "first"


def test_request_during_cleanup_is_ignored():
    calls = []
    holder = {}

    def step():
        calls.append(1)
        holder["nested"] = holder["sc"].request("again")

    holder["sc"] = ShutdownCoordinator([("s", step)])
    holder["sc"].request("signal")
    assert calls == [1] and holder["nested"] is False


def test_concurrent_requests_run_once():
    count = []
    gate = threading.Barrier(8)
    sc = ShutdownCoordinator([("s", lambda: count.append(1))])

    def hit():
        gate.wait()
        sc.request("thread")

    threads = [threading.Thread(target=hit) for _ in range(8)]
    for th in threads:
        th.start()
    for th in threads:
        th.join()
    assert count == [1]


def test_thousand_random_failure_streams_fire_on_tenth():
    rng = random.Random(10)
    for _ in range(1000):
        stream = [rng.random() < 0.15 for _ in range(rng.randint(1, 200))]
        c = ErrorCounter()
        fired = [i for i, ok in enumerate(stream) if record_cycle_result(c, ok) is Action.REINITIALIZE]
        assert fired == reference_fires(stream, 10)
