import io
import json
import shutil
import signal
import subprocess
import sys

import pytest

from pvdaq.cli import admin
from pvdaq.cli.main import main
from pvdaq.config import load_config
from pvdaq.store.csvarchive import archive_files, read_frames
from pvdaq.store.lineproto import from_epoch

SHORT = """\
[scenario]
name = "short"
start = "09:00"
end = "09:30"

[[fault]]
kind = "SENSOR_FAIL"
signal = "VANE"
at = "09:10:00"
duration = 120
"""


@pytest.fixture(scope="module")
def clean_day(tmp_path_factory):
    out = tmp_path_factory.mktemp("cli") / "clean"
    assert main(["simulate", "clean-day", "--out", str(out)]) == 0
    return out


def simulate(tmp_path, capsys, *extra):
    script = tmp_path / "short.toml"
    script.write_text(SHORT)
    code = main(["simulate", str(script), *extra])
    return code, capsys.readouterr()


def test_clean_day_report(clean_day):
    report = json.loads((clean_day / "report.json").read_text())
    assert report["frames"] == 780
    assert report["spacing_s"] == {"60": 779}
    assert report["first_frame"] == "2025-03-10T05:00:00"
    assert report["last_frame"] == "2025-03-10T17:59:00"
    assert report["store_mismatches"] == 0 and report["duplicate_timestamps"] == 0
    assert report["health_reports"] == 156
    assert (clean_day / "report.txt").read_text().startswith("scenario      clean-day")
    assert (clean_day / "daq.toml").is_file()


def test_short_script_report(tmp_path, capsys):
    code, io_ = simulate(tmp_path, capsys, "--out", str(tmp_path / "o"), "--json")
    assert code == 0
    report = json.loads(io_.out)
    assert report["scenario"] == "short" and report["frames"] == 31
    assert (report["first_frame"], report["last_frame"]) == ("2025-03-10T09:00:00", "2025-03-10T09:30:00")
    assert report["flags"] == {"wind_dir": 2}
    assert "simulated 0.5 h" in io_.err


def test_unknown_scenario(capsys, tmp_path):
    assert main(["simulate", "no-such-day", "--out", str(tmp_path / "x")]) == 1
    err = capsys.readouterr().err
    assert "no-such-day" in err and "clean-day" in err and "sensor-fail" in err


def test_out_must_be_empty_unless_overwrite(tmp_path, capsys):
    out = tmp_path / "o"
    out.mkdir()
    (out / "keep.txt").write_text("mine")
    code, io_ = simulate(tmp_path, capsys, "--out", str(out))
    assert code == 1 and "--overwrite" in io_.err
    code, _ = simulate(tmp_path, capsys, "--out", str(out), "--overwrite")
    assert code == 0
    assert (out / "keep.txt").read_text() == "mine"


def test_simulation_is_deterministic(tmp_path, capsys):
    outs = [tmp_path / "a", tmp_path / "b"]
    for out in outs:
        assert simulate(tmp_path, capsys, "--out", str(out), "--seed", "7")[0] == 0
    a, b = outs
    assert (a / "report.json").read_bytes() == (b / "report.json").read_bytes()
    assert (a / "data" / "data_20250310.csv").read_bytes() == (b / "data" / "data_20250310.csv").read_bytes()
    assert (a / "sink_export.lp").read_bytes() == (b / "sink_export.lp").read_bytes()


def test_seed_changes_values(tmp_path, capsys):
    for seed in ("1", "2"):
        assert simulate(tmp_path, capsys, "--out", str(tmp_path / seed), "--seed", seed)[0] == 0
    one = (tmp_path / "1" / "data" / "data_20250310.csv").read_text()
    two = (tmp_path / "2" / "data" / "data_20250310.csv").read_text()
    assert one != two


# admin ---------------------------------------------------------------------------

def test_admin_stats(clean_day, capsys):
    assert main(["admin", "--config", str(clean_day / "daq.toml"), "stats"]) == 0
    out = capsys.readouterr().out
    assert "errors: 0" in out
    assert "frames logged: 780" in out
    assert "last frame: 2025-03-10T17:59:00" in out


def test_admin_recent_and_state(clean_day, capsys):
    cfg = load_config(clean_day / "daq.toml")
    buf = io.StringIO()
    admin.recent(cfg, 3, buf)
    lines = buf.getvalue().splitlines()
    assert len(lines) == 3 and "SHUTDOWN complete" in lines[-1]
    assert main(["admin", "--config", str(clean_day / "daq.toml"), "state"]) == 0
    out = capsys.readouterr().out
    assert "rows written   780" in out and "recording      no" in out


def test_admin_tail_no_follow(clean_day, capsys):
    assert main(["admin", "--config", str(clean_day / "daq.toml"), "tail", "-n", "2", "--no-follow"]) == 0
    assert len(capsys.readouterr().out.splitlines()) == 2


def test_admin_grep_reinit(scenario_outputs):
    cfg, _, _ = scenario_outputs("sensor-fail")
    buf = io.StringIO()
    assert admin.grep(cfg, "reinit after", buf) == 1
    assert "REINIT" in buf.getvalue()
    with pytest.raises(admin.AdminError):
        admin.grep(cfg, "(", buf)


def test_admin_state_without_file(tmp_path, capsys):
    cfg_path = tmp_path / "daq.toml"
    cfg_path.write_text("")
    assert main(["admin", "--config", str(cfg_path), "state"]) == 0
    assert "no saved session" in capsys.readouterr().out
    assert main(["admin", "--config", str(cfg_path), "stats"]) == 1
    assert "no log file" in capsys.readouterr().err


def test_admin_stop_signals_lock_holder(tmp_path, capsys):
    (tmp_path / "state").mkdir()
    cfg_path = tmp_path / "daq.toml"
    cfg_path.write_text("")
    assert main(["admin", "--config", str(cfg_path), "stop"]) == 1
    child = subprocess.Popen([sys.executable, "-c", "import time; time.sleep(60)"])
    try:
        (tmp_path / "state" / "daq.lock").write_text(f"{child.pid}\n")
        assert main(["admin", "--config", str(cfg_path), "stop"]) == 0
        assert child.wait(timeout=10) == -signal.SIGTERM
        assert f"pid {child.pid}" in capsys.readouterr().out
    finally:
        child.kill()


# verify ---------------------------------------------------------------------------

def test_verify_clean(clean_day, capsys):
    assert main(["verify", str(clean_day / "data"), str(clean_day / "sink_export.lp"),
                 "--timezone", "America/Costa_Rica"]) == 0
    assert capsys.readouterr().out.strip() == "0 mismatches"


def test_verify_reports_deleted_line(clean_day, tmp_path, capsys):
    lines = (clean_day / "sink_export.lp").read_text().splitlines(keepends=True)
    victim = 500
    (tmp_path / "cut.lp").write_text("".join(lines[:victim] + lines[victim + 1:]))
    # the timezone comes from the config this time
    code = main(["verify", "--config", str(clean_day / "daq.toml"), str(clean_day / "data"),
                 str(tmp_path / "cut.lp")])
    out = capsys.readouterr().out.splitlines()
    assert code == 1
    assert out[-1] == "1 mismatch"
    series, epoch = lines[victim].split()[0], int(lines[victim].split()[-1])
    assert out[0] == f"{from_epoch(epoch, 'America/Costa_Rica').isoformat()} {series}: missing from sink"


def test_verify_bad_inputs(tmp_path, capsys):
    assert main(["verify", str(tmp_path / "nope"), str(tmp_path / "x.lp")]) == 1
    (tmp_path / "d").mkdir()
    assert main(["verify", str(tmp_path / "d"), str(tmp_path / "x.lp")]) == 1
    err = capsys.readouterr().err
    assert "not found" in err


# run --------------------------------------------------------------------------------

def write_run_config(root, speedup=600):
    for sub in ("data", "state", "logs"):
        (root / sub).mkdir(exist_ok=True)
    path = root / "daq.toml"
    path.write_text(
        'backend = "sim"\n'
        "[storage]\nfsync = false\n"
        f'[sim]\nstart_time = "12:00:00"\nclock_speedup = {speedup}\n')
    return path


@pytest.fixture
def keep_signals():
    saved = {s: signal.getsignal(s) for s in (signal.SIGINT, signal.SIGTERM)}
    yield
    for s, h in saved.items():
        signal.signal(s, h)


def test_run_refuses_missing_state_dir(tmp_path, capsys):
    path = write_run_config(tmp_path)
    shutil.rmtree(tmp_path / "state")
    assert main(["run", "--config", str(path)]) == 1
    assert str(tmp_path / "state") in capsys.readouterr().err


def test_run_refuses_second_instance(tmp_path, capsys):
    from pvdaq.daemon import InstanceLock
    path = write_run_config(tmp_path)
    with InstanceLock(tmp_path / "state"):
        assert main(["run", "--config", str(path)]) == 2
    assert "refusing to start" in capsys.readouterr().err


def test_run_scaled_clock_produces_frames(tmp_path, capsys, keep_signals):
    path = write_run_config(tmp_path)
    assert main(["run", "--config", str(path), "--duration", "300"]) == 0
    assert "recovery FRESH_ACTIVE" in capsys.readouterr().out
    stamps = [f.timestamp for p in archive_files(tmp_path / "data") for f in read_frames(p)]
    assert 4 <= len(stamps) <= 6
    assert stamps[0].strftime("%H:%M") == "12:01"
    assert "SHUTDOWN complete" in (tmp_path / "logs" / "daq.log").read_text()


def test_run_hw_backend_needs_binding(tmp_path, capsys):
    path = write_run_config(tmp_path)
    path.write_text(path.read_text().replace('"sim"', '"hw"'))
    assert main(["run", "--config", str(path)]) == 2


def test_bad_config_lists_problems(tmp_path, capsys):
    path = tmp_path / "daq.toml"
    path.write_text('backend = "fpga"\ntimezone = "Mars/Olympus"\n')
    assert main(["admin", "--config", str(path), "stats"]) == 1
    err = capsys.readouterr().err
    assert "backend" in err and "Mars/Olympus" in err
