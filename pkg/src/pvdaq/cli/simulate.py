"""Accelerated-time scenario runs on the simulated backend."""

from __future__ import annotations

import json
import time as _time
from collections import Counter
from dataclasses import dataclass, field, replace
from datetime import datetime, time, timedelta
from pathlib import Path

from ..clock import SimClock, to_seconds
from ..config import RunConfig, load_toml
from ..daemon import Node, build_remote, build_sink
from ..hal.environment import DiurnalEnvironment
from ..hal.faults import FaultScript
from ..hal.sim import Simulator
from ..store.csvarchive import archive_files, inspect_csv, read_frames
from ..store.lineproto import parse_lines
from .verify import compare_stores

DEFAULT_END = time(18, 30)


@dataclass(frozen=True)
class Scenario:
    name: str
    summary: str
    start: time = time(5, 0)
    end: time = DEFAULT_END
    faults: tuple[dict, ...] = ()


SCENARIOS = {s.name: s for s in (
    Scenario("clean-day", "undisturbed day, boot at 05:00"),
    Scenario("power-cycle-midday", "power lost 12:00:30 for 5 min; expect RESUME",
             faults=({"kind": "POWER_CYCLE", "at": "12:00:30", "downtime": 300},)),
    Scenario("power-cycle-early", "boot 04:00, power lost 04:30 for 2 min; expect FRESH_IDLE",
             start=time(4, 0),
             faults=({"kind": "POWER_CYCLE", "at": "04:30:00", "downtime": 120},)),
    Scenario("power-cycle-late", "power lost 19:00 for 2 min; expect FRESH_IDLE",
             end=time(19, 30),
             faults=({"kind": "POWER_CYCLE", "at": "19:00:00", "downtime": 120},)),
    Scenario("net-outage", "sink and remote unreachable 10:00-10:45",
             faults=({"kind": "NET_OUTAGE", "at": "10:00:00", "duration": 2700},)),
    Scenario("sensor-fail", "thermistor T11 dead 09:00-09:10",
             faults=({"kind": "SENSOR_FAIL", "signal": "T11", "at": "09:00:00",
                      "duration": 600},)),
)}


class UnknownScenario(ValueError):
    pass


def resolve_scenario(name: str) -> Scenario:
    """A built-in name, or a fault-script TOML with an optional ``[scenario]`` table."""
    if name in SCENARIOS:
        return SCENARIOS[name]
    path = Path(name)
    if path.suffix == ".toml" and path.is_file():
        data = load_toml(path)
        meta = data.get("scenario", {})
        return Scenario(
            meta.get("name", path.stem), meta.get("summary", f"fault script {path.name}"),
            time.fromisoformat(str(meta.get("start", "05:00"))),
            time.fromisoformat(str(meta.get("end", DEFAULT_END.isoformat()))),
            tuple(data.get("fault", [])),
        )
    raise UnknownScenario(name)


def sim_layout(cfg: RunConfig, out: Path) -> RunConfig:
    """Point every output of ``cfg`` into ``out``."""
    for sub in ("data", "state", "logs", "remote"):
        (out / sub).mkdir(parents=True, exist_ok=True)
    return replace(
        cfg, archive_dir=out / "data", state_dir=out / "state", log_dir=out / "logs",
        sink=replace(cfg.sink, kind="file", path=out / "sink_export.lp"),
        sync=replace(cfg.sync, kind="directory", target=out / "remote"),
    )


def write_sim_config(cfg: RunConfig, out: Path, seed: int) -> None:
    """A config that admin/verify can be pointed at afterwards."""
    (out / "daq.toml").write_text(
        'backend = "sim"\n'
        f'timezone = "{cfg.timezone}"\n\n'
        "[paths]\narchive = \"data\"\nstate = \"state\"\nlog = \"logs\"\n\n"
        "[sink]\nkind = \"file\"\npath = \"sink_export.lp\"\n\n"
        "[sync]\nkind = \"directory\"\ntarget = \"remote\"\n\n"
        f"[sim]\nseed = {seed}\n"
    )


@dataclass
class SimRun:
    scenario: Scenario
    cfg: RunConfig
    seed: int
    day: datetime
    script: FaultScript
    decisions: list = field(default_factory=list)
    reinits: int = 0
    health_reports: int = 0
    scheduler_errors: int = 0
    backlog_remaining: int = 0
    backlog_dropped: int = 0
    backlog_high_water: int = 0
    nodes: list = field(default_factory=list)


def _pace(wall0: float, sim0: float, sim_now: float, speedup: float) -> None:
    if speedup > 0:
        ahead = (sim_now - sim0) / speedup - (_time.monotonic() - wall0)
        if ahead > 0:
            _time.sleep(ahead)


def run_simulation(cfg: RunConfig, scenario: Scenario, *, seed: int | None = None,
                   speedup: float = 0.0, keep_nodes: bool = False,
                   record_calls: bool | int = False) -> SimRun:
    """Play ``scenario`` on a fresh simulated day. ``cfg`` must already point at
    the output directories (see :func:`sim_layout`)."""
    seed = cfg.sim.seed if seed is None else seed
    day = datetime.combine(cfg.sim.start_date, time())
    script = FaultScript.from_records(scenario.faults, day.date())
    start = to_seconds(datetime.combine(day.date(), scenario.start))
    end = to_seconds(datetime.combine(day.date(), scenario.end))
    if end <= start:
        end += 86400
    clock = SimClock(start)
    backend = Simulator(clock, DiurnalEnvironment(seed, origin=start), script,
                        channel_map=cfg.channel_map, thermistor=cfg.calibration.thermistor,
                        meteo=cfg.calibration.meteo, electrical=cfg.calibration.electrical)
    run = SimRun(scenario, cfg, seed, day, script)

    def boot():
        node = Node(cfg, clock, backend, record_calls=record_calls,
                    sink=build_sink(cfg, backend.network_up),
                    remote=build_remote(cfg, backend.network_up))
        decision = node.boot()
        run.decisions.append({"at": clock.now().isoformat(timespec="seconds"),
                              "mode": decision.mode.value, "reason": decision.reason.value})
        if keep_nodes:
            run.nodes.append(node)
        return node

    def retire(node):
        run.reinits += node.reinits
        run.health_reports += node.health_reports
        run.scheduler_errors += node.scheduler.errors
        run.backlog_dropped += node.backlog.dropped
        run.backlog_high_water = max(run.backlog_high_water, node.backlog.high_water)

    wall0, sim0 = _time.monotonic(), start
    cycles = [e for e in script.power_cycles() if start <= e.at < end]

    def drive(node, until):
        t = clock.time()
        while t < until:
            t = min(until, t + 600.0)
            node.advance_to(t)
            _pace(wall0, sim0, t, speedup)

    node = boot()
    for event in cycles:
        drive(node, event.at)
        node.crash()
        retire(node)
        clock.advance_to(event.at + event.downtime)
        backend.power_cycle()
        node = boot()
    drive(node, end)
    node.shutdown.request("simulation end")
    retire(node)
    run.backlog_remaining = len(node.backlog)
    return run


def build_report(run: SimRun) -> dict:
    cfg = run.cfg
    files = archive_files(cfg.archive_dir)
    frames, integrity = [], {}
    for path in files:
        try:
            inspect_csv(path)
            integrity[path.name] = "ok"
            frames.extend(read_frames(path))
        except Exception as exc:
            integrity[path.name] = f"{type(exc).__name__}: {exc}"
    stamps = [f.timestamp for f in frames]
    spacing = Counter(int((b - a).total_seconds()) for a, b in zip(stamps, stamps[1:]))
    gaps = [[a.isoformat(), b.isoformat()] for a, b in zip(stamps, stamps[1:])
            if b - a != timedelta(minutes=1)]
    flags = Counter(name for f in frames for name in f.flags)

    sink_path = cfg.sink.path
    sink_text = sink_path.read_text() if sink_path and sink_path.exists() else ""
    points = parse_lines(sink_text)
    try:
        mismatches = len(compare_stores(cfg.archive_dir, sink_text, cfg.timezone))
    except ValueError:
        mismatches = None   # archive unreadable; csv_integrity says why

    return {
        "scenario": run.scenario.name,
        "seed": run.seed,
        "date": run.day.date().isoformat(),
        "faults": run.script.to_records(),
        "frames": len(frames),
        "first_frame": stamps[0].isoformat() if stamps else None,
        "last_frame": stamps[-1].isoformat() if stamps else None,
        "spacing_s": {str(k): v for k, v in sorted(spacing.items())},
        "gaps": gaps,
        "duplicate_timestamps": len(stamps) - len(set(stamps)),
        "flags": dict(sorted(flags.items())),
        "flagged_frames": sum(1 for f in frames if f.flags),
        "decisions": run.decisions,
        "reinits": run.reinits,
        "health_reports": run.health_reports,
        "scheduler_errors": run.scheduler_errors,
        "csv_files": [p.name for p in files],
        "csv_integrity": integrity,
        "csv_rows": len(frames),
        "sink_lines": len(points),
        "sink_frames": len({p.timestamp for p in points}),
        "sink_backlog_remaining": run.backlog_remaining,
        "sink_backlog_high_water": run.backlog_high_water,
        "sink_batches_dropped": run.backlog_dropped,
        "store_mismatches": mismatches,
        "remote_files": sorted(p.name for p in (cfg.sync.target or Path("-")).glob("data_*.csv")),
    }


def render_text(report: dict) -> str:
    lines = [
        f"scenario      {report['scenario']} (seed {report['seed']}, {report['date']})",
        f"frames        {report['frames']}  first {report['first_frame']}  last {report['last_frame']}",
        f"spacing       {report['spacing_s']}  gaps {len(report['gaps'])}  "
        f"duplicates {report['duplicate_timestamps']}",
        "decisions     " + ", ".join(f"{d['at'][11:]} {d['mode']} ({d['reason']})"
                                     for d in report["decisions"]),
        f"reinits       {report['reinits']}",
        f"health        {report['health_reports']} reports",
        f"flags         {report['flags'] or 'none'}",
        f"csv           {report['csv_rows']} rows in {', '.join(report['csv_files']) or '-'}",
        f"sink          {report['sink_frames']} frames / {report['sink_lines']} lines; "
        f"backlog {report['sink_backlog_remaining']} (high water {report['sink_backlog_high_water']})",
        f"consistency   {report['store_mismatches']} mismatches between CSV and sink",
    ]
    for fault in report["faults"]:
        lines.append(f"fault         {fault}")
    return "\n".join(lines) + "\n"


def write_report(report: dict, out: Path) -> None:
    (out / "report.json").write_text(json.dumps(report, indent=2, sort_keys=True) + "\n")
    (out / "report.txt").write_text(render_text(report))


def simulated_span(scenario: Scenario) -> float:
    start = datetime.combine(datetime.min, scenario.start)
    end = datetime.combine(datetime.min, scenario.end)
    span = (end - start).total_seconds()
    return span if span > 0 else span + 86400
