"""``pvdaq`` command line.

Exit codes: 0 success, 1 validation failure (bad config, bad input,
mismatching stores), 2 runtime failure.
"""

from __future__ import annotations

import argparse
import json
import shutil
import signal
import sys
import threading
import time as _time
from dataclasses import replace
from datetime import datetime
from pathlib import Path

from ..clock import ScaledClock, SystemClock, date_of, to_seconds
from ..config import (ENV_VAR, RunConfig, load_config, resolve_config_path)
from ..daemon import AlreadyRunning, InstanceLock, Node
from ..errors import ConfigError
from ..hal.environment import DiurnalEnvironment
from ..hal.faults import FaultScript
from ..hal.sim import Simulator
from . import admin
from .simulate import (SCENARIOS, UnknownScenario, build_report, render_text,
                       resolve_scenario, run_simulation, sim_layout, simulated_span,
                       write_report,
                       write_sim_config)
from .verify import compare_stores

EXIT_OK, EXIT_INVALID, EXIT_RUNTIME = 0, 1, 2
SIM_TIMEZONE = "America/Costa_Rica"
SIM_OUTPUTS = ("data", "state", "logs", "remote", "sink_export.lp", "report.json",
               "report.txt", "daq.toml")


def _err(msg: str) -> None:
    print(f"pvdaq: {msg}", file=sys.stderr)


def _load(args, required: bool = True) -> RunConfig | None:
    path = resolve_config_path(getattr(args, "config", None))
    if not required and not path.exists():
        return None
    return load_config(path)


# -- run ------------------------------------------------------------------------

def _sim_runtime(cfg: RunConfig):
    if cfg.sim.clock_speedup > 0:
        start = to_seconds(datetime.combine(cfg.sim.start_date, cfg.sim.start_time))
        clock = ScaledClock(start, cfg.sim.clock_speedup)
    else:
        clock = SystemClock(cfg.timezone)
    now = clock.time()
    script = FaultScript.load(cfg.sim.fault_script, date_of(now)) if cfg.sim.fault_script else None
    backend = Simulator(clock, DiurnalEnvironment(cfg.sim.seed, origin=now), script,
                        channel_map=cfg.channel_map, thermistor=cfg.calibration.thermistor,
                        meteo=cfg.calibration.meteo, electrical=cfg.calibration.electrical)
    return clock, backend


def cmd_run(args) -> int:
    cfg = _load(args)
    problems = cfg.check_paths()
    if problems:
        for p in problems:
            _err(p)
        return EXIT_INVALID
    if cfg.backend == "hw":
        _err("backend 'hw' needs a bus binding: construct pvdaq.hal.hw.HardwareBackend "
             "with your I2C/GPIO objects and run pvdaq.daemon.Node from Python")
        return EXIT_RUNTIME
    lock = InstanceLock(cfg.state_dir)
    try:
        lock.acquire()
    except AlreadyRunning as exc:
        _err(f"refusing to start: {exc}")
        return EXIT_RUNTIME
    try:
        clock, backend = _sim_runtime(cfg)
        node = Node(cfg, clock, backend)
        decision = node.boot()
        print(f"pvdaq: started, recovery {decision.describe()}", flush=True)

        def on_signal(signum, frame):
            node.stop.set()

        signal.signal(signal.SIGINT, on_signal)
        signal.signal(signal.SIGTERM, on_signal)
        if args.duration:
            until = clock.time() + args.duration

            def timer():
                if clock.sleep_until(until, node.stop):
                    node.stop.set()

            threading.Thread(target=timer, name="duration", daemon=True).start()
        return node.run()
    except OSError as exc:
        _err(str(exc))
        return EXIT_RUNTIME
    finally:
        lock.release()


# -- simulate -----------------------------------------------------------------

def _prepare_out(out: Path, overwrite: bool) -> None:
    if out.exists() and any(out.iterdir()):
        if not overwrite:
            raise ConfigError(f"output directory {out} is not empty (use --overwrite)")
        for name in SIM_OUTPUTS:
            target = out / name
            if target.is_dir():
                shutil.rmtree(target)
            elif target.exists():
                target.unlink()
    out.mkdir(parents=True, exist_ok=True)


def cmd_simulate(args) -> int:
    try:
        scenario = resolve_scenario(args.scenario)
    except UnknownScenario:
        _err(f"unknown scenario {args.scenario!r}; available: {', '.join(SCENARIOS)}")
        return EXIT_INVALID
    base = _load(args, required=False)
    if base is None:
        base = RunConfig(Path("data"), Path("state"), Path("logs"), timezone=SIM_TIMEZONE)
    if args.seed is not None:
        base = replace(base, sim=replace(base.sim, seed=args.seed))
    out = Path(args.out or f"sim-{scenario.name}")
    _prepare_out(out, args.overwrite)
    cfg = sim_layout(base, out)
    write_sim_config(cfg, out, cfg.sim.seed)

    wall0 = _time.monotonic()
    run = run_simulation(cfg, scenario, speedup=args.speedup or 0.0)
    wall = _time.monotonic() - wall0
    report = build_report(run)
    write_report(report, out)
    if args.json:
        print(json.dumps(report, indent=2, sort_keys=True))
    else:
        print(render_text(report), end="")
    span = simulated_span(scenario)
    print(f"simulated {span / 3600:.1f} h in {wall:.2f} s wall "
          f"({span / max(wall, 1e-9):.0f}x real time); outputs in {out}", file=sys.stderr)
    return EXIT_OK


# -- admin ----------------------------------------------------------------------

def cmd_admin(args) -> int:
    cfg = _load(args)
    try:
        if args.action == "tail":
            admin.tail(cfg, args.lines, follow=not args.no_follow)
        elif args.action == "recent":
            admin.recent(cfg, args.n)
        elif args.action == "grep":
            admin.grep(cfg, args.pattern)
        elif args.action == "stats":
            print(admin.render_stats(admin.stats(cfg)), end="")
        elif args.action == "state":
            admin.show_state(cfg)
        elif args.action == "stop":
            pid = admin.stop(cfg)
            print(f"sent stop request to pid {pid}")
    except admin.AdminError as exc:
        _err(str(exc))
        return EXIT_INVALID
    return EXIT_OK


# -- verify --------------------------------------------------------------------

def cmd_verify(args) -> int:
    tz = args.timezone
    if tz is None:
        cfg = _load(args, required=False)
        tz = cfg.timezone if cfg else "UTC"
    csv_dir, export = Path(args.csv_dir), Path(args.sink_export)
    if not csv_dir.is_dir():
        _err(f"CSV directory {csv_dir} not found")
        return EXIT_INVALID
    try:
        text = export.read_text(encoding="ascii")
    except FileNotFoundError:
        _err(f"sink export {export} not found")
        return EXIT_INVALID
    try:
        mismatches = compare_stores(csv_dir, text, tz)
    except ValueError as exc:
        _err(f"parse error: {exc}")
        return EXIT_INVALID
    for m in mismatches:
        print(m)
    print(f"{len(mismatches)} mismatch{'es' if len(mismatches) != 1 else ''}")
    return EXIT_OK if not mismatches else EXIT_INVALID


# -- parser ---------------------------------------------------------------------

def build_parser() -> argparse.ArgumentParser:
    parser = argparse.ArgumentParser(prog="pvdaq", description="PV test-bench data acquisition")
    sub = parser.add_subparsers(dest="command", required=True)

    def with_config(p):
        p.add_argument("--config", help=f"config file (default: ${ENV_VAR}, then ./daq.toml)")
        return p

    p = with_config(sub.add_parser("run", help="run the acquisition daemon"))
    p.add_argument("--duration", type=float, default=None,
                   help="stop after this many (clock) seconds")
    p.set_defaults(func=cmd_run)

    p = with_config(sub.add_parser("simulate", help="run a scenario on the simulator"))
    p.add_argument("scenario", help=f"one of {', '.join(SCENARIOS)} or a fault-script .toml")
    p.add_argument("--out", help="output directory (default: ./sim-SCENARIO)")
    p.add_argument("--seed", type=int, default=None)
    p.add_argument("--speedup", type=float, default=None,
                   help="cap simulated/real time ratio (default: unthrottled)")
    p.add_argument("--overwrite", action="store_true", help="replace earlier outputs in --out")
    p.add_argument("--json", action="store_true", help="print the JSON report")
    p.set_defaults(func=cmd_simulate)

    p = with_config(sub.add_parser("admin", help="log, state and daemon shortcuts"))
    actions = p.add_subparsers(dest="action", required=True)
    a = actions.add_parser("tail", help="follow the operations log")
    a.add_argument("-n", "--lines", type=int, default=10)
    a.add_argument("--no-follow", action="store_true")
    a = actions.add_parser("recent", help="last N log entries")
    a.add_argument("n", type=int)
    a = actions.add_parser("grep", help="search the log (regex, case-insensitive)")
    a.add_argument("pattern")
    actions.add_parser("stats", help="per-level counts, reinits, last frame")
    actions.add_parser("state", help="show the saved session")
    actions.add_parser("stop", help="ask the running daemon to shut down cleanly")
    p.set_defaults(func=cmd_admin)

    p = with_config(sub.add_parser("verify", help="cross-check CSV archive and sink export"))
    p.add_argument("csv_dir")
    p.add_argument("sink_export")
    p.add_argument("--timezone", default=None, help="site timezone of the CSV timestamps")
    p.set_defaults(func=cmd_verify)
    return parser


def main(argv=None) -> int:
    args = build_parser().parse_args(argv)
    try:
        return args.func(args)
    except ConfigError as exc:
        for problem in exc.problems:
            _err(problem)
        return EXIT_INVALID
    except KeyboardInterrupt:
        return EXIT_RUNTIME


if __name__ == "__main__":
    sys.exit(main())
