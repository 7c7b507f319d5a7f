"""Operator shortcuts over the operations log, state file and running daemon."""

from __future__ import annotations

import os
import re
import signal
import sys
import time
from collections import Counter

from ..config import RunConfig
from ..daemon import LOCK_NAME
from ..oplog import LOG_NAME, parse_log_line
from ..store.state import STATE_FILENAME, read_state


class AdminError(Exception):
    """Reported to the operator as a one-line message."""


def _log_lines(cfg: RunConfig) -> list[str]:
    path = cfg.log_dir / LOG_NAME
    try:
        return path.read_text(encoding="utf-8").splitlines()
    except FileNotFoundError:
        raise AdminError(f"no log file at {path}") from None


def recent(cfg: RunConfig, n: int, out=None) -> None:
    out = out or sys.stdout
    for line in _log_lines(cfg)[-n:] if n > 0 else []:
        print(line, file=out)


def grep(cfg: RunConfig, pattern: str, out=None) -> int:
    out = out or sys.stdout
    try:
        rx = re.compile(pattern, re.IGNORECASE)
    except re.error as exc:
        raise AdminError(f"bad pattern: {exc}") from None
    hits = [line for line in _log_lines(cfg) if rx.search(line)]
    for line in hits:
        print(line, file=out)
    return len(hits)


def stats(cfg: RunConfig) -> dict:
    levels, reinits, frames, last_frame = Counter(), 0, 0, None
    for line in _log_lines(cfg):
        parsed = parse_log_line(line)
        if parsed is None:
            continue
        _, level, message = parsed
        levels[level] += 1
        if message.startswith("REINIT after"):
            reinits += 1
        elif message.startswith("FRAME "):
            frames += 1
            last_frame = message.split()[1]
    return {
        "levels": dict(sorted(levels.items())),
        "errors": levels["ERROR"] + levels["CRITICAL"],
        "warnings": levels["WARNING"],
        "frames": frames,
        "reinits": reinits,
        "last_frame": last_frame,
    }


def render_stats(s: dict) -> str:
    levels = " ".join(f"{k}={v}" for k, v in s["levels"].items()) or "none"
    return (f"entries by level: {levels}\n"
            f"errors: {s['errors']}  warnings: {s['warnings']}\n"
            f"frames logged: {s['frames']}  reinits: {s['reinits']}\n"
            f"last frame: {s['last_frame'] or '-'}\n")


def show_state(cfg: RunConfig, out=None) -> bool:
    out = out or sys.stdout
    status, state = read_state(cfg.state_dir / STATE_FILENAME)
    if status == "absent":
        print("no saved session", file=out)
        return False
    if status == "corrupt":
        print("state file is corrupt (it will be ignored at the next start)", file=out)
        return False
    print(f"session date   {state.session_date or '-'}", file=out)
    print(f"archive        {state.csv_path or '-'}", file=out)
    print(f"rows written   {state.rows_written}", file=out)
    print(f"rain today     {state.rain_day_accum:.4f} mm", file=out)
    print(f"energy offsets {state.energy_offsets[0]:.2f} J, {state.energy_offsets[1]:.2f} J", file=out)
    print(f"recording      {'yes' if state.recording else 'no'}", file=out)
    print(f"last write     {state.last_write.isoformat() if state.last_write else '-'}", file=out)
    return True


def daemon_pid(cfg: RunConfig) -> int | None:
    try:
        text = (cfg.state_dir / LOCK_NAME).read_text().strip()
    except FileNotFoundError:
        return None
    return int(text) if text.isdigit() else None


def stop(cfg: RunConfig) -> int:
    pid = daemon_pid(cfg)
    if pid is None:
        raise AdminError("no running daemon (lock file empty or missing)")
    try:
        os.kill(pid, signal.SIGTERM)
    except ProcessLookupError:
        raise AdminError(f"daemon pid {pid} is not running") from None
    return pid


def tail(cfg: RunConfig, lines: int = 10, follow: bool = True, out=None,
         interval: float = 0.5) -> None:
    out = out or sys.stdout
    path = cfg.log_dir / LOG_NAME
    if not path.exists():
        raise AdminError(f"no log file at {path}")
    recent(cfg, lines, out)
    if not follow:
        return
    with open(path, encoding="utf-8") as fh:
        fh.seek(0, os.SEEK_END)
        try:
            while True:
                line = fh.readline()
                if line:
                    out.write(line)
                    out.flush()
                else:
                    time.sleep(interval)
        except KeyboardInterrupt:
            pass
