"""Crash-safe session state file (``daq_state.txt``).

Format, one ``key=value`` per line in this order::

    schema_version=1
    session_date=2025-03-10          # empty when no session
    csv_path=data_20250310.csv       # relative to the archive directory
    rows_written=412
    rain_day_accum=1.3970            # mm since 05:00
    energy_offset_0=-12.50           # J added to monitor 0's counter
    energy_offset_1=-13.10
    recording=true
    last_write=2025-03-10T11:51:00   # empty before the first frame
    checksum=1a2b3c4d                # crc32 of all preceding lines

Writes go to a temporary file which is fsynced and renamed over the old
state, so readers only ever see a complete old or new file. The checksum
catches anything else (a truncated copy, a hand edit gone wrong).
"""

from __future__ import annotations

import logging
import os
import zlib
from dataclasses import dataclass, field, replace
from datetime import date, datetime
from pathlib import Path

log = logging.getLogger(__name__)

SCHEMA_VERSION = 1
STATE_FILENAME = "daq_state.txt"
KEYS = ("schema_version", "session_date", "csv_path", "rows_written", "rain_day_accum",
        "energy_offset_0", "energy_offset_1", "recording", "last_write")

# points at which a crash can be injected, in execution order
WRITE_STEPS = ("open_temp", "partial_temp", "write_temp", "fsync_temp", "rename", "fsync_dir")


class SimulatedCrash(BaseException):
    """Raised by crash hooks to abandon a write midway (tests only)."""


class StateCorrupt(ValueError):
    pass


@dataclass
class SessionState:
    session_date: date | None = None
    csv_path: str = ""
    rows_written: int = 0
    rain_day_accum: float = 0.0
    energy_offsets: tuple[float, float] = (0.0, 0.0)
    recording: bool = False
    last_write: datetime | None = None
    schema_version: int = field(default=SCHEMA_VERSION)

    def copy(self, **changes) -> "SessionState":
        return replace(self, **changes)

    def to_text(self) -> str:
        values = {
            "schema_version": str(self.schema_version),
            "session_date": self.session_date.isoformat() if self.session_date else "",
            "csv_path": self.csv_path,
            "rows_written": str(self.rows_written),
            "rain_day_accum": repr(float(self.rain_day_accum)),
            "energy_offset_0": repr(float(self.energy_offsets[0])),
            "energy_offset_1": repr(float(self.energy_offsets[1])),
            "recording": "true" if self.recording else "false",
            "last_write": self.last_write.isoformat(timespec="seconds") if self.last_write else "",
        }
        body = "".join(f"{k}={values[k]}\n" for k in KEYS)
        return body + f"checksum={zlib.crc32(body.encode()):08x}\n"

    @classmethod
    def from_text(cls, text: str) -> "SessionState":
        lines = text.split("\n")
        if len(lines) != len(KEYS) + 2 or lines[-1] != "":
            raise StateCorrupt("unexpected line count")
        body = "".join(line + "\n" for line in lines[: len(KEYS)])
        key, _, value = lines[len(KEYS)].partition("=")
        if key != "checksum" or value != f"{zlib.crc32(body.encode()):08x}":
            raise StateCorrupt("checksum mismatch")
        raw = {}
        for line, expected in zip(lines, KEYS):
            key, sep, value = line.partition("=")
            if key != expected or not sep:
                raise StateCorrupt(f"expected key {expected!r}, found {line!r}")
            raw[key] = value
        try:
            version = int(raw["schema_version"])
            if version != SCHEMA_VERSION:
                raise StateCorrupt(f"schema_version {version} != {SCHEMA_VERSION}")
            if raw["recording"] not in ("true", "false"):
                raise StateCorrupt(f"recording={raw['recording']!r}")
            return cls(
                session_date=date.fromisoformat(raw["session_date"]) if raw["session_date"] else None,
                csv_path=raw["csv_path"],
                rows_written=int(raw["rows_written"]),
                rain_day_accum=float(raw["rain_day_accum"]),
                energy_offsets=(float(raw["energy_offset_0"]), float(raw["energy_offset_1"])),
                recording=raw["recording"] == "true",
                last_write=datetime.fromisoformat(raw["last_write"]) if raw["last_write"] else None,
                schema_version=version,
            )
        except ValueError as exc:
            if isinstance(exc, StateCorrupt):
                raise
            raise StateCorrupt(str(exc)) from exc


def _hook(crash_hook, step):
    if crash_hook is not None:
        crash_hook(step)


def write_state(path: str | Path, state: SessionState, *, crash_hook=None,
                durable: bool = True) -> None:
    """Atomically replace the state file at ``path``.

    ``crash_hook(step)`` is called at each of :data:`WRITE_STEPS`; raising
    from it models power loss at that instant.
    """
    path = Path(path)
    tmp = path.with_name(path.name + ".tmp")
    data = state.to_text().encode("utf-8")
    _hook(crash_hook, "open_temp")
    with open(tmp, "wb") as fh:
        half = len(data) // 2
        fh.write(data[:half])
        fh.flush()
        _hook(crash_hook, "partial_temp")
        fh.write(data[half:])
        fh.flush()
        _hook(crash_hook, "write_temp")
        if durable:
            os.fsync(fh.fileno())
        _hook(crash_hook, "fsync_temp")
    os.replace(tmp, path)
    _hook(crash_hook, "rename")
    if durable:
        fd = os.open(path.parent, os.O_RDONLY)
        try:
            os.fsync(fd)
        finally:
            os.close(fd)
    _hook(crash_hook, "fsync_dir")


def read_state(path: str | Path) -> tuple[str, SessionState | None]:
    """``("ok", state)``, ``("absent", None)`` or ``("corrupt", None)``."""
    try:
        text = Path(path).read_text(encoding="utf-8")
    except FileNotFoundError:
        return "absent", None
    except (OSError, UnicodeDecodeError):
        return "corrupt", None
    try:
        return "ok", SessionState.from_text(text)
    except StateCorrupt:
        return "corrupt", None


def load_state(path: str | Path) -> SessionState | None:
    """The saved state, or None when absent. A corrupt file counts as absent."""
    status, state = read_state(path)
    if status == "corrupt":
        log.warning("state file %s is corrupt; treating it as absent", path)
    return state
