"""Daily CSV archive.

One file per day, ``data_YYYYMMDD.csv``; when a day's file cannot be
trusted a fresh one is started as ``data_YYYYMMDD_N.csv``. Every row is
flushed and fsynced before :meth:`CsvArchive.append` returns.
"""

from __future__ import annotations

import math
import os
import re
from dataclasses import dataclass
from datetime import date, datetime
from pathlib import Path

from ..acquire.frame import CSV_HEADER, FIELDS, MeasurementFrame, format_fixed
from ..errors import ArchiveCorrupt, HeaderMismatch

HEADER_LINE = ",".join(CSV_HEADER)
NAME_RE = re.compile(r"^data_(\d{8})(?:_(\d+))?\.csv$")


def daily_csv_name(day: date, suffix: int = 0) -> str:
    stem = f"data_{day:%Y%m%d}"
    return f"{stem}.csv" if suffix == 0 else f"{stem}_{suffix}.csv"


def archive_files(directory: str | Path) -> list[Path]:
    """Archive files in ``directory`` ordered by day, then suffix."""
    found = []
    for p in Path(directory).glob("data_*.csv"):
        m = NAME_RE.match(p.name)
        if m:
            found.append((m.group(1), int(m.group(2) or 0), p))
    return [p for _, _, p in sorted(found)]


def format_row(frame: MeasurementFrame) -> str:
    cells = [frame.timestamp.isoformat(timespec="seconds")]
    cells += [format_fixed(name, frame.values[name]) for name in FIELDS]
    return ",".join(cells)


def parse_row(line: str) -> MeasurementFrame:
    cells = line.split(",")
    if len(cells) != len(CSV_HEADER):
        raise ValueError(f"expected {len(CSV_HEADER)} cells, got {len(cells)}")
    ts = datetime.fromisoformat(cells[0])
    values = {name: (float(cell) if cell else None) for name, cell in zip(FIELDS, cells[1:])}
    return MeasurementFrame.build(ts, values)


@dataclass(frozen=True)
class CsvInfo:
    path: Path
    rows: int
    last_timestamp: datetime | None
    last_frame: MeasurementFrame | None
    rain_total: float = 0.0


def inspect_csv(path: str | Path) -> CsvInfo:
    """Integrity check: header matches, every line is a complete parseable
    row, timestamps strictly increase. Raises FileNotFoundError,
    :class:`HeaderMismatch` or :class:`ArchiveCorrupt`.
    """
    path = Path(path)
    data = path.read_bytes()
    try:
        text = data.decode("ascii")
    except UnicodeDecodeError as exc:
        raise ArchiveCorrupt(f"{path.name}: non-ASCII content") from exc
    if not text:
        raise HeaderMismatch(f"{path.name}: empty file")
    if not text.endswith("\n"):
        raise ArchiveCorrupt(f"{path.name}: last line is incomplete")
    lines = text[:-1].split("\n")
    if lines[0] != HEADER_LINE:
        raise HeaderMismatch(f"{path.name}: header differs from the expected schema")
    last = None
    rain = []
    for lineno, line in enumerate(lines[1:], start=2):
        try:
            frame = parse_row(line)
        except (ValueError, KeyError) as exc:
            raise ArchiveCorrupt(f"{path.name}:{lineno}: {exc}") from exc
        if last is not None and frame.timestamp <= last.timestamp:
            raise ArchiveCorrupt(f"{path.name}:{lineno}: timestamp not increasing")
        last = frame
        if frame["rain_mm"] is not None:
            rain.append(frame["rain_mm"])
    return CsvInfo(path, len(lines) - 1, last.timestamp if last else None, last, math.fsum(rain))


def count_rows(path: str | Path) -> int:
    """Data rows in a file, without parsing. A torn last line raises."""
    data = Path(path).read_bytes()
    if data and not data.endswith(b"\n"):
        raise ArchiveCorrupt(f"{Path(path).name}: last line is incomplete")
    return max(0, data.count(b"\n") - 1)


def read_frames(path: str | Path) -> list[MeasurementFrame]:
    lines = Path(path).read_text().splitlines()
    if not lines or lines[0] != HEADER_LINE:
        raise HeaderMismatch(f"{path}: header differs from the expected schema")
    return [parse_row(line) for line in lines[1:]]


class CsvArchive:
    """Append handle on one daily file."""

    def __init__(self, path: Path, rows: int, last_timestamp: datetime | None, durable: bool = True):
        self.path = path
        self.rows = rows
        self.last_timestamp = last_timestamp
        self.durable = durable
        self._fh = open(path, "a", encoding="ascii", newline="")

    def append(self, frame: MeasurementFrame) -> int:
        if self.last_timestamp is not None and frame.timestamp <= self.last_timestamp:
            raise ValueError(f"frame {frame.timestamp} is not after {self.last_timestamp}")
        self._fh.write(format_row(frame) + "\n")
        self._fh.flush()
        if self.durable:
            os.fsync(self._fh.fileno())
        self.rows += 1
        self.last_timestamp = frame.timestamp
        return self.rows

    def writable(self) -> bool:
        return not self._fh.closed and os.access(self.path, os.W_OK)

    def close(self) -> None:
        if not self._fh.closed:
            self._fh.close()

    @property
    def closed(self) -> bool:
        return self._fh.closed


def _fsync_dir(directory: Path) -> None:
    fd = os.open(directory, os.O_RDONLY)
    try:
        os.fsync(fd)
    finally:
        os.close(fd)


def open_daily_csv(directory: str | Path, day: date, *, force_fresh: bool = False,
                   durable: bool = True) -> CsvArchive:
    """Open (creating if needed) the archive for ``day``.

    An existing file is reused only if it passes :func:`inspect_csv`;
    otherwise that error propagates. With ``force_fresh`` the first unused
    suffixed name is taken instead.
    """
    directory = Path(directory)
    path = directory / daily_csv_name(day)
    if force_fresh:
        n = 1
        while (directory / daily_csv_name(day, n)).exists():
            n += 1
        path = directory / daily_csv_name(day, n)
    if path.exists():
        info = inspect_csv(path)
        return CsvArchive(path, info.rows, info.last_timestamp, durable)
    with open(path, "x", encoding="ascii", newline="") as fh:
        fh.write(HEADER_LINE + "\n")
        fh.flush()
        if durable:
            os.fsync(fh.fileno())
    if durable:
        _fsync_dir(directory)
    return CsvArchive(path, 0, None, durable)
