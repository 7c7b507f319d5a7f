"""Operations log ``daq.log``.

Lines look like ``2025-03-10 05:00:00 INFO FRAME 2025-03-10T05:00:00 flags=0``.
The timestamp comes from the daemon's clock (so simulated runs log
simulated time). When the first record of a new day arrives the previous
file is renamed ``daq_YYYYMMDD.log``.
"""

from __future__ import annotations

import itertools
import logging
import re
from datetime import date
from pathlib import Path

from .clock import Clock, date_of

LOG_NAME = "daq.log"
LINE_RE = re.compile(r"^(\d{4}-\d{2}-\d{2} \d{2}:\d{2}:\d{2}) (\w+) (.*)$")

_ids = itertools.count()


class ClockFormatter(logging.Formatter):
    def __init__(self, clock: Clock):
        super().__init__()
        self.clock = clock

    def format(self, record):
        stamp = self.clock.now().strftime("%Y-%m-%d %H:%M:%S")
        text = f"{stamp} {record.levelname} {record.getMessage()}"
        if record.exc_info:
            # keep one record per line so grep/recent stay line-oriented
            exc = self.formatException(record.exc_info).splitlines()[-1]
            text += f" | {exc}"
        return text


class DailyFileHandler(logging.Handler):
    """Appends to ``daq.log``; rotates on the first record of a new clock day."""

    def __init__(self, directory: str | Path, clock: Clock):
        super().__init__()
        self.directory = Path(directory)
        self.clock = clock
        self.path = self.directory / LOG_NAME
        self.setFormatter(ClockFormatter(clock))
        self._day = self._file_day()

    def _file_day(self) -> date | None:
        try:
            with open(self.path, encoding="utf-8") as fh:
                first = fh.readline()
        except FileNotFoundError:
            return None
        m = LINE_RE.match(first)
        return date.fromisoformat(m.group(1)[:10]) if m else None

    def emit(self, record):
        try:
            today = date_of(self.clock.time())
            if self._day is not None and self._day != today and self.path.exists():
                self.path.rename(self.directory / f"daq_{self._day:%Y%m%d}.log")
            self._day = today
            with open(self.path, "a", encoding="utf-8") as fh:
                fh.write(self.format(record) + "\n")
        except Exception:
            self.handleError(record)


def open_oplog(directory: str | Path, clock: Clock) -> tuple[logging.Logger, DailyFileHandler]:
    """A private logger writing to ``daq.log``; the handler also collects the
    package's module-level warnings while attached."""
    handler = DailyFileHandler(directory, clock)
    logger = logging.getLogger(f"pvdaq.ops.{next(_ids)}")
    logger.setLevel(logging.INFO)
    logger.propagate = False
    logger.addHandler(handler)
    pkg = logging.getLogger("pvdaq")
    if pkg.level == logging.NOTSET:
        pkg.setLevel(logging.INFO)
    pkg.addHandler(handler)
    return logger, handler


def close_oplog(logger: logging.Logger, handler: DailyFileHandler) -> None:
    logger.removeHandler(handler)
    logging.getLogger("pvdaq").removeHandler(handler)
    handler.close()


def parse_log_line(line: str):
    """``(timestamp text, level, message)`` or None."""
    m = LINE_RE.match(line.rstrip("\n"))
    return m.groups() if m else None
