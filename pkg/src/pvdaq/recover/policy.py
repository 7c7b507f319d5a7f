"""Consecutive-failure policy, hardware reinitialization and health checks."""

from __future__ import annotations

import logging
from dataclasses import dataclass, field
from enum import Enum

from ..errors import BusFault, ReadTimeout
from ..store.csvarchive import count_rows

log = logging.getLogger(__name__)

DEFAULT_THRESHOLD = 10


class Action(str, Enum):
    CONTINUE = "CONTINUE"
    REINITIALIZE = "REINITIALIZE"


@dataclass
class ErrorCounter:
    threshold: int = DEFAULT_THRESHOLD
    consecutive_failures: int = 0
    total_failures: int = 0

    def __post_init__(self):
        if self.threshold < 1:
            raise ValueError("threshold must be at least 1")


def record_cycle_result(counter: ErrorCounter, ok: bool) -> Action:
    if ok:
        counter.consecutive_failures = 0
        return Action.CONTINUE
    counter.total_failures += 1
    counter.consecutive_failures += 1
    if counter.consecutive_failures >= counter.threshold:
        counter.consecutive_failures = 0
        return Action.REINITIALIZE
    return Action.CONTINUE


def reinitialize_hardware(hal) -> bool:
    """Re-run the HAL init sequence. A failure is logged, not raised."""
    try:
        hal.initialize()
    except (BusFault, ReadTimeout, OSError) as exc:
        log.error("hardware reinitialization failed: %s", exc)
        return False
    return True


@dataclass
class HealthReport:
    checks: dict[str, bool] = field(default_factory=dict)
    notes: list[str] = field(default_factory=list)

    @property
    def ok(self) -> bool:
        return all(self.checks.values())

    def summary(self) -> str:
        parts = [f"{name}={'ok' if good else 'FAIL'}" for name, good in self.checks.items()]
        return " ".join(parts + self.notes)


def health_check(rows_written: int, archive, backlog, counter: ErrorCounter,
                 backlog_warn: float = 0.5) -> HealthReport:
    """Archive writable, row count agrees with the file, backlog below the
    warning level, and no failure streak in progress."""
    report = HealthReport()
    if archive is None:
        report.checks["archive"] = False
        report.notes.append("no open archive")
    else:
        report.checks["archive"] = archive.writable()
        try:
            rows = count_rows(archive.path)
        except Exception as exc:     # any unreadable archive is a finding, not a crash
            report.checks["rows"] = False
            report.notes.append(f"archive unreadable: {exc}")
        else:
            report.checks["rows"] = rows == rows_written
            if rows != rows_written:
                report.notes.append(f"rows file={rows} state={rows_written}")
    if backlog is not None:
        report.checks["backlog"] = len(backlog) < backlog_warn * backlog.limit
        report.notes.append(f"backlog={len(backlog)}/{backlog.limit} high_water={backlog.high_water}")
    report.checks["errors"] = counter.consecutive_failures == 0
    report.notes.append(f"failures={counter.total_failures}")
    return report
