"""Startup recovery evaluation."""

from __future__ import annotations

from dataclasses import dataclass
from datetime import datetime
from enum import Enum
from pathlib import Path

from ..clock import date_of, to_seconds
from ..errors import ArchiveCorrupt, HeaderMismatch
from ..store.csvarchive import CsvInfo, inspect_csv
from ..store.state import SessionState
from ..window import OperatingWindow


class Mode(str, Enum):
    RESUME = "RESUME"
    FRESH_ACTIVE = "FRESH_ACTIVE"
    FRESH_IDLE = "FRESH_IDLE"


class Reason(str, Enum):
    ALL_CRITERIA_MET = "ALL_CRITERIA_MET"
    OUTSIDE_WINDOW = "OUTSIDE_WINDOW"
    NO_STATE = "NO_STATE"
    DIFFERENT_DAY = "DIFFERENT_DAY"
    NOT_RECORDING = "NOT_RECORDING"
    CSV_MISSING = "CSV_MISSING"
    HEADER_MISMATCH = "HEADER_MISMATCH"
    CSV_CORRUPT = "CSV_CORRUPT"
    ROWS_MISSING = "ROWS_MISSING"


# reasons meaning today's file exists but cannot be continued
INTEGRITY_FAILURES = frozenset({Reason.HEADER_MISMATCH, Reason.CSV_CORRUPT, Reason.ROWS_MISSING})


@dataclass(frozen=True)
class RecoveryDecision:
    mode: Mode
    reason: Reason
    csv: CsvInfo | None = None   # set on RESUME

    @property
    def new_file_required(self) -> bool:
        return self.reason in INTEGRITY_FAILURES

    def describe(self) -> str:
        return f"{self.mode.value} ({self.reason.value})"


def check_archive(saved: SessionState, archive_dir: str | Path) -> tuple[Reason | None, CsvInfo | None]:
    """Integrity criterion: file present, header matches, every line parses,
    and at least as many rows as the state claims."""
    if not saved.csv_path:
        return Reason.CSV_MISSING, None
    try:
        info = inspect_csv(Path(archive_dir) / saved.csv_path)
    except FileNotFoundError:
        return Reason.CSV_MISSING, None
    except HeaderMismatch:
        return Reason.HEADER_MISMATCH, None
    except (ArchiveCorrupt, OSError):
        return Reason.CSV_CORRUPT, None
    if info.rows < saved.rows_written:
        return Reason.ROWS_MISSING, info
    return None, info


def evaluate_recovery(saved: SessionState | None, now: float | datetime, archive_dir: str | Path,
                      window: OperatingWindow = OperatingWindow()) -> RecoveryDecision:
    """Total over its inputs: every (state, time) pair maps to a decision."""
    t = to_seconds(now) if isinstance(now, datetime) else float(now)
    if not window.contains(t):
        return RecoveryDecision(Mode.FRESH_IDLE, Reason.OUTSIDE_WINDOW)
    if saved is None:
        return RecoveryDecision(Mode.FRESH_ACTIVE, Reason.NO_STATE)
    if saved.session_date != date_of(t):
        return RecoveryDecision(Mode.FRESH_ACTIVE, Reason.DIFFERENT_DAY)
    if not saved.recording:
        return RecoveryDecision(Mode.FRESH_ACTIVE, Reason.NOT_RECORDING)
    problem, info = check_archive(saved, archive_dir)
    if problem is not None:
        return RecoveryDecision(Mode.FRESH_ACTIVE, problem)
    return RecoveryDecision(Mode.RESUME, Reason.ALL_CRITERIA_MET, info)
