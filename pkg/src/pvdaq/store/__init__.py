"""Persistence: CSV archive, session state, sink backlog, remote sync."""

from .csvarchive import (CsvArchive, CsvInfo, daily_csv_name, inspect_csv,
                         open_daily_csv, read_frames)
from .lineproto import encode_frame, parse_lines
from .sink import (FileSink, HttpSink, NullSink, PushReport, SinkBacklog,
                   push_frames)
from .state import SessionState, load_state, read_state, write_state
from .sync import DirectoryRemote, SyncReport, sync_archives

__all__ = [
    "CsvArchive", "CsvInfo", "DirectoryRemote", "FileSink", "HttpSink", "NullSink",
    "PushReport", "SessionState", "SinkBacklog", "SyncReport", "daily_csv_name",
    "encode_frame", "inspect_csv", "load_state", "open_daily_csv", "parse_lines",
    "push_frames", "read_frames", "read_state", "sync_archives", "write_state",
]
