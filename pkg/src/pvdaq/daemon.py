"""The acquisition node: recovery at boot, the two tasks, persistence, shutdown.

A :class:`Node` is one daemon process lifetime. ``run()`` drives it with
two threads (sampler and scheduler) on a real or scaled clock;
``advance_to()`` interleaves the same two tasks deterministically on a
:class:`~pvdaq.clock.SimClock`. A power cycle in simulation is a
``crash()`` followed by a new Node booting against the same directories.
"""

from __future__ import annotations

import fcntl
import os
import threading
from contextlib import suppress
from pathlib import Path

from .acquire.sampler import POLL_PERIOD_S, Buffers, FastSampler, run_fast_sampler
from .acquire.scheduler import Scheduler, assemble_minute_frame, run_scheduler
from .clock import Clock, date_of, from_seconds
from .config import RunConfig
from .convert import power_registers_to_si
from .errors import ArchiveCorrupt, BusFault, HeaderMismatch, ReadTimeout
from .hal import Hal
from .oplog import close_oplog, open_oplog
from .recover import (Action, ErrorCounter, Mode, RecoveryDecision,
                      ShutdownCoordinator, evaluate_recovery, health_check,
                      record_cycle_result, reinitialize_hardware)
from .store.csvarchive import CsvArchive, open_daily_csv
from .store.lineproto import encode_frame
from .store.sink import FileSink, HttpSink, NullSink, SinkBacklog, push_frames
from .store.state import STATE_FILENAME, SessionState, read_state, write_state
from .store.sync import DirectoryRemote, sync_archives

LOCK_NAME = "daq.lock"


class AlreadyRunning(RuntimeError):
    pass


class InstanceLock:
    """Exclusive ``flock`` on ``daq.lock`` in the state directory; holds our pid."""

    def __init__(self, state_dir: str | Path):
        self.path = Path(state_dir) / LOCK_NAME
        self._fd: int | None = None

    def acquire(self) -> None:
        fd = os.open(self.path, os.O_RDWR | os.O_CREAT, 0o644)
        try:
            fcntl.flock(fd, fcntl.LOCK_EX | fcntl.LOCK_NB)
        except BlockingIOError:
            os.close(fd)
            raise AlreadyRunning(f"another instance holds {self.path}") from None
        os.ftruncate(fd, 0)
        os.write(fd, f"{os.getpid()}\n".encode())
        self._fd = fd

    def release(self) -> None:
        if self._fd is not None:
            with suppress(OSError):
                os.ftruncate(self._fd, 0)
            os.close(self._fd)
            self._fd = None

    def __enter__(self):
        self.acquire()
        return self

    def __exit__(self, *exc):
        self.release()


def build_sink(cfg: RunConfig, available=None):
    if cfg.sink.kind == "file":
        return FileSink(cfg.sink.path, available)
    if cfg.sink.kind == "http":
        return HttpSink(cfg.sink.url, cfg.sink.org, cfg.sink.bucket, cfg.sink.token)
    return NullSink()


def build_remote(cfg: RunConfig, available=None):
    if cfg.sync.kind == "directory":
        return DirectoryRemote(cfg.sync.target, available)
    return None


class Node:
    def __init__(self, cfg: RunConfig, clock: Clock, backend, *, sink=None, remote=None,
                 record_calls: bool | int = False):
        self.cfg = cfg
        self.clock = clock
        self.backend = backend
        self.hal = Hal(backend, clock, channel_map=cfg.channel_map, adc=cfg.adc,
                       monitor=cfg.monitor, record_calls=record_calls)
        self.buffers = Buffers.allocate()
        self.counter = ErrorCounter(cfg.threshold)
        self.backlog = SinkBacklog(cfg.sink.backlog_limit)
        self.sink = sink if sink is not None else build_sink(cfg)
        self.remote = remote if remote is not None else build_remote(cfg)
        self.state_path = cfg.state_dir / STATE_FILENAME
        self.session = SessionState()
        self.archive: CsvArchive | None = None
        self.recording = False
        self.decision: RecoveryDecision | None = None
        self.pending_rows = []
        self.reinits = 0
        self.health_reports = 0
        self._sink_down = False
        self.log, self._log_handler = open_oplog(cfg.log_dir, clock)
        self.stop = threading.Event()
        self._threads: list[threading.Thread] = []
        self.sampler: FastSampler | None = None
        self.scheduler: Scheduler | None = None
        self.shutdown = ShutdownCoordinator([
            ("stop tasks", self._stop_tasks),
            ("end-of-day", lambda: self._close_day(self.shutdown.cause or "shutdown")),
            ("write state", self._final_state),
            ("release hardware", self.hal.release),
            ("close sinks", self._close_sinks),
        ])

    # -- boot -----------------------------------------------------------------

    def boot(self) -> RecoveryDecision:
        t = self.clock.time()
        status, saved = read_state(self.state_path)
        if status == "corrupt":
            self.log.warning("RECOVERY state file corrupt; treating as absent")
        decision = evaluate_recovery(saved, t, self.cfg.archive_dir, self.cfg.window)
        self.decision = decision
        self.log.info("RECOVERY %s at %s", decision.describe(), from_seconds(t).isoformat())
        try:
            self.hal.initialize()
        except (BusFault, ReadTimeout) as exc:
            self.log.error("hardware initialization failed at boot: %s", exc)
        if decision.mode is Mode.RESUME:
            self._resume(saved, decision)
        elif decision.mode is Mode.FRESH_ACTIVE:
            self.start_day(t, force_fresh=decision.new_file_required)
        else:
            self.session = SessionState()
            if saved is not None and saved.recording:
                # the day ended while we were off; close it out
                self.session = saved.copy(recording=False)
            self._write_state()
        self.sampler = FastSampler(self.hal, self.buffers, self.cfg.calibration.thermistor,
                                   self.cfg.window)
        self.scheduler = Scheduler(self.clock, self, self.cfg.window)
        return decision

    def _monitor_joules(self) -> list[float | None]:
        out = []
        for addr in self.cfg.channel_map.power_monitor_addresses:
            try:
                raw = self.hal.read_power_monitor(addr)
            except (BusFault, ReadTimeout):
                out.append(None)
            else:
                out.append(power_registers_to_si(raw, self.cfg.calibration.electrical)[3])
        return out

    def _resume(self, saved: SessionState, decision: RecoveryDecision):
        info = decision.csv
        self.archive = CsvArchive(info.path, info.rows, info.last_timestamp, self.cfg.fsync)
        offsets = list(saved.energy_offsets)
        last = info.last_frame
        for i, joules in enumerate(self._monitor_joules()):
            if joules is None or last is None:
                continue
            last_reported = last[f"p{i}_joules"]
            if last_reported is not None and joules + offsets[i] < last_reported - 1e-6:
                # monitor lost its accumulator with the power; continue the day's total
                offsets[i] = last_reported - joules
        self.session = saved.copy(rows_written=info.rows, energy_offsets=tuple(offsets),
                                  rain_day_accum=info.rain_total,
                                  last_write=info.last_timestamp, recording=True)
        self.recording = True
        self._write_state()
        self.log.info("RECOVERY continuing %s at row %d", info.path.name, info.rows)

    # -- schedule handler ---------------------------------------------------------

    def session_open_for(self, t: float) -> bool:
        return self.recording and self.session.session_date == date_of(t)

    def start_day(self, t: float, force_fresh: bool = False) -> None:
        if self.archive is not None:
            self.archive.close()
        day = date_of(t)
        try:
            self.archive = open_daily_csv(self.cfg.archive_dir, day, force_fresh=force_fresh,
                                          durable=self.cfg.fsync)
        except (HeaderMismatch, ArchiveCorrupt) as exc:
            self.log.warning("archive for %s unusable (%s); starting a suffixed file", day, exc)
            self.archive = open_daily_csv(self.cfg.archive_dir, day, force_fresh=True,
                                          durable=self.cfg.fsync)
        self.hal.ensure_initialized()
        offsets = tuple(0.0 - (j or 0.0) for j in self._monitor_joules())
        self.buffers.take_rain_tips()
        self.counter.consecutive_failures = 0
        self.session = SessionState(day, self.archive.path.name, self.archive.rows, 0.0,
                                    offsets, True, self.archive.last_timestamp)
        self.recording = True
        self.pending_rows.clear()
        self._write_state()
        self.log.info("DAY_START %s file=%s", day.isoformat(), self.archive.path.name)

    def minute_cycle(self, t: float) -> None:
        result = assemble_minute_frame(t, self.hal, self.buffers, self.cfg.calibration,
                                       self.session.energy_offsets, self.session.rain_day_accum)
        frame = result.frame
        self._archive(frame)
        s = self.session
        s.rows_written = self.archive.rows
        s.rain_day_accum = frame.rain_day_accum
        s.last_write = frame.timestamp
        self.backlog.enqueue(frame.timestamp.isoformat(), encode_frame(frame, self.cfg.timezone))
        self._push()
        self._write_state()
        flags = sorted(frame.flags)
        self.log.info("FRAME %s flags=%d%s", frame.timestamp.isoformat(), len(flags),
                      f" [{' '.join(flags)}]" if flags else "")
        if record_cycle_result(self.counter, result.ok) is Action.REINITIALIZE:
            self.reinits += 1
            self.log.warning("REINIT after %d consecutive failed cycles (%s)",
                             self.counter.threshold, ",".join(sorted(result.failed_signals)) or "?")
            if not reinitialize_hardware(self.hal):
                self.log.error("REINIT failed; will retry at the next threshold")

    def _archive(self, frame) -> None:
        self.pending_rows.append(frame)
        while self.pending_rows:
            try:
                self.archive.append(self.pending_rows[0])
            except ValueError as exc:
                self.log.error("dropping frame: %s", exc)
            except OSError as exc:
                self.log.error("archive write failed (%s); %d row(s) held for retry",
                               exc, len(self.pending_rows))
                return
            self.pending_rows.pop(0)

    def _push(self) -> None:
        report = push_frames(self.sink, self.backlog)
        if report.error and not self._sink_down:
            self._sink_down = True
            self.log.warning("SINK unreachable (%s); buffering", report.error)
        elif not report.error and self._sink_down:
            self._sink_down = False
            self.log.info("SINK reachable again; delivered %d batch(es)", report.delivered)

    def periodic_check(self, t: float) -> None:
        report = health_check(self.session.rows_written, self.archive, self.backlog, self.counter)
        self.health_reports += 1
        level = self.log.info if report.ok else self.log.warning
        level("HEALTH %s %s", "ok" if report.ok else "WARN", report.summary())
        self._sync()

    def _sync(self) -> None:
        if self.remote is None:
            return
        report = sync_archives(self.cfg.archive_dir, self.remote)
        if report.error:
            self.log.warning("SYNC failed: %s", report.error)
        elif report.transferred:
            self.log.info("SYNC uploaded %s", ",".join(report.transferred))

    def end_day(self, t: float, cause: str) -> None:
        self._close_day(cause)
        self.recording = False
        self._write_state()
        self.hal.release()

    def _close_day(self, cause: str) -> None:
        """End-of-day processing shared by 18:00 and shutdown."""
        if not self.recording:
            return
        self._push()
        self.sink.flush()
        if self.archive is not None:
            self.archive.close()
        self._sync()
        self.log.info("DAY_END cause=%s rows=%d backlog=%d", cause, self.session.rows_written,
                      len(self.backlog))

    # -- persistence helpers ---------------------------------------------------

    def _write_state(self) -> None:
        self.session.recording = self.recording
        try:
            write_state(self.state_path, self.session, durable=self.cfg.fsync)
        except OSError as exc:
            self.log.error("state write failed: %s", exc)

    def _stop_tasks(self) -> None:
        self.stop.set()
        for th in self._threads:
            if th is not threading.current_thread():
                th.join(timeout=30)

    def _final_state(self) -> None:
        self.recording = self.recording and self.cfg.window.contains(self.clock.time())
        self._write_state()

    def _close_sinks(self) -> None:
        self.sink.close()
        self.log.info("SHUTDOWN complete")
        close_oplog(self.log, self._log_handler)

    # -- driving ---------------------------------------------------------------

    def advance_to(self, t_end: float) -> None:
        """Single-threaded, deterministic execution up to ``t_end`` (SimClock only)."""
        sampler, scheduler = self.sampler, self.scheduler
        while True:
            ts, tq = sampler.next_due, scheduler.next_due
            due = min(ts, tq)
            if due > t_end:
                break
            self.clock.advance_to(due)
            if ts <= tq:
                try:
                    sampler.tick(ts)
                except Exception:
                    self.log.exception("sampler tick failed")
                    sampler.next_due = sampler._align(ts + POLL_PERIOD_S)
            else:
                try:
                    scheduler.step(tq)
                except Exception:
                    self.log.exception("scheduler step failed")
        self.clock.advance_to(t_end)

    def crash(self) -> None:
        """Power loss: nothing is flushed or written; open files are just dropped."""
        self.stop.set()
        if self.archive is not None:
            self.archive.close()
        close_oplog(self.log, self._log_handler)

    def run(self) -> int:
        """Threaded service loop; returns once ``stop`` is set and cleanup ran."""
        stop = self.stop
        self._threads = [
            threading.Thread(target=run_fast_sampler, name="sampler",
                             args=(self.clock, self.hal, self.buffers, stop),
                             kwargs={"sampler": self.sampler}, daemon=True),
            threading.Thread(target=run_scheduler, name="scheduler",
                             args=(self.clock, self, stop),
                             kwargs={"scheduler": self.scheduler}, daemon=True),
        ]
        for th in self._threads:
            th.start()
        stop.wait()
        self.shutdown.request("shutdown")
        return 0
