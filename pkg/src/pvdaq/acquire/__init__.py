"""Sampling, scanning, frame assembly and the minute scheduler."""

from .frame import CSV_HEADER, FIELDS, MeasurementFrame
from .rolling import RollingWindow, rolling_average
from .sampler import Buffers, FastSampler, run_fast_sampler
from .scan import ScanResult, read_irradiance_pass, scan_thermistors
from .scheduler import (Calibration, MinuteResult, Scheduler,
                        assemble_minute_frame, run_scheduler)

__all__ = [
    "Buffers", "CSV_HEADER", "Calibration", "FIELDS", "FastSampler", "MeasurementFrame",
    "MinuteResult", "RollingWindow", "ScanResult", "Scheduler", "assemble_minute_frame",
    "read_irradiance_pass", "rolling_average", "run_fast_sampler", "run_scheduler",
    "scan_thermistors",
]
