"""Startup recovery, failure policy, health checks and shutdown."""

from .decision import (Mode, Reason, RecoveryDecision, check_archive,
                       evaluate_recovery)
from .policy import (Action, ErrorCounter, HealthReport, health_check,
                     record_cycle_result, reinitialize_hardware)
from .shutdown import ShutdownCoordinator

__all__ = [
    "Action", "ErrorCounter", "HealthReport", "Mode", "Reason", "RecoveryDecision",
    "ShutdownCoordinator", "check_archive", "evaluate_recovery", "health_check",
    "record_cycle_result", "reinitialize_hardware",
]
