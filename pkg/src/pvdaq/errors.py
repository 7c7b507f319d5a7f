"""Exception types shared across the acquisition stack."""


class DaqError(Exception):
    """Base class for pvdaq errors."""


class BusFault(DaqError):
    """A bus transaction failed (NAK, lockup, simulated sensor failure)."""


class ReadTimeout(DaqError):
    """A single-wire sensor did not answer in time. Usually transient."""


class RangeError(DaqError, ValueError):
    """A measured value lies outside the physically meaningful range."""


class EmptyWindow(DaqError):
    """Rolling window has no samples inside its horizon."""


class HeaderMismatch(DaqError):
    """An existing archive file carries a different header than expected."""


class ArchiveCorrupt(DaqError):
    """An existing archive file has rows that do not parse."""


class ConfigError(DaqError):
    """Configuration failed validation. ``problems`` lists field-level messages."""

    def __init__(self, problems):
        if isinstance(problems, str):
            problems = [problems]
        self.problems = list(problems)
        super().__init__("; ".join(self.problems))
