"""Copy daily archives to a remote target.

The remote is anything with ``digest(name)`` and ``put(name, data)``;
:class:`DirectoryRemote` is the local-directory binding (point it at a
mounted bucket or a folder a cloud tool mirrors).
"""

from __future__ import annotations

import hashlib
import os
from dataclasses import dataclass, field
from pathlib import Path

from .csvarchive import archive_files


class DirectoryRemote:
    def __init__(self, root: str | Path, available=None):
        self.root = Path(root)
        self.available = available or (lambda: True)

    def _check(self):
        if not self.available():
            raise ConnectionError("remote unreachable")

    def digest(self, name: str) -> str | None:
        self._check()
        path = self.root / name
        if not path.exists():
            return None
        return hashlib.sha256(path.read_bytes()).hexdigest()

    def put(self, name: str, data: bytes) -> None:
        self._check()
        self.root.mkdir(parents=True, exist_ok=True)
        tmp = self.root / f".{name}.part"
        tmp.write_bytes(data)
        os.replace(tmp, self.root / name)


@dataclass
class SyncReport:
    transferred: list[str] = field(default_factory=list)
    unchanged: int = 0
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def sync_archives(local_dir: str | Path, remote) -> SyncReport:
    """Upload archives whose content differs remotely. Never raises on remote failure."""
    report = SyncReport()
    for path in archive_files(local_dir):
        data = path.read_bytes()
        try:
            if remote.digest(path.name) == hashlib.sha256(data).hexdigest():
                report.unchanged += 1
                continue
            remote.put(path.name, data)
        except (ConnectionError, OSError) as exc:
            report.error = str(exc) or type(exc).__name__
            return report
        report.transferred.append(path.name)
    return report
