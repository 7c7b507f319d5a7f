"""Cross-check the CSV archive against a line-protocol sink export."""

from __future__ import annotations

from dataclasses import dataclass
from pathlib import Path

from ..store.csvarchive import HEADER_LINE, archive_files, parse_row
from ..store.lineproto import FIELD_OF, encode_frame, from_epoch, parse_lines


@dataclass(frozen=True)
class Mismatch:
    timestamp: str
    series: str
    detail: str

    def __str__(self):
        return f"{self.timestamp} {self.series}: {self.detail}"


def csv_points(csv_dir: str | Path, tz: str) -> dict:
    """``{(epoch, series): {field: value}}`` for every archived row.

    Parse failures raise ValueError naming the file and line.
    """
    points = {}
    for path in archive_files(csv_dir):
        lines = path.read_text(encoding="ascii").split("\n")
        if lines[0] != HEADER_LINE:
            raise ValueError(f"{path.name}:1: unexpected header")
        if lines[-1] != "":
            raise ValueError(f"{path.name}:{len(lines)}: incomplete last line")
        for lineno, line in enumerate(lines[1:-1], start=2):
            try:
                frame = parse_row(line)
            except (ValueError, KeyError) as exc:
                raise ValueError(f"{path.name}:{lineno}: {exc}") from exc
            for point in parse_lines("\n".join(encode_frame(frame, tz))):
                points[point.timestamp, point.series] = point.fields
    return points


def sink_points(text: str) -> tuple[dict, list[Mismatch]]:
    """Points of a sink export; repeated points must agree (re-delivery is fine)."""
    points, conflicts = {}, []
    for p in parse_lines(text):
        key = (p.timestamp, p.series)
        if key in points and points[key] != p.fields:
            conflicts.append(Mismatch(str(p.timestamp), p.series, "conflicting duplicate"))
        points[key] = p.fields
    return points, conflicts


def compare_points(expected: dict, actual: dict, tz: str) -> list[Mismatch]:
    out = []

    def stamp(epoch):
        return from_epoch(epoch, tz).isoformat()

    for key in sorted(set(expected) | set(actual)):
        epoch, series = key
        if key not in actual:
            out.append(Mismatch(stamp(epoch), series, "missing from sink"))
        elif key not in expected:
            out.append(Mismatch(stamp(epoch), series, "missing from CSV"))
        elif expected[key] != actual[key]:
            fields = sorted(set(expected[key]) | set(actual[key]))
            diff = [f for f in fields if expected[key].get(f) != actual[key].get(f)]
            names = [FIELD_OF.get((series, f), f) for f in diff]
            out.append(Mismatch(stamp(epoch), series, "differs in " + ",".join(names)))
    return out


def compare_stores(csv_dir: str | Path, sink_text: str, tz: str) -> list[Mismatch]:
    actual, conflicts = sink_points(sink_text)
    return conflicts + compare_points(csv_points(csv_dir, tz), actual, tz)
