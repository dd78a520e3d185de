"""Event stream types and text-format parsing.

The on-disk format is the plain-text convention used by public DVS
datasets: one event per line, ``timestamp x y polarity``, whitespace
separated. Timestamps are integer ticks (microseconds by default),
polarity is written as 1/0 and accepted as 1/0 or +1/-1. Lines starting
with '#' are comments.
"""

from __future__ import annotations

import io
from dataclasses import dataclass
from pathlib import Path
from typing import Iterable


class EventParseError(ValueError):
    """Malformed event line; carries the 1-based line number."""

    def __init__(self, line_no, reason):
        super().__init__(f"line {line_no}: {reason}")
        self.line_no = line_no
        self.reason = reason


class StreamOrderError(ValueError):
    """Timestamp regression in a stream; carries the offending event index."""

    def __init__(self, index, message):
        super().__init__(message)
        self.index = index


@dataclass(frozen=True)
class Event:
    """One camera event: pixel (x=column, y=row), polarity in {-1,+1},
    timestamp in integer ticks since stream start."""

    x: int
    y: int
    polarity: int
    timestamp: int


@dataclass(frozen=True)
class SensorGeometry:
    """Pixel grid of the sensor; timestamp_unit is seconds per tick."""

    width: int
    height: int
    timestamp_unit: float = 1e-6

    def __post_init__(self):
        if self.width < 2 or self.height < 2:
            raise ValueError(
                f"sensor geometry must be at least 2x2, got "
                f"{self.width}x{self.height}"
            )

    def contains(self, x, y):
        return 0 <= x < self.width and 0 <= y < self.height


def parse_event_line(line, line_no=0):
    """Parse one ``timestamp x y polarity`` record into an Event.

    Polarity 0 is normalised to -1. Raises EventParseError on a bad
    field count, non-integer token, negative coordinate/timestamp or
    unknown polarity value.
    """
    fields = line.split()
    if len(fields) != 4:
        raise EventParseError(line_no, f"expected 4 fields, got {len(fields)}")
    try:
        t, x, y, p = (int(f) for f in fields)
    except ValueError:
        raise EventParseError(line_no, f"non-integer token in {fields!r}") from None
    if t < 0:
        raise EventParseError(line_no, f"negative timestamp {t}")
    if x < 0 or y < 0:
        raise EventParseError(line_no, f"negative coordinate ({x}, {y})")
    if p in (0, -1):
        p = -1
    elif p == 1:
        p = 1
    else:
        raise EventParseError(line_no, f"polarity must be 0/1 or -1/+1, got {p}")
    return Event(x=x, y=y, polarity=p, timestamp=t)


def read_stream(source, geometry, slack=0):
    """Iterate events from a text file (path or open text file).

    Single-pass generator; memory use does not grow with stream length.
    '#' comment lines and blank lines are skipped. Raises StreamOrderError
    when a timestamp drops by more than ``slack`` ticks below the running
    maximum, and EventParseError for coordinates outside ``geometry``.
    """
    if isinstance(source, (str, Path)):
        with open(source, "r") as fh:
            yield from read_stream(fh, geometry, slack=slack)
        return
    yield from _iter_events(source, geometry, slack)


def _iter_events(fh, geometry, slack):
    last_t = None
    index = 0
    for line_no, line in enumerate(fh, start=1):
        stripped = line.strip()
        if not stripped or stripped.startswith("#"):
            continue
        ev = parse_event_line(stripped, line_no)
        if not geometry.contains(ev.x, ev.y):
            raise EventParseError(
                line_no,
                f"coordinate ({ev.x}, {ev.y}) outside "
                f"{geometry.width}x{geometry.height} sensor",
            )
        if last_t is not None and ev.timestamp < last_t - slack:
            raise StreamOrderError(
                index,
                f"timestamp {ev.timestamp} at event index {index} regresses "
                f"below {last_t} (slack {slack})",
            )
        if last_t is None or ev.timestamp > last_t:
            last_t = ev.timestamp
        yield ev
        index += 1


def format_event_line(event):
    """Render an event in the on-disk convention (polarity -1 written as 0)."""
    p = 1 if event.polarity > 0 else 0
    return f"{event.timestamp} {event.x} {event.y} {p}"


def write_events(events: Iterable[Event], target, header=None):
    """Write events as text lines; ``header`` lines are emitted as '#' comments.

    Returns the number of events written.
    """
    if isinstance(target, (str, Path)):
        with open(target, "w") as fh:
            return write_events(events, fh, header=header)
    n = 0
    if header:
        for h in ([header] if isinstance(header, str) else header):
            target.write(f"# {h}\n")
    for ev in events:
        target.write(format_event_line(ev) + "\n")
        n += 1
    return n


def events_from_text(text, geometry, slack=0):
    """Convenience wrapper: parse a whole in-memory string into a list."""
    return list(read_stream(io.StringIO(text), geometry, slack=slack))
