"""
Empirical pause metrics from pause/play event traces.

A trace is an alternating sequence of ``play_start`` and ``pause_start``
events. The first event is the end of the initial fill, so the start-up delay
never counts as a pause. Traces are exchanged as ``time_s,event`` CSV files.
"""

import csv
import logging
import math
from dataclasses import dataclass, field
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from pause_intensity.errors import DomainError, TraceFormatError

logger = logging.getLogger(__name__)

TRACE_HEADER = ("time_s", "event")
SESSION_END = "session_end"


class EventKind(str, Enum):
    PAUSE_START = "pause_start"
    PLAY_START = "play_start"


@dataclass(frozen=True)
class TraceEvent:
    kind: EventKind
    time: float


@dataclass(frozen=True, eq=False)
class SessionTrace:
    """
    Ordered pause/play events of one session.

    ``session_end`` is the session length when known. ``occupancy_samples`` is
    an optional ``(n, 2)`` array of (time, bytes) breakpoints of the buffer
    occupancy curve.
    """

    events: tuple[TraceEvent, ...]
    session_end: Optional[float] = None
    occupancy_samples: Optional[np.ndarray] = field(default=None, repr=False)

    def __post_init__(self) -> None:
        object.__setattr__(self, "events", tuple(self.events))
        _check_events([(e.kind, e.time) for e in self.events], lines=None)
        if self.session_end is not None:
            if not math.isfinite(self.session_end):
                raise TraceFormatError(f"session_end must be finite, got {self.session_end}")
            if self.events and self.session_end < self.events[-1].time:
                raise TraceFormatError(
                    f"session_end {self.session_end} precedes the last event at "
                    f"{self.events[-1].time}"
                )

    def __eq__(self, other: object) -> bool:
        if not isinstance(other, SessionTrace):
            return NotImplemented
        return self.events == other.events and self.session_end == other.session_end

    def __len__(self) -> int:
        return len(self.events)

    @property
    def pause_starts(self) -> list[float]:
        return [e.time for e in self.events if e.kind is EventKind.PAUSE_START]

    def pause_intervals(self) -> list[tuple[float, Optional[float]]]:
        """(start, resume) for every pause; resume is ``None`` for a trailing pause."""
        intervals: list[tuple[float, Optional[float]]] = []
        for i, event in enumerate(self.events):
            if event.kind is EventKind.PAUSE_START:
                resume = self.events[i + 1].time if i + 1 < len(self.events) else None
                intervals.append((event.time, resume))
        return intervals

    @property
    def end_time(self) -> Optional[float]:
        """Session end when known, otherwise the last event time."""
        if self.session_end is not None:
            return self.session_end
        return self.events[-1].time if self.events else None

    @classmethod
    def from_events(
        cls, pairs: list[tuple[str, float]], session_end: Optional[float] = None
    ) -> "SessionTrace":
        """Build a trace from ``(kind, time)`` pairs."""
        return cls(tuple(TraceEvent(EventKind(k), float(t)) for k, t in pairs), session_end)


@dataclass(frozen=True)
class EmpiricalMetrics:
    """Pause metrics measured over ``window``; ``mean_pause_duration`` is None without pauses."""

    mean_pause_duration: Optional[float]
    pause_count: int
    pause_frequency: float
    pause_intensity: float
    paused_fraction: float
    window: tuple[float, float]

    def as_dict(self, digits: int = 6) -> dict[str, object]:
        def rounded(value: Optional[float]) -> Optional[float]:
            return None if value is None else round(value, digits)

        return {
            "mean_pause_duration": rounded(self.mean_pause_duration),
            "pause_count": self.pause_count,
            "pause_frequency": rounded(self.pause_frequency),
            "pause_intensity": rounded(self.pause_intensity),
            "paused_fraction": rounded(self.paused_fraction),
            "window": [rounded(self.window[0]), rounded(self.window[1])],
        }


def _check_events(pairs: list[tuple[EventKind, float]], lines: Optional[list[int]]) -> None:
    previous: Optional[tuple[EventKind, float]] = None
    for i, (kind, time) in enumerate(pairs):
        line = lines[i] if lines is not None else None
        if not math.isfinite(time):
            raise TraceFormatError(f"event time must be finite, got {time}", line)
        if previous is None:
            if kind is not EventKind.PLAY_START:
                raise TraceFormatError(
                    f"first event must be play_start, got {kind.value} at t={time}", line
                )
        else:
            if time <= previous[1]:
                raise TraceFormatError(
                    f"event times must increase strictly: t={time} after t={previous[1]}", line
                )
            if kind is previous[0]:
                raise TraceFormatError(
                    f"events must alternate: consecutive {kind.value} at t={time}", line
                )
        previous = (kind, time)


def _default_window(trace: SessionTrace) -> Optional[tuple[float, float]]:
    starts = trace.pause_starts
    if not starts:
        return None
    if len(starts) >= 2:
        return starts[0], starts[-1]
    end = trace.end_time
    assert end is not None
    return starts[0], end


def compute_metrics(
    trace: SessionTrace,
    window: Optional[tuple[float, float]] = None,
) -> EmpiricalMetrics:
    """
    Mean pause duration, pause frequency and PI of the pauses completed in ``window``.

    The default window runs from the first pause start to the last pause start,
    which covers whole pause-play cycles; with a single pause it runs to the end
    of the session. A pause counts as completed when it starts inside the
    window and resumes by its end. ``paused_fraction`` also includes pauses
    that are cut by the window edges.

    Raises:
        DomainError: If an explicit window is empty or reversed
    """
    if window is not None:
        start, end = float(window[0]), float(window[1])
        if not end > start:
            raise DomainError(f"window end must exceed its start, got ({start}, {end})")
    else:
        default = _default_window(trace)
        if default is None or default[1] <= default[0]:
            origin = trace.events[0].time if trace.events else 0.0
            span = default or (origin, trace.end_time if trace.end_time is not None else origin)
            return EmpiricalMetrics(None, 0, 0.0, 0.0, 0.0, span)
        start, end = default

    length = end - start
    session_end = trace.end_time if trace.end_time is not None else end
    completed: list[float] = []
    paused_time = 0.0
    for pause_start, resume in trace.pause_intervals():
        if resume is not None and start <= pause_start < end and resume <= end:
            completed.append(resume - pause_start)
        stop = resume if resume is not None else session_end
        overlap = min(stop, end) - max(pause_start, start)
        if overlap > 0:
            paused_time += overlap

    if not completed:
        return EmpiricalMetrics(None, 0, 0.0, 0.0, paused_time / length, (start, end))

    mean_duration = float(np.mean(completed))
    frequency = len(completed) / length
    metrics = EmpiricalMetrics(
        mean_pause_duration=mean_duration,
        pause_count=len(completed),
        pause_frequency=frequency,
        pause_intensity=mean_duration * frequency,
        paused_fraction=paused_time / length,
        window=(start, end),
    )
    logger.debug("trace metrics: %s", metrics)
    return metrics


def ingest_trace(path: Union[str, Path]) -> SessionTrace:
    """
    Parse a ``time_s,event`` CSV file into a validated trace.

    An optional final ``session_end`` row records the session length.

    Raises:
        FileNotFoundError: If the file doesn't exist
        TraceFormatError: On a bad header, unparsable row or alternation violation,
            naming the 1-based file line
    """
    path = Path(path)
    if not path.exists():
        raise FileNotFoundError(f"Trace file not found: {path}")

    pairs: list[tuple[EventKind, float]] = []
    lines: list[int] = []
    session_end: Optional[float] = None
    with open(path, newline="", encoding="utf-8") as f:
        reader = csv.reader(f)
        header = next(reader, None)
        if header is None or tuple(cell.strip() for cell in header) != TRACE_HEADER:
            raise TraceFormatError(f"header must be {','.join(TRACE_HEADER)}, got {header}", 1)
        for row in reader:
            line = reader.line_num
            if not row or all(not cell.strip() for cell in row):
                continue
            if session_end is not None:
                raise TraceFormatError("rows after session_end", line)
            if len(row) != 2:
                raise TraceFormatError(f"expected 2 fields, got {len(row)}", line)
            try:
                time = float(row[0])
            except ValueError:
                raise TraceFormatError(f"invalid time {row[0]!r}", line)
            kind_name = row[1].strip()
            if kind_name == SESSION_END:
                if pairs and time < pairs[-1][1]:
                    raise TraceFormatError(
                        f"session_end {time} precedes the last event at {pairs[-1][1]}", line
                    )
                session_end = time
                continue
            try:
                kind = EventKind(kind_name)
            except ValueError:
                raise TraceFormatError(f"unknown event {kind_name!r}", line)
            pairs.append((kind, time))
            lines.append(line)

    _check_events(pairs, lines)
    trace = SessionTrace(tuple(TraceEvent(k, t) for k, t in pairs), session_end)
    logger.info("ingested %d events from %s", len(trace), path)
    return trace


def serialize_trace(trace: SessionTrace, path: Union[str, Path]) -> Path:
    """Write ``trace`` in the canonical form: 9-decimal times, ``\\n`` endings."""
    path = Path(path)
    path.parent.mkdir(parents=True, exist_ok=True)
    with open(path, "w", newline="", encoding="utf-8") as f:
        writer = csv.writer(f, lineterminator="\n")
        writer.writerow(TRACE_HEADER)
        for event in trace.events:
            writer.writerow([f"{event.time:.9f}", event.kind.value])
        if trace.session_end is not None:
            writer.writerow([f"{trace.session_end:.9f}", SESSION_END])
    return path
