"""
Tests for trace validation, ingestion and empirical pause metrics.
"""

import pytest

from pause_intensity.errors import DomainError, TraceFormatError
from pause_intensity.trace_metrics import (
    EventKind,
    SessionTrace,
    TraceEvent,
    compute_metrics,
    ingest_trace,
    serialize_trace,
)


def trace(*pairs, session_end=None):
    return SessionTrace.from_events(list(pairs), session_end)


def periodic(cycles, play=6.0, pause=2.0):
    """play_start at 0, then ``cycles`` pause/play cycles."""
    pairs = [("play_start", 0.0)]
    t = 0.0
    for _ in range(cycles):
        t += play
        pairs.append(("pause_start", t))
        t += pause
        pairs.append(("play_start", t))
    return trace(*pairs, session_end=t + play)


class TestSessionTrace:
    """Event ordering rules."""

    def test_valid(self):
        tr = trace(("play_start", 0.0), ("pause_start", 10.0), ("play_start", 14.0))
        assert len(tr) == 3
        assert tr.pause_starts == [10.0]
        assert tr.pause_intervals() == [(10.0, 14.0)]
        assert tr.end_time == 14.0

    def test_trailing_pause_interval(self):
        tr = trace(("play_start", 0.0), ("pause_start", 5.0), session_end=9.0)
        assert tr.pause_intervals() == [(5.0, None)]
        assert tr.end_time == 9.0

    def test_first_event_must_be_play(self):
        with pytest.raises(TraceFormatError, match="first event"):
            trace(("pause_start", 1.0))

    def test_times_increase(self):
        with pytest.raises(TraceFormatError, match="increase"):
            trace(("play_start", 2.0), ("pause_start", 2.0))

    def test_alternation(self):
        with pytest.raises(TraceFormatError, match="alternate"):
            trace(("play_start", 0.0), ("play_start", 1.0))

    def test_session_end_after_events(self):
        with pytest.raises(TraceFormatError):
            trace(("play_start", 0.0), ("pause_start", 5.0), session_end=4.0)

    def test_non_finite_time(self):
        with pytest.raises(TraceFormatError):
            trace(("play_start", float("nan")))

    def test_equality_ignores_occupancy(self):
        a = SessionTrace((TraceEvent(EventKind.PLAY_START, 0.0),), 3.0)
        b = SessionTrace.from_events([("play_start", 0.0)], 3.0)
        assert a == b


class TestComputeMetrics:
    """Mean pause duration, frequency and PI over a window."""

    def test_single_cycle(self):
        """One 4 s pause in a 20 s window: f = 0.05, PI = 0.2."""
        tr = trace(
            ("play_start", 0.0),
            ("pause_start", 10.0),
            ("play_start", 14.0),
            ("pause_start", 30.0),
            ("play_start", 33.0),
            session_end=40.0,
        )
        m = compute_metrics(tr)
        assert m.window == (10.0, 30.0)
        assert m.pause_count == 1
        assert m.mean_pause_duration == pytest.approx(4.0)
        assert m.pause_frequency == pytest.approx(0.05)
        assert m.pause_intensity == pytest.approx(0.2)
        assert m.paused_fraction == pytest.approx(0.2)

    def test_single_pause_runs_to_session_end(self):
        tr = trace(("play_start", 0.0), ("pause_start", 10.0), ("play_start", 14.0), session_end=40.0)
        m = compute_metrics(tr)
        assert m.window == (10.0, 40.0)
        assert m.pause_intensity == pytest.approx(4.0 / 30.0)

    def test_no_pauses(self):
        m = compute_metrics(trace(("play_start", 0.0), session_end=10.0))
        assert m.pause_count == 0
        assert m.mean_pause_duration is None
        assert m.pause_intensity == 0.0
        assert m.pause_frequency == 0.0

    def test_empty_trace(self):
        m = compute_metrics(SessionTrace(()))
        assert m.pause_intensity == 0.0
        assert m.pause_count == 0

    def test_trailing_pause_not_completed(self):
        """A pause still running at session end counts toward paused time only."""
        tr = trace(("play_start", 0.0), ("pause_start", 10.0), session_end=20.0)
        m = compute_metrics(tr)
        assert m.pause_count == 0
        assert m.pause_intensity == 0.0
        assert m.paused_fraction == pytest.approx(1.0)

    def test_explicit_window(self):
        """Only pauses that start and resume inside the window are completed."""
        tr = periodic(5)
        m = compute_metrics(tr, window=(0.0, 20.0))
        # pauses at 6-8 and 14-16 complete; 22-24 starts after the window
        assert m.pause_count == 2
        assert m.pause_frequency == pytest.approx(0.1)
        assert m.pause_intensity == pytest.approx(0.2)

    @pytest.mark.parametrize("window", [(5.0, 5.0), (6.0, 2.0)])
    def test_bad_window(self, window):
        with pytest.raises(DomainError):
            compute_metrics(periodic(2), window=window)

    def test_count_grows_with_window(self):
        """Widening the window never loses completed pauses."""
        tr = periodic(10)
        counts = [compute_metrics(tr, window=(0.0, end)).pause_count for end in range(10, 90, 5)]
        assert counts == sorted(counts)
        assert counts[-1] == 10

    def test_whole_period_windows_agree(self):
        """Growing the window by whole periods leaves every metric unchanged."""
        tr = periodic(10)
        first = compute_metrics(tr, window=(6.0, 14.0))
        for k in range(2, 10):
            m = compute_metrics(tr, window=(6.0, 6.0 + 8.0 * k))
            assert m.pause_count == k
            assert m.mean_pause_duration == pytest.approx(first.mean_pause_duration, abs=1e-9)
            assert m.pause_frequency == pytest.approx(first.pause_frequency, abs=1e-9)
            assert m.pause_intensity == pytest.approx(first.pause_intensity, abs=1e-9)
            assert m.paused_fraction == pytest.approx(first.paused_fraction, abs=1e-9)

    def test_whole_cycles_paused_fraction_equals_pi(self):
        """With whole cycles in the window, PI is the paused share of time."""
        m = compute_metrics(periodic(8, play=5.0, pause=3.0))
        assert m.pause_count == 7
        assert m.pause_intensity == pytest.approx(m.paused_fraction)
        assert m.pause_intensity == pytest.approx(3.0 / 8.0)

    def test_as_dict_rounds(self):
        m = compute_metrics(trace(("play_start", 0.0), ("pause_start", 1.0), ("play_start", 2.0), session_end=4.0))
        d = m.as_dict(digits=3)
        assert d["pause_intensity"] == pytest.approx(0.333)
        assert d["pause_count"] == 1
        assert d["window"] == [1.0, 4.0]


class TestTraceFiles:
    """CSV ingestion and canonical serialization."""

    def test_ingest(self, tmp_path):
        path = tmp_path / "trace.csv"
        path.write_text(
            "time_s,event\n0,play_start\n10,pause_start\n\n14,play_start\n40,session_end\n",
            encoding="utf-8",
        )
        tr = ingest_trace(path)
        assert tr.pause_intervals() == [(10.0, 14.0)]
        assert tr.session_end == 40.0

    def test_round_trip(self, tmp_path):
        original = periodic(3, play=1.25, pause=0.5)
        path = serialize_trace(original, tmp_path / "out" / "trace.csv")
        lines = path.read_text(encoding="utf-8").splitlines()
        assert lines[0] == "time_s,event"
        assert lines[1] == "0.000000000,play_start"
        assert lines[-1].endswith(",session_end")
        assert ingest_trace(path) == original

    def test_missing_file(self, tmp_path):
        with pytest.raises(FileNotFoundError):
            ingest_trace(tmp_path / "absent.csv")

    @pytest.mark.parametrize(
        "text, line",
        [
            ("time,event\n0,play_start\n", 1),
            ("time_s,event\n0,play_start\nabc,pause_start\n", 3),
            ("time_s,event\n0,play_start\n5,stall\n", 3),
            ("time_s,event\n0,play_start\n5,play_start\n", 3),
            ("time_s,event\n0,play_start\n5,pause_start,extra\n", 3),
            ("time_s,event\n0,play_start\n9,session_end\n10,pause_start\n", 4),
        ],
    )
    def test_malformed_names_line(self, tmp_path, text, line):
        """Errors carry the offending 1-based line number."""
        path = tmp_path / "bad.csv"
        path.write_text(text, encoding="utf-8")
        with pytest.raises(TraceFormatError, match=f"line {line}:") as excinfo:
            ingest_trace(path)
        assert excinfo.value.line == line
