"""
Tests for the playout-buffer simulator and trace synthesis.
"""

import numpy as np
import pytest

from pause_intensity.errors import DomainError
from pause_intensity.pi_model import critical_points
from pause_intensity.simulator import (
    SWEEP_HEADER,
    SimConfig,
    SimMode,
    SimResult,
    run_replicates,
    run_session,
    session_balance,
    sweep_loss,
    synthesize_trace,
    write_sweep_csv,
)
from pause_intensity.tcp_model import TcpParams, invert_throughput
from pause_intensity.trace_metrics import EmpiricalMetrics, EventKind, compute_metrics

LOSS_GRID = [round(0.005 * i, 3) for i in range(1, 25)]


@pytest.fixture(scope="module")
def half_rate_loss():
    """Loss rate whose Reno throughput is exactly lambda / 2."""
    return invert_throughput(50_000.0, TcpParams.simulation_defaults())


def metrics(pause, freq, pi):
    return EmpiricalMetrics(pause, 1, freq, pi, pi, (0.0, 1.0))


class TestSimConfig:
    """Validation of the simulation setup."""

    def test_defaults(self):
        cfg = SimConfig()
        assert cfg.playout_rate == 100_000.0
        assert cfg.step == 0.1
        assert cfg.mode is SimMode.DETERMINISTIC
        assert cfg.buffer.fluctuation_area == 198_500.0

    def test_mode_from_string(self):
        assert SimConfig(mode="stochastic").mode is SimMode.STOCHASTIC

    @pytest.mark.parametrize(
        "kwargs",
        [
            {"step": 0.0},
            {"session_length": 5.0},
            {"playout_rate": 0.0},
            {"loss_rate": 0.0},
            {"loss_rate": 0.2},
        ],
    )
    def test_invalid(self, kwargs):
        with pytest.raises(DomainError):
            SimConfig(**kwargs)

    def test_with_loss_and_seed(self):
        cfg = SimConfig().with_loss(0.05).with_seed(7)
        assert (cfg.loss_rate, cfg.seed) == (0.05, 7)


class TestSimResult:
    """Aggregation of runs."""

    def test_sample_std(self):
        """Two runs use the n - 1 denominator."""
        result = SimResult.from_runs([metrics(2.0, 0.1, 0.2), metrics(4.0, 0.3, 0.4)])
        assert result.mean_pause_duration == pytest.approx(3.0)
        assert result.std_pause_duration == pytest.approx(np.sqrt(2.0))
        assert result.pause_intensity == pytest.approx(0.3)
        assert result.std_pause_frequency == pytest.approx(np.sqrt(0.02))

    def test_single_run(self):
        result = SimResult.from_runs([metrics(2.0, 0.1, 0.2)])
        assert result.std_pause_intensity == 0.0
        assert result.std_pause_duration == 0.0

    def test_no_pauses(self):
        result = SimResult.from_runs([EmpiricalMetrics(None, 0, 0.0, 0.0, 0.0, (0.0, 1.0))])
        assert result.mean_pause_duration is None
        assert result.std_pause_duration is None

    def test_empty(self):
        with pytest.raises(DomainError):
            SimResult.from_runs([])


class TestRunSession:
    """Single deterministic and stochastic sessions."""

    def test_half_rate_cycles(self, half_rate_loss):
        """eta = lambda/2 reproduces the closed-form cycle."""
        trace, result = run_session(SimConfig(loss_rate=half_rate_loss, session_length=1_000.0))
        assert trace.events[0].kind is EventKind.PLAY_START
        assert trace.events[0].time == pytest.approx(4.0)
        assert trace.events[1].time == pytest.approx(7.97)
        assert result.pause_intensity == pytest.approx(0.5, abs=0.01)
        assert result.pause_frequency == pytest.approx(0.126, abs=0.003)
        assert result.mean_pause_duration == pytest.approx(3.97, abs=0.05)

    def test_low_loss_never_pauses(self):
        """Below p0 the buffer only grows after start-up."""
        trace, result = run_session(SimConfig(loss_rate=0.005, session_length=1_000.0))
        assert len(trace) == 1
        assert result.pause_intensity == 0.0
        assert result.mean_pause_duration is None

    def test_initial_fill_is_not_a_pause(self):
        """The first event is the start of playback."""
        trace, _ = run_session(SimConfig(loss_rate=0.08, session_length=500.0))
        assert trace.events[0].kind is EventKind.PLAY_START
        assert trace.pause_starts[0] > trace.events[0].time

    @pytest.mark.parametrize("mode", [SimMode.DETERMINISTIC, SimMode.STOCHASTIC])
    def test_reproducible(self, mode):
        """Same configuration and seed, same trace."""
        cfg = SimConfig(mode=mode, session_length=500.0, seed=4)
        assert run_session(cfg)[0] == run_session(cfg)[0]

    def test_seeds_differ(self):
        cfg = SimConfig(mode=SimMode.STOCHASTIC, session_length=500.0)
        assert run_session(cfg.with_seed(1))[0] != run_session(cfg.with_seed(2))[0]

    @pytest.mark.parametrize("mode", [SimMode.DETERMINISTIC, SimMode.STOCHASTIC])
    def test_conservation(self, mode):
        """Inflow minus outflow equals the final occupancy."""
        inflow, outflow, final = session_balance(SimConfig(mode=mode, session_length=1_000.0))
        assert inflow - outflow == pytest.approx(final, abs=1e-6 * inflow)

    def test_occupancy_stays_in_bounds(self):
        """Recorded breakpoints never drop below q_min once playback starts."""
        cfg = SimConfig(mode=SimMode.STOCHASTIC, session_length=500.0, record_occupancy=True)
        trace, _ = run_session(cfg)
        samples = trace.occupancy_samples
        assert samples is not None
        assert np.all(np.diff(samples[:, 0]) >= 0)
        playing = samples[samples[:, 0] >= trace.events[0].time, 1]
        assert playing.min() >= cfg.buffer.q_min - 1e-6

    def test_trace_metrics_match(self, half_rate_loss):
        """The session result is compute_metrics of its own trace."""
        trace, result = run_session(SimConfig(loss_rate=half_rate_loss, session_length=300.0))
        assert result.runs[0] == compute_metrics(trace)


class TestReplicatesAndSweep:
    """Repeated runs and loss sweeps."""

    def test_runs_validation(self):
        with pytest.raises(DomainError):
            run_replicates(SimConfig(), 0)

    def test_stochastic_spread_shrinks(self):
        """Longer sessions give a tighter spread of PI across runs."""
        short = run_replicates(
            SimConfig(mode=SimMode.STOCHASTIC, session_length=500.0, seed=10), 12
        )
        long = run_replicates(
            SimConfig(mode=SimMode.STOCHASTIC, session_length=4_000.0, seed=10), 12
        )
        assert len(short.runs) == 12
        assert long.std_pause_intensity < short.std_pause_intensity

    def test_sweep_agrees_with_model(self):
        """Deterministic sweep within 0.02 PI and 5% frequency and duration of the model."""
        rows = sweep_loss(SimConfig(session_length=2_000.0), [0.015, 0.035, 0.06, 0.1], 1)
        for row in rows:
            assert row.sim.pause_intensity == pytest.approx(row.model_pi, abs=0.02)
            assert row.sim.pause_frequency == pytest.approx(row.model_freq, rel=0.05)
            assert row.sim.mean_pause_duration == pytest.approx(row.model_dur, rel=0.05)

    def test_sweep_shape(self, tmp_path):
        """Frequency peaks near p1; pause duration and PI never fall as loss grows."""
        cfg = SimConfig(session_length=2_000.0)
        rows = sweep_loss(cfg, LOSS_GRID, 1)
        cp = critical_points(cfg.tcp, cfg.caps, cfg.playout_rate)
        peak = max(rows, key=lambda row: row.sim.pause_frequency)
        assert abs(peak.loss - cp.p1) <= 0.01
        durations = [row.sim.mean_pause_duration for row in rows if row.sim.mean_pause_duration]
        assert all(b >= a for a, b in zip(durations, durations[1:]))
        pis = [row.sim.pause_intensity for row in rows]
        assert all(b >= a - 1e-9 for a, b in zip(pis, pis[1:]))
        assert pis[-1] > pis[0]

        text = write_sweep_csv(rows, tmp_path / "sweep.csv").read_text(encoding="utf-8")
        lines = text.splitlines()
        assert lines[0] == ",".join(SWEEP_HEADER)
        assert len(lines) == 25

    @pytest.mark.parametrize("grid", [[], [0.0], [0.13]])
    def test_sweep_grid_validation(self, grid):
        with pytest.raises(DomainError):
            sweep_loss(SimConfig(), grid)


class TestSynthesizeTrace:
    """Periodic traces with prescribed frequency and pause duration."""

    def test_example(self):
        """f = 0.11 /s and 3.97 s pauses give PI 0.4367."""
        result = compute_metrics(synthesize_trace(0.11, 3.97))
        assert result.pause_intensity == pytest.approx(0.4367, abs=1e-4)
        assert result.pause_frequency == pytest.approx(0.11)
        assert result.mean_pause_duration == pytest.approx(3.97)

    def test_equal_pi_different_shape(self):
        """Many short pauses and few long ones can share the same PI."""
        frequent = compute_metrics(synthesize_trace(0.25, 1.0, 200.0))
        rare = compute_metrics(synthesize_trace(0.05, 5.0, 200.0))
        assert frequent.pause_intensity == pytest.approx(0.25)
        assert rare.pause_intensity == pytest.approx(0.25)
        assert frequent.pause_frequency > rare.pause_frequency

    def test_random_targets(self):
        """compute_metrics recovers f, d and f * d on random targets."""
        rng = np.random.default_rng(99)
        for _ in range(100):
            f = rng.uniform(0.01, 1.0)
            d = rng.uniform(0.01, 0.95) / f
            result = compute_metrics(synthesize_trace(f, d, 1_000.0))
            assert result.pause_frequency == pytest.approx(f, rel=1e-9)
            assert result.mean_pause_duration == pytest.approx(d, rel=1e-9)
            assert result.pause_intensity == pytest.approx(f * d, rel=1e-9)

    def test_single_cycle(self):
        """One 50 s period fits a 90 s session and still gives back f, d and f * d."""
        trace = synthesize_trace(0.02, 5.0, 90.0)
        assert trace.pause_intervals() == [(40.0, 45.0)]
        result = compute_metrics(trace)
        assert result.window == (40.0, 90.0)
        assert result.pause_frequency == pytest.approx(0.02, rel=1e-9)
        assert result.mean_pause_duration == pytest.approx(5.0, rel=1e-9)
        assert result.pause_intensity == pytest.approx(0.1, rel=1e-9)

    def test_low_and_high_frequency_pair(self):
        """f = 0.03 and f = 0.25 in a 90 s session measure the same PI."""
        low = compute_metrics(synthesize_trace(0.03, 0.25 / 0.03, 90.0))
        high = compute_metrics(synthesize_trace(0.25, 1.0, 90.0))
        assert low.pause_intensity == pytest.approx(high.pause_intensity, abs=1e-9)
        assert low.pause_intensity == pytest.approx(0.25, abs=1e-9)
        assert high.pause_frequency > 8 * low.pause_frequency

    @pytest.mark.parametrize(
        "f, d, length",
        [(0.5, 2.0, 90.0), (0.2, 6.0, 90.0), (0.0, 1.0, 90.0), (0.01, 1.0, 90.0), (0.02, 1.0, 50.0)],
    )
    def test_invalid(self, f, d, length):
        """f * d >= 1, non-positive values and sessions shorter than one period plus play are rejected."""
        with pytest.raises(DomainError):
            synthesize_trace(f, d, length)
