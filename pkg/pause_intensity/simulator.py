"""
Segment-granularity playout-buffer simulator.

Throughput is piecewise constant over steps of length ``step``: constant at
the effective throughput of the nominal loss rate in deterministic mode, or
redrawn every step from a mean-matched Gamma loss law in stochastic mode.
Between rate changes the occupancy is linear, so threshold crossings are
located exactly inside a step.

Buffer rules: the session starts empty and filling; playback starts when the
occupancy reaches q_max (initial delay, not a pause), pauses when it falls to
q_min and resumes once it is back at q_max.
"""

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass, field, replace
from enum import Enum
from pathlib import Path
from typing import Optional, Union

import numpy as np

from pause_intensity.errors import DomainError
from pause_intensity.loss_distribution import GammaParams, sample_loss_rates
from pause_intensity.pause_statistics import BufferThresholds
from pause_intensity.pi_model import PlayoutRate, model_sweep
from pause_intensity.tcp_model import (
    MAX_LOSS_RATE,
    LinkConstraints,
    LossRate,
    TcpParams,
    effective_throughput,
)
from pause_intensity.trace_metrics import (
    EmpiricalMetrics,
    EventKind,
    SessionTrace,
    TraceEvent,
    compute_metrics,
)
from shared.utils import write_csv

logger = logging.getLogger(__name__)

SWEEP_HEADER = (
    "loss",
    "model_pi",
    "sim_pi_mean",
    "sim_pi_std",
    "model_freq",
    "sim_freq_mean",
    "sim_freq_std",
    "model_dur",
    "sim_dur_mean",
    "sim_dur_std",
)


class SimMode(str, Enum):
    DETERMINISTIC = "deterministic"
    STOCHASTIC = "stochastic"


class _State(Enum):
    FILLING = "filling"
    PLAYING = "playing"
    PAUSED = "paused"


@dataclass(frozen=True)
class SimConfig:
    """Simulation setup; defaults reproduce the validation setup at 3.5% loss."""

    tcp: TcpParams = field(default_factory=TcpParams.simulation_defaults)
    caps: LinkConstraints = field(default_factory=LinkConstraints.simulation_defaults)
    buffer: BufferThresholds = field(default_factory=BufferThresholds.simulation_defaults)
    playout_rate: PlayoutRate = 100_000.0
    step: float = 0.1
    session_length: float = 10_000.0
    mode: SimMode = SimMode.DETERMINISTIC
    loss_rate: LossRate = 0.035
    loss_jitter: GammaParams = field(default_factory=GammaParams)
    seed: int = 0
    record_occupancy: bool = False

    def __post_init__(self) -> None:
        object.__setattr__(self, "mode", SimMode(self.mode))
        if not self.step > 0:
            raise DomainError(f"step must be positive, got {self.step}")
        if not self.session_length >= 100 * self.step:
            raise DomainError(
                f"session_length must be at least 100 steps ({100 * self.step} s), "
                f"got {self.session_length}"
            )
        if not self.playout_rate > 0:
            raise DomainError(f"playout_rate must be positive, got {self.playout_rate}")
        if not 0 < self.loss_rate <= MAX_LOSS_RATE:
            raise DomainError(f"loss_rate must lie in (0, {MAX_LOSS_RATE}], got {self.loss_rate}")

    def with_loss(self, loss_rate: LossRate) -> "SimConfig":
        return replace(self, loss_rate=loss_rate)

    def with_seed(self, seed: int) -> "SimConfig":
        return replace(self, seed=seed)


@dataclass(frozen=True)
class SimResult:
    """Metrics of one or more runs with their mean and sample standard deviation."""

    runs: tuple[EmpiricalMetrics, ...]
    mean_pause_duration: Optional[float]
    pause_frequency: float
    pause_intensity: float
    std_pause_duration: Optional[float]
    std_pause_frequency: float
    std_pause_intensity: float

    @classmethod
    def from_runs(cls, runs: Iterable[EmpiricalMetrics]) -> "SimResult":
        runs = tuple(runs)
        if not runs:
            raise DomainError("at least one run is required")
        ddof = 1 if len(runs) > 1 else 0
        freq = np.array([r.pause_frequency for r in runs])
        pi = np.array([r.pause_intensity for r in runs])
        durations = np.array(
            [r.mean_pause_duration for r in runs if r.mean_pause_duration is not None]
        )
        if durations.size:
            dur_mean: Optional[float] = float(durations.mean())
            dur_std: Optional[float] = (
                float(durations.std(ddof=1)) if durations.size > 1 else 0.0
            )
        else:
            dur_mean = dur_std = None
        return cls(
            runs=runs,
            mean_pause_duration=dur_mean,
            pause_frequency=float(freq.mean()),
            pause_intensity=float(pi.mean()),
            std_pause_duration=dur_std,
            std_pause_frequency=float(freq.std(ddof=ddof)),
            std_pause_intensity=float(pi.std(ddof=ddof)),
        )


@dataclass(frozen=True)
class SweepRow:
    loss: LossRate
    model_pi: float
    model_freq: float
    model_dur: Optional[float]
    sim: SimResult

    def as_csv_row(self) -> tuple[Optional[float], ...]:
        return (
            self.loss,
            self.model_pi,
            self.sim.pause_intensity,
            self.sim.std_pause_intensity,
            self.model_freq,
            self.sim.pause_frequency,
            self.sim.std_pause_frequency,
            self.model_dur,
            self.sim.mean_pause_duration,
            self.sim.std_pause_duration,
        )


def _rate_runs(cfg: SimConfig) -> list[tuple[float, float, float]]:
    """Piecewise-constant throughput as (start, end, rate) runs covering the session."""
    # A law truncated at 0.12 only has mean 0.12 as a point mass there.
    if cfg.mode is SimMode.DETERMINISTIC or cfg.loss_rate >= MAX_LOSS_RATE:
        eta = float(effective_throughput(cfg.loss_rate, cfg.tcp, cfg.caps))
        return [(0.0, cfg.session_length, eta)]

    n_steps = int(math.ceil(cfg.session_length / cfg.step - 1e-9))
    jitter = cfg.loss_jitter.mean_matched(cfg.loss_rate)
    losses = sample_loss_rates(jitter, cfg.seed, n_steps)
    rates = np.asarray(effective_throughput(losses, cfg.tcp, cfg.caps), dtype=float)

    bounds = np.minimum(np.arange(n_steps + 1) * cfg.step, cfg.session_length)
    change = np.flatnonzero(np.diff(rates) != 0) + 1
    starts = np.concatenate(([0], change))
    ends = np.concatenate((change, [n_steps]))
    return [
        (float(bounds[s]), float(bounds[e]), float(rates[s]))
        for s, e in zip(starts.tolist(), ends.tolist())
    ]


def run_session(cfg: SimConfig) -> tuple[SessionTrace, SimResult]:
    """
    Simulate one session and measure it with :func:`compute_metrics`.

    Returns:
        The event trace (with occupancy breakpoints when ``record_occupancy``)
        and a single-run SimResult
    """
    q_min = cfg.buffer.q_min
    q_max = cfg.buffer.q_max
    playout = cfg.playout_rate

    state = _State.FILLING
    q = 0.0
    inflow = 0.0
    outflow = 0.0
    events: list[TraceEvent] = []
    samples: list[tuple[float, float]] = [(0.0, 0.0)]

    for start, end, eta in _rate_runs(cfg):
        t = start
        while t < end:
            span = end - t
            if state is _State.PLAYING:
                if eta < playout:
                    to_pause = max(0.0, (q - q_min) / (playout - eta))
                    if to_pause <= span:
                        t += to_pause
                        inflow += eta * to_pause
                        outflow += playout * to_pause
                        q = q_min
                        state = _State.PAUSED
                        events.append(TraceEvent(EventKind.PAUSE_START, t))
                        samples.append((t, q))
                        continue
                inflow += eta * span
                outflow += playout * span
                q += (eta - playout) * span
            else:
                to_resume = max(0.0, (q_max - q) / eta)
                if to_resume <= span:
                    t += to_resume
                    inflow += eta * to_resume
                    q = q_max
                    state = _State.PLAYING
                    events.append(TraceEvent(EventKind.PLAY_START, t))
                    samples.append((t, q))
                    continue
                inflow += eta * span
                q += eta * span
            t = end
        samples.append((end, q))

    occupancy = np.array(samples) if cfg.record_occupancy else None
    trace = SessionTrace(tuple(events), cfg.session_length, occupancy)
    metrics = compute_metrics(trace)
    logger.debug(
        "session loss=%.6g seed=%d: %d events, inflow %.6g B, outflow %.6g B, final %.6g B",
        cfg.loss_rate,
        cfg.seed,
        len(events),
        inflow,
        outflow,
        q,
    )
    return trace, SimResult.from_runs([metrics])


def session_balance(cfg: SimConfig) -> tuple[float, float, float]:
    """(total inflow, total outflow, final occupancy) of one session, in bytes."""
    trace, _ = run_session(replace(cfg, record_occupancy=True))
    assert trace.occupancy_samples is not None
    final = float(trace.occupancy_samples[-1, 1])

    inflow = 0.0
    outflow = 0.0
    playing_since: Optional[float] = None
    for event in trace.events:
        if event.kind is EventKind.PLAY_START:
            playing_since = event.time
        elif playing_since is not None:
            outflow += cfg.playout_rate * (event.time - playing_since)
            playing_since = None
    if playing_since is not None:
        outflow += cfg.playout_rate * (cfg.session_length - playing_since)
    for start, end, eta in _rate_runs(cfg):
        inflow += eta * (end - start)
    return inflow, outflow, final


def run_replicates(cfg: SimConfig, runs: int) -> SimResult:
    """Run ``runs`` sessions with seeds ``cfg.seed + i``."""
    if runs < 1:
        raise DomainError(f"runs must be >= 1, got {runs}")
    metrics = [run_session(cfg.with_seed(cfg.seed + i))[1].runs[0] for i in range(runs)]
    return SimResult.from_runs(metrics)


def sweep_loss(
    cfg: SimConfig,
    loss_grid: Iterable[LossRate],
    runs_per_point: int = 10,
) -> list[SweepRow]:
    """
    Simulated metrics at every loss rate next to the closed-form model.

    Raises:
        DomainError: If the grid is empty, leaves (0, 0.12], or runs_per_point < 1
    """
    losses = [float(p) for p in loss_grid]
    if not losses:
        raise DomainError("loss grid must not be empty")
    for p in losses:
        if not 0 < p <= MAX_LOSS_RATE:
            raise DomainError(f"loss grid values must lie in (0, {MAX_LOSS_RATE}], got {p}")
    if runs_per_point < 1:
        raise DomainError(f"runs_per_point must be >= 1, got {runs_per_point}")

    model = model_sweep(
        cfg.tcp, cfg.caps, cfg.playout_rate, cfg.buffer.fluctuation_area, losses
    )
    rows = []
    for loss, model_row in zip(losses, model):
        sim = run_replicates(cfg.with_loss(loss), runs_per_point)
        logger.info(
            "loss %.4f: model PI %.4f, simulated PI %.4f +/- %.4f",
            loss,
            model_row.metrics.pause_intensity,
            sim.pause_intensity,
            sim.std_pause_intensity,
        )
        rows.append(
            SweepRow(
                loss=loss,
                model_pi=model_row.metrics.pause_intensity,
                model_freq=model_row.metrics.pause_frequency,
                model_dur=model_row.metrics.avg_pause_duration,
                sim=sim,
            )
        )
    return rows


def write_sweep_csv(rows: Iterable[SweepRow], path: Union[str, Path]) -> Path:
    return write_csv(path, SWEEP_HEADER, (row.as_csv_row() for row in rows))


def synthesize_trace(
    target_frequency: float,
    target_pause_duration: float,
    session_length: float = 90.0,
) -> SessionTrace:
    """
    Periodic trace with one pause of ``target_pause_duration`` per period 1/f.

    Play starts at 0. With two or more periods in the session, each period
    ends with its pause, so the k-th pause runs from (k+1)w - d to (k+1)w.
    A session holding a single period puts its one cycle (pause, then play)
    at the end, starting w before the session end, so the default window of
    :func:`compute_metrics` spans exactly one period.

    Raises:
        DomainError: If f * d >= 1, a value is not positive, or no full cycle
            fits after the opening play
    """
    f, d, length = target_frequency, target_pause_duration, session_length
    if not (f > 0 and d > 0 and length > 0):
        raise DomainError(
            f"frequency, duration and session length must be positive, got {f}, {d}, {length}"
        )
    if f * d >= 1:
        raise DomainError(f"frequency x duration must be below 1, got {f * d}")
    period = 1.0 / f
    if not period < length:
        raise DomainError(
            f"session of {length} s leaves no play before a full period of {period:.6g} s"
        )

    events = [TraceEvent(EventKind.PLAY_START, 0.0)]
    if 2 * period > length:
        pause_start = length - period
        events.append(TraceEvent(EventKind.PAUSE_START, pause_start))
        events.append(TraceEvent(EventKind.PLAY_START, pause_start + d))
        return SessionTrace(tuple(events), length)

    k = 0
    while (k + 1) * period <= length:
        events.append(TraceEvent(EventKind.PAUSE_START, (period - d) + k * period))
        events.append(TraceEvent(EventKind.PLAY_START, (k + 1) * period))
        k += 1
    return SessionTrace(tuple(events), length)
