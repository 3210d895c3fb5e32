"""
Closed-form Pause Intensity model.

With the throughput held at its operating point eta and a constant playout
rate lambda, a pause lasts q0/eta (refill to q_max) and the following play
lasts q0/(lambda - eta) (drain to q_min). Everything else follows from those
two durations.
"""

import logging
import math
from collections.abc import Iterable
from dataclasses import dataclass
from enum import Enum
from typing import Optional

import numpy as np

from pause_intensity.errors import DomainError, OutOfRangeError
from pause_intensity.tcp_model import (
    MAX_LOSS_RATE,
    P_FLOOR,
    LinkConstraints,
    LossRate,
    TcpParams,
    Throughput,
    capped_max_throughput,
    effective_throughput,
    invert_throughput,
    reno_throughput_timeout,
)

logger = logging.getLogger(__name__)

PlayoutRate = float


class Region(str, Enum):
    """Loss regions delimited by the critical points p0 and p1."""

    A = "A"  # eta > lambda, pauses unlikely
    B = "B"  # pauses occur, play outlasts pause
    C = "C"  # pause outlasts play


@dataclass(frozen=True)
class PauseMetrics:
    """
    Model output at one operating point.

    Durations are ``None`` and ``period`` is infinite in the no-pause regime,
    which ``no_pause`` flags.
    """

    avg_pause_duration: Optional[float]
    avg_play_duration: Optional[float]
    period: float
    pause_frequency: float
    pause_intensity: float
    period_sensitivity: Optional[float]
    no_pause: bool = False


@dataclass(frozen=True)
class CriticalPoints:
    """
    Loss rates where eta(p0) = lambda and eta(p1) = lambda / 2.

    ``always_pause`` marks a playout rate the capped link can never sustain, in
    which case p0 is reported as 0. ``caps_bind`` is set when the capped maximum
    throughput lies below lambda, so region A is empty in practice.
    """

    p0: LossRate
    p1: LossRate
    playout_rate: PlayoutRate
    capped_max_throughput: Throughput
    always_pause: bool = False
    caps_bind: bool = False

    @property
    def frequency_peak_loss(self) -> LossRate:
        """Loss rate of the pause-frequency maximum, which coincides with p1."""
        return self.p1


@dataclass(frozen=True)
class PauseEventTimestamps:
    """One pause-play cycle: pause at t_v1, resume at t_max, next pause at t_v2."""

    pause_start: float
    resume: float
    next_pause: float

    def __post_init__(self) -> None:
        if not self.pause_start < self.resume < self.next_pause:
            raise DomainError(
                "timestamps must satisfy pause_start < resume < next_pause, got "
                f"{self.pause_start}, {self.resume}, {self.next_pause}"
            )


@dataclass(frozen=True)
class ModelRow:
    """One row of a model sweep over loss rates."""

    loss: LossRate
    throughput: Throughput
    metrics: PauseMetrics
    region: Region


def _check_positive(name: str, value: float) -> None:
    if not (math.isfinite(value) and value > 0):
        raise DomainError(f"{name} must be positive and finite, got {value}")


def pause_play_metrics(eta: Throughput, playout_rate: PlayoutRate, q0: float) -> PauseMetrics:
    """
    Average pause and play durations, period, frequency and PI at throughput ``eta``.

    Args:
        eta: Operating-point throughput in bytes/second
        playout_rate: Playout rate lambda in bytes/second
        q0: Fluctuation area q_max - q_min in bytes

    Returns:
        PauseMetrics: flagged as ``no_pause`` when eta >= lambda

    Raises:
        DomainError: If eta, lambda or q0 is not positive
    """
    _check_positive("eta", eta)
    _check_positive("playout_rate", playout_rate)
    _check_positive("q0", q0)

    if eta >= playout_rate:
        return PauseMetrics(
            avg_pause_duration=None,
            avg_play_duration=None,
            period=math.inf,
            pause_frequency=0.0,
            pause_intensity=0.0,
            period_sensitivity=None,
            no_pause=True,
        )

    slack = playout_rate - eta
    pause = q0 / eta
    play = q0 / slack
    return PauseMetrics(
        avg_pause_duration=pause,
        avg_play_duration=play,
        period=q0 * playout_rate / (eta * slack),
        pause_frequency=eta * slack / (q0 * playout_rate),
        pause_intensity=1.0 - eta / playout_rate,
        period_sensitivity=period_sensitivity(eta, playout_rate, q0),
    )


def pause_intensity(eta: Throughput, playout_rate: PlayoutRate) -> float:
    """PI = max(0, 1 - eta/lambda); it does not depend on q0."""
    _check_positive("playout_rate", playout_rate)
    if not eta >= 0:
        raise DomainError(f"eta must be non-negative, got {eta}")
    return max(0.0, 1.0 - eta / playout_rate)


def period_sensitivity(eta: Throughput, playout_rate: PlayoutRate, q0: float) -> float:
    """
    beta = dw/deta = q0 * (-lambda * (lambda - 2 eta)) / (eta * (lambda - eta))^2.

    Negative below eta = lambda/2, zero there, positive above.

    Raises:
        DomainError: If eta lies outside (0, lambda)
    """
    _check_positive("playout_rate", playout_rate)
    _check_positive("q0", q0)
    if not 0 < eta < playout_rate:
        raise DomainError(f"eta must lie in (0, {playout_rate}), got {eta}")
    return q0 * (-playout_rate * (playout_rate - 2.0 * eta)) / (eta * (playout_rate - eta)) ** 2


def period_differential(
    eta: Throughput, playout_rate: PlayoutRate, q0: float
) -> tuple[float, float]:
    """Partial derivatives (dw/deta, dw/dlambda) of the period w(eta, lambda)."""
    d_eta = period_sensitivity(eta, playout_rate, q0)
    d_lambda = -q0 / (playout_rate - eta) ** 2
    return d_eta, d_lambda


def frequency_peak(playout_rate: PlayoutRate, q0: float) -> tuple[Throughput, float]:
    """Throughput and value of the pause-frequency maximum: (lambda/2, lambda/(4 q0))."""
    _check_positive("playout_rate", playout_rate)
    _check_positive("q0", q0)
    return playout_rate / 2.0, playout_rate / (4.0 * q0)


def pause_event_timestamps(
    pause_start: float, eta: Throughput, playout_rate: PlayoutRate, q0: float
) -> PauseEventTimestamps:
    """Timeline of one cycle starting with a pause at ``pause_start``."""
    metrics = pause_play_metrics(eta, playout_rate, q0)
    if metrics.no_pause:
        raise DomainError(
            f"no pause cycle exists when eta ({eta}) >= playout rate ({playout_rate})"
        )
    assert metrics.avg_pause_duration is not None and metrics.avg_play_duration is not None
    resume = pause_start + metrics.avg_pause_duration
    return PauseEventTimestamps(pause_start, resume, resume + metrics.avg_play_duration)


def critical_points(
    params: TcpParams,
    caps: LinkConstraints,
    playout_rate: PlayoutRate,
) -> CriticalPoints:
    """
    Critical loss rates p0 and p1 from the uncapped Reno curve.

    When lambda cannot be reached at any admissible loss rate (above the capped
    maximum, or above the Reno throughput at the loss floor) pauses happen for
    every p: p0 is reported as 0 with ``always_pause`` set. p1 always comes from
    the uncapped curve and is 0 only when lambda/2 exceeds the Reno throughput
    at the loss floor.

    Raises:
        OutOfRangeError: If lambda/2 is below the throughput at the largest loss rate
    """
    _check_positive("playout_rate", playout_rate)
    cap = capped_max_throughput(params, caps)
    reno_ceiling = reno_throughput_timeout(P_FLOOR, params)
    floor = reno_throughput_timeout(MAX_LOSS_RATE, params)
    half = playout_rate / 2.0

    if half < floor:
        raise OutOfRangeError(
            f"playout rate {playout_rate:.6g} B/s puts the frequency peak below the "
            f"throughput at loss {MAX_LOSS_RATE} ({floor:.6g} B/s)"
        )

    always_pause = playout_rate > min(cap, reno_ceiling)
    if always_pause:
        logger.warning(
            "playout rate %.6g B/s is never reached (capped maximum %.6g B/s); pauses occur at every loss rate",
            playout_rate,
            cap,
        )
        p0 = 0.0
    else:
        p0 = invert_throughput(playout_rate, params)

    p1 = 0.0 if half > reno_ceiling else invert_throughput(half, params)
    return CriticalPoints(
        p0=p0,
        p1=p1,
        playout_rate=playout_rate,
        capped_max_throughput=cap,
        always_pause=always_pause,
        caps_bind=cap < playout_rate,
    )


def classify_region(p: LossRate, cp: CriticalPoints) -> Region:
    """A below p0, B in [p0, p1), C from p1 upward."""
    if p < cp.p0:
        return Region.A
    if p < cp.p1:
        return Region.B
    return Region.C


def model_sweep(
    params: TcpParams,
    caps: LinkConstraints,
    playout_rate: PlayoutRate,
    q0: float,
    loss_grid: Iterable[LossRate],
) -> list[ModelRow]:
    """
    Evaluate the model at every loss rate of ``loss_grid``.

    The operating point is the capped throughput, so loss rates where the cap
    exceeds lambda land in the no-pause regime.
    """
    losses = np.asarray(list(loss_grid), dtype=float)
    if losses.size == 0:
        raise DomainError("loss grid must not be empty")
    cp = critical_points(params, caps, playout_rate)
    throughputs = np.atleast_1d(effective_throughput(losses, params, caps))

    rows = []
    for loss, eta in zip(losses.tolist(), throughputs.tolist()):
        rows.append(
            ModelRow(
                loss=loss,
                throughput=eta,
                metrics=pause_play_metrics(eta, playout_rate, q0),
                region=classify_region(loss, cp),
            )
        )
    logger.info("model sweep over %d loss rates (p0=%.6g, p1=%.6g)", len(rows), cp.p0, cp.p1)
    return rows
