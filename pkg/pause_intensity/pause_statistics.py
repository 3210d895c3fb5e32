"""
Pause and play duration distributions from the throughput density.

The buffer is observed in segments of length dt. Occupancy gained after m
segments is dt * sum(eta_i); with i.i.d. segment throughputs the sum is close
to normal with mean m * mu and variance m * sigma^2. Evaluating that normal at
the fluctuation area q0 for each m gives the probability of a pause (or play)
lasting m segments. A Monte Carlo first-passage oracle checks the construction.
"""

import logging
from dataclasses import dataclass
from pathlib import Path
from typing import Union

import numpy as np

from pause_intensity.errors import ConvergenceError, DomainError, NoPauseRegimeError
from pause_intensity.loss_distribution import DensityCurve, RandomState, distribution_moments
from shared.utils import write_csv

logger = logging.getLogger(__name__)

MIN_TRIALS = 10_000
MAX_PASSAGE_SEGMENTS = 10_000_000
# Share of the m grid, counted from its top, whose mass flags truncation.
BOUNDARY_FRACTION = 0.1
BOUNDARY_MASS_LIMIT = 0.1


@dataclass(frozen=True)
class SegmentConfig:
    """Segment length dt in seconds and the largest segment count considered."""

    segment_length: float = 0.1
    max_segments: int = 2000

    def __post_init__(self) -> None:
        if not self.segment_length > 0:
            raise DomainError(f"segment_length must be positive, got {self.segment_length}")
        if self.max_segments < 10:
            raise DomainError(f"max_segments must be >= 10, got {self.max_segments}")


@dataclass(frozen=True)
class BufferThresholds:
    """Playout thresholds in bytes: pause below q_min, resume at q_max."""

    q_min: float
    q_max: float

    def __post_init__(self) -> None:
        if not 0 <= self.q_min < self.q_max:
            raise DomainError(
                f"buffer thresholds need 0 <= q_min < q_max, got q_min={self.q_min}, "
                f"q_max={self.q_max}"
            )

    @property
    def fluctuation_area(self) -> float:
        """q0 = q_max - q_min."""
        return self.q_max - self.q_min

    @classmethod
    def simulation_defaults(cls) -> "BufferThresholds":
        """q_min = 1.5 KB and q_max = 200 KB, so q0 = 198.5 KB."""
        return cls(q_min=1_500.0, q_max=200_000.0)


@dataclass(frozen=True, eq=False)
class DurationDistribution:
    """Probability of each duration m * dt; probabilities sum to one."""

    durations: np.ndarray
    probabilities: np.ndarray
    truncated: bool = False

    def __post_init__(self) -> None:
        durations = np.array(self.durations, dtype=float)
        probabilities = np.array(self.probabilities, dtype=float)
        if durations.ndim != 1 or probabilities.shape != durations.shape or durations.size == 0:
            raise DomainError("durations and probabilities must be non-empty 1-D arrays")
        if np.any(durations <= 0) or np.any(np.diff(durations) <= 0):
            raise DomainError("durations must be positive and strictly ascending")
        if np.any(probabilities < 0):
            raise DomainError("probabilities must be non-negative")
        if abs(probabilities.sum() - 1.0) > 1e-9:
            raise DomainError(f"probabilities sum to {probabilities.sum():.12g}, expected 1")
        durations.setflags(write=False)
        probabilities.setflags(write=False)
        object.__setattr__(self, "durations", durations)
        object.__setattr__(self, "probabilities", probabilities)

    @property
    def mean(self) -> float:
        return float(np.dot(self.durations, self.probabilities))

    @property
    def mode(self) -> float:
        return float(self.durations[int(np.argmax(self.probabilities))])

    def local_maxima(self) -> int:
        """Number of strict local maxima, plateaus counted once."""
        p = self.probabilities
        changes = np.sign(np.diff(p))
        changes = changes[changes != 0]
        peaks = int(np.sum((changes[:-1] > 0) & (changes[1:] < 0)))
        if changes.size and changes[0] < 0:
            peaks += 1
        if changes.size and changes[-1] > 0:
            peaks += 1
        return peaks

    def to_csv(self, path: Union[str, Path]) -> Path:
        rows = ((float(d), float(p)) for d, p in zip(self.durations, self.probabilities))
        return write_csv(path, ("duration_s", "probability"), rows)


def _log_normal_weights(target: float, drift: float, sigma: float, m: np.ndarray) -> np.ndarray:
    return (
        -np.log(sigma)
        - 0.5 * np.log(2 * np.pi * m)
        - (target - m * drift) ** 2 / (2 * m * sigma**2)
    )


def _normal_passage_pmf(
    q0: float,
    drift: float,
    sigma: float,
    seg: SegmentConfig,
) -> DurationDistribution:
    m = np.arange(1, seg.max_segments + 1, dtype=float)
    target = q0 / seg.segment_length
    if sigma <= 0:
        # Constant throughput: a point mass at the nearest segment count.
        log_density = np.where(m == np.clip(np.rint(target / drift), 1, m[-1]), 0.0, -np.inf)
    else:
        log_density = _log_normal_weights(target, drift, sigma, m)
    weights = np.exp(log_density - log_density.max())
    probabilities = weights / weights.sum()

    tail_start = int(np.floor(seg.max_segments * (1 - BOUNDARY_FRACTION)))
    boundary_mass = float(probabilities[tail_start:].sum())
    truncated = boundary_mass > BOUNDARY_MASS_LIMIT
    if truncated:
        logger.warning(
            "max_segments=%d truncates the duration distribution (%.1f%% of mass in the top "
            "decile of the segment grid)",
            seg.max_segments,
            100 * boundary_mass,
        )
    return DurationDistribution(m * seg.segment_length, probabilities, truncated)


def pause_duration_distribution(
    th: DensityCurve,
    buf: BufferThresholds,
    seg: SegmentConfig,
) -> DurationDistribution:
    """
    Pause durations v = m0 * dt, weighted by the normal density of the
    segment-sum at q0 / dt and renormalized over m0 in [1, max_segments].

    Raises:
        DomainError: If the throughput mean is not positive
    """
    mu, sigma = distribution_moments(th)
    if mu <= 0:
        raise DomainError(f"throughput mean must be positive, got {mu}")
    return _normal_passage_pmf(buf.fluctuation_area, mu, sigma, seg)


def play_duration_distribution(
    th: DensityCurve,
    buf: BufferThresholds,
    seg: SegmentConfig,
    playout_rate: float,
) -> DurationDistribution:
    """
    Play durations v' = m1 * dt: the buffer drains from q_max to q_min with
    per-segment drift lambda - mu and the same spread as the throughput.

    Raises:
        NoPauseRegimeError: If ``playout_rate`` does not exceed the throughput mean
    """
    mu, sigma = distribution_moments(th)
    if playout_rate <= mu:
        raise NoPauseRegimeError(
            f"no-pause regime: playout rate {playout_rate:.6g} B/s does not exceed mean "
            f"throughput {mu:.6g} B/s"
        )
    return _normal_passage_pmf(buf.fluctuation_area, playout_rate - mu, sigma, seg)


def first_passage_monte_carlo(
    th: DensityCurve,
    threshold: float,
    seg: SegmentConfig,
    drift_offset: float,
    trials: int,
    seed: RandomState,
    chunk_trials: int = 20_000,
) -> DurationDistribution:
    """
    Empirical distribution of the segment count at which the running sum of
    dt * (eta_i - drift_offset) first reaches +/- threshold.

    Segment throughputs are drawn from ``th`` by inverse CDF. The recorded
    count is the first m whose accumulation meets the threshold.
    ``drift_offset = 0`` gives pause durations, ``drift_offset = lambda`` play
    durations.

    Raises:
        DomainError: If fewer than 10^4 trials are requested or the threshold is not positive
        ConvergenceError: If a trial runs past 10^7 segments
    """
    if trials < MIN_TRIALS:
        raise DomainError(f"trials must be >= {MIN_TRIALS}, got {trials}")
    if not threshold > 0:
        raise DomainError(f"threshold must be positive, got {threshold}")

    rng = np.random.default_rng(seed)
    dt = seg.segment_length
    counts: dict[int, int] = {}

    for start in range(0, trials, chunk_trials):
        n = min(chunk_trials, trials - start)
        passage = _passage_counts(th, threshold, dt, drift_offset, n, rng)
        values, freq = np.unique(passage, return_counts=True)
        for value, count in zip(values.tolist(), freq.tolist()):
            counts[value] = counts.get(value, 0) + count

    top = max(counts)
    m = np.arange(1, top + 1)
    histogram = np.array([counts.get(int(k), 0) for k in m], dtype=float)
    logger.debug("first passage: %d trials, mean %.3f segments", trials, np.dot(m, histogram) / trials)
    return DurationDistribution(m * dt, histogram / histogram.sum())


def _passage_counts(
    th: DensityCurve,
    threshold: float,
    dt: float,
    drift_offset: float,
    n: int,
    rng: np.random.Generator,
) -> np.ndarray:
    mu, _ = distribution_moments(th)
    expected = threshold / max(abs(mu - drift_offset) * dt, np.finfo(float).tiny)
    block = int(min(max(64, 1.5 * expected), 4096))

    accumulated = np.zeros(n)
    elapsed = np.zeros(n, dtype=np.int64)
    result = np.zeros(n, dtype=np.int64)
    active = np.arange(n)

    while active.size:
        if elapsed[active].min() >= MAX_PASSAGE_SEGMENTS:
            raise ConvergenceError(
                f"first passage did not occur within {MAX_PASSAGE_SEGMENTS} segments"
            )
        steps = dt * (th.sample(rng, (active.size, block)) - drift_offset)
        path = accumulated[active, None] + np.cumsum(steps, axis=1)
        hit = np.abs(path) >= threshold
        crossed = hit.any(axis=1)

        idx = np.argmax(hit[crossed], axis=1)
        rows = active[crossed]
        result[rows] = elapsed[rows] + idx + 1

        still = active[~crossed]
        accumulated[still] = path[~crossed, -1]
        elapsed[still] += block
        active = still

    return result


def total_variation(a: DurationDistribution, b: DurationDistribution) -> float:
    """Total-variation distance, aligning the two duration grids."""
    keys_a = np.round(a.durations, 9)
    keys_b = np.round(b.durations, 9)
    support = np.union1d(keys_a, keys_b)
    pa = np.zeros(support.size)
    pb = np.zeros(support.size)
    pa[np.searchsorted(support, keys_a)] = a.probabilities
    pb[np.searchsorted(support, keys_b)] = b.probabilities
    return float(0.5 * np.abs(pa - pb).sum())
