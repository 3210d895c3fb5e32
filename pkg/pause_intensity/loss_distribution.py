"""
Packet-loss distribution and its transformation into a throughput density.

Loss probabilities follow a Gamma law whose variate is read as a percentage
(divided by ``rescale_divisor``) and truncated to the validity range of the
Reno model, (0, 0.12]. Densities are carried on a sampled grid.
"""

import csv
import logging
import warnings
from collections.abc import Callable
from dataclasses import dataclass
from pathlib import Path
from typing import Optional, Union

import numpy as np
from scipy import integrate, optimize, stats

from pause_intensity.errors import (
    ConvergenceError,
    DomainError,
    NonMonotoneMapError,
)
from pause_intensity.tcp_model import (
    MAX_LOSS_RATE,
    LossRate,
    TcpParams,
    reno_throughput_timeout,
)
from shared.utils import write_csv

logger = logging.getLogger(__name__)

DEFAULT_GRID_POINTS = 2048
REJECTION_CAP = 1_000_000
# Lower edge of the loss grid, as a quantile of the truncated loss law.
LOSS_GRID_QUANTILE = 1e-6

RandomState = Union[int, np.random.Generator, None]


@dataclass(frozen=True)
class GammaParams:
    """Gamma law of the raw loss variate; ``variate / rescale_divisor`` is a probability."""

    shape: float = 2.8
    scale: float = 0.7
    rescale_divisor: float = 100.0

    def __post_init__(self) -> None:
        for name in ("shape", "scale", "rescale_divisor"):
            value = getattr(self, name)
            if not value > 0:
                raise DomainError(f"{name} must be positive, got {value}")

    @property
    def mean_loss(self) -> float:
        """Mean loss rate before truncation, k * theta / divisor."""
        return self.shape * self.scale / self.rescale_divisor

    @property
    def truncated_mean_loss(self) -> float:
        """Mean loss rate of the law truncated to (0, 0.12]."""
        upper = MAX_LOSS_RATE * self.rescale_divisor
        kept = stats.gamma.cdf(upper, a=self.shape, scale=self.scale)
        partial = stats.gamma.cdf(upper, a=self.shape + 1, scale=self.scale)
        return float(self.mean_loss * partial / kept)

    def mean_matched(self, loss: LossRate) -> "GammaParams":
        """
        Law whose truncated mean equals ``loss``.

        The shape is kept unless a truncated law of that shape cannot reach
        ``loss`` (its mean stays below k / (k + 1) * 0.12); it is then raised
        to 2 * loss / (0.12 - loss). The scale is solved with Brent's method.

        Raises:
            DomainError: If ``loss`` lies outside (0, 0.12)
            ConvergenceError: If no bracketing scale is found
        """
        if not 0 < loss < MAX_LOSS_RATE:
            raise DomainError(f"mean-matched loss must lie in (0, {MAX_LOSS_RATE}), got {loss}")
        shape = max(self.shape, 2.0 * loss / (MAX_LOSS_RATE - loss))
        target = loss * self.rescale_divisor

        def gap(scale: float) -> float:
            law = GammaParams(shape, scale, self.rescale_divisor)
            return law.truncated_mean_loss * self.rescale_divisor - target

        # The truncated mean never exceeds k * theta, so this end is below target.
        low = 0.5 * target / shape
        high = target / shape
        for _ in range(200):
            if gap(high) > 0:
                break
            high *= 2.0
        else:
            raise ConvergenceError(f"no scale reaches a truncated mean of {loss}")
        scale = optimize.brentq(gap, low, high, xtol=1e-14, rtol=1e-12)
        if shape != self.shape:
            logger.debug("mean-matched loss %.4g needs shape %.4g instead of %.4g", loss, shape, self.shape)
        return GammaParams(shape=shape, scale=float(scale), rescale_divisor=self.rescale_divisor)


def _trapezoid(y: np.ndarray, x: np.ndarray) -> float:
    return float(integrate.trapezoid(y, x))


@dataclass(frozen=True, eq=False)
class DensityCurve:
    """
    A probability density sampled on an ascending grid.

    The grid holds loss rates or throughputs; the trapezoidal integral of the
    density over the grid must lie in [0.99, 1.01].
    """

    grid: np.ndarray
    density: np.ndarray

    def __post_init__(self) -> None:
        grid = np.array(self.grid, dtype=float)
        density = np.array(self.density, dtype=float)
        if grid.ndim != 1 or density.shape != grid.shape:
            raise DomainError("grid and density must be 1-D arrays of equal length")
        if grid.size < 2:
            raise DomainError("a density curve needs at least two grid points")
        if not (np.all(np.isfinite(grid)) and np.all(np.isfinite(density))):
            raise DomainError("grid and density must be finite")
        if np.any(np.diff(grid) <= 0):
            raise DomainError("grid must be strictly ascending")
        if np.any(density < 0):
            raise DomainError("density must be non-negative")
        total = _trapezoid(density, grid)
        if not 0.99 <= total <= 1.01:
            raise DomainError(f"density integrates to {total:.6g}, expected 1 +/- 0.01")
        grid.setflags(write=False)
        density.setflags(write=False)
        object.__setattr__(self, "grid", grid)
        object.__setattr__(self, "density", density)

    @classmethod
    def from_unnormalized(cls, grid: np.ndarray, density: np.ndarray) -> "DensityCurve":
        """Build a curve after scaling ``density`` to unit trapezoidal integral."""
        grid = np.asarray(grid, dtype=float)
        density = np.asarray(density, dtype=float)
        total = _trapezoid(density, grid)
        if not total > 0:
            raise DomainError("density has no mass on the grid")
        return cls(grid, density / total)

    def integral(self) -> float:
        return _trapezoid(self.density, self.grid)

    def normalized(self) -> "DensityCurve":
        """The same curve scaled to an integral of exactly one."""
        return DensityCurve(self.grid, self.density / self.integral())

    def pdf(self, x: Union[float, np.ndarray]) -> np.ndarray:
        """Linearly interpolated density, zero outside the grid."""
        return np.interp(x, self.grid, self.density, left=0.0, right=0.0)

    def cumulative(self) -> np.ndarray:
        """CDF values at the grid points, scaled to end at exactly one."""
        cdf = integrate.cumulative_trapezoid(self.density, self.grid, initial=0.0)
        return cdf / cdf[-1]

    def cdf(self, x: Union[float, np.ndarray]) -> np.ndarray:
        return np.interp(x, self.grid, self.cumulative(), left=0.0, right=1.0)

    def sample(self, rng: np.random.Generator, size: Union[int, tuple[int, ...]]) -> np.ndarray:
        """Inverse-CDF samples on the grid."""
        return np.interp(rng.random(size), self.cumulative(), self.grid)

    @property
    def mean(self) -> float:
        return distribution_moments(self)[0]

    @property
    def std(self) -> float:
        return distribution_moments(self)[1]

    def to_csv(self, path: Union[str, Path]) -> Path:
        """Write the curve as ``x,density`` rows."""
        rows = ((float(x), float(f)) for x, f in zip(self.grid, self.density))
        return write_csv(path, ("x", "density"), rows)

    @classmethod
    def from_csv(cls, path: Union[str, Path]) -> "DensityCurve":
        with open(path, newline="", encoding="utf-8") as f:
            reader = csv.DictReader(f)
            if reader.fieldnames is None or list(reader.fieldnames)[:2] != ["x", "density"]:
                raise DomainError(f"{path}: expected header 'x,density'")
            xs, fs = [], []
            for row in reader:
                xs.append(float(row["x"]))
                fs.append(float(row["density"]))
        return cls(np.array(xs), np.array(fs))


def gamma_density(x: Union[float, np.ndarray], g: GammaParams) -> Union[float, np.ndarray]:
    """
    Gamma pdf x^(k-1) e^(-x/theta) / (Gamma(k) theta^k) of the raw variate.

    Raises:
        DomainError: For negative ``x``
    """
    arr = np.asarray(x, dtype=float)
    if np.any(arr < 0):
        raise DomainError(f"gamma density is defined for x >= 0, got {arr[arr < 0].ravel()[0]}")
    values = stats.gamma.pdf(arr, a=g.shape, scale=g.scale)
    if np.ndim(x) == 0:
        return float(values)
    return values


def sample_loss_rates(g: GammaParams, seed: RandomState, size: int) -> np.ndarray:
    """
    Draw ``size`` loss rates: raw Gamma variates divided by the divisor, with
    values outside (0, 0.12] rejected and redrawn.

    Raises:
        ConvergenceError: If rejection does not settle within 10^6 rounds
    """
    rng = np.random.default_rng(seed)
    samples = rng.gamma(g.shape, g.scale, size=size) / g.rescale_divisor
    bad = (samples <= 0) | (samples > MAX_LOSS_RATE)
    rounds = 0
    while np.any(bad):
        rounds += 1
        if rounds > REJECTION_CAP:
            raise ConvergenceError(
                f"loss-rate rejection sampling exceeded {REJECTION_CAP} rounds for {g}"
            )
        samples[bad] = rng.gamma(g.shape, g.scale, size=int(bad.sum())) / g.rescale_divisor
        bad = (samples <= 0) | (samples > MAX_LOSS_RATE)
    if rounds:
        logger.debug("loss-rate rejection settled after %d rounds", rounds)
    return samples


def sample_loss_rate(g: GammaParams, seed: RandomState) -> LossRate:
    """Draw one loss rate in (0, 0.12]; see :func:`sample_loss_rates`."""
    rng = np.random.default_rng(seed)
    for _ in range(REJECTION_CAP):
        value = rng.gamma(g.shape, g.scale) / g.rescale_divisor
        if 0 < value <= MAX_LOSS_RATE:
            return float(value)
    raise ConvergenceError(f"loss-rate rejection sampling exceeded {REJECTION_CAP} draws for {g}")


def loss_density(g: GammaParams, n_points: int = DEFAULT_GRID_POINTS) -> DensityCurve:
    """
    Truncated, renormalized density of the loss rate on a geometric grid.

    The grid runs from the 1e-6 quantile of the truncated law to 0.12.
    """
    upper_raw = MAX_LOSS_RATE * g.rescale_divisor
    kept_mass = stats.gamma.cdf(upper_raw, a=g.shape, scale=g.scale)
    lower_raw = stats.gamma.ppf(LOSS_GRID_QUANTILE * kept_mass, a=g.shape, scale=g.scale)
    grid = np.geomspace(lower_raw / g.rescale_divisor, MAX_LOSS_RATE, n_points)
    density = g.rescale_divisor * gamma_density(grid * g.rescale_divisor, g) / kept_mass
    return DensityCurve.from_unnormalized(grid, density)


def _bisect_inverse(
    forward_map: Callable[[np.ndarray], np.ndarray],
    targets: np.ndarray,
    lower: float,
    upper: float,
    increasing: bool,
) -> np.ndarray:
    lo = np.full(targets.shape, lower)
    hi = np.full(targets.shape, upper)
    for _ in range(200):
        mid = 0.5 * (lo + hi)
        values = forward_map(mid)
        below = values < targets if increasing else values > targets
        lo = np.where(below, mid, lo)
        hi = np.where(below, hi, mid)
        if np.all(hi - lo <= 4 * np.finfo(float).eps * np.maximum(np.abs(lo), np.abs(hi))):
            break
    return 0.5 * (lo + hi)


def transform_density(
    fx: DensityCurve,
    forward_map: Callable[[np.ndarray], np.ndarray],
    out_grid: np.ndarray,
) -> DensityCurve:
    """
    Density of y = g(x) for a strictly monotone g, f_Y(y) = f_X(x) / |g'(x)|.

    Each x = g^-1(y) is found by bisection over the span of ``fx.grid`` and
    g'(x) by a central difference with relative step 1e-7 (one-sided at the
    grid edges). The result is renormalized to a unit integral.

    Args:
        fx: Density of x
        forward_map: Vectorized monotone function g
        out_grid: Ascending abscissae for y, inside the image of the grid span

    Returns:
        DensityCurve: The density of y on ``out_grid``

    Raises:
        NonMonotoneMapError: If g is not strictly monotone on the grid
        DomainError: If ``out_grid`` leaves the image of the grid span
    """
    sampled = np.asarray(forward_map(fx.grid), dtype=float)
    steps = np.diff(sampled)
    if not (np.all(steps > 0) or np.all(steps < 0)):
        raise NonMonotoneMapError("forward map is not strictly monotone on the density grid")
    increasing = bool(steps[0] > 0)

    out_grid = np.asarray(out_grid, dtype=float)
    image_low, image_high = sorted((sampled[0], sampled[-1]))
    slack = 1e-12 * max(abs(image_low), abs(image_high))
    if out_grid.min() < image_low - slack or out_grid.max() > image_high + slack:
        raise DomainError(
            f"output grid [{out_grid.min():.6g}, {out_grid.max():.6g}] leaves the image "
            f"[{image_low:.6g}, {image_high:.6g}] of the forward map"
        )

    lower, upper = float(fx.grid[0]), float(fx.grid[-1])
    x = _bisect_inverse(forward_map, out_grid, lower, upper, increasing)

    step = 1e-7 * np.where(x != 0, np.abs(x), 1.0)
    x_plus = np.minimum(x + step, upper)
    x_minus = np.maximum(x - step, lower)
    derivative = (np.asarray(forward_map(x_plus)) - np.asarray(forward_map(x_minus))) / (
        x_plus - x_minus
    )
    density = fx.pdf(x) / np.abs(derivative)
    return DensityCurve.from_unnormalized(out_grid, density)


def throughput_density(
    g: GammaParams,
    params: TcpParams,
    n_points: int = DEFAULT_GRID_POINTS,
    loss_curve: Optional[DensityCurve] = None,
) -> DensityCurve:
    """
    Throughput density implied by the truncated Gamma loss law through the
    Reno timeout model, on a linear grid spanning the image of the loss grid.
    """
    if loss_curve is None:
        loss_curve = loss_density(g, n_points)

    def reno(p: np.ndarray) -> np.ndarray:
        return np.asarray(reno_throughput_timeout(p, params))

    eta_low = float(reno(np.array([loss_curve.grid[-1]]))[0])
    eta_high = float(reno(np.array([loss_curve.grid[0]]))[0])
    out_grid = np.linspace(eta_low, eta_high, n_points)
    curve = transform_density(loss_curve, reno, out_grid)
    logger.info(
        "throughput density over [%.0f, %.0f] B/s: mean %.1f, std %.1f",
        eta_low,
        eta_high,
        curve.mean,
        curve.std,
    )
    return curve


def distribution_moments(f: DensityCurve) -> tuple[float, float]:
    """
    Mean and standard deviation of a sampled density by the trapezoidal rule.

    The variance is taken as E[x^2] - mean^2; a negative value from rounding
    is clamped to zero with a warning.
    """
    total = f.integral()
    mean = _trapezoid(f.grid * f.density, f.grid) / total
    second = _trapezoid(f.grid**2 * f.density, f.grid) / total
    variance = second - mean**2
    if variance < 0:
        message = f"negative variance {variance:.3g} clamped to zero"
        logger.warning(message)
        warnings.warn(message, RuntimeWarning, stacklevel=2)
        variance = 0.0
    return float(mean), float(np.sqrt(variance))


def ks_statistic(samples: np.ndarray, curve: DensityCurve) -> float:
    """Kolmogorov-Smirnov distance between samples and the curve's CDF."""
    return float(stats.kstest(np.asarray(samples, dtype=float), curve.cdf).statistic)
