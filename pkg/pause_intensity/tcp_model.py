"""
Steady-state TCP-Reno throughput as a function of packet-loss probability.

Throughput values are in bytes/second: the Reno formulas give packets/second,
which is multiplied by the packet size. 1 KB = 1000 bytes and 1 Mb = 10^6 bits
throughout.
"""

import logging
import math
from dataclasses import dataclass
from typing import Union

import numpy as np
from scipy import optimize

from pause_intensity.errors import DomainError, OutOfRangeError

logger = logging.getLogger(__name__)

Throughput = float
LossRate = float
ArrayLike = Union[float, np.ndarray]

# Upper end of the range where min(1, 3*sqrt(3bp/8)) resolves to its second argument.
MAX_LOSS_RATE = 0.12
# Lower end of the inversion bracket; the throughput formula is singular at p = 0.
P_FLOOR = 1e-6


@dataclass(frozen=True)
class TcpParams:
    """TCP connection parameters of the Reno throughput model."""

    rtt: float
    timeout: float
    rounds_per_window_increment: int = 2
    packet_size: float = 1500.0

    def __post_init__(self) -> None:
        if not self.rtt > 0:
            raise DomainError(f"rtt must be positive, got {self.rtt}")
        if not self.timeout > 0:
            raise DomainError(f"timeout must be positive, got {self.timeout}")
        if self.rounds_per_window_increment < 1:
            raise DomainError(
                "rounds_per_window_increment must be >= 1, "
                f"got {self.rounds_per_window_increment}"
            )
        if not self.packet_size > 0:
            raise DomainError(f"packet_size must be positive, got {self.packet_size}")

    @classmethod
    def simulation_defaults(cls) -> "TcpParams":
        """Simulation setup of the validation experiments (RTT = T0 = 128 ms, b = 2)."""
        return cls(rtt=0.128, timeout=0.128, rounds_per_window_increment=2, packet_size=1500.0)


@dataclass(frozen=True)
class LinkConstraints:
    """Bottleneck bandwidth (bytes/second) and advertised window (packets)."""

    bottleneck_bandwidth: float
    advertised_window: float

    def __post_init__(self) -> None:
        if not self.bottleneck_bandwidth > 0:
            raise DomainError(
                f"bottleneck_bandwidth must be positive, got {self.bottleneck_bandwidth}"
            )
        if not self.advertised_window > 0:
            raise DomainError(
                f"advertised_window must be positive, got {self.advertised_window}"
            )

    @classmethod
    def simulation_defaults(cls) -> "LinkConstraints":
        """1 Mb/s bottleneck and a 20-packet advertised window."""
        return cls(bottleneck_bandwidth=125_000.0, advertised_window=20.0)

    def window_limit(self, params: TcpParams) -> Throughput:
        """Throughput allowed by the advertised window, Wm * packet_size / RTT."""
        return self.advertised_window * params.packet_size / params.rtt


def _check_loss(p: ArrayLike, upper: float, inclusive: bool) -> np.ndarray:
    arr = np.asarray(p, dtype=float)
    too_high = arr > upper if inclusive else arr >= upper
    if np.any(~np.isfinite(arr)) or np.any(arr <= 0) or np.any(too_high):
        bracket = "]" if inclusive else ")"
        bad = arr[(arr <= 0) | too_high | ~np.isfinite(arr)].ravel()
        raise DomainError(f"loss rate must lie in (0, {upper}{bracket}, got {bad[0]}")
    return arr


def _unwrap(value: np.ndarray, like: ArrayLike) -> ArrayLike:
    if np.ndim(like) == 0:
        return float(value)
    return value


def _timeout_denominator(p: np.ndarray, params: TcpParams, clamp: bool) -> np.ndarray:
    b = params.rounds_per_window_increment
    fast_retransmit = params.rtt * np.sqrt(2.0 * b * p / 3.0)
    timeout_factor = 3.0 * np.sqrt(3.0 * b * p / 8.0)
    if clamp:
        timeout_factor = np.minimum(1.0, timeout_factor)
    return fast_retransmit + params.timeout * timeout_factor * p * (1.0 + 32.0 * p**2)


def _timeout_factor_resolves(params: TcpParams) -> bool:
    b = params.rounds_per_window_increment
    return 3.0 * math.sqrt(3.0 * b * MAX_LOSS_RATE / 8.0) <= 1.0


def reno_throughput_timeout(p: ArrayLike, params: TcpParams) -> ArrayLike:
    """
    Reno throughput with timeouts, with the min() resolved for p <= 0.12.

    The min() only resolves on the whole range for b <= 2, since
    3 sqrt(3b * 0.12 / 8) exceeds 1 from b = 3 on; larger b goes through
    ``reno_throughput_general``.

    For b = 2 this is 1 / ((2R/sqrt(3)) p^(1/2) + (3 sqrt(3) T0 / 2) p^(3/2) (1 + 32 p^2))
    packets/second, scaled to bytes/second.

    Args:
        p: Loss rate(s) in (0, 0.12]
        params: Connection parameters

    Returns:
        Throughput in bytes/second, same shape as ``p``

    Raises:
        DomainError: If any loss rate lies outside (0, 0.12] or b > 2
    """
    if not _timeout_factor_resolves(params):
        raise DomainError(
            f"rounds_per_window_increment={params.rounds_per_window_increment} leaves "
            f"min(1, 3*sqrt(3bp/8)) unresolved below p = {MAX_LOSS_RATE}"
        )
    arr = _check_loss(p, MAX_LOSS_RATE, inclusive=True)
    eta = params.packet_size / _timeout_denominator(arr, params, clamp=False)
    return _unwrap(eta, p)


def reno_throughput_general(p: ArrayLike, params: TcpParams, with_timeout: bool = True) -> ArrayLike:
    """
    Both branches of the Reno model over the whole loss range (0, 1).

    The timeout branch keeps min(1, 3*sqrt(3bp/8)); the branch without timeouts is
    1 / (R * sqrt(2bp/3)) and is only provided for comparison.

    Raises:
        DomainError: If any loss rate lies outside (0, 1)
    """
    arr = _check_loss(p, 1.0, inclusive=False)
    if with_timeout:
        denominator = _timeout_denominator(arr, params, clamp=True)
    else:
        b = params.rounds_per_window_increment
        denominator = params.rtt * np.sqrt(2.0 * b * arr / 3.0)
    return _unwrap(params.packet_size / denominator, p)


def capped_max_throughput(params: TcpParams, caps: LinkConstraints) -> Throughput:
    """Highest throughput the link allows regardless of loss."""
    return min(caps.bottleneck_bandwidth, caps.window_limit(params))


def effective_throughput(p: ArrayLike, params: TcpParams, caps: LinkConstraints) -> ArrayLike:
    """Reno throughput limited by the bottleneck bandwidth and Wm/RTT."""
    reno = np.asarray(reno_throughput_timeout(p, params))
    eta = np.minimum(reno, capped_max_throughput(params, caps))
    return _unwrap(eta, p)


def invert_throughput(target: Throughput, params: TcpParams) -> LossRate:
    """
    Loss rate at which the Reno timeout model yields ``target`` bytes/second.

    Solved by bisection on the strictly decreasing throughput over [1e-6, 0.12].

    Raises:
        OutOfRangeError: If the target lies outside the throughput range of that bracket
    """
    if not math.isfinite(target) or target <= 0:
        raise OutOfRangeError(f"target throughput must be positive and finite, got {target}")
    eta_high = reno_throughput_timeout(P_FLOOR, params)
    eta_low = reno_throughput_timeout(MAX_LOSS_RATE, params)
    if target > eta_high or target < eta_low:
        raise OutOfRangeError(
            f"target throughput {target:.6g} B/s outside model range "
            f"[{eta_low:.6g}, {eta_high:.6g}] B/s"
        )
    if target == eta_high:
        return P_FLOOR
    if target == eta_low:
        return MAX_LOSS_RATE

    root = optimize.bisect(
        lambda x: reno_throughput_timeout(x, params) - target,
        P_FLOOR,
        MAX_LOSS_RATE,
        xtol=1e-17,
        rtol=4 * np.finfo(float).eps,
        maxiter=200,
    )
    logger.debug("inverted throughput %.6g B/s -> loss %.12g", target, root)
    return float(root)
