"""Truncated-Poisson (Erlang loss) quantities evaluated without overflow.

Every quantity is derived from the Erlang-B recursion

    B(0) = 1,    B(k) = rho B(k-1) / (k + rho B(k-1))

or from ratio-chained weights ``w[m+1] / w[m] = rho / (m + 1)``; raw
``rho**m / m!`` terms are never formed.  The complementary probability
``P(N < n) = 1 - B(n) = n / (n + rho B(n-1))`` is taken from the same
denominator so that it keeps full relative precision when ``B(n)`` is close
to one.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Sequence

import numpy as np

from .errors import DomainError

#: Largest occupancy power accepted by the moment routines.
MAX_POWER = 12
#: Probabilities below this are flushed to zero.
FLUSH = 1e-300


def _check(rho: float, n: int) -> None:
    if not (isinstance(rho, (int, float, np.floating)) and math.isfinite(rho) and rho > 0):
        raise DomainError(f"offered load must be finite and > 0, got {rho!r}")
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < 0:
        raise DomainError(f"threshold must be an integer >= 0, got {n!r}")


@dataclass(frozen=True)
class OccupancyDistribution:
    """Stationary occupancy law of the loss system with ``n`` places."""

    rho: float
    n: int
    probs: np.ndarray
    mean: float

    @property
    def blocking(self) -> float:
        return float(self.probs[self.n])

    @property
    def admission_probability(self) -> float:
        """``P(N < n)``; zero when ``n == 0``."""
        return math.fsum(self.probs[: self.n])


def occupancy_distribution(rho: float, n: int) -> OccupancyDistribution:
    """Truncated Poisson law ``p_j ∝ rho**j / j!`` on ``{0, ..., n}``.

    Weights are chained outward from the mode with weight one, so the largest
    weight never overflows and the far tails underflow harmlessly.
    """
    _check(rho, n)
    mode = min(n, int(math.floor(rho)))
    w = np.empty(n + 1)
    w[mode] = 1.0
    if mode < n:
        w[mode + 1 :] = np.cumprod(rho / np.arange(mode + 1, n + 1, dtype=float))
    if mode > 0:
        w[mode - 1 :: -1] = np.cumprod(np.arange(mode, 0, -1, dtype=float) / rho)
    probs = w / math.fsum(w)
    probs[probs < FLUSH] = 0.0
    mean = math.fsum(np.arange(n + 1, dtype=float) * probs)
    return OccupancyDistribution(rho=float(rho), n=int(n), probs=probs, mean=mean)


def erlang_b(rho: float, n: int) -> float:
    """Blocking probability ``B(n) = p_n`` of the loss system with ``n`` places."""
    _check(rho, n)
    b = 1.0
    for k in range(1, n + 1):
        rb = rho * b
        b = rb / (k + rb)
        if b < FLUSH:
            # k > rho here, so B keeps decreasing.
            return 0.0
    return b


def log_erlang_b(rho: float, n: int) -> float:
    """``log B(n)``, finite for every ``n`` (no flushing)."""
    _check(rho, n)
    log_rho = math.log(rho)
    lb = 0.0
    for k in range(1, n + 1):
        lb = log_rho + lb - math.log(k + rho * math.exp(lb))
    return lb


def expected_occupancy(rho: float, n: int) -> float:
    """Mean occupancy ``E(L_n) = rho (1 - B(n))``."""
    _check(rho, n)
    if n == 0:
        return 0.0
    b_prev = erlang_b(rho, n - 1)
    return rho * n / (n + rho * b_prev)


def partial_power_moment(rho: float, n: int, i: int, cutoff: int) -> float:
    """``sum_{m=0}^{cutoff} m**i p_m`` under the ``n``-truncated law."""
    _check(rho, n)
    if not 1 <= i <= MAX_POWER:
        raise DomainError(f"power must lie in [1, {MAX_POWER}], got {i}")
    if not 0 <= cutoff <= n:
        raise DomainError(f"cutoff must lie in [0, n={n}], got {cutoff}")
    dist = occupancy_distribution(rho, n)
    m = np.arange(cutoff + 1, dtype=float)
    return math.fsum(m**i * dist.probs[: cutoff + 1])


@dataclass(frozen=True)
class ErlangTable:
    """Erlang quantities for every threshold ``n = 0 .. len - 1``.

    ``moments[i][n]`` is ``sum_{m<n} m**i p_m(n)``, the partial power moment
    with cutoff ``n - 1`` that enters the welfare rate.  When ``frozen`` is set
    the table was cut at the first ``n`` whose blocking probability flushed to
    zero; every larger threshold shares the last row exactly (``log_blocking``
    excepted, which keeps decreasing and is only meaningful row by row).
    """

    rho: float
    blocking: np.ndarray
    admit: np.ndarray
    mean: np.ndarray
    log_blocking: np.ndarray
    moments: dict[int, np.ndarray]
    frozen: bool

    @property
    def last(self) -> int:
        return len(self.blocking) - 1

    def index(self, n):
        """Clamp thresholds beyond a frozen table to its last row."""
        if self.frozen:
            return np.minimum(n, self.last)
        return n

    def log_mean_increment(self) -> np.ndarray:
        """``log(E(L_{n+1}) - E(L_n))`` for ``n = 0 .. last - 1``.

        Uses ``E(L_{n+1}) - E(L_n) = rho B(n) P(N<n+1 | n+1) (1 - E(L_n)/(n+1))``,
        all factors positive, so the result is finite even where the increment
        itself underflows.
        """
        n = np.arange(self.last, dtype=float)
        lb = self.log_blocking[:-1]
        b = self.blocking[:-1]
        log_admit_next = np.log(n + 1) - np.log(n + 1 + self.rho * b)
        slack = (n + 1 - self.mean[:-1]) / (n + 1)
        return math.log(self.rho) + lb + log_admit_next + np.log(slack)

    def mean_increment(self) -> np.ndarray:
        """``E(L_{n+1}) - E(L_n)`` for ``n = 0 .. last - 1`` (may underflow to 0)."""
        n = np.arange(self.last, dtype=float)
        return self.rho * self.blocking[:-1] * self.admit[1:] * (n + 1 - self.mean[:-1]) / (n + 1)


def erlang_table(
    rho: float, n_max: int, powers: Sequence[int] = (), *, stop_when_frozen: bool = False
) -> ErlangTable:
    """Tabulate blocking, mean occupancy and partial moments up to ``n_max``.

    One forward pass.  With ``p_m(n) = p_m(n-1) (1 - B(n))`` the partial
    moments obey ``a(n) = (1 - B(n)) [a(n-1) + (n-1)**i B(n-1)]``.
    """
    _check(rho, n_max)
    powers = tuple(powers)
    if any(not 1 <= i <= MAX_POWER for i in powers):
        raise DomainError(f"powers must lie in [1, {MAX_POWER}], got {powers}")
    size = n_max + 1
    blocking = [1.0]
    admit = [0.0]
    log_blocking = [0.0]
    acc = [0.0] * len(powers)
    moments = [[0.0] for _ in powers]
    log_rho = math.log(rho)
    b = 1.0
    lb = 0.0
    frozen = False
    for k in range(1, size):
        rb = rho * b
        denom = k + rb
        lb = log_rho + lb - math.log(denom)
        p = k / denom
        for j, i in enumerate(powers):
            acc[j] = p * (acc[j] + (k - 1) ** i * b)
            moments[j].append(acc[j])
        b = rb / denom
        if b < FLUSH:
            b = 0.0
        blocking.append(b)
        admit.append(p)
        log_blocking.append(lb)
        if b == 0.0 and stop_when_frozen:
            frozen = True
            break
    blocking_arr = np.array(blocking)
    admit_arr = np.array(admit)
    log_arr = np.array(log_blocking)
    return ErlangTable(
        rho=float(rho),
        blocking=blocking_arr,
        admit=admit_arr,
        mean=rho * admit_arr,
        log_blocking=log_arr,
        moments={i: np.array(m) for i, m in zip(powers, moments)},
        frozen=frozen,
    )
