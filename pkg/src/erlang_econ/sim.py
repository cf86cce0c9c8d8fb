"""Discrete-event simulation of the loss system and of the thinned open system.

Arrivals form a Poisson stream of rate ``lam``.  An arrival that sees ``m``
customers joins when ``m < cap`` and an independent uniform falls below the
joining probability; each joiner leaves after an independent service time.
The observable model uses ``cap = n`` and joining probability one, the
unobservable model a safety cap of at least ``20 rho`` and probability ``q``.

Only departures live in the future-event heap; the next arrival time is kept
separately and departures due at or before it are processed first.
Statistics are time averages over ``(warmup, horizon]``.
"""

from __future__ import annotations

import heapq
import math
from concurrent.futures import ProcessPoolExecutor
from dataclasses import dataclass, field

import numpy as np

from .errors import SimulationError
from .model import CostPolynomial, SystemParams

_KINDS = ("exponential", "deterministic", "uniform", "lognormal")
_BATCH = 8192


@dataclass(frozen=True)
class ServiceDistribution:
    """Service-time law with mean ``mean``.

    ``uniform`` is uniform on ``(0, 2 mean]``; ``lognormal`` has log-scale
    standard deviation ``sigma`` and location chosen to give the stated mean.
    """

    kind: str
    mean: float
    sigma: float = 1.0

    def __post_init__(self) -> None:
        if self.kind not in _KINDS:
            raise ValueError(f"service kind must be one of {_KINDS}, got {self.kind!r}")
        if not (math.isfinite(self.mean) and self.mean > 0):
            raise ValueError(f"service mean must be > 0, got {self.mean!r}")
        if self.kind == "lognormal" and not self.sigma > 0:
            raise ValueError("lognormal sigma must be > 0")

    @classmethod
    def for_rate(cls, kind: str, mu: float, sigma: float = 1.0) -> ServiceDistribution:
        return cls(kind, 1.0 / mu, sigma)

    @property
    def analytic_mean(self) -> float:
        """Mean implied by the distribution's own parameters."""
        if self.kind == "lognormal":
            return math.exp(self._log_location + 0.5 * self.sigma**2)
        return self.mean

    @property
    def _log_location(self) -> float:
        return math.log(self.mean) - 0.5 * self.sigma**2

    def sample(self, rng: np.random.Generator, size: int) -> np.ndarray:
        if self.kind == "exponential":
            out = rng.exponential(self.mean, size)
            # exponential draws of exactly 0.0 are possible in principle
            return np.where(out > 0, out, np.finfo(float).tiny)
        if self.kind == "deterministic":
            return np.full(size, self.mean)
        if self.kind == "uniform":
            return 2.0 * self.mean * (1.0 - rng.random(size))
        return rng.lognormal(self._log_location, self.sigma, size)


@dataclass(frozen=True)
class SimConfig:
    """One simulation experiment; set exactly one of ``threshold`` and ``join_prob``."""

    params: SystemParams
    service: ServiceDistribution
    horizon: float
    seed: int = 0
    replications: int = 10
    threshold: int | None = None
    join_prob: float | None = None
    warmup: float | None = None
    cost: CostPolynomial | None = None
    workers: int = 1

    def __post_init__(self) -> None:
        if (self.threshold is None) == (self.join_prob is None):
            raise ValueError("set exactly one of threshold and join_prob")
        if self.threshold is not None and self.threshold < 0:
            raise ValueError(f"threshold must be >= 0, got {self.threshold}")
        if self.join_prob is not None and not 0.0 <= self.join_prob <= 1.0:
            raise ValueError(f"join_prob must lie in [0, 1], got {self.join_prob}")
        if self.warmup is None:
            object.__setattr__(self, "warmup", 0.05 * self.horizon)
        if not (self.horizon > self.warmup >= 0):
            raise ValueError(f"need horizon > warmup >= 0, got {self.horizon}, {self.warmup}")
        if self.replications < 1:
            raise ValueError("replications must be >= 1")
        if not 0 <= self.seed < 2**64:
            raise ValueError("seed must be an unsigned 64-bit integer")
        if abs(self.service.mean * self.params.mu - 1.0) > 1e-12:
            raise ValueError("service mean must equal 1/mu")


@dataclass(frozen=True)
class _Replication:
    time_in_state: np.ndarray
    seen: np.ndarray
    observed: float
    arrivals: int
    joined: int
    utility: float


@dataclass(frozen=True)
class SimResult:
    occupancy_pmf: np.ndarray
    arrival_pmf: np.ndarray
    mean_occupancy: float
    mean_occupancy_se: float
    joining_rate: float
    joining_rate_se: float
    welfare_estimate: float
    welfare_se: float
    revenue_estimate: float
    revenue_se: float
    replications: int
    per_replication: dict[str, np.ndarray] = field(repr=False)


def _run(lam: float, cap: int, join_prob: float, service: ServiceDistribution,
         horizon: float, warmup: float, net_utility, seed) -> _Replication:
    rng = np.random.Generator(np.random.PCG64(seed))
    tis = [0.0] * (cap + 1)
    seen = [0] * (cap + 1)
    heap: list[float] = []
    state = 0
    last = 0.0
    t = 0.0
    arrivals = joined = 0
    utility = 0.0
    idx = _BATCH
    while True:
        if idx == _BATCH:
            gaps = rng.exponential(1.0 / lam, _BATCH).tolist()
            coins = rng.random(_BATCH).tolist()
            services = service.sample(rng, _BATCH).tolist()
            idx = 0
        t += gaps[idx]
        if t > horizon:
            break
        while heap and heap[0] <= t:
            d = heapq.heappop(heap)
            lo = last if last > warmup else warmup
            if d > lo:
                tis[state] += d - lo
            state -= 1
            last = d
        lo = last if last > warmup else warmup
        if t > lo:
            tis[state] += t - lo
        last = t
        counted = t > warmup
        if counted:
            arrivals += 1
            seen[state] += 1
        if state < cap and coins[idx] < join_prob:
            if counted:
                joined += 1
                if net_utility is not None:
                    utility += net_utility[state]
            state += 1
            if state == cap and join_prob < 1.0:
                raise SimulationError(f"occupancy reached the safety cap {cap}")
            heapq.heappush(heap, t + services[idx])
        idx += 1
    while heap and heap[0] <= horizon:
        d = heapq.heappop(heap)
        lo = last if last > warmup else warmup
        if d > lo:
            tis[state] += d - lo
        state -= 1
        last = d
    lo = last if last > warmup else warmup
    tis[state] += horizon - lo
    return _Replication(
        time_in_state=np.array(tis),
        seen=np.array(seen),
        observed=horizon - warmup,
        arrivals=arrivals,
        joined=joined,
        utility=utility,
    )


def _stderr(x: np.ndarray) -> float:
    return float(np.std(x, ddof=1) / math.sqrt(len(x))) if len(x) > 1 else float("nan")


def _replicate(config: SimConfig, cap: int, join_prob: float, net_utility) -> list[_Replication]:
    seeds = np.random.SeedSequence(config.seed).spawn(config.replications)
    args = [
        (config.params.lam, cap, join_prob, config.service, config.horizon,
         config.warmup, net_utility, s)
        for s in seeds
    ]
    if config.workers > 1 and config.replications > 1:
        with ProcessPoolExecutor(max_workers=config.workers) as pool:
            return list(pool.map(_run, *zip(*args)))
    return [_run(*a) for a in args]


def _merge(reps: list[_Replication], welfare: np.ndarray, revenue: np.ndarray) -> SimResult:
    tis = np.sum([r.time_in_state for r in reps], axis=0)
    seen = np.sum([r.seen for r in reps], axis=0)
    states = np.arange(len(tis), dtype=float)
    means = np.array([r.time_in_state @ states / r.observed for r in reps])
    rates = np.array([r.joined / r.observed for r in reps])
    total_seen = seen.sum()
    return SimResult(
        occupancy_pmf=tis / tis.sum(),
        arrival_pmf=seen / total_seen if total_seen else seen.astype(float),
        mean_occupancy=float(means.mean()),
        mean_occupancy_se=_stderr(means),
        joining_rate=float(rates.mean()),
        joining_rate_se=_stderr(rates),
        welfare_estimate=float(welfare.mean()),
        welfare_se=_stderr(welfare),
        revenue_estimate=float(revenue.mean()),
        revenue_se=_stderr(revenue),
        replications=len(reps),
        per_replication={"mean_occupancy": means, "joining_rate": rates,
                         "welfare": welfare, "revenue": revenue},
    )


def _require_cost(config: SimConfig) -> CostPolynomial:
    if config.cost is None:
        raise ValueError("a cost polynomial is needed for welfare and revenue estimates")
    return config.cost


def simulate_observable(config: SimConfig) -> SimResult:
    """Loss system with ``threshold`` places.

    Welfare is the sum of ``R - cost(m)`` over joiners (``m`` = count seen on
    arrival) per unit time; revenue is the joining rate times ``R - cost(n-1)``.
    """
    if config.threshold is None:
        raise ValueError("simulate_observable needs a threshold")
    cost = _require_cost(config)
    n, r = config.threshold, config.params.reward
    net_utility = [r - cost(m) for m in range(n + 1)]
    reps = _replicate(config, n, 1.0, net_utility)
    price = r - cost(n - 1) if n >= 1 else 0.0
    welfare = np.array([x.utility / x.observed for x in reps])
    revenue = np.array([x.joined / x.observed * price for x in reps])
    return _merge(reps, welfare, revenue)


def simulate_unobservable(config: SimConfig) -> SimResult:
    """Open system with Bernoulli(``join_prob``) admission.

    Revenue is the joining rate times the posted fee ``R - cost(rho q)``;
    welfare plugs each replication's time-average occupancy into the cost
    instead of ``rho q``.
    """
    if config.join_prob is None:
        raise ValueError("simulate_unobservable needs join_prob")
    cost = _require_cost(config)
    q, rho, r = config.join_prob, config.params.rho, config.params.reward
    cap = max(20, math.ceil(20 * rho))
    reps = _replicate(config, cap, q, None)
    states = np.arange(cap + 1, dtype=float)
    price = r - cost(rho * q)
    rates = np.array([x.joined / x.observed for x in reps])
    revenue = rates * price
    welfare = np.array(
        [rate * (r - cost(x.time_in_state @ states / x.observed)) for rate, x in zip(rates, reps)]
    )
    return _merge(reps, welfare, revenue)


def total_variation(p: np.ndarray, q: np.ndarray) -> float:
    """Total-variation distance; the shorter vector is zero-padded."""
    size = max(len(p), len(q))
    a = np.zeros(size)
    b = np.zeros(size)
    a[: len(p)] = p
    b[: len(q)] = q
    return 0.5 * float(np.abs(a - b).sum())
