"""Threshold policies when arriving customers see the current occupancy.

Customers follow a threshold ``n``: join iff the observed count is ``< n``.
Three thresholds are computed:

* ``n_e``: individual equilibrium, the largest ``N`` with ``cost(N-1) <= R``;
* ``n_s``: maximiser of the welfare rate ``W(n)``;
* ``n_m``: maximiser of the fee revenue rate ``V(n)`` when the administrator
  charges ``R - cost(n-1)``.

``n_s`` and ``n_m`` are each found twice: from the marginal conditions
(largest ``N`` whose marginal ratio is ``<= R``) and from a scan of the
objective values.  The marginal ratios are evaluated in rearranged forms that
stay accurate when ``W(n)`` is flat to machine precision:

    social:   [N cost(N-1) - rho sum_i C_i a_i(N-1)] / (N - E(L_{N-1}))
    revenue:  cost(N-1) + E(L_{N-1}) (cost(N-1) - cost(N-2)) / (E(L_N) - E(L_{N-1}))

with ``a_i(n) = sum_{m<n} m**i p_m(n)``.  Both equal ``R`` minus the objective
increment divided by ``mu (E(L_N) - E(L_{N-1}))``.

Objective values within ``REL_TOL`` (relative) of each other are ties, and
ties go to the larger threshold.
"""

from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .erlang import ErlangTable, erlang_table, expected_occupancy, partial_power_moment
from .errors import ConsistencyError, DomainError, ThresholdOverflowError
from .model import CostPolynomial, SystemParams

#: Relative tolerance for equality in the marginal conditions; ties go to the larger threshold.
REL_TOL = 1e-9
#: Default cap on the equilibrium threshold.
DEFAULT_BOUND = 10**7


def _check_threshold(n: int, minimum: int = 0) -> None:
    if isinstance(n, bool) or not isinstance(n, (int, np.integer)) or n < minimum:
        raise DomainError(f"threshold must be an integer >= {minimum}, got {n!r}")


def individual_utility(params: SystemParams, cost: CostPolynomial, n: int) -> float:
    """Net utility of joining when ``n`` customers are present."""
    _check_threshold(n)
    return params.reward - cost(n)


def admission_price(params: SystemParams, cost: CostPolynomial, n: int) -> float:
    """Highest fee that keeps threshold ``n`` an equilibrium: ``R - cost(n-1)``."""
    _check_threshold(n, 1)
    return params.reward - cost(n - 1)


def equilibrium_threshold(
    params: SystemParams, cost: CostPolynomial, bound: int = DEFAULT_BOUND
) -> int:
    """Largest ``N`` with ``cost(N-1) <= R``, by doubling then bisection."""
    limit = params.reward * (1 + REL_TOL)
    if cost(bound) <= limit:
        raise ThresholdOverflowError(
            f"equilibrium threshold exceeds {bound}; costs are too small relative to R"
        )
    lo, hi = 0, 1
    while cost(hi) <= limit:
        lo, hi = hi, min(2 * hi, bound)
    while hi - lo > 1:
        mid = (lo + hi) // 2
        if cost(mid) <= limit:
            lo = mid
        else:
            hi = mid
    return lo + 1


def equilibrium_threshold_closed_form(params: SystemParams, cost: CostPolynomial) -> int:
    """Closed form for costs of degree at most two.

    ``floor((2 C2 - C1 + sqrt(C1^2 + 4 C2 R)) / (2 C2))``, written as
    ``floor(1 + 2R / (C1 + sqrt(C1^2 + 4 C2 R)))`` so that ``C2 = 0`` is covered.
    """
    if cost.degree > 2:
        raise DomainError("closed form only covers linear and quadratic costs")
    c1, c2 = cost.coefficient(1), cost.coefficient(2)
    r = params.reward
    n = int(math.floor(1.0 + 2.0 * r / (c1 + math.sqrt(c1 * c1 + 4.0 * c2 * r))))
    # Integer fix-up so the tie tolerance applies to cost(N-1) <= R, as in
    # the search; the floor can be one off when cost(N-1) is within it of R.
    limit = r * (1 + REL_TOL)
    while n > 1 and cost(n - 1) > limit:
        n -= 1
    while cost(n) <= limit:
        n += 1
    return n


def social_welfare(params: SystemParams, cost: CostPolynomial, n: int) -> float:
    """Welfare rate ``mu R E(L_n) - mu rho sum_i C_i sum_{m<n} m**i p_m``."""
    _check_threshold(n)
    if n == 0:
        return 0.0
    rho, mu = params.rho, params.mu
    penalty = math.fsum(c * partial_power_moment(rho, n, i, n - 1) for i, c in cost.terms())
    return mu * params.reward * expected_occupancy(rho, n) - mu * rho * penalty


def revenue(params: SystemParams, cost: CostPolynomial, n: int) -> float:
    """Fee revenue rate ``mu E(L_n) (R - cost(n-1))``."""
    _check_threshold(n, 1)
    return params.mu * expected_occupancy(params.rho, n) * admission_price(params, cost, n)


def _table(params: SystemParams, cost: CostPolynomial, n_max: int) -> ErlangTable:
    return erlang_table(params.rho, n_max, [i for i, _ in cost.terms()], stop_when_frozen=True)


def _welfare_values(params, cost, table: ErlangTable) -> np.ndarray:
    penalty = sum(c * table.moments[i] for i, c in cost.terms())
    return params.lam * (params.reward * table.admit - penalty)


def _revenue_values(params, cost, table: ErlangTable) -> np.ndarray:
    n = np.arange(len(table.mean), dtype=float)
    values = params.mu * table.mean * (params.reward - cost(n - 1))
    values[0] = 0.0
    return values


def _extend(values: np.ndarray, table: ErlangTable, n_max: int, tail) -> np.ndarray:
    if len(values) > n_max:
        return values[: n_max + 1]
    n = np.arange(len(values), n_max + 1, dtype=float)
    return np.concatenate([values, tail(n)])


def welfare_curve(params: SystemParams, cost: CostPolynomial, n_max: int) -> np.ndarray:
    """Welfare rate ``W(n)`` for ``n = 0 .. n_max``."""
    _check_threshold(n_max)
    table = _table(params, cost, n_max)
    values = _welfare_values(params, cost, table)
    return _extend(values, table, n_max, lambda n: np.full(n.shape, values[-1]))


def revenue_curve(params: SystemParams, cost: CostPolynomial, n_max: int) -> np.ndarray:
    """Revenue rate ``V(n)`` for ``n = 0 .. n_max``; ``V(0) = 0`` (nobody admitted)."""
    _check_threshold(n_max)
    table = _table(params, cost, n_max)
    values = _revenue_values(params, cost, table)
    mean_tail = table.mean[-1]
    return _extend(
        values, table, n_max, lambda n: params.mu * mean_tail * (params.reward - cost(n - 1))
    )


def _social_ratios(params, cost, table: ErlangTable, n_max: int) -> np.ndarray:
    big_n = np.arange(1, n_max + 1, dtype=float)
    idx = table.index(np.arange(0, n_max))
    weighted = sum(c * table.moments[i][idx] for i, c in cost.terms())
    numer = big_n * cost(big_n - 1) - params.rho * weighted
    return numer / (big_n - table.mean[idx])


def _revenue_ratios(params, cost, table: ErlangTable, n_max: int) -> np.ndarray:
    big_n = np.arange(1, n_max + 1, dtype=float)
    idx = np.arange(0, n_max)
    increments = table.mean_increment()
    d_mean = np.zeros(n_max)
    covered = min(n_max, len(increments))
    d_mean[:covered] = increments[:covered]
    mean_prev = table.mean[table.index(idx)]
    d_cost = cost(big_n - 1) - cost(big_n - 2)
    with np.errstate(divide="ignore", invalid="ignore"):
        extra = np.where(mean_prev > 0, mean_prev * d_cost / d_mean, 0.0)
    return cost(big_n - 1) + extra


def social_marginal_ratios(params: SystemParams, cost: CostPolynomial, n_max: int) -> np.ndarray:
    """Marginal social-cost ratio for ``N = 1 .. n_max`` (entry ``N - 1``).

    ``W(N) >= W(N-1)`` exactly when the ratio is ``<= R``.
    """
    _check_threshold(n_max, 1)
    return _social_ratios(params, cost, _table(params, cost, n_max), n_max)


def revenue_marginal_ratios(params: SystemParams, cost: CostPolynomial, n_max: int) -> np.ndarray:
    """Marginal revenue ratio for ``N = 1 .. n_max``; ``V(N) >= V(N-1)`` iff ``<= R``."""
    _check_threshold(n_max, 1)
    return _revenue_ratios(params, cost, _table(params, cost, n_max), n_max)


def _largest_satisfying(ratios: np.ndarray, reward: float) -> int:
    ok = np.flatnonzero(ratios <= reward * (1 + REL_TOL))
    # ratios[0] is N = 1 and always equals 0.
    return int(ok[-1]) + 1


def _scan_argmax(values: np.ndarray, start: int, stop: int, flat_tail: bool) -> int:
    """Largest ``n`` in ``[start, stop]`` whose value is within ``REL_TOL`` of the maximum.

    Values closer than that are treated as ties, which go to the larger
    threshold.  With ``flat_tail`` every ``n`` past the end of ``values``
    repeats the last value.
    """
    seg = values[start : min(stop, len(values) - 1) + 1]
    best = seg.max()
    near = np.flatnonzero(seg >= best - REL_TOL * abs(best))
    last = start + int(near[-1])
    if flat_tail and stop > len(values) - 1 and last == len(values) - 1:
        return stop
    return last


def _reconcile(kind: str, marginal: int, scanned: int, value_at) -> int:
    if marginal == scanned:
        return marginal
    a, b = value_at(marginal), value_at(scanned)
    scale = max(abs(a), abs(b), np.finfo(float).tiny)
    if abs(a - b) <= REL_TOL * scale:
        # Same objective value to within the tie tolerance: the scan's choice
        # (the larger threshold) stands.
        return scanned
    raise ConsistencyError(
        f"{kind} threshold: marginal condition gives {marginal}, scan gives {scanned}"
    )


def socially_optimal_threshold(
    params: SystemParams, cost: CostPolynomial, n_e: int | None = None
) -> int:
    """Maximiser ``n_s`` of ``W(n)`` over ``0 <= n <= n_e``."""
    n_e = equilibrium_threshold(params, cost) if n_e is None else n_e
    table = _table(params, cost, n_e)
    marginal = _largest_satisfying(_social_ratios(params, cost, table, n_e), params.reward)
    values = _welfare_values(params, cost, table)
    scanned = _scan_argmax(values, 0, n_e, table.frozen)
    return _reconcile("social", marginal, scanned, lambda n: values[table.index(n)])


def revenue_optimal_threshold(
    params: SystemParams, cost: CostPolynomial, n_e: int | None = None
) -> tuple[int, float]:
    """Maximiser ``n_m`` of ``V(n)`` over ``1 <= n <= n_e`` and its price."""
    n_e = equilibrium_threshold(params, cost) if n_e is None else n_e
    table = _table(params, cost, n_e)
    marginal = _largest_satisfying(_revenue_ratios(params, cost, table, n_e), params.reward)
    values = _revenue_values(params, cost, table)
    if table.frozen and n_e > table.last:
        values = _extend(
            values, table, min(n_e, table.last + 1),
            lambda n: params.mu * table.mean[-1] * (params.reward - cost(n - 1)),
        )
    scanned = _scan_argmax(values, 1, n_e, flat_tail=False)
    n_m = _reconcile(
        "revenue", marginal, scanned,
        lambda n: params.mu * table.mean[table.index(n)] * (params.reward - cost(n - 1)),
    )
    return n_m, admission_price(params, cost, n_m)


@dataclass(frozen=True)
class ObservableAnalysis:
    n_e: int
    n_s: int
    n_m: int
    price_o: float
    welfare_curve: np.ndarray
    revenue_curve: np.ndarray

    @property
    def welfare_at_ns(self) -> float:
        return float(self.welfare_curve[self.n_s])

    @property
    def revenue_at_nm(self) -> float:
        return float(self.revenue_curve[self.n_m])


def analyze_observable(params: SystemParams, cost: CostPolynomial) -> ObservableAnalysis:
    """All three thresholds, the optimal fee and both curves on ``0 .. n_e``."""
    n_e = equilibrium_threshold(params, cost)
    n_s = socially_optimal_threshold(params, cost, n_e)
    n_m, price = revenue_optimal_threshold(params, cost, n_e)
    return ObservableAnalysis(
        n_e=n_e,
        n_s=n_s,
        n_m=n_m,
        price_o=price,
        welfare_curve=welfare_curve(params, cost, n_e),
        revenue_curve=revenue_curve(params, cost, n_e),
    )
