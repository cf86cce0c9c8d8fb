"""Joining probabilities and entrance fees when occupancy is not observed.

Customers join with probability ``q``; the joined stream sees the
infinite-server mean occupancy ``rho q`` and pays the congestion cost
``cost(rho q)``.  Revenue and welfare coincide:

    S(q) = q lam (R - cost(rho q)).
"""

from __future__ import annotations

import math
from dataclasses import dataclass

from .errors import DomainError
from .model import CostPolynomial, SystemParams

#: Relative tolerance on the boundary tests between interior and corner solutions.
REL_TOL = 1e-9

_METHODS = ("auto", "closed", "numeric")


def _bisect_increasing(f, target: float, hi: float) -> float:
    """Root of ``f(x) = target`` on ``[0, hi]`` for increasing ``f`` with ``f(0) = 0``.

    Runs until the bracket stops shrinking, i.e. to the last ulp.
    """
    lo = 0.0
    while True:
        mid = 0.5 * (lo + hi)
        if mid <= lo or mid >= hi:
            return mid
        if f(mid) < target:
            lo = mid
        else:
            hi = mid


def _method(cost: CostPolynomial, method: str) -> str:
    if method not in _METHODS:
        raise ValueError(f"method must be one of {_METHODS}, got {method!r}")
    if method == "auto":
        return "closed" if cost.degree <= 2 else "numeric"
    if method == "closed" and cost.degree > 2:
        raise DomainError("closed forms only cover linear and quadratic costs")
    return method


def entrance_price(params: SystemParams, cost: CostPolynomial, q: float) -> float:
    """Largest fee at which joining with probability ``q`` is still an equilibrium."""
    _check_prob(q)
    return params.reward - cost(params.rho * q)


def _check_prob(q: float) -> None:
    if not 0.0 <= q <= 1.0:
        raise DomainError(f"joining probability must lie in [0, 1], got {q!r}")


def revenue_unobservable(params: SystemParams, cost: CostPolynomial, q: float) -> float:
    """``S(q) = q lam (R - cost(rho q))``."""
    _check_prob(q)
    if q == 0.0:
        return 0.0
    return q * params.lam * (params.reward - cost(params.rho * q))


def equilibrium_join_prob(
    params: SystemParams, cost: CostPolynomial, method: str = "auto"
) -> float:
    """Symmetric equilibrium joining probability ``q_e``.

    ``q_e = 1`` when ``R >= cost(rho)``; otherwise ``cost(rho q_e) = R``.  The
    quadratic root ``(-C1 + sqrt(C1^2 + 4 R C2)) / (2 C2 rho)`` is evaluated as
    ``2R / ((C1 + sqrt(C1^2 + 4 R C2)) rho)``, which is also its ``C2 -> 0``
    limit ``R / (C1 rho)``.
    """
    rho, r = params.rho, params.reward
    method = _method(cost, method)
    if r >= cost(rho) * (1 - REL_TOL):
        return 1.0
    if method == "closed":
        c1, c2 = cost.coefficient(1), cost.coefficient(2)
        return 2.0 * r / (c1 + math.sqrt(c1 * c1 + 4.0 * r * c2)) / rho
    return _bisect_increasing(cost, r, rho) / rho


@dataclass(frozen=True)
class OptimalJoin:
    q: float
    price: float
    revenue: float


def optimal_join_prob(
    params: SystemParams, cost: CostPolynomial, method: str = "auto"
) -> OptimalJoin:
    """Revenue-maximising joining probability, its entrance fee and revenue.

    ``dS/dq = lam (R - sum_i (i+1) C_i (rho q)**i)`` is strictly decreasing, so
    the optimum is ``q = 1`` when the derivative is still non-negative there
    (equality included) and its unique root otherwise.
    """
    rho, mu, r = params.rho, params.mu, params.reward
    method = _method(cost, method)
    if r >= cost.marginal_revenue_weight(rho) * (1 - REL_TOL):
        return OptimalJoin(q=1.0, price=r - cost(rho), revenue=mu * (r * rho - rho * cost(rho)))
    if method == "closed":
        c1, c2 = cost.coefficient(1), cost.coefficient(2)
        # (-C1 + sqrt(C1^2 + 3 R C2)) / (3 C2), rationalised; C2 -> 0 gives R / (2 C1).
        x = r / (c1 + math.sqrt(c1 * c1 + 3.0 * r * c2))
    else:
        x = _bisect_increasing(cost.marginal_revenue_weight, r, rho)
    price = r - cost(x)
    return OptimalJoin(q=x / rho, price=price, revenue=mu * x * price)


@dataclass(frozen=True)
class UnobservableAnalysis:
    params: SystemParams
    cost: CostPolynomial
    q_e: float
    q_opt: float
    price_u: float
    revenue_opt: float

    def revenue_at(self, q: float) -> float:
        return revenue_unobservable(self.params, self.cost, q)


def analyze_unobservable(
    params: SystemParams, cost: CostPolynomial, method: str = "auto"
) -> UnobservableAnalysis:
    opt = optimal_join_prob(params, cost, method)
    return UnobservableAnalysis(
        params=params,
        cost=cost,
        q_e=equilibrium_join_prob(params, cost, method),
        q_opt=opt.q,
        price_u=opt.price,
        revenue_opt=opt.revenue,
    )
