"""Model primitives: system parameters and polynomial congestion costs."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Sequence

from .errors import DomainError


@dataclass(frozen=True)
class SystemParams:
    """Arrival rate ``lam``, service rate ``mu`` and service reward ``reward``.

    The offered load ``rho = lam / mu`` is computed once at construction.
    """

    lam: float
    mu: float
    reward: float
    rho: float = field(init=False)

    def __post_init__(self) -> None:
        for name in ("lam", "mu", "reward"):
            value = getattr(self, name)
            if not (math.isfinite(value) and value > 0):
                raise DomainError(f"{name} must be finite and > 0, got {value!r}")
        object.__setattr__(self, "rho", self.lam / self.mu)

    @classmethod
    def from_load(cls, rho: float, mu: float, reward: float) -> SystemParams:
        return cls(lam=rho * mu, mu=mu, reward=reward)


@dataclass(frozen=True)
class CostPolynomial:
    """Congestion cost ``C_1 n + C_2 n^2 + ... + C_d n^d``.

    ``coeffs[k]`` is the coefficient of ``n**(k + 1)``; there is no constant
    term, so ``cost(0) == 0``.
    """

    coeffs: tuple[float, ...]

    def __init__(self, coeffs: Sequence[float]) -> None:
        coeffs = tuple(float(c) for c in coeffs)
        if not coeffs:
            raise DomainError("cost polynomial needs at least one coefficient")
        if any(not math.isfinite(c) or c < 0 for c in coeffs):
            raise DomainError(f"cost coefficients must be finite and >= 0, got {coeffs}")
        if not any(c > 0 for c in coeffs):
            raise DomainError("at least one cost coefficient must be > 0")
        object.__setattr__(self, "coeffs", coeffs)

    @classmethod
    def quadratic(cls, c1: float, c2: float) -> CostPolynomial:
        return cls((c1, c2))

    @property
    def degree(self) -> int:
        """Index of the highest positive coefficient."""
        return max(i for i, c in enumerate(self.coeffs, start=1) if c > 0)

    def terms(self) -> list[tuple[int, float]]:
        """``(power, coefficient)`` pairs with positive coefficients."""
        return [(i, c) for i, c in enumerate(self.coeffs, start=1) if c > 0]

    def coefficient(self, power: int) -> float:
        return self.coeffs[power - 1] if 1 <= power <= len(self.coeffs) else 0.0

    def __call__(self, x):
        """Evaluate at a scalar or numpy array (Horner's rule)."""
        acc = 0.0
        for c in reversed(self.coeffs):
            acc = (acc + c) * x
        return acc

    def marginal_revenue_weight(self, x):
        """``sum_i (i + 1) C_i x**i``: the cost part of d/dq [q (R - cost(rho q))]."""
        acc = 0.0
        for i, c in reversed(list(enumerate(self.coeffs, start=1))):
            acc = acc * x + (i + 1) * c
        return acc * x

    def scaled(self, factor: float) -> CostPolynomial:
        return CostPolynomial([factor * c for c in self.coeffs])
