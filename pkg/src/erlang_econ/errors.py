"""Exception types shared across the package."""


class DomainError(ValueError):
    """An argument lies outside the domain of the requested quantity."""


class ThresholdOverflowError(OverflowError):
    """The equilibrium threshold exceeds the configured search bound."""


class ConsistencyError(RuntimeError):
    """Two independent evaluations of the same optimum disagree."""


class SimulationError(RuntimeError):
    """The simulator hit a safety limit or was misconfigured."""
