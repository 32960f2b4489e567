"""Typed errors shared across the package."""
from __future__ import annotations


class TailRiskError(Exception):
    """Base class for all package errors."""


class ParameterError(TailRiskError, ValueError):
    """A scalar argument is outside its admissible range (alpha, gamma, sizes)."""


class DomainError(TailRiskError, ValueError):
    """A utility was evaluated outside its domain (e.g. log of a nonpositive value)."""


class RangeError(TailRiskError, ValueError):
    """A numeric range problem that survived the stable evaluation paths (NaN inputs)."""


class MgfNotDefinedError(TailRiskError, ValueError):
    """The required exponential moment / tail integral does not exist.

    Carries a reason string; raised both for generators without a moment
    generating function and for genuinely divergent tail integrals.
    """


class DifferentiabilityError(TailRiskError, ValueError):
    """Risk aversion requested at a point where the utility is not twice
    differentiable with a nonvanishing first derivative."""


class FeasibilityError(TailRiskError, ValueError):
    """Reinsurance budget exceeds the spendable bound. Carries the bound."""

    def __init__(self, message: str, bound: float):
        super().__init__(message)
        self.bound = bound


class NoRootError(TailRiskError, RuntimeError):
    """A bracketed root search found no sign change. Carries the scan trace."""

    def __init__(self, message: str, scanned: list):
        super().__init__(message)
        self.scanned = scanned


class DiscrepancyError(TailRiskError, RuntimeError):
    """The fast analytic path disagrees with its brute-force oracle beyond
    tolerance. Carries both candidates so callers can inspect."""

    def __init__(self, message: str, result=None):
        super().__init__(message)
        self.result = result


class UsageError(TailRiskError, ValueError):
    """Malformed CLI/config input (exit code 2 at the command line)."""
