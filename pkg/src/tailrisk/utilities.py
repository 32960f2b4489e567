"""Utility transforms used inside tail quasi-linear means.

The catalogue is closed: linear, exponential (1/g)e^(g x), power (1/g)x^g,
logarithmic ln x, and capped min(x, c). Each kind has a closed-form
generalized inverse and an analytic Arrow-Pratt coefficient, which keeps
every downstream measure free of numeric-inversion tolerances.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np

from .errors import DifferentiabilityError, DomainError, ParameterError, UsageError

KINDS = ("linear", "exponential", "power", "logarithmic", "capped")


@dataclass(frozen=True)
class UtilityFunction:
    """An increasing continuous transform with generalized inverse.

    gamma parameterizes the exponential and power kinds (nonzero); cap is
    the plateau level of the capped kind. The capped kind carries its cap as
    plain data; callers reproduce the VaR lower-bound construction by
    passing cap = VaR themselves.
    """

    kind: str
    gamma: float | None = None
    cap: float | None = None

    def __post_init__(self):
        if self.kind not in KINDS:
            raise ParameterError(f"unknown utility kind {self.kind!r}")
        if self.kind in ("exponential", "power"):
            if self.gamma is None or self.gamma == 0 or not math.isfinite(self.gamma):
                raise ParameterError(f"{self.kind} utility needs a finite nonzero gamma")
        if self.kind == "capped" and (self.cap is None or not math.isfinite(self.cap)):
            raise ParameterError("capped utility needs a finite cap level")

    # -- constructors ------------------------------------------------------
    @classmethod
    def linear(cls) -> "UtilityFunction":
        return cls("linear")

    @classmethod
    def exponential(cls, gamma: float) -> "UtilityFunction":
        return cls("exponential", gamma=float(gamma))

    @classmethod
    def power(cls, gamma: float) -> "UtilityFunction":
        return cls("power", gamma=float(gamma))

    @classmethod
    def logarithmic(cls) -> "UtilityFunction":
        return cls("logarithmic")

    @classmethod
    def capped(cls, cap: float) -> "UtilityFunction":
        return cls("capped", cap=float(cap))

    @classmethod
    def parse(cls, spec: str) -> "UtilityFunction":
        """Parse the config grammar: linear | exp:<g> | pow:<g> | log | cap:<level>."""
        spec = spec.strip()
        if spec == "linear":
            return cls.linear()
        if spec == "log":
            return cls.logarithmic()
        for prefix, ctor in (("exp:", cls.exponential), ("pow:", cls.power), ("cap:", cls.capped)):
            if spec.startswith(prefix):
                try:
                    value = float(spec[len(prefix):])
                except ValueError as exc:
                    raise UsageError(f"bad numeric literal in utility spec {spec!r}") from exc
                return ctor(value)
        raise UsageError(f"unknown utility spec {spec!r}")

    def spec_string(self) -> str:
        if self.kind == "linear":
            return "linear"
        if self.kind == "logarithmic":
            return "log"
        if self.kind == "exponential":
            return f"exp:{self.gamma!r}"
        if self.kind == "power":
            return f"pow:{self.gamma!r}"
        return f"cap:{self.cap!r}"

    # -- domain ------------------------------------------------------------
    @property
    def domain_low(self) -> float:
        """Open lower endpoint of the domain (0 for power/log, else -inf)."""
        return 0.0 if self.kind in ("power", "logarithmic") else -math.inf

    def check_domain(self, x) -> None:
        if self.kind in ("power", "logarithmic") and np.min(x) <= 0.0:
            raise DomainError(
                f"{self.kind} utility is defined for positive arguments only; "
                f"got minimum {np.min(x)!r}")

    # -- curvature ---------------------------------------------------------
    def curvature(self) -> str:
        """'concave', 'convex', or 'linear' (linear counts as both bounds)."""
        if self.kind == "linear":
            return "linear"
        if self.kind in ("logarithmic", "capped"):
            return "concave"
        if self.kind == "exponential":
            return "convex" if self.gamma > 0 else "concave"
        if self.gamma == 1.0:
            return "linear"
        return "convex" if self.gamma > 1.0 else "concave"

    @property
    def is_concave(self) -> bool:
        return self.curvature() in ("concave", "linear")

    @property
    def is_convex(self) -> bool:
        return self.curvature() in ("convex", "linear")

    # -- the transform -----------------------------------------------------
    def evaluate(self, x):
        """U(x), elementwise over arrays. Raises DomainError off-domain."""
        x = np.asarray(x, dtype=float)
        self.check_domain(x)
        with np.errstate(over="ignore"):
            if self.kind == "linear":
                out = x.copy()
            elif self.kind == "exponential":
                out = np.exp(self.gamma * x) / self.gamma
            elif self.kind == "power":
                out = np.power(x, self.gamma) / self.gamma
            elif self.kind == "logarithmic":
                out = np.log(x)
            else:
                out = np.minimum(x, self.cap)
        return out if out.ndim else float(out)

    __call__ = evaluate

    def inverse(self, y: float) -> float:
        """Generalized inverse inf{x : U(x) >= y}; +-inf are legal values.

        For the power kind with gamma > 0 the infimum over the open domain
        (0, inf) is 0 when y <= 0.
        """
        y = float(y)
        if self.kind == "linear":
            return y
        if self.kind == "exponential":
            g = self.gamma
            if g > 0:
                return math.log(g * y) / g if y > 0 else -math.inf
            return math.log(g * y) / g if y < 0 else math.inf
        if self.kind == "power":
            g = self.gamma
            if g > 0:
                return (g * y) ** (1.0 / g) if y > 0 else 0.0
            return (g * y) ** (1.0 / g) if y < 0 else math.inf
        if self.kind == "logarithmic":
            return math.exp(y)
        return y if y <= self.cap else math.inf

    def risk_aversion(self, x: float) -> float:
        """Arrow-Pratt coefficient -U''(x)/U'(x), analytic per kind."""
        x = float(x)
        if self.kind == "linear":
            return 0.0
        if self.kind == "exponential":
            return -self.gamma
        if self.kind == "power":
            if x <= 0:
                raise DomainError("power utility risk aversion needs x > 0")
            return (1.0 - self.gamma) / x
        if self.kind == "logarithmic":
            if x <= 0:
                raise DomainError("logarithmic utility risk aversion needs x > 0")
            return 1.0 / x
        # capped: identity below the cap, kink at it, U' = 0 beyond it
        if x >= self.cap:
            raise DifferentiabilityError(
                f"capped utility is not twice differentiable with U' > 0 at x={x!r} "
                f"(cap {self.cap!r})")
        return 0.0
