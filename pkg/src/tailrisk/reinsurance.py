"""Optimal stop-loss reinsurance under a premium budget.

The insurer cedes f(X) and retains R_f(X) = X - f(X); both must be
nondecreasing with 0 <= f(x) <= x (so f is 1-Lipschitz). Premiums follow
the expected-value principle (1+theta) E[f(X)]. Under any strictly convex
tail certainty-equivalent objective the budget-exhausting stop-loss treaty
f*(x) = (x - a*)_+ is optimal, with a* solving
(1+theta) E[(X - a*)_+] = P; the minimizer does not depend on which convex
utility is used. verify_optimality is a falsification harness over
premium-matched admissible families, not a proof.

Losses are duck-typed: a SampleSet, a SymmetricModel, or a ParametricLoss
wrapping survival/quantile/density callables (how the exponential test
fixture gets closed-form oracles without extending the symmetric family).
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, optimize

from .errors import FeasibilityError, NoRootError, ParameterError
from .measures import certainty_equivalent, tail_slice
from .samples import SampleSet
from .symmetric import SymmetricModel
from .utilities import UtilityFunction

_TREATY_KINDS = ("stop_loss", "proportional", "none", "change_loss", "mixed")
_BRENTQ_RTOL = 4.0 * float(np.finfo(float).eps)


@dataclass(frozen=True)
class Treaty:
    """An admissible reinsurance arrangement: ceded amount f(x), retained
    amount x - f(x), both nondecreasing and sandwiched in [0, x].

    stop_loss(a): f = (x - a)_+          proportional(q): f = q x
    none: f = 0
    change_loss(q, b): f = q (x - b)_+   (the premium-matching family that
        sweeps from pure proportional at b=0 to stop-loss at q=1)
    mixed(a, q): f = (x - a)_+ + q min(x, a)   (stop-loss at a deliberately
        away from the optimum, premium-matched by the proportional layer)
    """

    kind: str
    a: float = None
    q: float = None
    b: float = None

    def __post_init__(self):
        if self.kind not in _TREATY_KINDS:
            raise ParameterError(f"unknown treaty kind {self.kind!r}")
        if self.kind in ("stop_loss", "mixed"):
            if self.a is None or not self.a >= 0.0:
                raise ParameterError(f"retention must be >= 0, got {self.a!r}")
        if self.kind in ("proportional", "change_loss", "mixed"):
            if self.q is None or not 0.0 <= self.q <= 1.0:
                raise ParameterError(f"ceded share must lie in [0,1], got {self.q!r}")
        if self.kind == "change_loss":
            if self.b is None or not self.b >= 0.0:
                raise ParameterError(f"deductible must be >= 0, got {self.b!r}")

    @classmethod
    def stop_loss(cls, a: float) -> "Treaty":
        return cls(kind="stop_loss", a=float(a))

    @classmethod
    def proportional(cls, q: float) -> "Treaty":
        return cls(kind="proportional", q=float(q))

    @classmethod
    def none(cls) -> "Treaty":
        return cls(kind="none")

    @classmethod
    def change_loss(cls, q: float, b: float) -> "Treaty":
        return cls(kind="change_loss", q=float(q), b=float(b))

    @classmethod
    def mixed(cls, a: float, q: float) -> "Treaty":
        return cls(kind="mixed", a=float(a), q=float(q))

    def label(self) -> str:
        if self.kind == "stop_loss":
            return f"stop_loss(a={self.a:.6g})"
        if self.kind == "proportional":
            return f"proportional(q={self.q:.6g})"
        if self.kind == "change_loss":
            return f"change_loss(q={self.q:.6g}, b={self.b:.6g})"
        if self.kind == "mixed":
            return f"mixed(a={self.a:.6g}, q={self.q:.6g})"
        return "none"

    def ceded(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "stop_loss":
            out = np.maximum(x - self.a, 0.0)
        elif self.kind == "proportional":
            out = self.q * x
        elif self.kind == "change_loss":
            out = self.q * np.maximum(x - self.b, 0.0)
        elif self.kind == "mixed":
            out = np.maximum(x - self.a, 0.0) + self.q * np.minimum(x, self.a)
        else:
            out = np.zeros_like(x)
        return out if out.ndim else float(out)

    def retained(self, x):
        x = np.asarray(x, dtype=float)
        if self.kind == "stop_loss":
            out = np.minimum(x, self.a)  # x - (x-a)_+ pointwise
        else:
            out = x - np.asarray(self.ceded(x))
        return out if out.ndim else float(out)

    def kinks(self) -> tuple:
        if self.kind == "stop_loss" or self.kind == "mixed":
            return (self.a,)
        if self.kind == "change_loss":
            return (self.b,)
        return ()


@dataclass(frozen=True)
class ParametricLoss:
    """Closed-form loss description for analytic reinsurance work: survival
    and quantile callables are required, density only for retained_risk.
    survival and quantile take and return scalars; density must also accept
    numpy arrays (the quadrature setup probes it on a grid)."""

    survival: callable
    quantile: callable
    density: callable = None
    name: str = "parametric"


@dataclass(frozen=True)
class ReinsuranceProblem:
    loss: object
    theta: float
    budget: float
    alpha: float

    def __post_init__(self):
        if not self.theta > 0.0:
            raise ParameterError(f"loading theta must be positive, got {self.theta!r}")
        if not self.budget > 0.0:
            raise ParameterError(f"premium budget must be positive, got {self.budget!r}")
        if not 0.0 < self.alpha < 1.0:
            raise ParameterError(f"alpha must lie in (0,1), got {self.alpha!r}")


def _loss_var(loss, alpha: float) -> float:
    if isinstance(loss, SampleSet):
        from .measures import var_empirical
        return var_empirical(loss, alpha)
    return float(loss.quantile(alpha))


def expected_excess(loss, a: float) -> float:
    """E[(X - a)_+]: sample mean, or the survival integral int_a S(x) dx."""
    a = float(a)
    if isinstance(loss, SampleSet):
        return float(np.mean(np.maximum(loss.values - a, 0.0)))
    if isinstance(loss, SymmetricModel):
        za = (a - loss.mu) / loss.sigma
        std = loss.standard()
        if loss.generator == "student_t" and loss.df <= 1.0:
            raise ParameterError(
                f"the mean excess diverges for student_t with df={loss.df!r}")
        hi = math.inf if loss.generator == "student_t" else max(za, 0.0) + 45.0
        val, _ = integrate.quad(std._survival_std, za, hi,
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        return loss.sigma * val
    if isinstance(loss, ParametricLoss):
        val, _ = integrate.quad(lambda x: float(loss.survival(x)), a, math.inf,
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        return val
    raise ParameterError(f"unsupported loss type {type(loss).__name__}")


def loss_mean(loss) -> float:
    if isinstance(loss, SampleSet):
        return float(np.mean(loss.values))
    if isinstance(loss, SymmetricModel):
        return loss.mu
    # positive-support convention for parametric losses: E[X] = int_0 S
    return expected_excess(loss, 0.0)


def _solve_excess_level(loss, target: float, lo: float) -> float:
    """Smallest a >= lo with E[(X-a)_+] = target; the excess is continuous
    and nonincreasing, so geometric bracket growth then brentq."""
    g = lambda a: expected_excess(loss, a) - target
    glo = g(lo)
    if glo < 0.0:
        raise ParameterError(
            f"excess at the bracket start {lo!r} is already below the target")
    if glo == 0.0:
        return lo
    hi = lo + max(1.0, abs(lo))
    for _ in range(200):
        if g(hi) < 0.0:
            break
        hi = lo + 2.0 * (hi - lo)
    else:
        raise NoRootError("expected excess never fell below the target",
                          scanned=[lo, hi])
    return float(optimize.brentq(g, lo, hi, xtol=1e-14, rtol=_BRENTQ_RTOL,
                                 maxiter=200))


def feasibility_bound(p: ReinsuranceProblem) -> float:
    """(1+theta) E[(X - VaR_alpha)_+]: budgets at or above this cannot have
    a retention beyond the VaR."""
    v = _loss_var(p.loss, p.alpha)
    return (1.0 + p.theta) * expected_excess(p.loss, v)


def solve_retention(p: ReinsuranceProblem) -> float:
    """The retention a* > VaR_alpha with (1+theta) E[(X-a*)_+] = budget."""
    bound = feasibility_bound(p)
    if not p.budget < bound:
        raise FeasibilityError(
            f"budget {p.budget!r} must stay below (1+theta)*E[(X-VaR)_+] = {bound!r}",
            bound=bound)
    v = _loss_var(p.loss, p.alpha)
    a = _solve_excess_level(p.loss, p.budget / (1.0 + p.theta), v)
    residual = abs((1.0 + p.theta) * expected_excess(p.loss, a) - p.budget)
    if residual > 1e-10 * p.budget:
        raise NoRootError(
            f"retention constraint residual {residual!r} exceeds 1e-10 relative",
            scanned=[a])
    return a


def premium(loss, t: Treaty, theta: float) -> float:
    """(1+theta) E[f(X)] under the expected-value principle."""
    if t.kind == "none":
        return 0.0
    if t.kind == "stop_loss":
        ee = expected_excess(loss, t.a)
    elif t.kind == "proportional":
        ee = t.q * loss_mean(loss)
    elif t.kind == "change_loss":
        ee = t.q * expected_excess(loss, t.b)
    else:  # mixed: E[(X-a)_+] + q E[min(X,a)]
        ea = expected_excess(loss, t.a)
        ee = ea + t.q * (loss_mean(loss) - ea)
    return (1.0 + theta) * ee


def retained_risk(loss, t: Treaty, alpha: float, u: UtilityFunction) -> float:
    """Tail certainty equivalent of the retained loss R_f(X), conditioning
    on the tail of X itself: R_f is increasing and left-continuous, so the
    raw loss's VaR event carries over to the transformed variable."""
    if isinstance(loss, SampleSet):
        members = tail_slice(loss, alpha).members
        return certainty_equivalent(t.retained(members), u)
    if isinstance(loss, (SymmetricModel, ParametricLoss)):
        return _retained_risk_quadrature(loss, t, alpha, u)
    raise ParameterError(f"unsupported loss type {type(loss).__name__}")


def _density_and_var(loss, alpha: float):
    if isinstance(loss, SymmetricModel):
        return loss.density, loss.quantile(alpha)
    if loss.density is None:
        raise ParameterError(
            "retained_risk on a parametric loss needs a density callable")
    return loss.density, float(loss.quantile(alpha))


def _retained_risk_quadrature(loss, t: Treaty, alpha: float, u: UtilityFunction) -> float:
    density, v = _density_and_var(loss, alpha)
    if isinstance(loss, SymmetricModel):
        hi = math.inf if loss.generator == "student_t" else \
            loss.mu + loss.sigma * (max((v - loss.mu) / loss.sigma, 0.0) + 45.0)
    else:
        # light-tailed parametric convention: negligible mass beyond the
        # 1 - 1e-13 quantile plus a wide margin
        hi = max(float(loss.quantile(1.0 - 1e-13)), v) + 60.0
    cuts = sorted(k for k in t.kinks() if v < k < hi)
    edges = [v, *cuts, hi]

    if u.kind == "exponential" and abs(u.gamma) >= 1e-8:
        gamma = u.gamma
        probe_hi = hi if math.isfinite(hi) else v + 60.0
        probe = np.linspace(v, probe_hi, 801)
        with np.errstate(divide="ignore"):
            shift = float(np.max(gamma * t.retained(probe) + np.log(density(probe))))

        def integrand(x):
            d = density(x)
            if d <= 0.0:
                return 0.0
            return math.exp(gamma * t.retained(x) + math.log(d) - shift)

        total = 0.0
        for lo_e, hi_e in zip(edges[:-1], edges[1:]):
            val, _ = integrate.quad(integrand, lo_e, hi_e,
                                    epsabs=1e-300, epsrel=1e-13, limit=200)
            total += val
        return (shift + math.log(total / (1.0 - alpha))) / gamma

    def integrand(x):
        return u.evaluate(t.retained(x)) * density(x)

    total = 0.0
    for lo_e, hi_e in zip(edges[:-1], edges[1:]):
        val, _ = integrate.quad(integrand, lo_e, hi_e,
                                epsabs=1e-14, epsrel=1e-12, limit=200)
        total += val
    mean_u = total / (1.0 - alpha)
    if u.kind == "capped":
        mean_u = min(mean_u, u.cap)
    return u.inverse(mean_u)


@dataclass(frozen=True)
class CandidateReport:
    treaty_label: str
    premium_residual: float
    retained_value: float
    margin: float


@dataclass(frozen=True)
class OptimalityReport:
    retention: float
    optimal_value: float
    candidates: tuple

    @property
    def min_margin(self) -> float:
        return min(c.margin for c in self.candidates)


def _premium_matched_candidates(p: ReinsuranceProblem, family: str, count: int):
    target = p.budget / (1.0 + p.theta)  # E[f(X)] each candidate must hit
    mean = loss_mean(p.loss)
    a_star = solve_retention(p)
    if family == "proportional":
        # q(x-b)_+ spans the whole-excess share (b=0) through stop-loss (q=1)
        q_min = target / expected_excess(p.loss, 0.0)
        out = []
        for q in np.linspace(q_min, 1.0, count):
            b = 0.0 if q <= q_min else _solve_excess_level(p.loss, target / q, 0.0)
            out.append(Treaty.change_loss(q=float(q), b=b))
        return out
    if family == "mixed":
        # stop-loss at a retention beyond a*, topped up proportionally
        out = []
        for a in a_star + np.linspace(0.25, 1.5, count):
            ea = expected_excess(p.loss, a)
            q = (target - ea) / (mean - ea)
            if not 0.0 < q <= 1.0:
                continue
            out.append(Treaty.mixed(a=float(a), q=float(q)))
        return out
    raise ParameterError(f"unknown candidate family {family!r}")


def verify_optimality(p: ReinsuranceProblem, u: UtilityFunction,
                      candidate_family: str = "proportional",
                      count: int = 20) -> OptimalityReport:
    """Falsification harness: every premium-matched admissible candidate in
    the family must retain at least as much risk as the budget-exhausting
    stop-loss treaty. Requires a strictly convex utility; for concave ones
    the optimal shape is a different (unimplemented) problem, so refuse."""
    if u.curvature() != "convex":
        raise ParameterError(
            f"verify_optimality needs a strictly convex utility, got {u.spec_string()!r}")
    a_star = solve_retention(p)
    base = retained_risk(p.loss, Treaty.stop_loss(a_star), p.alpha, u)
    reports = []
    for cand in _premium_matched_candidates(p, candidate_family, count):
        resid = premium(p.loss, cand, p.theta) - p.budget
        val = retained_risk(p.loss, cand, p.alpha, u)
        reports.append(CandidateReport(
            treaty_label=cand.label(),
            premium_residual=float(resid),
            retained_value=val,
            margin=val - base))
    return OptimalityReport(retention=a_star, optimal_value=base,
                            candidates=tuple(reports))
