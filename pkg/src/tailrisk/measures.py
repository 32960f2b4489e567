"""Tail risk measures on samples and symmetric models.

Implements VaR, the conditional tail expectation (CTE), tail variance, the
tail quasi-linear mean U^{-1}(E[U(X) | X >= VaR]), and its exponential
special case, the tail conditional entropic risk measure
(1/gamma) log E[e^{gamma X} | X >= VaR]; plus the second-order Taylor
approximation around the CTE and the entropic dual-representation check.

Conventions: empirical VaR is the ceil(alpha*n)-th order statistic; the
tail event uses >= and includes ties, so the slice can exceed
n - ceil(alpha*n) + 1 members when values tie at the threshold. Tail
variance uses the population denominator (it is a plug-in conditional
moment, not an inferential estimator). Exponential paths run through
max-shifted log-sum-exp everywhere; |gamma| below GAMMA_TINY routes to the
CTE, the gamma -> 0 limit.

Sign conventions (documented in the README): the entropic closed form adds
+ (1/gamma) log(survival ratio), and the Taylor form for exp:gamma is
CTE + (gamma/2) * tail variance; both are fixed by quadrature oracles.
"""
from __future__ import annotations

import math
from dataclasses import dataclass

import numpy as np
from scipy import integrate, special

from .errors import DomainError, MgfNotDefinedError, ParameterError
from .samples import SampleSet
from .symmetric import SymmetricModel, cumulant, cumulative_generator, tilted_tail_survival
from .utilities import UtilityFunction

GAMMA_TINY = 1e-8
_SQRT_2PI = math.sqrt(2.0 * math.pi)


def _check_alpha(alpha: float) -> float:
    alpha = float(alpha)
    if not 0.0 < alpha < 1.0:
        raise ParameterError(f"alpha must lie in (0,1), got {alpha!r}")
    return alpha


# -- empirical ---------------------------------------------------------------

@dataclass(frozen=True)
class TailSlice:
    """The sub-sample at or above the VaR threshold (ties included)."""

    level: float
    threshold: float
    members: np.ndarray


def var_empirical(s: SampleSet, alpha: float) -> float:
    alpha = _check_alpha(alpha)
    x = s.sorted_view
    k = math.ceil(alpha * len(x))
    return float(x[k - 1])


def tail_slice(s: SampleSet, alpha: float) -> TailSlice:
    alpha = _check_alpha(alpha)
    x = s.sorted_view
    thr = var_empirical(s, alpha)
    members = x[np.searchsorted(x, thr, side="left"):]
    return TailSlice(level=alpha, threshold=thr, members=members)


def cte_empirical(s: SampleSet, alpha: float) -> float:
    m = tail_slice(s, alpha).members
    if m[0] == m[-1]:
        # constant tail: return the constant itself, not mean() which can
        # land one ulp off under pairwise summation
        return float(m[0])
    return float(np.mean(m))


def tail_variance_empirical(s: SampleSet, alpha: float) -> float:
    m = tail_slice(s, alpha).members
    if m[0] == m[-1]:
        return 0.0
    return float(np.var(m))


def certainty_equivalent(values: np.ndarray, u: UtilityFunction) -> float:
    """U^{-1} of the plain mean of U over the given scenario values.

    The conditional building block shared by tqlm_empirical (conditioning on
    the sample's own tail) and capital allocation (conditioning a component
    on the tail of the sum). The exponential kind runs max-shifted in log
    space; |gamma| below GAMMA_TINY degrades to the arithmetic mean.
    """
    values = np.asarray(values, dtype=float)
    if values.size == 0:
        raise ParameterError("certainty equivalent of an empty scenario set")
    lo = float(np.min(values))
    if lo == float(np.max(values)):
        # degenerate scenario set: U^{-1}(U(c)) is c wherever U is strictly
        # increasing and cap below c, so skip the mean/exp round trip that
        # would cost an ulp of exactness
        u.check_domain(values[:1])
        return min(lo, u.cap) if u.kind == "capped" else lo
    if u.kind == "linear":
        return float(np.mean(values))
    if u.kind == "exponential":
        gamma = u.gamma
        if abs(gamma) < GAMMA_TINY:
            return float(np.mean(values))
        w = gamma * values
        mx = float(np.max(w))
        return (mx + math.log(float(np.mean(np.exp(w - mx))))) / gamma
    u.check_domain(values)
    mean_u = float(np.mean(u.evaluate(values)))
    if u.kind == "capped":
        # E[U] <= cap is exact; clamping removes 1-ulp overshoot that would
        # otherwise push the generalized inverse to +inf
        mean_u = min(mean_u, u.cap)
    return u.inverse(mean_u)


def tcerm_empirical(s: SampleSet, alpha: float, gamma: float) -> float:
    """(1/gamma) log of the tail-conditional exponential moment, max-shifted."""
    gamma = float(gamma)
    if gamma == 0.0 or not math.isfinite(gamma):
        raise ParameterError(f"gamma must be finite and nonzero, got {gamma!r}")
    if abs(gamma) < GAMMA_TINY:
        return cte_empirical(s, alpha)
    return certainty_equivalent(tail_slice(s, alpha).members,
                                UtilityFunction.exponential(gamma))


def tqlm_empirical(s: SampleSet, alpha: float, u: UtilityFunction) -> float:
    """U^{-1} of the tail mean of U; equals CTE for linear U exactly."""
    return certainty_equivalent(tail_slice(s, alpha).members, u)


def standard_error(s: SampleSet, measure_fn, batches: int = 20) -> float:
    """Sectioning estimate: split into contiguous batches, take the spread
    of the per-batch measures over sqrt(batches)."""
    n = len(s)
    b = min(int(batches), n)
    if b < 2:
        raise ParameterError("standard error needs at least 2 batches")
    chunks = np.array_split(s.values, b)
    vals = [measure_fn(SampleSet(c)) for c in chunks]
    return float(np.std(vals, ddof=1) / math.sqrt(b))


# -- analytic ----------------------------------------------------------------

def var_analytic(model: SymmetricModel, alpha: float) -> float:
    return model.quantile(_check_alpha(alpha))


def cte_analytic(model: SymmetricModel, alpha: float) -> float:
    """mu + sigma * Gbar(q^2/2) / (1 - alpha), q the standard quantile."""
    alpha = _check_alpha(alpha)
    q = model._quantile_std(alpha)
    return model.mu + model.sigma * cumulative_generator(model, 0.5 * q * q) / (1.0 - alpha)


def _tail_growth_order(u: UtilityFunction) -> float:
    # polynomial growth order of |U| at +inf; exp is handled separately
    if u.kind == "linear":
        return 1.0
    if u.kind == "power":
        return max(u.gamma, 0.0)
    return 0.0  # log grows slower than any power; capped is bounded


def _check_t_integrability(model: SymmetricModel, order: float, what: str) -> None:
    if model.generator == "student_t" and order >= model.df:
        raise MgfNotDefinedError(
            f"{what} diverges for the student_t generator with df={model.df!r}: "
            f"the integrand grows at order {order!r}")


def _upper_limit(model: SymmetricModel, q: float, peak: float = 0.0) -> float:
    if model.generator == "student_t":
        return math.inf
    return max(q, peak) + 45.0


def tail_variance_analytic(model: SymmetricModel, alpha: float) -> float:
    alpha = _check_alpha(alpha)
    _check_t_integrability(model, 2.0, "tail variance")
    q = model._quantile_std(alpha)
    std = model.standard()
    mu, sg = model.mu, model.sigma

    def second(z):
        return (mu + sg * z) ** 2 * std.density_std(z)

    hi = _upper_limit(model, q)
    m2, _ = integrate.quad(second, q, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
    m2 /= (1.0 - alpha)
    return m2 - cte_analytic(model, alpha) ** 2


def tqlm_analytic(model: SymmetricModel, alpha: float, u: UtilityFunction) -> float:
    """Reduce to the standard member and integrate U(mu + sigma z) g(z^2/2)
    over the standard tail, then divide by 1 - alpha and invert."""
    alpha = _check_alpha(alpha)
    if u.kind == "exponential":
        return _tqlm_analytic_exponential(model, alpha, u.gamma)
    q = model._quantile_std(alpha)
    lo_x = model.mu + model.sigma * q
    if u.kind in ("power", "logarithmic") and lo_x <= 0.0:
        raise DomainError(
            f"{u.kind} utility needs a positive tail; the tail starts at {lo_x!r}")
    _check_t_integrability(model, _tail_growth_order(u), f"tqlm with {u.spec_string()}")
    std = model.standard()
    mu, sg = model.mu, model.sigma

    if u.kind == "capped":
        if u.cap <= lo_x:
            return u.cap  # U is constant on the whole tail: the bound is attained
        zc = (u.cap - mu) / sg
        below, _ = integrate.quad(lambda z: (mu + sg * z) * std.density_std(z),
                                  q, zc, epsabs=1e-13, epsrel=1e-12, limit=200)
        mean_u = (below + u.cap * std._survival_std(zc)) / (1.0 - alpha)
        return u.inverse(min(mean_u, u.cap))

    def integrand(z):
        return u.evaluate(mu + sg * z) * std.density_std(z)

    hi = _upper_limit(model, q)
    val, _ = integrate.quad(integrand, q, hi, epsabs=1e-13, epsrel=1e-12, limit=200)
    return u.inverse(val / (1.0 - alpha))


def _tqlm_analytic_exponential(model: SymmetricModel, alpha: float, gamma: float) -> float:
    gamma = float(gamma)
    if abs(gamma) < GAMMA_TINY:
        return cte_analytic(model, alpha)
    if model.generator == "student_t" and gamma > 0:
        raise MgfNotDefinedError(
            "the exponential tail integral diverges for the student_t generator "
            f"with gamma={gamma!r} > 0")
    q = model._quantile_std(alpha)
    std = model.standard()
    mu, sg = model.mu, model.sigma
    t = gamma * sg

    def expo(z):
        return t * z + std.log_density_std(z)

    hi = _upper_limit(model, q, peak=t)
    probe_hi = hi if math.isfinite(hi) else q + 60.0
    probe = np.linspace(q, probe_hi, 801)
    shift = float(np.max(expo(probe)))
    val, _ = integrate.quad(lambda z: np.exp(expo(z) - shift), q, hi,
                            epsabs=1e-300, epsrel=1e-13, limit=200)
    log_mean = shift + math.log(val) - math.log(1.0 - alpha)
    return mu + log_mean / gamma


def tcerm_analytic(model: SymmetricModel, alpha: float, gamma: float) -> float:
    """Structured route: mu + kappa(gamma sigma)/gamma + log(tilted tail
    survival over 1 - alpha)/gamma. Rejects generators without an mgf."""
    alpha = _check_alpha(alpha)
    gamma = float(gamma)
    if gamma == 0.0 or not math.isfinite(gamma):
        raise ParameterError(f"gamma must be finite and nonzero, got {gamma!r}")
    if model.generator == "student_t":
        raise MgfNotDefinedError(
            "student_t has no moment generating function; entropic measures "
            "are undefined for this generator")
    if abs(gamma) < GAMMA_TINY:
        return cte_analytic(model, alpha)
    t = gamma * model.sigma
    kap = cumulant(model, t)
    q = model._quantile_std(alpha)
    surv = tilted_tail_survival(model, t, q)
    return model.mu + kap / gamma + math.log(surv / (1.0 - alpha)) / gamma


def tcerm_normal(mu: float, sigma: float, alpha: float, gamma: float) -> float:
    """Closed form for the normal generator; must agree with tcerm_analytic."""
    alpha = _check_alpha(alpha)
    if not sigma > 0:
        raise ParameterError(f"sigma must be positive, got {sigma!r}")
    gamma = float(gamma)
    if gamma == 0.0 or not math.isfinite(gamma):
        raise ParameterError(f"gamma must be finite and nonzero, got {gamma!r}")
    q = float(special.ndtri(alpha))
    if abs(gamma) < GAMMA_TINY:
        return mu + sigma * math.exp(-0.5 * q * q) / (_SQRT_2PI * (1.0 - alpha))
    ratio = float(special.ndtr(gamma * sigma - q)) / (1.0 - alpha)
    return mu + 0.5 * gamma * sigma * sigma + math.log(ratio) / gamma


def taylor_tqlm(cte: float, tv: float, u: UtilityFunction, evaluation_point: float) -> float:
    """Second-order expansion cte - risk_aversion(evaluation_point)/2 * tv."""
    if tv < 0:
        raise ParameterError(f"tail variance must be nonnegative, got {tv!r}")
    return float(cte) - 0.5 * u.risk_aversion(evaluation_point) * float(tv)


# -- dual representation -------------------------------------------------------

@dataclass(frozen=True)
class DiscreteDistribution:
    """Finite support distribution for the entropic dual check."""

    points: np.ndarray
    probs: np.ndarray

    def __post_init__(self):
        pts = np.asarray(self.points, dtype=float).ravel()
        pr = np.asarray(self.probs, dtype=float).ravel()
        if pts.size == 0 or pts.size != pr.size:
            raise ParameterError("points and probs must be nonempty and equal length")
        if not np.all(np.isfinite(pts)):
            raise ParameterError("points must be finite")
        if np.any(pr <= 0.0):
            raise ParameterError("probabilities must all be positive")
        if abs(float(np.sum(pr)) - 1.0) > 1e-12:
            raise ParameterError(f"probabilities must sum to 1, got {float(np.sum(pr))!r}")
        object.__setattr__(self, "points", pts)
        object.__setattr__(self, "probs", pr)


def dual_objective(base: DiscreteDistribution, q: np.ndarray, gamma: float) -> float:
    """E_Q[X] - (1/gamma) KL(Q || base) for Q given as a probability vector
    on the same support."""
    q = np.asarray(q, dtype=float).ravel()
    if q.size != base.points.size:
        raise ParameterError("candidate measure must share the base support")
    if np.any(q < 0.0) or abs(float(np.sum(q)) - 1.0) > 1e-9:
        raise ParameterError("candidate measure must be a probability vector")
    pos = q > 0.0
    kl = float(np.sum(q[pos] * np.log(q[pos] / base.probs[pos])))
    return float(np.dot(q, base.points)) - kl / gamma


def dual_entropic(base: DiscreteDistribution, gamma: float):
    """Closed-form optimizer Q* proportional to e^{gamma z} times the base,
    and the variational objective evaluated at Q*.

    The returned value is computed from the Q* atoms through dual_objective,
    not from the log-sum-exp formula, so tests can compare the two routes
    independently.
    """
    gamma = float(gamma)
    if gamma <= 0.0 or not math.isfinite(gamma):
        raise ParameterError(f"the dual check needs gamma > 0, got {gamma!r}")
    w = gamma * base.points + np.log(base.probs)
    mx = float(np.max(w))
    raw = np.exp(w - mx)
    qstar = raw / float(np.sum(raw))
    value = dual_objective(base, qstar, gamma)
    return value, DiscreteDistribution(base.points, qstar)


# -- reporting ----------------------------------------------------------------

@dataclass(frozen=True)
class RiskReport:
    """One computed measure with the parameters that produced it."""

    alpha: float
    kind: str
    utility: str
    value: float
    standard_error: float | None
    source: str
    note: str = ""

    def to_dict(self) -> dict:
        return {
            "alpha": self.alpha,
            "kind": self.kind,
            "utility": self.utility,
            "value": self.value,
            "standard_error": self.standard_error,
            "source": self.source,
            "note": self.note,
        }
