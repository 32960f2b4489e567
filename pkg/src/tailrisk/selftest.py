"""Fast built-in invariant suite for the command line.

Each check is deterministic, runs in well under a second, and exercises one
structural property end to end. The pytest suite is the real gate; this
exists so a deployed binary can prove its numerics without a test install.
"""
from __future__ import annotations

import math

import numpy as np

from . import allocation, measures, portfolio, reinsurance, symmetric, utilities
from .samples import SampleSet


def _check_utility_inverse_roundtrip() -> bool:
    xs = np.linspace(0.3, 4.0, 9)
    for u in (utilities.UtilityFunction.linear(),
              utilities.UtilityFunction.exponential(0.7),
              utilities.UtilityFunction.exponential(-1.3),
              utilities.UtilityFunction.power(0.5),
              utilities.UtilityFunction.power(2.0),
              utilities.UtilityFunction.logarithmic()):
        for x in xs:
            if abs(u.inverse(u.evaluate(x)) - x) > 1e-10:
                return False
    return True


def _check_generalized_inverse_edges() -> bool:
    exp_pos = utilities.UtilityFunction.exponential(1.0)
    exp_neg = utilities.UtilityFunction.exponential(-1.0)
    pow_pos = utilities.UtilityFunction.power(0.5)
    cap = utilities.UtilityFunction.capped(2.0)
    return (exp_pos.inverse(-1.0) == -math.inf
            and exp_neg.inverse(0.5) == math.inf
            and pow_pos.inverse(-3.0) == 0.0
            and cap.inverse(2.5) == math.inf
            and cap.inverse(1.5) == 1.5)


def _check_tie_semantics() -> bool:
    s = SampleSet([1.0, 1.0, 1.0, 2.0])
    sl = measures.tail_slice(s, 0.5)
    return sl.threshold == 1.0 and sl.members.size == 4


def _check_sandwich_normal() -> bool:
    model = symmetric.SymmetricModel.normal()
    for alpha in (0.9, 0.95):
        v = measures.var_analytic(model, alpha)
        cte = measures.cte_analytic(model, alpha)
        lo = measures.tqlm_analytic(model, alpha, utilities.UtilityFunction.exponential(-0.5))
        hi = measures.tqlm_analytic(model, alpha, utilities.UtilityFunction.exponential(0.5))
        if not (v - 1e-9 <= lo <= cte + 1e-9 and hi >= cte - 1e-9):
            return False
    return True


def _check_closed_vs_quadrature() -> bool:
    closed = measures.tcerm_normal(0.0, 1.0, 0.95, 0.5)
    quad = measures.tqlm_analytic(symmetric.SymmetricModel.normal(), 0.95,
                                  utilities.UtilityFunction.exponential(0.5))
    return abs(closed - quad) < 1e-8


def _check_linear_allocation_gap() -> bool:
    rng = np.random.default_rng(7)
    j = allocation.JointSample(rng.normal(size=(3, 4001)))
    gap = allocation.allocation_gap(j, 0.9, utilities.UtilityFunction.linear())
    return abs(gap) < 1e-12


def _check_dual_two_atoms() -> bool:
    base = measures.DiscreteDistribution(np.array([0.0, 1.0]), np.array([0.5, 0.5]))
    value, qstar = measures.dual_entropic(base, 1.0)
    want = math.log(0.5 * (1.0 + math.e))
    want_q1 = math.e / (1.0 + math.e)
    return abs(value - want) < 1e-12 and abs(qstar.probs[1] - want_q1) < 1e-12


def _check_stop_loss_pointwise() -> bool:
    x = np.linspace(0.0, 8.0, 33)
    t = reinsurance.Treaty.stop_loss(3.0)
    return bool(np.all(t.retained(x) == np.minimum(x, 3.0))
                and np.all(t.ceded(x) + t.retained(x) == x))


def _check_phi2_sums_to_zero() -> bool:
    rng = np.random.default_rng(11)
    a = rng.normal(size=(3, 3))
    m = portfolio.EllipticalModel(mu=rng.normal(size=3), sigma=a @ a.T + 3.0 * np.eye(3))
    part = portfolio.partition(m)
    q_inv_delta = np.linalg.solve(part.q_matrix, part.delta)
    phi2 = np.concatenate([q_inv_delta, [-float(np.sum(q_inv_delta))]])
    return abs(float(np.sum(phi2))) < 1e-12


def _check_logistic_constant() -> bool:
    return abs(symmetric.logistic_constant() - 1.049558614273827) < 1e-12


CHECKS = (
    ("utility_inverse_roundtrip", _check_utility_inverse_roundtrip),
    ("generalized_inverse_edges", _check_generalized_inverse_edges),
    ("tail_tie_semantics", _check_tie_semantics),
    ("sandwich_normal", _check_sandwich_normal),
    ("closed_vs_quadrature", _check_closed_vs_quadrature),
    ("linear_allocation_gap", _check_linear_allocation_gap),
    ("dual_two_atoms", _check_dual_two_atoms),
    ("stop_loss_pointwise", _check_stop_loss_pointwise),
    ("phi2_sums_to_zero", _check_phi2_sums_to_zero),
    ("logistic_constant", _check_logistic_constant),
)


def run_selftest() -> list:
    """Run every check; a crash counts as a failure of that check."""
    results = []
    for name, fn in CHECKS:
        try:
            ok = bool(fn())
        except Exception:
            ok = False
        results.append((name, ok))
    return results
