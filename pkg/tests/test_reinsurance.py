import math

import numpy as np
import pytest
from scipy import integrate, stats

import oracles
from tailrisk.errors import FeasibilityError, ParameterError
from tailrisk.measures import tail_slice
from tailrisk.reinsurance import (
    ParametricLoss,
    ReinsuranceProblem,
    Treaty,
    expected_excess,
    feasibility_bound,
    loss_mean,
    premium,
    retained_risk,
    solve_retention,
    verify_optimality,
)
from tailrisk.samples import SampleSet
from tailrisk.symmetric import SymmetricModel
from tailrisk.utilities import UtilityFunction


# -- treaty mechanics -----------------------------------------------------------

def test_stop_loss_split():
    t = Treaty.stop_loss(2.0)
    x = np.array([0.5, 2.0, 5.0])
    np.testing.assert_allclose(t.ceded(x), [0.0, 0.0, 3.0])
    np.testing.assert_allclose(t.retained(x), [0.5, 2.0, 2.0])
    assert t.kinks() == (2.0,)
    assert t.label() == "stop_loss(a=2)"


def test_change_loss_and_mixed_split():
    x = np.array([0.0, 1.0, 3.0, 10.0])
    cl = Treaty.change_loss(q=0.5, b=2.0)
    np.testing.assert_allclose(cl.ceded(x), [0.0, 0.0, 0.5, 4.0])
    mx = Treaty.mixed(a=3.0, q=0.25)
    np.testing.assert_allclose(mx.ceded(x), 0.25 * np.minimum(x, 3.0) + np.maximum(x - 3.0, 0.0))
    np.testing.assert_allclose(mx.retained(x), 0.75 * np.minimum(x, 3.0))
    assert Treaty.none().ceded(x).max() == 0.0
    np.testing.assert_allclose(Treaty.proportional(0.3).retained(x), 0.7 * x)


@pytest.mark.parametrize("t", [
    Treaty.stop_loss(1.0),
    Treaty.proportional(0.4),
    Treaty.change_loss(q=0.6, b=1.5),
    Treaty.mixed(a=2.0, q=0.5),
])
def test_retention_functions_admissible(t):
    # f and R_f nondecreasing, R_f 1-Lipschitz, f(x) in [0, x]
    x = np.linspace(0.0, 12.0, 4001)
    ceded, retained = t.ceded(x), t.retained(x)
    np.testing.assert_allclose(ceded + retained, x, atol=1e-12)
    assert np.all(np.diff(ceded) >= -1e-12)
    assert np.all(np.diff(retained) >= -1e-12)
    assert np.all(np.diff(retained) <= np.diff(x) + 1e-12)
    assert np.all(ceded >= -1e-12) and np.all(ceded <= x + 1e-12)


def test_treaty_validation():
    with pytest.raises(ParameterError):
        Treaty(kind="weird")
    with pytest.raises(ParameterError):
        Treaty.stop_loss(-1.0)
    with pytest.raises(ParameterError):
        Treaty.proportional(1.5)
    with pytest.raises(ParameterError):
        Treaty.change_loss(q=0.5, b=-2.0)


# -- expected excess and the retention equation -----------------------------------

def test_expected_excess_exponential_closed_form(exp_unit_loss):
    for a in [0.0, 0.5, 2.0, 5.0]:
        assert expected_excess(exp_unit_loss, a) == pytest.approx(math.exp(-a), rel=1e-12)
    assert loss_mean(exp_unit_loss) == pytest.approx(1.0, rel=1e-12)


def test_expected_excess_normal_closed_form():
    m = SymmetricModel("normal", 1.0, 2.0)
    for a in [0.0, 1.0, 3.5]:
        z = (a - 1.0) / 2.0
        closed = 2.0 * (stats.norm.pdf(z) - z * stats.norm.sf(z))
        assert expected_excess(m, a) == pytest.approx(closed, rel=1e-10)


def test_expected_excess_sample_route():
    s = SampleSet([1.0, 2.0, 3.0, 4.0])
    assert expected_excess(s, 2.5) == pytest.approx((0.5 + 1.5) / 4.0)
    assert loss_mean(s) == 2.5


def test_expected_excess_student_t_df1_rejected():
    with pytest.raises(ParameterError):
        expected_excess(SymmetricModel("student_t", df=1.0), 0.0)


def test_solve_retention_closed_form(exp_unit_loss):
    p = ReinsuranceProblem(loss=exp_unit_loss, theta=0.2, budget=0.03, alpha=0.95)
    assert solve_retention(p) == pytest.approx(oracles.EXP_RETENTION, abs=1e-10)
    assert feasibility_bound(p) == pytest.approx(oracles.EXP_FEASIBILITY_BOUND, rel=1e-10)


def test_solve_retention_infeasible_budget(exp_unit_loss):
    p = ReinsuranceProblem(loss=exp_unit_loss, theta=0.2, budget=0.08, alpha=0.95)
    with pytest.raises(FeasibilityError) as exc:
        solve_retention(p)
    assert exc.value.bound == pytest.approx(oracles.EXP_FEASIBILITY_BOUND, rel=1e-10)


def test_solve_retention_sample_route():
    rng = np.random.default_rng(8)
    s = SampleSet(rng.exponential(1.0, 20_000))
    p = ReinsuranceProblem(loss=s, theta=0.2, budget=0.03, alpha=0.95)
    a = solve_retention(p)
    # the empirical retention solves the empirical equation tightly ...
    assert (1.2 * expected_excess(s, a) - 0.03) == pytest.approx(0.0, abs=1e-11)
    # ... and sits near the population answer
    assert abs(a - oracles.EXP_RETENTION) < 0.25


def test_problem_validation(exp_unit_loss):
    with pytest.raises(ParameterError):
        ReinsuranceProblem(exp_unit_loss, theta=0.0, budget=0.03, alpha=0.95)
    with pytest.raises(ParameterError):
        ReinsuranceProblem(exp_unit_loss, theta=0.2, budget=-1.0, alpha=0.95)
    with pytest.raises(ParameterError):
        ReinsuranceProblem(exp_unit_loss, theta=0.2, budget=0.03, alpha=1.0)


def test_premium_expected_value_principle(exp_unit_loss):
    assert premium(exp_unit_loss, Treaty.stop_loss(2.0), 0.2) == pytest.approx(
        1.2 * math.exp(-2.0), rel=1e-12)
    assert premium(exp_unit_loss, Treaty.proportional(0.5), 0.2) == pytest.approx(
        1.2 * 0.5, rel=1e-12)
    assert premium(exp_unit_loss, Treaty.none(), 0.2) == 0.0


# -- retained risk ------------------------------------------------------------------

def test_retained_risk_sample_by_hand():
    s = SampleSet([1.0, 2.0, 3.0, 4.0])
    t = Treaty.stop_loss(2.5)
    u = UtilityFunction.exponential(0.5)
    # tail {2,3,4} capped at 2.5 -> {2.0, 2.5, 2.5}
    direct = 2.0 * math.log(np.mean(np.exp(0.5 * np.array([2.0, 2.5, 2.5]))))
    assert retained_risk(s, t, 0.5, u) == pytest.approx(direct, rel=1e-14)


def test_retained_risk_model_vs_direct_quadrature(normal_std):
    alpha = 0.9
    v = normal_std.quantile(alpha)
    t = Treaty.stop_loss(v + 0.5)
    for u in [UtilityFunction.exponential(0.7), UtilityFunction.exponential(-0.7),
              UtilityFunction.linear()]:
        val, _ = integrate.quad(
            lambda x: np.exp(u.gamma * np.minimum(x, t.a)) * normal_std.density(x)
            if u.kind == "exponential" else np.minimum(x, t.a) * normal_std.density(x),
            v, np.inf, epsabs=1e-14, epsrel=1e-12)
        mean_u = val / (1 - alpha)
        expect = math.log(mean_u) / u.gamma if u.kind == "exponential" else mean_u
        got = retained_risk(normal_std, t, alpha, u)
        assert got == pytest.approx(expect, rel=1e-9)


def test_retained_risk_parametric_route(exp_unit_loss):
    # exponential tail memorylessness: closed-form check for the linear kind
    alpha, a = 0.95, 4.0
    v = -math.log(1 - alpha)
    # E[min(X, a) | X > v] = a - integral_v^a (x - v ... ) closed: v + 1 - e^{-(a - v)}
    expect = v + 1.0 - math.exp(-(a - v))
    got = retained_risk(exp_unit_loss, Treaty.stop_loss(a), alpha, UtilityFunction.linear())
    assert got == pytest.approx(expect, rel=1e-9)


def test_retained_risk_whole_loss_is_tail_measure(normal_std):
    from tailrisk.measures import tcerm_analytic
    u = UtilityFunction.exponential(0.5)
    got = retained_risk(normal_std, Treaty.none(), 0.9, u)
    # retained = whole loss: reduces to the plain entropic tail measure
    assert got == pytest.approx(tcerm_analytic(normal_std, 0.9, 0.5), abs=1e-9)


def test_retained_risk_parametric_needs_density():
    loss = ParametricLoss(survival=lambda x: math.exp(-max(x, 0.0)),
                          quantile=lambda a: -math.log1p(-a))
    with pytest.raises(ParameterError):
        retained_risk(loss, Treaty.stop_loss(2.0), 0.9, UtilityFunction.linear())


# -- optimality harness ---------------------------------------------------------------

@pytest.fixture(scope="module")
def exp_problem(exp_unit_loss):
    return ReinsuranceProblem(loss=exp_unit_loss, theta=0.2, budget=0.03, alpha=0.95)


def test_verify_optimality_proportional_family(exp_problem):
    rep = verify_optimality(exp_problem, UtilityFunction.exponential(0.5))
    assert rep.retention == pytest.approx(oracles.EXP_RETENTION, abs=1e-10)
    assert len(rep.candidates) == 20
    for c in rep.candidates:
        assert abs(c.premium_residual) <= 1e-8 * exp_problem.budget
    assert rep.min_margin >= -1e-9
    # the q=1 member of the family is the stop-loss itself: zero margin
    assert min(abs(c.margin) for c in rep.candidates) <= 1e-9


def test_verify_optimality_mixed_family(exp_problem):
    rep = verify_optimality(exp_problem, UtilityFunction.exponential(0.5),
                            candidate_family="mixed", count=10)
    assert all(c.margin > 0.0 for c in rep.candidates)
    assert rep.min_margin > 0.0


def test_optimal_retention_invariant_across_convex_utilities(exp_problem):
    r1 = verify_optimality(exp_problem, UtilityFunction.exponential(0.5))
    r2 = verify_optimality(exp_problem, UtilityFunction.exponential(2.0))
    assert r1.retention == r2.retention
    assert r2.min_margin >= -1e-9


def test_verify_optimality_refuses_concave(exp_problem):
    for spec in ["exp:-0.5", "log", "cap:3.0", "linear"]:
        with pytest.raises(ParameterError):
            verify_optimality(exp_problem, UtilityFunction.parse(spec))


def test_unknown_candidate_family(exp_problem):
    with pytest.raises(ParameterError):
        verify_optimality(exp_problem, UtilityFunction.exponential(0.5),
                          candidate_family="bananas")
