"""End-to-end acceptance gate, one test per shipped guarantee.

Run with -v to get one pass/fail line per criterion. Each test states its
tolerance inline and computes any reference value through an independent
route (closed form worked by hand, direct quadrature, or a frozen constant
from oracles.py whose provenance is recorded there).
"""
import math
import time

import numpy as np
import pytest
from scipy import integrate, special

import cli_inputs
import oracles
from tailrisk import measures, symmetric
from tailrisk.cli import main as cli_main
from tailrisk.errors import DiscrepancyError, MgfNotDefinedError
from tailrisk.measures import (
    DiscreteDistribution,
    cte_analytic,
    dual_entropic,
    dual_objective,
    tail_variance_analytic,
    tcerm_analytic,
    tcerm_normal,
    tqlm_analytic,
    var_analytic,
)
from tailrisk.portfolio import EllipticalModel, brute_force_min, min_risk_weights
from tailrisk.reinsurance import ReinsuranceProblem, solve_retention, verify_optimality
from tailrisk.samples import SampleSet
from tailrisk.symmetric import SymmetricModel
from tailrisk.utilities import UtilityFunction

GOLDEN_DIR = __import__("pathlib").Path(__file__).parent / "golden"


def test_criterion_01_sandwich_bounds():
    # VaR <= TQLM <= CTE for concave utilities, TQLM >= CTE for convex ones,
    # across three generators and four tail levels, slack 1e-9; the shifted
    # location keeps every tail positive so pow and log stay in domain
    started = time.perf_counter()
    models = [SymmetricModel("normal", mu=5.0, sigma=1.0),
              SymmetricModel("student_t", mu=5.0, sigma=1.0, df=5.0),
              SymmetricModel("logistic", mu=5.0, sigma=1.0)]
    for model in models:
        for alpha in (0.8, 0.9, 0.95, 0.99):
            v = var_analytic(model, alpha)
            cte = cte_analytic(model, alpha)
            concave = [UtilityFunction.parse("exp:-0.5"),
                       UtilityFunction.parse("log"),
                       UtilityFunction.parse("pow:0.5"),
                       UtilityFunction.parse(f"cap:{v!r}")]
            for u in concave:
                got = tqlm_analytic(model, alpha, u)
                assert v - 1e-9 <= got <= cte + 1e-9, (model.generator, alpha, u.kind)
            for spec in ("exp:0.5", "pow:2"):
                u = UtilityFunction.parse(spec)
                if model.generator == "student_t" and spec == "exp:0.5":
                    # the exponential tail moment diverges for this generator,
                    # so the measure is +infinity: the lower bound holds
                    # vacuously and the engine must say so rather than guess
                    with pytest.raises(MgfNotDefinedError):
                        tqlm_analytic(model, alpha, u)
                    continue
                assert tqlm_analytic(model, alpha, u) >= cte - 1e-9
    assert time.perf_counter() - started < 10.0


def test_criterion_02_closed_form_vs_quadrature():
    started = time.perf_counter()

    def quadrature_route(alpha, gamma):
        v = special.ndtri(alpha)
        val, _ = integrate.quad(
            lambda x: math.exp(gamma * x) * math.exp(-0.5 * x * x)
            / math.sqrt(2.0 * math.pi),
            v, v + 50.0, epsabs=1e-15, epsrel=1e-13)
        return math.log(val / (1.0 - alpha)) / gamma

    headline = tcerm_normal(0.0, 1.0, 0.95, 0.5)
    assert headline == pytest.approx(quadrature_route(0.95, 0.5), abs=1e-8)
    assert headline == pytest.approx(oracles.NORMAL_TCERM95_G05, abs=1e-10)
    for alpha in (0.8, 0.85, 0.9, 0.95, 0.99):
        for gamma in (0.1, 0.25, 0.5, 0.75, 1.0):
            assert tcerm_normal(0.0, 1.0, alpha, gamma) == \
                pytest.approx(quadrature_route(alpha, gamma), abs=1e-8)
    assert time.perf_counter() - started < 5.0


def test_criterion_03_limit_recovery():
    # gamma -> 0 recovers the conditional tail mean, written here through
    # the cumulative-generator closed forms worked by hand
    for model, gbar in [
        (SymmetricModel("normal"),
         lambda t: math.exp(-t) / math.sqrt(2.0 * math.pi)),
        (SymmetricModel("logistic"),
         lambda t: oracles.LOGISTIC_C / (1.0 + math.exp(t))),
    ]:
        q = model.quantile(0.95)
        cte_by_hand = model.mu + model.sigma * gbar(0.5 * q * q) / 0.05
        assert cte_analytic(model, 0.95) == pytest.approx(cte_by_hand, rel=1e-10)
        assert tcerm_analytic(model, 0.95, 1e-6) == \
            pytest.approx(cte_by_hand, abs=1e-4)

    # alpha -> 0 recovers the unconditional entropic certainty equivalent,
    # independently integrated over the whole line
    gamma = 0.5
    for model, lo, hi in [(SymmetricModel("normal"), -40.0, 40.0),
                          (SymmetricModel("logistic"), -80.0, 80.0)]:
        val, _ = integrate.quad(
            lambda x: math.exp(gamma * x) * model.density(x),
            lo, hi, epsabs=1e-14, epsrel=1e-12)
        classical = math.log(val) / gamma
        assert tcerm_analytic(model, 1e-6, gamma) == \
            pytest.approx(classical, abs=1e-4)

    # quantile route: location-scale transport of the standard quantile
    for gen, df in (("normal", None), ("student_t", 5.0), ("logistic", None)):
        std = SymmetricModel(gen, df=df)
        model = SymmetricModel(gen, mu=-2.0, sigma=3.5, df=df)
        for alpha in (0.8, 0.9, 0.95, 0.99):
            assert var_analytic(model, alpha) == \
                pytest.approx(-2.0 + 3.5 * var_analytic(std, alpha), abs=1e-10)


def test_criterion_04_taylor_order():
    # the second-order expansion cte + (gamma/2) tv must have error O(gamma^2):
    # halving gamma shrinks the error by 4, within 25 percent
    model = SymmetricModel("normal")
    alpha = 0.95
    cte = cte_analytic(model, alpha)
    tv = tail_variance_analytic(model, alpha)
    errs = [abs(tcerm_analytic(model, alpha, g) - (cte + 0.5 * g * tv))
            for g in (0.4, 0.2, 0.1)]
    for bigger, smaller in zip(errs, errs[1:]):
        assert 3.0 <= bigger / smaller <= 5.0


def test_criterion_05_monte_carlo_consistency():
    started = time.perf_counter()
    alpha = 0.95
    for gen in ("normal", "logistic"):
        model = SymmetricModel(gen)
        s = symmetric.sample(model, 1_000_000, seed=2026)
        v = var_analytic(model, alpha)
        cap = UtilityFunction.parse(f"cap:{v + 0.5!r}")
        cells = [
            (lambda ss: measures.var_empirical(ss, alpha), v),
            (lambda ss: measures.cte_empirical(ss, alpha),
             cte_analytic(model, alpha)),
            (lambda ss: measures.tail_variance_empirical(ss, alpha),
             tail_variance_analytic(model, alpha)),
            (lambda ss: measures.tcerm_empirical(ss, alpha, 0.5),
             tcerm_analytic(model, alpha, 0.5)),
        ]
        for spec in ("exp:-0.5", "pow:2", "log"):
            u = UtilityFunction.parse(spec)
            cells.append((lambda ss, u=u: measures.tqlm_empirical(ss, alpha, u),
                          tqlm_analytic(model, alpha, u)))
        cells.append((lambda ss: measures.tqlm_empirical(ss, alpha, cap),
                      tqlm_analytic(model, alpha, cap)))
        for fn, target in cells:
            emp = fn(s)
            se = measures.standard_error(s, fn)
            assert abs(emp - target) <= 3.0 * se, (gen, emp, target, se)
    assert time.perf_counter() - started < 30.0


def test_criterion_06_dual_representation():
    # 50-atom discretization of the normal tail beyond the 95 percent point
    alpha, gamma, n = 0.95, 0.5, 50
    points = special.ndtri(alpha + (1 - alpha) * (np.arange(n) + 0.5) / n)
    base = DiscreteDistribution(points, np.full(n, 1.0 / n))
    value, qstar = dual_entropic(base, gamma)
    lse = math.log(float(np.sum(base.probs * np.exp(gamma * base.points)))) / gamma
    assert value == pytest.approx(lse, abs=1e-12)
    assert dual_objective(base, qstar.probs, gamma) == pytest.approx(value, abs=1e-14)
    rng = np.random.default_rng(606)
    for _ in range(200):
        tilt = qstar.probs * np.exp(0.1 * rng.normal(size=n))
        q = tilt / float(np.sum(tilt))
        assert dual_objective(base, q, gamma) <= value + 1e-12


def _gap_standard_error(matrix, names, alpha, u, chunks=20):
    from tailrisk.allocation import JointSample, allocation_gap
    n = matrix.shape[1]
    step = n // chunks
    gaps = [allocation_gap(JointSample(matrix[:, i * step:(i + 1) * step],
                                       names=names), alpha, u)
            for i in range(chunks)]
    return float(np.std(gaps, ddof=1) / math.sqrt(chunks))


def test_criterion_07_allocation_gaps():
    from tailrisk.allocation import JointSample, allocation_gap
    alpha = 0.95
    linear = UtilityFunction.parse("linear")
    entropic = UtilityFunction.parse("exp:0.5")

    # 5 x 100000 joint scenarios from mixed marginals: the linear gap is an
    # algebraic identity and must vanish to rounding
    for seed in (77, 78):
        rng = np.random.default_rng(seed)
        matrix = np.vstack([
            rng.normal(0.0, 1.0, 100_000),
            rng.lognormal(0.0, 0.4, 100_000),
            rng.uniform(-1.0, 4.0, 100_000),
            rng.standard_t(6, 100_000),
            rng.normal(1.0, 2.0, 100_000),
        ])
        j = JointSample(matrix, names=list("abcde"))
        assert abs(allocation_gap(j, alpha, linear)) <= 1e-12

    # comonotone rows: the joint measure dominates the contribution total
    rng = np.random.default_rng(79)
    src = rng.uniform(0.1, 3.0, 100_000)
    como = np.vstack([2.0 * src, src ** 2, np.log1p(src)])
    gap = allocation_gap(JointSample(como, names=list("xyz")), alpha, entropic)
    se = _gap_standard_error(como, list("xyz"), alpha, entropic)
    assert gap >= -3.0 * se

    # countermonotone pair: the inequality reverses
    v = rng.uniform(0.0, 1.0, 100_000)
    counter = np.vstack([v, 1.0 - v])
    gap = allocation_gap(JointSample(counter, names=list("uv")), alpha, entropic)
    se = _gap_standard_error(counter, list("uv"), alpha, entropic)
    assert gap <= 3.0 * se


def test_criterion_08_reinsurance_retention(exp_unit_loss):
    # budget line: (1 + theta) E[(X - a)+] = P with a unit exponential loss
    # gives 1.2 e^{-a} = 0.03, so a* = ln 40 exactly
    p = ReinsuranceProblem(loss=exp_unit_loss, theta=0.2, budget=0.03, alpha=0.95)
    a_star = solve_retention(p)
    assert a_star == pytest.approx(math.log(40.0), abs=1e-8)

    winners = []
    for spec in ("exp:0.5", "exp:2"):
        report = verify_optimality(p, UtilityFunction.parse(spec),
                                   candidate_family="proportional", count=20)
        assert len(report.candidates) == 20
        assert report.min_margin >= -1e-9
        margins = [c.margin for c in report.candidates]
        winners.append(int(np.argmin(margins)))
        assert abs(margins[winners[-1]]) <= 1e-9
        assert report.candidates[winners[-1]].treaty_label.startswith("change_loss(q=1")
    # the optimal shape does not move with the risk-aversion level
    assert winners[0] == winners[1]


def test_criterion_09_portfolio_weights():
    started = time.perf_counter()

    # five seeded SPD fixtures; the structured path must match the
    # direct-search oracle to 1e-3 per coordinate or raise the diagnostic
    sizes = (2, 3, 4, 2, 3)
    gammas = (0.1, 0.3, 0.1, 0.3, 0.1)
    outcomes = []
    for i, (n, gamma) in enumerate(zip(sizes, gammas)):
        rng = np.random.default_rng(505 + i)
        a = rng.normal(size=(n, n))
        m = EllipticalModel(mu=rng.normal(0.05, 0.03, n),
                            sigma=a @ a.T / n + 0.05 * np.eye(n))
        try:
            res = min_risk_weights(m, 0.95, gamma, cross_check=False)
            oracle = brute_force_min(m, 0.95, gamma)
            assert float(np.max(np.abs(res.weights.pi - oracle.pi))) <= 1e-3
            outcomes.append("match")
        except DiscrepancyError:
            outcomes.append("diagnostic")
    assert len(outcomes) == 5

    # exchangeable pair: exact half-and-half
    m = EllipticalModel(mu=[0.05, 0.05], sigma=[[0.04, 0.01], [0.01, 0.04]])
    res = min_risk_weights(m, 0.95, 0.5)
    assert res.weights.pi == pytest.approx([0.5, 0.5], abs=1e-6)

    # vanishing risk aversion: the solution collapses onto the
    # minimum-variance point, checked against an independent linear solve
    rng = np.random.default_rng(909)
    a = rng.normal(size=(3, 3))
    sigma = a @ a.T / 3 + 0.05 * np.eye(3)
    mu = 0.03 + 1e-6 * np.arange(3)
    m = EllipticalModel(mu=mu, sigma=sigma)
    res = min_risk_weights(m, 0.95, 0.01, cross_check=False)
    ones = np.ones(3)
    phi1 = np.linalg.solve(sigma, ones)
    phi1 /= float(ones @ phi1)
    assert res.weights.pi == pytest.approx(phi1, abs=1e-4)

    assert time.perf_counter() - started < 60.0


def test_criterion_10_cli_golden_determinism(tmp_path, monkeypatch):
    cli_inputs.write_all(tmp_path)
    monkeypatch.chdir(tmp_path)
    for fname, argv in sorted(cli_inputs.GOLDEN_CASES.items()):
        out = f"got-{fname}"
        assert cli_main(argv + ["--out", out]) == 0, fname
        assert (tmp_path / out).read_bytes() == \
            (GOLDEN_DIR / fname).read_bytes(), fname
