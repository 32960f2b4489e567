"""Tail quasi-linear means and entropic tail risk measures.

The core object is U^{-1}(E[U(X) | X >= VaR_alpha(X)]) for an increasing
transform U, computed on empirical samples and on symmetric location-scale
models; the exponential choice of U gives the tail conditional entropic
risk measure. On top of the measures sit capital allocation by tail
conditioning, optimal stop-loss reinsurance under a premium budget, and
minimal-risk portfolio weights for elliptical return vectors.
"""
from .allocation import JointSample, allocation_gap, contribution
from .errors import (DifferentiabilityError, DiscrepancyError, DomainError,
                     FeasibilityError, MgfNotDefinedError, NoRootError,
                     ParameterError, RangeError, TailRiskError, UsageError)
from .measures import (GAMMA_TINY, DiscreteDistribution, RiskReport, TailSlice,
                       certainty_equivalent, cte_analytic, cte_empirical,
                       dual_entropic, dual_objective, standard_error,
                       tail_slice, tail_variance_analytic,
                       tail_variance_empirical, taylor_tqlm, tcerm_analytic,
                       tcerm_empirical, tcerm_normal, tqlm_analytic,
                       tqlm_empirical, var_analytic, var_empirical)
from .portfolio import (EllipticalModel, MinRiskResult, Partition,
                        PortfolioWeights, brute_force_min, marginalize,
                        min_risk_weights, partition, portfolio_tcerm,
                        s_function, s_prime)
from .reinsurance import (OptimalityReport, ParametricLoss, ReinsuranceProblem,
                          Treaty, expected_excess, feasibility_bound, premium,
                          retained_risk, solve_retention, verify_optimality)
from .samples import SampleSet, read_matrix_csv, read_sample_csv, write_sample_csv
from .symmetric import (SymmetricModel, cumulant, cumulative_generator,
                        logistic_constant, sample, tilted_tail_survival)
from .utilities import UtilityFunction

__version__ = "0.1.0"

__all__ = [
    "DifferentiabilityError", "DiscrepancyError", "DiscreteDistribution",
    "DomainError", "EllipticalModel", "FeasibilityError", "GAMMA_TINY",
    "JointSample", "MgfNotDefinedError", "MinRiskResult", "NoRootError",
    "OptimalityReport", "ParameterError", "ParametricLoss", "Partition",
    "PortfolioWeights", "RangeError", "ReinsuranceProblem", "RiskReport",
    "SampleSet", "SymmetricModel", "TailRiskError", "TailSlice", "Treaty",
    "UsageError", "UtilityFunction", "allocation_gap", "brute_force_min",
    "certainty_equivalent", "contribution", "cte_analytic", "cte_empirical",
    "cumulant", "cumulative_generator", "dual_entropic", "dual_objective",
    "expected_excess", "feasibility_bound", "logistic_constant",
    "marginalize", "min_risk_weights", "partition", "portfolio_tcerm",
    "premium", "read_matrix_csv", "read_sample_csv", "retained_risk",
    "s_function", "s_prime", "sample", "solve_retention", "standard_error",
    "tail_slice", "tail_variance_analytic", "tail_variance_empirical",
    "taylor_tqlm", "tcerm_analytic", "tcerm_empirical", "tcerm_normal",
    "tilted_tail_survival", "tqlm_analytic", "tqlm_empirical",
    "var_analytic", "var_empirical", "verify_optimality", "write_sample_csv",
]
