"""Capital allocation by conditioning components on the tail of their sum.

The contribution of component i is U^{-1}(E[U(X_i) | S >= VaR_alpha(S)])
with S the scenario-wise sum. Summed contributions reproduce the measure of
S exactly when U is linear; for convex exponential utility the whole is at
least the sum of the parts on comonotone portfolios and at most the sum on
countermonotone pairs (Monte-Carlo direction checks live in the tests).
"""
from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .errors import ParameterError
from .measures import certainty_equivalent, tqlm_empirical, var_empirical
from .samples import SampleSet
from .utilities import UtilityFunction


@dataclass(frozen=True)
class JointSample:
    """n components observed over m shared scenarios; row i holds the
    scenarios of component i. The sum row is derived, never stored apart."""

    matrix: np.ndarray
    names: tuple = field(default=None)

    def __post_init__(self):
        m = np.asarray(self.matrix, dtype=float)
        if m.ndim != 2 or m.shape[0] < 1 or m.shape[1] < 1:
            raise ParameterError(
                f"joint sample needs a 2-d components-by-scenarios matrix, got shape {m.shape}")
        if not np.all(np.isfinite(m)):
            raise ParameterError("joint sample entries must be finite")
        m = m.copy()
        m.setflags(write=False)
        object.__setattr__(self, "matrix", m)
        names = self.names
        if names is None:
            names = tuple(f"x{i + 1}" for i in range(m.shape[0]))
        else:
            names = tuple(str(x) for x in names)
            if len(names) != m.shape[0]:
                raise ParameterError(
                    f"{len(names)} names for {m.shape[0]} components")
        object.__setattr__(self, "names", names)

    @property
    def n_components(self) -> int:
        return self.matrix.shape[0]

    @property
    def n_scenarios(self) -> int:
        return self.matrix.shape[1]

    @property
    def sum_row(self) -> np.ndarray:
        return self.matrix.sum(axis=0)

    def component(self, i: int) -> SampleSet:
        return SampleSet(self.matrix[self._index(i)])

    def _index(self, i: int) -> int:
        i = int(i)
        if not 0 <= i < self.n_components:
            raise ParameterError(
                f"component index {i} out of range for {self.n_components} components")
        return i


def _sum_tail_mask(j: JointSample, alpha: float) -> np.ndarray:
    s = j.sum_row
    thr = var_empirical(SampleSet(s), alpha)
    return s >= thr


def contribution(j: JointSample, i: int, alpha: float, u: UtilityFunction) -> float:
    """Certainty equivalent of component i over the scenarios where the sum
    sits in its own tail; the same >=-with-ties event as var_empirical."""
    idx = j._index(i)
    mask = _sum_tail_mask(j, alpha)
    return certainty_equivalent(j.matrix[idx, mask], u)


def allocation_gap(j: JointSample, alpha: float, u: UtilityFunction) -> float:
    """Measure of the sum minus the summed contributions; identically zero
    (up to rounding) when U is linear, sign-definite in the comonotone and
    countermonotone cases for convex U."""
    total = tqlm_empirical(SampleSet(j.sum_row), alpha, u)
    parts = sum(contribution(j, i, alpha, u) for i in range(j.n_components))
    return total - parts
