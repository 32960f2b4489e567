import numpy as np
import pytest
from hypothesis import HealthCheck, settings

from tailrisk.reinsurance import ParametricLoss
from tailrisk.samples import SampleSet
from tailrisk.symmetric import SymmetricModel

settings.register_profile(
    "suite",
    deadline=None,
    max_examples=60,
    suppress_health_check=[HealthCheck.too_slow],
)
settings.load_profile("suite")


@pytest.fixture(scope="session")
def normal_std():
    return SymmetricModel("normal")


@pytest.fixture(scope="session")
def logistic_std():
    return SymmetricModel("logistic")


@pytest.fixture(scope="session")
def student5_std():
    return SymmetricModel("student_t", df=5.0)


@pytest.fixture(scope="session")
def exp_unit_loss():
    # unit-rate exponential: survival exp(-x), quantile -log1p(-a);
    # density accepts scalars and arrays per the ParametricLoss contract
    return ParametricLoss(
        survival=lambda x: float(np.exp(-max(x, 0.0))),
        quantile=lambda a: float(-np.log1p(-a)),
        density=lambda x: np.where(np.asarray(x) >= 0.0, np.exp(-np.asarray(x)), 0.0),
        name="exp_unit",
    )


@pytest.fixture(scope="session")
def normal_draws():
    rng = np.random.default_rng(421)
    return SampleSet(rng.normal(0.0, 1.0, 4000))
