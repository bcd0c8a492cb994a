import numpy as np
import pytest

from glmmp import settings
from glmmp.channels import ChannelSpec
from glmmp.priors import PriorSpec
from glmmp.solvers import ProblemInstance, SolverConfig
from glmmp.experiments import generate_problem


def pytest_collection_modifyitems(config, items):
    if settings.SLOW_TESTS:
        return
    skip = pytest.mark.skip(reason="set GLM_MP_SLOW_TESTS=1 to run")
    for item in items:
        if "slow" in item.keywords:
            item.add_marker(skip)


@pytest.fixture
def rng():
    return np.random.default_rng(1234)


def make_problem(
    M: int = 500,
    N: int = 500,
    lam: float = 0.5,
    theta: float = 1.0,
    snr_db: float = 20.0,
    seed: int = 0,
) -> ProblemInstance:
    return generate_problem(M, N, lam, theta, snr_db, seed)


def make_linear_problem(
    A: np.ndarray,
    y: np.ndarray,
    noise_var: float = 1e-2,
    prior: PriorSpec | None = None,
    x_true: np.ndarray | None = None,
) -> ProblemInstance:
    """A hand-built AWGN instance, Gaussian prior unless told otherwise."""
    return ProblemInstance(
        A=A,
        y=y,
        prior=prior or PriorSpec(kind='gaussian'),
        channel=ChannelSpec(kind='awgn', noise_var=noise_var),
        x_true=x_true,
    )


def config(**kwargs) -> SolverConfig:
    return SolverConfig(**kwargs).validate()
