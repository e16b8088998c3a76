# tests/unit/conftest.py
import logging

import numpy as np
import pytest

import lq_scalar
from all_types.lq_dtypes import NdLQParams
from lqr_synthesis import double_integrator, lqr_gain
from tests.utils import example_scalar_params

logger = logging.getLogger(__name__)


@pytest.fixture(scope="function")
def rng():
    """Fresh seeded generator per test"""
    return np.random.default_rng(20240611)


@pytest.fixture(scope="session")
def scalar_example():
    """One-step scalar instance with its coefficients"""
    params = example_scalar_params(L=1)
    return params, lq_scalar.scalar_backward_recursion(params, strict=True)


def make_double_integrator(f_hat: float, horizon: int = 100, D: float = 0.5, A: float = 0.9) -> NdLQParams:
    F, B = double_integrator(f_hat, 0.1)
    return NdLQParams(
        F=F, B=B, K=lqr_gain(F, B), Q=np.eye(2), D=D * np.eye(2), A=A * np.eye(2), L=horizon
    )


@pytest.fixture(scope="session")
def double_integrator_params():
    return make_double_integrator
