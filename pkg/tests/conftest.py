import math

import numpy as np
import pytest

from couplecert import drifts, noise, rates


@pytest.fixture(scope="session")
def tanh_drift():
    return drifts.linear_tanh(1.0, 2.0, d=1)


@pytest.fixture(scope="session")
def gaussian_model(tanh_drift):
    """The 1D reference instance: b(x) = -x + 2 tanh(x), Gaussian noise scale."""
    h = 0.6
    return rates.EulerModel(
        b=tanh_drift.b,
        L=tanh_drift.L,
        K=tanh_drift.K,
        R=tanh_drift.R,
        h=h,
        g_of_h=math.sqrt(h),
        kappa=math.inf,
        d=1,
        slope_range=tanh_drift.slope_range,
        name="linear_tanh",
    )


@pytest.fixture(scope="session")
def cauchy_model(tanh_drift):
    h = 0.5
    return rates.EulerModel(
        b=tanh_drift.b,
        L=tanh_drift.L,
        K=tanh_drift.K,
        R=tanh_drift.R,
        h=h,
        g_of_h=h,
        kappa=math.inf,
        d=1,
        slope_range=tanh_drift.slope_range,
        name="linear_tanh",
    )


@pytest.fixture(scope="session")
def gaussian_1d():
    return noise.GaussianNoise(1)


@pytest.fixture(scope="session")
def cauchy_1d():
    return noise.CauchyNoise(1)


def pair_1d(r: float):
    return np.array([r / 2.0]), np.array([-r / 2.0])
