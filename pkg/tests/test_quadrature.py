import math

import numpy as np
import pytest

from couplecert.errors import QuadratureError
from couplecert.quadrature import adaptive_simpson, cumulative_integral


def test_exponential_closed_form():
    val = adaptive_simpson(math.exp, 0.0, 1.0, tol=1e-12)
    assert abs(val - (math.e - 1.0)) < 1e-12


def test_decaying_exponential():
    # antiderivative of e^{-s} gives 1 - e^{-1}
    val = adaptive_simpson(lambda s: math.exp(-s), 0.0, 1.0, tol=1e-12)
    assert abs(val - (1.0 - math.exp(-1.0))) < 1e-12


def test_cubic_is_exact():
    val = adaptive_simpson(lambda s: 3 * s**3 - s + 2, -1.0, 2.0, tol=1e-13)
    exact = 3 / 4 * (2**4 - 1) - (2**2 - 1) / 2 + 2 * 3
    assert abs(val - exact) < 1e-10


def test_reversed_bounds_flip_sign():
    a = adaptive_simpson(math.exp, 0.0, 1.0)
    b = adaptive_simpson(math.exp, 1.0, 0.0)
    assert a == -b


def test_empty_interval():
    assert adaptive_simpson(math.exp, 2.0, 2.0) == 0.0


def test_depth_exhaustion_raises():
    with pytest.raises(QuadratureError, match="quadrature non-convergent"):
        adaptive_simpson(lambda s: abs(s - 1 / 3) ** 0.5, 0.0, 1.0, tol=1e-15, max_depth=3)


def test_depth_exhaustion_non_strict_returns():
    val = adaptive_simpson(
        lambda s: abs(s - 1 / 3) ** 0.5, 0.0, 1.0, tol=1e-15, max_depth=3, strict=False
    )
    assert math.isfinite(val)


def test_cumulative_matches_closed_form():
    knots = np.linspace(0.0, 2.0, 257)
    vals = cumulative_integral(lambda s: math.exp(-s), knots, tol=1e-14)
    expect = 1.0 - np.exp(-knots)
    assert np.max(np.abs(np.asarray(vals) - expect)) < 1e-11


def test_cumulative_doubling_stability():
    # The knot values are insensitive to a resolution doubling.
    knots = np.linspace(0.0, 1.5, 513)
    coarse = np.asarray(cumulative_integral(lambda s: math.exp(-(s**2)), knots, tol=1e-13))
    fine_knots = np.linspace(0.0, 1.5, 1025)
    fine = np.asarray(cumulative_integral(lambda s: math.exp(-(s**2)), fine_knots, tol=1e-13))
    assert np.max(np.abs(fine[::2] - coarse)) < 1e-9
