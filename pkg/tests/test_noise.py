import math

import numpy as np
import pytest
from hypothesis import given, settings
from hypothesis import strategies as st
from scipy import stats

from couplecert import noise
from couplecert.errors import DensityUnavailable, MomentUnavailable
from couplecert.streams import stream


def test_gaussian_sample_mean_clt_bound():
    # CLT oracle: |mean| <= 4 sigma / sqrt(N) with sigma = 1, N = 1e6.
    draws = noise.GaussianNoise(1).sample(10**6, stream(11, 0))
    assert abs(draws.mean()) <= 4e-3


def test_cauchy_sample_median_order_statistic_bound():
    # Median SE = 1/(2 f(0) sqrt(N)) = pi/(2 sqrt(N)) ~= 0.0016; 0.01 is ~6 SE.
    draws = noise.CauchyNoise(1).sample(10**6, stream(12, 0))
    assert abs(np.median(draws)) <= 0.01


def test_sampling_is_deterministic_per_stream():
    a = noise.StableNoise(1.5, 2).sample(100, stream(5, 3))
    b = noise.StableNoise(1.5, 2).sample(100, stream(5, 3))
    assert np.array_equal(a, b)


def test_gaussian_density_at_zero():
    assert abs(noise.GaussianNoise(1).density_radial(0.0) - 1 / math.sqrt(2 * math.pi)) < 1e-15


def test_cauchy_density_at_one():
    # (1/pi) * 1/(1 + 1) = 0.15915494...
    assert abs(noise.CauchyNoise(1).density_radial(1.0) - 1 / (2 * math.pi)) < 1e-15


def test_samplers_match_densities_ks():
    rng = stream(21, 0)
    g = noise.GaussianNoise(1).sample(10**5, rng)[:, 0]
    assert stats.kstest(g, "norm").pvalue > 0.001
    c = noise.CauchyNoise(1).sample(10**5, rng)[:, 0]
    assert stats.kstest(c, stats.cauchy.cdf).pvalue > 0.001


def test_multivariate_cauchy_marginal_is_cauchy():
    draws = noise.CauchyNoise(3).sample(10**5, stream(22, 0))
    assert stats.kstest(draws[:, 1], stats.cauchy.cdf).pvalue > 0.001


def test_stable_1d_matches_cauchy_closed_form():
    # Numeric inversion at alpha = 1 against the closed-form Cauchy density.
    tab = noise.StableNoise(1.0, 1)
    r = np.linspace(0.0, 50.0, 5001)
    err = np.abs(tab.density_radial(r) - 1 / (math.pi * (1 + r**2)))
    assert err.max() < 1e-8
    s = np.linspace(0.0, 200.0, 2001)
    terr = np.abs(tab.marginal_tail(s) - (0.5 - np.arctan(s) / math.pi))
    assert terr.max() < 1e-8


def test_stable_samplers_consistent_with_numeric_cdf():
    st15 = noise.StableNoise(1.5, 1)
    draws = st15.sample(10**5, stream(23, 0))[:, 0]
    assert stats.kstest(draws, lambda v: st15.marginal_cdf(v)).pvalue > 0.001
    # d > 1 subordination projects to the same 1D marginal.
    iso = noise.StableNoise(1.5, 3).sample(10**5, stream(24, 0))
    assert stats.kstest(iso[:, 2], lambda v: st15.marginal_cdf(v)).pvalue > 0.001


def test_stable_alpha_out_of_range():
    with pytest.raises(ValueError, match="alpha out of range"):
        noise.StableNoise(2.5, 1)


def test_stable_density_unavailable_in_higher_dim():
    with pytest.raises(DensityUnavailable, match="density unavailable"):
        noise.StableNoise(1.5, 2).density_radial(1.0)


def test_overlap_gaussian_error_function_oracle():
    # J(1) = 2 (1 - Phi(0.5)) = 0.617075...
    expect = 2.0 * stats.norm.sf(0.5)
    assert abs(noise.GaussianNoise(1).overlap_J(1.0) - expect) < 1e-14
    # Exact in every dimension (marginal-tail identity).
    assert abs(noise.GaussianNoise(4).overlap_J(1.0) - expect) < 1e-14


def test_overlap_cauchy_arctan_oracle():
    # 1 - (2/pi) arctan(1) = 1/2.
    got = noise.CauchyNoise(1).overlap_mass(np.array([2.0]))
    assert abs(got - 0.5) < 1e-14


def test_overlap_at_zero_is_one():
    for nz in (noise.GaussianNoise(2), noise.CauchyNoise(1), noise.StableNoise(1.3, 1)):
        assert nz.overlap_mass(np.zeros(nz.d)) == 1.0
        assert nz.overlap_J(0.0) == 1.0


@settings(max_examples=25, deadline=None)
@given(v=st.floats(0.01, 30.0))
def test_overlap_symmetry(v):
    nz = noise.GaussianNoise(1)
    assert nz.overlap_mass(np.array([v])) == nz.overlap_mass(np.array([-v]))


def test_overlap_J_monotone_and_vanishing():
    nz = noise.CauchyNoise(1)
    ks = np.linspace(0.0, 50.0, 40)
    vals = [nz.overlap_J(float(k)) for k in ks]
    assert vals[0] == 1.0
    assert all(b <= a + 1e-15 for a, b in zip(vals, vals[1:]))
    assert vals[-1] < 0.1


def test_mc_overlap_agrees_with_quadrature():
    nz = noise.GaussianNoise(1)
    v = np.array([1.3])
    exact = nz.overlap_mass(v)
    mc, se = nz._mc_overlap(v, 1 << 16, stream(31, 0))
    assert abs(mc - exact) <= 3.0 * se


def test_radial_density_noise_overlap_quadrature():
    # Laplace(1) in 1D: overlap(v) = 2 * (1/2) e^{-v/2} = e^{-v/2}.
    lap = noise.RadialDensityNoise(
        density=lambda r: 0.5 * np.exp(-np.abs(r)),
        sampler=lambda n, rng: rng.laplace(size=n),
        d=1,
        name="laplace",
    )
    got = lap.overlap_mass(np.array([2.0]))
    assert abs(got - math.exp(-1.0)) < 1e-9
    assert abs(lap.abs_moment(1.0) - 1.0) < 1e-8


def test_nonisotropic_d1_sampler_and_closed_forms():
    ni = noise.NonIsotropicExampleNoise(1.2, 1)
    draws = ni.sample(10**5, stream(41, 0))[:, 0]
    assert stats.kstest(draws, ni.cdf1d).pvalue > 0.001
    assert draws.min() > 0.0 and draws.max() <= 1.0


def test_nonisotropic_overlap_lower_bound_property():
    # J_kappa >= c ((1+kappa)^-alpha - 2^-alpha) with the derived constant c.
    for alpha in (0.8, 1.2, 1.7):
        ni = noise.NonIsotropicExampleNoise(alpha, 1)
        c = ni.derived_overlap_constant()
        for kappa in np.linspace(0.05, 0.95, 19):
            rhs = c * ((1 + kappa) ** (-alpha) - 2.0 ** (-alpha))
            assert ni.overlap_J(float(kappa)) >= rhs - 1e-12


def test_nonisotropic_d2_support_and_overlap():
    ni = noise.NonIsotropicExampleNoise(1.2, 2)
    z = ni.sample(5000, stream(42, 0))
    assert z[:, 0].min() > 0.0 and z[:, 0].max() <= 1.0
    ov = ni.overlap_mass(np.array([0.25, 0.0]))
    assert 0.0 < ov.lower <= ov.mc + 3 * ov.se <= 1.0 + 1e-9


def test_moments():
    assert abs(noise.GaussianNoise(3).abs_moment(2.0) - 3.0) < 1e-12
    # E|Cauchy|^theta = sec(pi theta / 2) for theta < 1.
    assert abs(noise.CauchyNoise(1).abs_moment(0.5) - 1 / math.cos(math.pi / 4)) < 1e-12
    with pytest.raises(MomentUnavailable, match="moment unavailable"):
        noise.CauchyNoise(1).abs_moment(1.0)
    with pytest.raises(MomentUnavailable, match="moment unavailable"):
        noise.StableNoise(1.5, 1).abs_moment(1.5)


def test_lattice_noise_contracts():
    lat = noise.lattice_from_noise(noise.GaussianNoise(1), spacing=0.05, quantile=1e-6)
    assert abs(lat.pmf.sum() - 1.0) < 1e-12
    assert np.allclose(lat.offsets, -lat.offsets[::-1])
    assert lat.overlap_J(0.0) == 1.0
    with pytest.raises(ValueError, match="sum to 1"):
        noise.LatticeNoise(np.array([-0.1, 0.0, 0.1]), np.array([0.3, 0.3, 0.3]))


def test_from_key_factory():
    assert noise.from_key("gaussian", 2).d == 2
    assert noise.from_key("stable:1.4", 1).alpha == 1.4
    assert noise.from_key("cauchy").stable_index == 1.0
    assert noise.from_key("example-nonisotropic:1.1", 1).alpha == 1.1
    with pytest.raises(ValueError, match="unknown noise key"):
        noise.from_key("levy-flight")
