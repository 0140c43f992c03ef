"""Coupling-based contraction certificates for Euler-type Markov chains."""

from .couplings import (
    Branch,
    CoupledStep,
    MixedCoupling,
    MixedCouplingParams,
    RefinedBasicCoupling,
    ReflectionCoupling,
    make_coupling,
    reflect,
    truncate_kappa,
)
from .envelopes import (
    ConcavityProfile,
    CouplingEnvelopes,
    CouplingStatsProfile,
    LyapunovDrift,
    WassersteinEnvelopes,
    identity_profile,
)
from .montecarlo import (
    OracleInstance,
    contraction_audit,
    estimate_coupling_stats,
    oracle_exact,
    simulate_coupled_chain,
    verify_marginals,
)
from .noise import (
    CauchyNoise,
    GaussianNoise,
    LatticeNoise,
    NonIsotropicExampleNoise,
    RadialDensityNoise,
    StableNoise,
    from_key,
    lattice_from_noise,
)
from .rates import (
    EulerModel,
    RateCertificate,
    c_star_tv,
    c_star_w1,
    c_star_weighted_tv,
    c_star_wp,
    euler_assumption_quantities,
    lyapunov_drift_certificate,
    noise_rate_comparison,
)
from .rho import (
    DistanceKind,
    DistanceSpec,
    build_tv_distance,
    build_w1_distance,
    build_weighted_tv_distance,
    build_wp_distance,
    comparability_bounds,
    eval_rho,
)
from .streams import stream

__version__ = "0.1.0"

__all__ = [name for name in dir() if not name.startswith("_")]
