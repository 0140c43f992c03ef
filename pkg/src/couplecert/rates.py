"""Closed-form contraction certificates and Euler-scheme envelope assembly.

A :class:`RateCertificate` packages a one-step contraction rate ``c_star``
with the per-radius-regime constants whose minimum it is, the distance
function it certifies, and the list of validity conditions that were
actually checked.  Construction refuses any certificate whose conditions
did not all verify or whose rate leaves (0, 1).

``euler_assumption_quantities`` maps an Euler-type model
``x -> x + h b(x) + g(h) xi`` plus a noise family and a coupling kind to the
radial envelopes the distance builders consume.  Two envelope styles exist:

* ``"lemma"``: the chained Lipschitz bounds (drift envelope ``h L r``,
  overlap evaluated at the truncation radius), matching the closed-form
  constants of the bounded-truncation theorems;
* ``"tight"``: drift envelopes from the model's analytic mean-slope range
  (available for catalogue drifts), giving far smaller atom weights ``a``
  and making Monte Carlo audits statistically resolvable.
"""

import json
import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .envelopes import (
    ConcavityProfile,
    CouplingEnvelopes,
    CouplingStatsProfile,
    LyapunovDrift,
    WassersteinEnvelopes,
    identity_profile,
)
from .errors import (
    AssumptionViolation,
    DensityUnavailable,
    MomentUnavailable,
    NotContractive,
    StepSizeError,
)
from .noise import Noise, OverlapBound
from .rho import DistanceKind, DistanceSpec
from .streams import stream

REFINED_BASIC = "refined_basic"
REFLECTION = "reflection"

_REGIME_GRID = 4096


def _exp_safe(x: float) -> float:
    try:
        return math.exp(x)
    except OverflowError:
        return math.inf


# ---------------------------------------------------------------------------
# model
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class EulerModel:
    """The chain x -> x + h b(x) + g(h) xi with its drift constants.

    ``L`` is a Lipschitz constant of b, ``K``/``R`` the dissipativity
    constant and radius (<x-y, b(x)-b(y)> <= -K|x-y|^2 whenever |x-y| >= R),
    ``kappa`` the coalescence truncation radius (may be ``inf``) and
    ``kappa0`` the overlap radius used by bounded-truncation certificates.
    ``slope_range`` optionally returns analytic bounds (lo, hi) for the mean
    drift slope <x-y, b(x)-b(y)>/|x-y|^2 over pairs at distance r.
    """

    b: Callable[[np.ndarray], np.ndarray]
    L: float
    K: float
    R: float
    h: float
    g_of_h: float
    kappa: float = math.inf
    kappa0: float = 1.0
    d: int = 1
    slope_range: Callable[[np.ndarray], tuple] | None = None
    name: str = "model"
    validate_on_init: bool = True

    def __post_init__(self):
        if self.h <= 0 or self.g_of_h <= 0:
            raise ValueError("h and g(h) must be positive")
        if self.K > self.L + 1e-12:
            raise ValueError("dissipativity constant cannot exceed the Lipschitz constant")
        if self.validate_on_init:
            self.check_constants()

    def drift_hat(self, x: np.ndarray) -> np.ndarray:
        x = np.asarray(x, dtype=float)
        return x + self.h * np.asarray(self.b(x), dtype=float)

    def check_constants(self, n_pairs: int = 10**4, seed: int = 0xE0E0) -> None:
        """Randomised verification of the Lipschitz and dissipativity bounds."""
        rng = stream(seed, 0)
        scale = max(1.0, self.R)
        x = rng.standard_normal((n_pairs, self.d)) * scale
        direction = rng.standard_normal((n_pairs, self.d))
        direction /= np.linalg.norm(direction, axis=1, keepdims=True)
        dist = np.abs(rng.standard_normal(n_pairs)) * 2.0 * scale + 1e-6
        y = x + direction * dist[:, None]
        diffb = np.asarray(self.b(x), dtype=float) - np.asarray(self.b(y), dtype=float)
        gap = np.linalg.norm(x - y, axis=1)
        if np.any(np.linalg.norm(diffb, axis=1) > self.L * gap * (1 + 1e-9) + 1e-12):
            raise AssumptionViolation("drift is not L-Lipschitz at a sampled pair")
        far = x + direction * (self.R + np.abs(rng.standard_normal(n_pairs)) * scale + 1e-9)[:, None]
        gap_far = np.linalg.norm(x - far, axis=1)
        inner = np.sum((x - far) * (np.asarray(self.b(x)) - np.asarray(self.b(far))), axis=1)
        if np.any(inner > -self.K * gap_far**2 * (1 - 1e-9) + 1e-12):
            raise AssumptionViolation("dissipativity fails at a sampled far pair")


# ---------------------------------------------------------------------------
# certificates
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class RateCertificate:
    """A verified one-step contraction rate for a (coupling, distance) pair."""

    c_star: float
    regime_constants: dict
    regime_boundaries: tuple
    rho: DistanceSpec
    checked: dict
    auxiliary: dict = field(default_factory=dict)
    notes: str = ""

    def __post_init__(self):
        for name, ok in self.checked.items():
            if not ok:
                raise NotContractive("certificate refused: condition %r unverified" % name)
        for name, value in self.regime_constants.items():
            if not (0.0 < value < 1.0) or not math.isfinite(value):
                raise NotContractive(
                    "not contractive: regime constant %s = %r outside (0, 1)" % (name, value)
                )
        want = min(self.regime_constants.values())
        if self.c_star != want:
            raise NotContractive("c_star must equal the minimum regime constant")

    def to_dict(self) -> dict:
        return {
            "c_star": self.c_star,
            "regime_constants": dict(sorted(self.regime_constants.items())),
            "regime_boundaries": list(self.regime_boundaries),
            "rho": self.rho.to_dict(),
            "checked": dict(sorted(self.checked.items())),
            "auxiliary": dict(sorted(self.auxiliary.items())),
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)


def c_star_tv(env: CouplingEnvelopes, spec: DistanceSpec) -> RateCertificate:
    """Contraction rate for the total-variation-type distance."""
    if spec.kind is not DistanceKind.TV:
        raise ValueError("spec kind must be TV")
    env.validate()
    a, c, r1 = spec.a, spec.c, spec.r1
    checked = {"assumption_a": True, "rho_matches_r1": abs(r1 - env.r1) <= 1e-12 * max(1.0, env.r1)}
    if spec.simplified:
        inf_pi = env.inf_pi(0.0, r1)
        c1 = a * inf_pi / (2.0 * (a + 1.0 + r1 * math.exp(-r1)))
        c3 = env.c0 / (1.0 + (1.0 + a) / r1 * _exp_safe(r1))
        constants = {"c1": c1, "c3": c3}
    else:
        inf_pi = env.inf_pi(0.0, env.r0)
        inf_alpha = env.inf_alpha(env.r0, r1)
        e1 = math.exp(-c * r1)
        c1 = a * inf_pi / (2.0 * (a + 1.0 + c * env.r0 * e1))
        c2 = c**2 * e1 * inf_alpha / (2.0 * (a + 1.0 + c * r1 * e1))
        c3 = env.c0 / (1.0 + (1.0 + a) / (r1 * c) * _exp_safe(c * r1))
        constants = {"c1": c1, "c2": c2, "c3": c3}
    _require_rates(constants)
    notes = "; ".join(filter(None, [env.notes, spec.notes]))
    return RateCertificate(
        c_star=min(constants.values()),
        regime_constants=constants,
        regime_boundaries=(env.r0, env.r1),
        rho=spec,
        checked=checked,
        notes=notes,
    )


def c_star_weighted_tv(
    env: CouplingEnvelopes, lyap: LyapunovDrift, spec: DistanceSpec
) -> RateCertificate:
    """Contraction rate for the Lyapunov-weighted total-variation distance."""
    if spec.kind is not DistanceKind.WEIGHTED_TV:
        raise ValueError("spec kind must be WEIGHTED_TV")
    if not 0.0 < lyap.lam < 1.0:
        raise AssumptionViolation("lambda out of range: %r not in (0, 1)" % (lyap.lam,))
    env.validate(require_drift_tail=False)
    if not math.isfinite(lyap.r1):
        raise AssumptionViolation("r1 search failed: threshold radius not finite")
    a, c, eps, r1 = spec.a, spec.c, spec.epsilon, spec.r1
    inf_pi = env.inf_pi(0.0, env.r0)
    inf_alpha = env.inf_alpha(env.r0, r1)
    sup2 = env.sup_two_beta_over_alpha(env.r0, r1)
    e1 = math.exp(-c * r1)
    c1 = min(a * inf_pi / (2.0 * (a + 1.0)), lyap.lam)
    c2 = min(c**2 * e1 * inf_alpha / (4.0 * (a + 1.0)), lyap.lam)
    c3 = lyap.lam / (16.0 * lyap.C0) * c * e1 * inf_alpha * (sup2 + 1.0)
    c4 = min(2.0 * lyap.C0 * c3 / (lyap.lam * (a + 1.0)), c3 / (2.0 * eps))
    constants = {"c1": c1, "c2": c2, "c4": c4}
    _require_rates(constants)
    return RateCertificate(
        c_star=min(constants.values()),
        regime_constants=constants,
        regime_boundaries=(env.r0, r1),
        rho=spec,
        checked={"assumption_a1_a2": True, "lyapunov_drift": True},
        auxiliary={"c3": c3},
        notes=spec.notes,
    )


def c_star_w1(env: WassersteinEnvelopes, spec: DistanceSpec) -> RateCertificate:
    """Contraction rate for the linear-growth concave distance."""
    if spec.kind is not DistanceKind.W1:
        raise ValueError("spec kind must be W1")
    if env.c0 <= 0.0:
        raise NotContractive("not contractive: asymptotic drift constant c0 must be positive")
    env.validate()
    if not env.budget_ok():
        raise AssumptionViolation("b2 violated: overshoot budget exceeds log 2")
    splice = spec.splice_radius
    psi_p = float(np.asarray(spec.profile.psi_prime(np.array([splice])))[0])
    c1 = psi_p * spec.slope_end * env.inf_alpha_over_r()
    c2 = env.c0 / 2.0 * spec.slope_end / max(1.0, spec.head_end / splice)
    constants = {"c1": c1, "c2": c2}
    _require_rates(constants)
    notes = (
        "exponential factor in c2 uses exp(-c Psi(r1+l0)), the derivative value at the splice"
    )
    return RateCertificate(
        c_star=min(constants.values()),
        regime_constants=constants,
        regime_boundaries=(env.r1,),
        rho=spec,
        checked={"assumption_b": True, "b2_budget": True},
        notes=notes,
    )


def c_star_wp(env: WassersteinEnvelopes, spec: DistanceSpec, l: float) -> RateCertificate:
    """Contraction rate for the polynomial-growth distance.

    The first regime constant is closed-form; the remaining three are grid
    infima of the per-regime drift-to-value ratios implied by the one-step
    inequalities, on 4096-point log grids.
    """
    if spec.kind is not DistanceKind.WP:
        raise ValueError("spec kind must be WP")
    env.validate()
    splice = spec.splice_radius
    if env.r1 < l + 1.0:
        raise AssumptionViolation("r1 too small vs l: need r1 >= l + 1")
    floor = 1.0 + max(
        2.0 * l * math.exp(spec.c * l) / (env.c0 * splice),
        4.0**spec.p * l / (env.c0 * splice),
    )
    if spec.k < floor * (1 - 1e-12):
        raise AssumptionViolation("k below floor: need k >= %.9g" % floor)
    k, p, c0 = spec.k, spec.p, env.c0
    psi_p = float(np.asarray(spec.profile.psi_prime(np.array([splice])))[0])
    c1 = psi_p * spec.slope_end * env.inf_alpha_over_r()

    flip = (k + 1.0) * splice
    fp_flip = float(spec.radial_prime(np.array([flip]))[0])

    def grid(lo, hi):
        return np.geomspace(np.nextafter(lo, hi), hi, _REGIME_GRID)

    r2 = grid(env.r1, flip - l)
    c2 = float(np.min(c0 * spec.radial_prime(r2) * r2 / spec.radial(r2)))

    r3 = grid(flip - l, 4.0 * k * splice)
    penalty3 = l * (
        np.maximum(spec.radial_prime(r3), spec.radial_prime(r3 + l)) - fp_flip
    )
    c3 = float(np.min((c0 * fp_flip * r3 - penalty3) / spec.radial(r3)))

    r4 = grid(4.0 * k * splice, 4.0e3 * k * splice)
    fp_half = spec.radial_prime(r4 / 2.0)
    penalty4 = l * (spec.radial_prime(r4 + l) - 0.5 * fp_half)
    vals4 = (0.5 * c0 * fp_half * r4 - penalty4) / spec.radial(r4)
    c4 = float(min(np.min(vals4), c0 * p * 2.0 ** (-p)))

    constants = {"c1": c1, "c2": c2, "c3": c3, "c4": c4}
    _require_rates(constants)
    return RateCertificate(
        c_star=min(constants.values()),
        regime_constants=constants,
        regime_boundaries=(env.r1, flip - l, 4.0 * k * splice),
        rho=spec,
        checked={"assumption_b": True, "jump_bound_supplied": l >= 0, "k_floor": True},
        auxiliary={"l": l},
        notes="regime constants 2-4 are grid infima of the proof inequalities",
    )


def _require_rates(constants: dict) -> None:
    for name, value in constants.items():
        if not math.isfinite(value) or value <= 0.0 or value >= 1.0:
            raise NotContractive(
                "not contractive: regime constant %s = %r outside (0, 1)" % (name, value)
            )


# ---------------------------------------------------------------------------
# Euler-scheme envelope assembly
# ---------------------------------------------------------------------------


def bounded_mode_constants(
    h: float, g: float, L: float, R: float, kappa0: float, J: float, coupling: str
) -> dict:
    """Closed-form certificate inputs for truncation kappa = g(h) kappa0.

    Returns the exponent/atom constants together with the window extrema
    they were derived from (all upper/lower bounds for the true extrema).
    """
    if coupling == REFINED_BASIC:
        c = 64.0 * h * L * R / (g**2 * kappa0**2 * J) + 1.0
        sup_bp_over_pi = 2.0 * h * g * kappa0 * L / J
        inf_pi = J / 2.0
        inf_alpha = g**2 * kappa0**2 * J / 16.0
    elif coupling == REFLECTION:
        c = 32.0 * h * L * R / (g**2 * kappa0**2 * J) + 1.0
        sup_bp_over_pi = h * g * kappa0 * L / J
        inf_pi = J
        inf_alpha = g**2 * kappa0**2 * J / 8.0
    else:
        raise ValueError("unknown coupling kind: %r" % coupling)
    a = 2.0 * c * (1.0 + math.exp(-c * R)) * sup_bp_over_pi + 1.0
    return {
        "c": c,
        "a": a,
        "r0": g * kappa0 / (1.0 + h * L),
        "r1": R,
        "inf_pi": inf_pi,
        "inf_alpha": inf_alpha,
        "sup_beta_plus_over_pi": sup_bp_over_pi,
        "sup_four_beta_over_alpha": c - 1.0,
        "sup_two_beta_over_alpha": (c - 1.0) / 2.0,
    }


def _slope_sup(model: EulerModel, style: str):
    """Upper bound s_max(r) for the mean drift slope at pair distance r."""
    if style == "tight":
        if model.slope_range is None:
            raise AssumptionViolation(
                "tight envelopes need the model's analytic slope_range"
            )

        def s_max(r):
            return np.asarray(model.slope_range(np.asarray(r, dtype=float))[1], dtype=float)

        return s_max
    if style == "lemma":

        def s_max(r):
            r = np.asarray(r, dtype=float)
            # Lipschitz bound up to R, dissipativity beyond.
            return np.where(r < model.R, model.L, -(model.K - model.h * model.L**2 / 2.0))

        return s_max
    raise ValueError("unknown envelope style: %r" % style)


def _overlap_curve(noise: Noise, v):
    """J at shift radius v (vectorised); exact for monotone radial families."""
    v = np.asarray(v, dtype=float)
    if noise.is_radial and noise.radial_non_increasing:
        return 2.0 * np.asarray(noise.marginal_tail(v / 2.0), dtype=float)
    out = np.empty_like(v)
    for i, vi in enumerate(np.atleast_1d(v)):
        val = noise.overlap_J(float(vi))
        out.flat[i] = float(val.lower if isinstance(val, OverlapBound) else val)
    return out


def _check_coupling_noise(noise: Noise, coupling: str, for_certificate: bool) -> None:
    if coupling == REFLECTION:
        if not (noise.is_radial and noise.radial_non_increasing):
            raise AssumptionViolation(
                "condition c4 violated: reflection needs a non-increasing radial density"
            )
        if for_certificate and not noise.has_finite_first_moment:
            raise AssumptionViolation(
                "condition c4 violated: reflection certificates need a finite first moment"
            )
    elif coupling != REFINED_BASIC:
        raise ValueError("unknown coupling kind: %r" % coupling)


def euler_assumption_quantities(
    model: EulerModel,
    noise: Noise,
    coupling_kind: str = REFINED_BASIC,
    envelope_style: str = "lemma",
    target: str = "tv",
):
    """Radial envelopes for an Euler chain under the chosen coupling.

    ``target = "tv"`` returns :class:`CouplingEnvelopes` (bounded truncation
    when ``model.kappa`` is finite, otherwise the unbounded-support form with
    a single window r0 = r1 = R); ``"weighted"`` returns the same envelopes
    without a drift tail; ``"w1"`` returns :class:`WassersteinEnvelopes`.
    """
    h, g, L, R = model.h, model.g_of_h, model.L, model.R
    if target == "w1":
        return _w1_envelopes(model, noise, coupling_kind, envelope_style)
    if target not in ("tv", "weighted"):
        raise ValueError("unknown target: %r" % target)
    _check_coupling_noise(noise, coupling_kind, for_certificate=True)
    if h >= min(2.0 * model.K / L**2, 1.0 / L):
        raise StepSizeError("step size too large: need h < min(2K/L^2, 1/L)")
    c0 = (model.K - h * L**2 / 2.0) * h
    half = 0.5 if coupling_kind == REFINED_BASIC else 1.0
    alpha_quarter = 0.25 if coupling_kind == REFINED_BASIC else 0.5

    if math.isfinite(model.kappa):
        kappa = model.kappa
        if not 0.0 < kappa <= g * model.kappa0:
            raise StepSizeError("kappa out of range: need 0 < kappa <= g(h) kappa0")
        if h / g > model.kappa0 / (2.0 * L * R):
            raise StepSizeError("step size too large: need h/g(h) <= kappa0/(2 L R)")
        J = float(np.asarray(_overlap_curve(noise, np.array([kappa / g])))[0])
        consts = bounded_mode_constants(h, g, L, R, model.kappa0, J, coupling_kind)
        r0, r1 = consts["r0"], consts["r1"]
        alpha_cap = kappa / (2.0 * h * L)

        def pi_lower(r):
            r = np.asarray(r, dtype=float)
            return np.where(r <= r0, half * J, 0.0)

        def beta_upper(r):
            r = np.asarray(r, dtype=float)
            return np.where(r <= R, h * L * r, -c0 * r)

        def alpha_lower(r, l=0.0):
            r = np.asarray(r, dtype=float)
            val = alpha_quarter * J * np.minimum(r**2, kappa**2 / 4.0)
            return np.where(r <= alpha_cap, val, 0.0)

        overrides = {
            k: consts[k]
            for k in (
                "inf_pi",
                "inf_alpha",
                "sup_beta_plus_over_pi",
                "sup_four_beta_over_alpha",
                "sup_two_beta_over_alpha",
            )
        }
        notes = "bounded truncation kappa = %g, coupling %s, J = %.6g" % (
            kappa,
            coupling_kind,
            J,
        )
        if target == "weighted":
            overrides.pop("inf_alpha")  # window end comes from the Lyapunov data
            overrides.pop("sup_four_beta_over_alpha")
            overrides.pop("sup_two_beta_over_alpha")

            def beta_upper_lipschitz(r):
                # No pairwise dissipativity is assumed on the weighted route.
                return h * L * np.asarray(r, dtype=float)

            return CouplingEnvelopes(
                r0=r0,
                r1=alpha_cap,
                c0=0.0,
                profile=CouplingStatsProfile(pi_lower, beta_upper_lipschitz, alpha_lower),
                overrides=overrides,
                notes=notes,
                has_drift_tail=False,
            )
        return CouplingEnvelopes(
            r0=r0,
            r1=r1,
            c0=c0,
            profile=CouplingStatsProfile(pi_lower, beta_upper, alpha_lower),
            overrides=overrides,
            notes=notes,
        )

    # Unbounded support: no truncation, single window r0 = r1 = R.
    s_max = _slope_sup(model, envelope_style)

    def worst_hat(r):
        r = np.asarray(r, dtype=float)
        return r * np.maximum(1.0 + h * np.asarray(s_max(r), dtype=float), 1.0 - h * L)

    def pi_lower(r):
        return half * _overlap_curve(noise, worst_hat(r) / g)

    if envelope_style == "tight":

        def beta_upper(r):
            r = np.asarray(r, dtype=float)
            return h * np.asarray(s_max(r), dtype=float) * r

    else:

        def beta_upper(r):
            r = np.asarray(r, dtype=float)
            return np.where(r <= R, h * L * r, -c0 * r)

    def alpha_lower(r, l=0.0):
        r = np.asarray(r, dtype=float)
        return alpha_quarter * r**2 * _overlap_curve(noise, worst_hat(r) / g)

    if envelope_style == "tight":
        tail_slope = float(np.asarray(s_max(np.array([R])))[0])
        if tail_slope >= 0:
            raise AssumptionViolation("tight drift envelope is not negative at radius R")
        c0 = -h * tail_slope
    notes = "unbounded support (kappa = inf), coupling %s, %s envelopes" % (
        coupling_kind,
        envelope_style,
    )
    return CouplingEnvelopes(
        r0=R,
        r1=R,
        c0=c0,
        profile=CouplingStatsProfile(pi_lower, beta_upper, alpha_lower),
        notes=notes,
    )


def overshoot_margin_search(noise: Noise) -> tuple:
    """Deterministic (eps, gamma, c*) with alpha_{gamma g} >= c* g (r/2 ^ kappa).

    Scans eps over {2^-2 .. 2^-10} and doubles gamma from 4 until the radial
    density satisfies m(eps) - m(gamma/2 - eps/4) >= m(eps)/2; returns the
    triple maximising c* = eps^2 m(eps)/4 (ties to the larger eps).
    """
    best = None
    for j in range(2, 11):
        eps = 2.0**-j
        m_eps = float(np.asarray(noise.density_radial(eps)))
        if not m_eps > 0:
            continue
        gamma = 4.0
        found = None
        while gamma <= 2.0**30:
            m_far = float(np.asarray(noise.density_radial(gamma / 2.0 - eps / 4.0)))
            if m_eps - m_far >= m_eps / 2.0:
                found = gamma
                break
            gamma *= 2.0
        if found is None:
            continue
        c_star = eps**2 * m_eps / 4.0
        if best is None or c_star > best[2]:
            best = (eps, found, c_star)
    if best is None:
        raise AssumptionViolation("no overshoot margin: radial density does not decay")
    return best


def _w1_envelopes(model: EulerModel, noise: Noise, coupling_kind: str, envelope_style: str):
    if coupling_kind != REFLECTION:
        raise ValueError("the linear-growth route uses the reflection coupling")
    _check_coupling_noise(noise, REFLECTION, for_certificate=True)
    if model.d != 1:
        raise AssumptionViolation("linear-growth envelope construction supports d = 1")
    h, g, L, R = model.h, model.g_of_h, model.L, model.R
    if h >= min(2.0 * model.K / L**2, 1.0 / (2.0 * L)):
        raise StepSizeError("step size too large: need h < min(2K/L^2, 1/(2L))")
    eps, gamma, c_star = overshoot_margin_search(noise)
    if h / g > eps / (2.0 * L * R):
        raise StepSizeError("step size too large: need h/g(h) <= eps/(2 L R)")
    kappa = model.kappa
    if not math.isfinite(kappa):
        kappa = eps * g / 4.0
    if not 0.0 < kappa <= eps * g / 4.0:
        raise StepSizeError("kappa out of range: need 0 < kappa <= eps g(h)/4")
    l0 = gamma * g
    c0 = (model.K - h * L**2 / 2.0) * h
    s_max = _slope_sup(model, envelope_style)

    def beta_upper(r):
        r = np.asarray(r, dtype=float)
        if envelope_style == "tight":
            return h * np.asarray(s_max(r), dtype=float) * r
        return np.where(r <= R, h * L * r, -c0 * r)

    def alpha_lower(r, l=0.0):
        r = np.asarray(r, dtype=float)
        base = c_star * g * np.minimum(r / 2.0, kappa)
        return np.where((l >= l0 * (1 - 1e-12)) & (r <= R), base, 0.0)

    def pi_lower(r):
        return np.zeros_like(np.asarray(r, dtype=float))

    c0_env = c0
    if envelope_style == "tight":
        tail_slope = float(np.asarray(s_max(np.array([R])))[0])
        if tail_slope >= 0:
            raise AssumptionViolation("tight drift envelope is not negative at radius R")
        c0_env = -h * tail_slope
    overrides = {}
    if envelope_style == "lemma":
        overrides["sup_ratio"] = 2.0 * h * L * R / (c_star * g * min(R / 2.0, kappa))
        overrides["inf_alpha_over_r"] = c_star * g * min(0.5, kappa / R)
    return WassersteinEnvelopes(
        profile=CouplingStatsProfile(pi_lower, beta_upper, alpha_lower),
        psi=identity_profile(),
        l0=l0,
        r1=R,
        c0=c0_env,
        overrides=overrides,
        notes="reflection coupling, eps=%g gamma=%g c*=%g kappa=%g" % (eps, gamma, c_star, kappa),
    )


# ---------------------------------------------------------------------------
# Lyapunov drift
# ---------------------------------------------------------------------------


def lyapunov_drift_certificate(
    model: EulerModel,
    noise: Noise,
    theta: float,
    m1: float,
    m2: float,
    K: float = 1.0,
    mc_samples: int = 10**5,
    seed: int = 0x17AB,
) -> LyapunovDrift:
    """Geometric drift data for V(x) = |x|^theta under the Euler chain.

    Requires the radial drift bound <x, b(x)> <= m1 - m2 |x|^2 (verified by
    sampling).  theta = 2 with centred square-integrable noise has closed
    form; theta < 2 fits the drift inequality by Monte Carlo on a state grid.
    """
    if not 0.0 < theta <= 2.0:
        raise ValueError("theta must lie in (0, 2]")
    if m1 <= 0 or m2 <= 0:
        raise AssumptionViolation("radial drift constants must be positive")
    # Sampled check of the radial drift condition.
    rng = stream(seed, 0)
    x = rng.standard_normal((10**4, model.d)) * max(1.0, model.R) * 3.0
    inner = np.sum(x * np.asarray(model.b(x), dtype=float), axis=1)
    if np.any(inner > m1 - m2 * np.sum(x * x, axis=1) + 1e-9):
        raise AssumptionViolation("radial drift condition fails at a sampled point")
    b0 = float(np.linalg.norm(np.asarray(model.b(np.zeros((1, model.d))))[0]))
    l0_const = 2.0 * max(model.L**2, b0**2)
    if model.h >= 2.0 * m2 / l0_const:
        raise StepSizeError("step size too large: need h < 2 m2 / L0")
    h, g = model.h, model.g_of_h
    second = noise.abs_moment(theta)  # raises MomentUnavailable when infinite
    if theta == 2.0:
        lam = 2.0 * h * m2 - h**2 * l0_const
        big_c0 = h**2 * l0_const + 2.0 * h * m1 + g**2 * second
        notes = "closed form for theta = 2 with centred noise"
    else:
        lam, big_c0 = _fit_drift(model, noise, theta, mc_samples, seed)
        notes = "Monte Carlo fit for theta = %g" % theta

    def V(x):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        return np.linalg.norm(x, axis=-1) ** theta

    def beta_plus_env(r):
        return h * model.L * r

    r1 = _threshold_radius(beta_plus_env, theta, K, big_c0, lam)
    return LyapunovDrift(V=V, lam=lam, C0=big_c0, K=K, r1=r1, notes=notes)


def _fit_drift(model, noise, theta, n, seed):
    radii = np.array([0.0, 0.5, 1.0, 2.0, 5.0, 10.0, max(20.0, 2.0 * model.R)])
    vs, evs, ses = [], [], []
    for i, r in enumerate(radii):
        x = np.zeros((1, model.d))
        x[0, 0] = r
        xh = model.drift_hat(x)
        xi = noise.sample(n, stream(seed, i + 1))
        v1 = np.linalg.norm(xh + model.g_of_h * xi, axis=1) ** theta
        vs.append(r**theta)
        evs.append(float(v1.mean()))
        ses.append(float(v1.std(ddof=1) / math.sqrt(n)))
    vs, evs, ses = np.array(vs), np.array(evs), np.array(ses)
    slope, intercept = np.polyfit(vs, evs, 1)
    lam = 1.0 - slope
    if not 0.0 < lam < 1.0:
        raise AssumptionViolation("drift fit failed: contraction factor %r not in (0,1)" % slope)
    big_c0 = float(np.max(evs + 3.0 * ses - (1.0 - lam) * vs))
    if big_c0 <= 0:
        raise AssumptionViolation("drift fit failed: nonpositive offset")
    return lam, big_c0


def _threshold_radius(beta_plus_env, theta, K, big_c0, lam, cap: float = 1e6) -> float:
    """Largest radius where drift-to-V ratio >= K or the V-sum is small."""

    def cond(r: float) -> bool:
        if r <= 0:
            return True
        v_sum = 2.0 * (r / 2.0) ** theta
        return beta_plus_env(r) / v_sum >= K or v_sum <= 4.0 * big_c0 / lam

    if cond(cap):
        raise AssumptionViolation("r1 unbounded")
    grid = np.geomspace(1e-6, cap, 2048)
    holds = np.array([cond(float(r)) for r in grid])
    if not holds.any():
        return 1e-6
    last = int(np.max(np.nonzero(holds)))
    lo, hi = grid[last], grid[min(last + 1, grid.size - 1)]
    for _ in range(80):
        mid = 0.5 * (lo + hi)
        if cond(mid):
            lo = mid
        else:
            hi = mid
    return hi


# ---------------------------------------------------------------------------
# noise comparison
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class NoiseComparison:
    rows: list
    slopes: dict

    def to_csv(self) -> str:
        lines = ["noise,alpha,d,h,R,J,a,c1,c3,c_star"]
        for row in self.rows:
            lines.append(
                "%s,%r,%d,%r,%r,%r,%r,%r,%r,%r"
                % (
                    row["noise"],
                    row["alpha"],
                    row["d"],
                    row["h"],
                    row["R"],
                    row["J"],
                    row["a"],
                    row["c1"],
                    row["c3"],
                    row["c_star"],
                )
            )
        return "\n".join(lines) + "\n"


def noise_rate_comparison(
    model: EulerModel,
    noises: list,
    r_grid,
    h_grid,
    coupling_kind: str = REFLECTION,
) -> NoiseComparison:
    """Certificate constants across noise families, step sizes and radii.

    Uses the unbounded-support simplified route (exponent 1) with the
    Lipschitz drift envelope; everything is computed in log space so that
    Gaussian tails far below the float range still produce exact fitted
    slopes.  Fitted exponents: d ln c1 / d ln R for heavy-tailed families
    and d ln c1 / d R^2 for the Gaussian.
    """
    rows = []
    log_c1 = {}
    for nz in noises:
        _check_coupling_noise(nz, coupling_kind, for_certificate=True)
        if not (nz.is_radial and nz.radial_non_increasing):
            raise DensityUnavailable("density unavailable: comparison needs radial families")
        alpha = nz.stable_index
        for h in np.atleast_1d(h_grid):
            h = float(h)
            g = h ** (1.0 / alpha)
            pref = 1.0 if coupling_kind == REFLECTION else 2.0
            half_log = 0.0 if coupling_kind == REFLECTION else math.log(2.0)
            for R in np.atleast_1d(r_grid):
                R = float(R)
                ln_j = math.log(2.0) + float(
                    np.asarray(nz.log_marginal_tail((1.0 + h * model.L) * R / (2.0 * g)))
                )
                ln_sup = math.log(pref * h * model.L * R) - ln_j
                ln_a = np.logaddexp(math.log(2.0 * (1.0 + math.exp(-R))) + ln_sup, 0.0)
                ln_pi = ln_j - half_log
                ln_c1 = (
                    ln_pi
                    - math.log(2.0)
                    + ln_a
                    - np.logaddexp(ln_a, math.log(1.0 + R * math.exp(-R)))
                )
                c0 = (model.K - h * model.L**2 / 2.0) * h
                ln_one_plus_a = np.logaddexp(0.0, ln_a)
                ln_c3 = math.log(c0) - np.logaddexp(0.0, ln_one_plus_a + R - math.log(R))
                ln_cstar = min(ln_c1, ln_c3)
                rows.append(
                    {
                        "noise": nz.name,
                        "alpha": alpha,
                        "d": nz.d,
                        "h": h,
                        "R": R,
                        "J": math.exp(ln_j),
                        "a": _exp_safe(ln_a),
                        "c1": math.exp(ln_c1),
                        "c3": math.exp(ln_c3),
                        "c_star": math.exp(ln_cstar),
                        "ln_c1": float(ln_c1),
                    }
                )
                log_c1.setdefault((nz.name, h), []).append((R, float(ln_c1)))
    slopes = {}
    for (name, h), pts in log_c1.items():
        if len(pts) < 2:
            continue
        rs = np.array([p[0] for p in pts])
        ys = np.array([p[1] for p in pts])
        if name == "gaussian":
            slopes["%s@h=%r" % (name, h)] = float(np.polyfit(rs**2, ys, 1)[0])
        else:
            slopes["%s@h=%r" % (name, h)] = float(np.polyfit(np.log(rs), ys, 1)[0])
    return NoiseComparison(rows=rows, slopes=slopes)
