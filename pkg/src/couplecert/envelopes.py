"""Radial envelope data describing a coupled one-step transition.

Everything a contraction certificate needs about a coupling is summarised by
three radial envelopes:

* ``pi_lower(r)``: a lower bound on the one-step coalescence probability for
  pairs at distance ``r``;
* ``beta_upper(r)``: an upper bound on the expected change of the distance;
* ``alpha_lower(r, l)``: a lower bound on half the expected squared distance
  decrease, counting only moves that do not overshoot ``r + l``.

The envelope containers validate the window conditions that make the
distance builders sound and compute window extrema by log-grid search; exact
closed-form extrema may be supplied through ``overrides`` (keyed by quantity
name) when the caller knows them.
"""

import math
from collections.abc import Callable
from dataclasses import dataclass, field

import numpy as np

from .errors import AssumptionViolation

_GRID_N = 4096
_WINDOW_SHRINK = 1e-9


@dataclass(frozen=True)
class ConcavityProfile:
    """A concave gauge r -> Psi(r) with its first two derivatives."""

    psi: Callable[[np.ndarray], np.ndarray]
    psi_prime: Callable[[np.ndarray], np.ndarray]
    psi_double_prime: Callable[[np.ndarray], np.ndarray]

    def validate(self, r_max: float = 1e3, n: int = 2048, tol: float = 1e-9) -> None:
        r = np.geomspace(1e-6, r_max, n)
        psi0 = float(np.asarray(self.psi(np.array([0.0])))[0])
        if abs(psi0) > tol:
            raise AssumptionViolation("profile invalid: Psi(0) != 0")
        if np.any(np.asarray(self.psi_prime(r)) <= 0.0):
            raise AssumptionViolation("profile invalid: Psi' must be positive")
        dd = np.asarray(self.psi_double_prime(r), dtype=float)
        if np.any(dd > tol):
            raise AssumptionViolation("profile invalid: Psi'' must be <= 0")
        if np.any(np.diff(dd) > tol):
            raise AssumptionViolation("profile invalid: Psi'' must be non-increasing")


def identity_profile() -> ConcavityProfile:
    """The default gauge Psi(r) = r."""
    return ConcavityProfile(
        psi=lambda r: np.asarray(r, dtype=float),
        psi_prime=lambda r: np.ones_like(np.asarray(r, dtype=float)),
        psi_double_prime=lambda r: np.zeros_like(np.asarray(r, dtype=float)),
    )


@dataclass(frozen=True)
class CouplingStatsProfile:
    """The three radial envelopes; callables accept numpy arrays."""

    pi_lower: Callable[[np.ndarray], np.ndarray]
    beta_upper: Callable[[np.ndarray], np.ndarray]
    alpha_lower: Callable[[np.ndarray, float], np.ndarray]

    def beta_plus(self, r: np.ndarray) -> np.ndarray:
        return np.maximum(np.asarray(self.beta_upper(r), dtype=float), 0.0)


def _window_grid(lo: float, hi: float, n: int = _GRID_N) -> np.ndarray:
    """Log grid over the half-open window (lo, hi], endpoint included."""
    if hi <= 0:
        raise ValueError("window upper end must be positive")
    start = max(lo, hi * _WINDOW_SHRINK)
    start = np.nextafter(start, hi) if lo > 0 else start
    return np.geomspace(start, hi, n)


@dataclass(frozen=True)
class CouplingEnvelopes:
    """Envelope data with a coalescence window (0, r0] and a drift radius r1.

    Requires: coalescence probability bounded away from zero on (0, r0],
    squared-decrease bound positive on (r0, r1], bounded drift up to r1, and
    drift at most ``-c0 r`` beyond r1 (checked on a sampled grid).
    """

    r0: float
    r1: float
    c0: float
    profile: CouplingStatsProfile
    overrides: dict = field(default_factory=dict)
    notes: str = ""
    has_drift_tail: bool = True
    validate_on_init: bool = True

    def __post_init__(self):
        if self.validate_on_init:
            self.validate()

    # -- window extrema -----------------------------------------------------
    def _override(self, key: str, lo: float, hi: float, canonical: tuple) -> float | None:
        if key in self.overrides and (lo, hi) == canonical:
            return float(self.overrides[key])
        return None

    def inf_pi(self, lo: float = 0.0, hi: float | None = None) -> float:
        hi = self.r0 if hi is None else hi
        ov = self._override("inf_pi", lo, hi, (0.0, self.r0))
        if ov is not None:
            return ov
        return float(np.min(self.profile.pi_lower(_window_grid(lo, hi))))

    def inf_alpha(self, lo: float | None = None, hi: float | None = None, l: float = 0.0) -> float:
        lo = self.r0 if lo is None else lo
        hi = self.r1 if hi is None else hi
        if hi <= lo:
            return math.inf
        ov = self._override("inf_alpha", lo, hi, (self.r0, self.r1))
        if ov is not None:
            return ov
        return float(np.min(self.profile.alpha_lower(_window_grid(lo, hi), l)))

    def sup_beta_plus(self, lo: float = 0.0, hi: float | None = None) -> float:
        hi = self.r0 if hi is None else hi
        ov = self._override("sup_beta_plus", lo, hi, (0.0, self.r0))
        if ov is not None:
            return ov
        return float(np.max(self.profile.beta_plus(_window_grid(lo, hi))))

    def sup_beta_plus_over_pi(self, lo: float = 0.0, hi: float | None = None) -> float:
        hi = self.r0 if hi is None else hi
        ov = self._override("sup_beta_plus_over_pi", lo, hi, (0.0, self.r0))
        if ov is not None:
            return ov
        r = _window_grid(lo, hi)
        pi = np.asarray(self.profile.pi_lower(r), dtype=float)
        if np.any(pi <= 0.0):
            raise AssumptionViolation("assumption A violated: a1")
        return float(np.max(self.profile.beta_plus(r) / pi))

    def sup_four_beta_over_alpha(self, lo: float | None = None, hi: float | None = None) -> float:
        lo = self.r0 if lo is None else lo
        hi = self.r1 if hi is None else hi
        if hi <= lo:
            return 0.0
        ov = self._override("sup_four_beta_over_alpha", lo, hi, (self.r0, self.r1))
        if ov is not None:
            return ov
        r = _window_grid(lo, hi)
        al = np.asarray(self.profile.alpha_lower(r, 0.0), dtype=float)
        if np.any(al <= 0.0):
            raise AssumptionViolation("assumption A violated: a2")
        return float(np.max(4.0 * self.profile.beta_plus(r) / al))

    def sup_two_beta_over_alpha(self, lo: float | None = None, hi: float | None = None) -> float:
        lo = self.r0 if lo is None else lo
        hi = self.r1 if hi is None else hi
        if hi <= lo:
            return 0.0
        ov = self._override("sup_two_beta_over_alpha", lo, hi, (self.r0, self.r1))
        if ov is not None:
            return ov
        r = _window_grid(lo, hi)
        al = np.asarray(self.profile.alpha_lower(r, 0.0), dtype=float)
        if np.any(al <= 0.0):
            raise AssumptionViolation("assumption A violated: a2")
        return float(np.max(2.0 * self.profile.beta_plus(r) / al))

    # -- validation ----------------------------------------------------------
    def validate(self, require_drift_tail: bool | None = None) -> None:
        if require_drift_tail is None:
            require_drift_tail = self.has_drift_tail
        if not (self.r0 > 0 and math.isfinite(self.r0)):
            raise AssumptionViolation("assumption A violated: r0 must be positive")
        if not (self.r1 > 0 and math.isfinite(self.r1)):
            raise AssumptionViolation("assumption A violated: r1 must be positive")
        if self.r0 > self.r1:
            raise AssumptionViolation("assumption A violated: r0 > r1")
        if self.inf_pi() <= 0.0:
            raise AssumptionViolation("assumption A violated: a1")
        if self.r0 < self.r1 and self.inf_alpha() <= 0.0:
            raise AssumptionViolation("assumption A violated: a2")
        if not math.isfinite(self.sup_beta_plus(0.0, self.r1)):
            raise AssumptionViolation("assumption A violated: a2")
        if require_drift_tail:
            if self.c0 <= 0.0:
                raise AssumptionViolation("assumption A violated: a3")
            r = np.geomspace(self.r1 * (1 + 1e-9), self.r1 * 100.0, 512)
            if np.any(
                np.asarray(self.profile.beta_upper(r), dtype=float) > -self.c0 * r * (1 - 1e-9)
            ):
                raise AssumptionViolation("assumption A violated: a3")


@dataclass(frozen=True)
class WassersteinEnvelopes:
    """Envelope data for distance-to-zero contraction with gauge Psi.

    The fluctuation envelope is used with overshoot allowance ``l0``; the
    derived exponent is ``c = sup 2 beta_plus / (Psi'(r + l0) alpha_{l0}) + 1``
    over (0, r1], and the budget ``c * Psi(l0) <= log 2`` must hold.
    """

    profile: CouplingStatsProfile
    psi: ConcavityProfile
    l0: float
    r1: float
    c0: float
    overrides: dict = field(default_factory=dict)
    notes: str = ""
    validate_on_init: bool = True

    def __post_init__(self):
        if self.validate_on_init:
            self.validate()

    def c_value(self) -> float:
        if "sup_ratio" in self.overrides:
            return float(self.overrides["sup_ratio"]) + 1.0
        r = _window_grid(0.0, self.r1)
        al = np.asarray(self.profile.alpha_lower(r, self.l0), dtype=float)
        if np.any(al <= 0.0):
            raise AssumptionViolation("b1 violated: alpha_{l0} not positive on (0, r1]")
        ratio = 2.0 * self.profile.beta_plus(r) / (np.asarray(self.psi.psi_prime(r + self.l0)) * al)
        return float(np.max(ratio)) + 1.0

    def inf_alpha_over_r(self) -> float:
        if "inf_alpha_over_r" in self.overrides:
            return float(self.overrides["inf_alpha_over_r"])
        r = _window_grid(0.0, self.r1)
        return float(np.min(np.asarray(self.profile.alpha_lower(r, self.l0), dtype=float) / r))

    def validate(self) -> None:
        if self.l0 <= 0 or self.r1 <= 0 or not math.isfinite(self.r1):
            raise AssumptionViolation("b1 violated: l0 and r1 must be positive")
        self.psi.validate()
        if self.inf_alpha_over_r() <= 0.0:
            raise AssumptionViolation("b1 violated: inf alpha_{l0}(r)/r <= 0")
        if self.c0 <= 0.0:
            raise AssumptionViolation("b3 violated: c0 must be positive")
        r = np.geomspace(self.r1 * (1 + 1e-9), self.r1 * 100.0, 512)
        if np.any(np.asarray(self.profile.beta_upper(r), dtype=float) > -self.c0 * r * (1 - 1e-9)):
            raise AssumptionViolation("b3 violated: drift envelope exceeds -c0 r past r1")

    def budget_ok(self) -> bool:
        c = self.c_value()
        psi_l0 = float(np.asarray(self.psi.psi(np.array([self.l0])))[0])
        return c * psi_l0 <= math.log(2.0) + 1e-12


@dataclass(frozen=True)
class LyapunovDrift:
    """A geometric drift certificate for a nonnegative function V.

    ``E V(X_1) <= (1 - lam) V(x) + C0`` for every state, with threshold
    constant ``K`` and the derived radius ``r1`` past which pairs have both
    a large V-sum and a drift-to-V ratio below K.
    """

    V: Callable[[np.ndarray], np.ndarray]
    lam: float
    C0: float
    K: float
    r1: float
    notes: str = ""

    def __post_init__(self):
        if not 0.0 < self.lam < 1.0:
            raise AssumptionViolation("lambda out of range: %r not in (0, 1)" % (self.lam,))
        if self.C0 <= 0 or self.K <= 0:
            raise AssumptionViolation("lyapunov constants must be positive")
