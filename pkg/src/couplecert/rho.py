"""Distance-like functions under which coupled chains contract.

Four families are built here, all radial in the pair distance r = |x - y|
(plus an atom at r > 0 and, optionally, a Lyapunov weight):

* total-variation type:  a 1_{r>0} + (1 - e^{-cr} + c e^{-c r1} r);
* weighted total-variation type:  a 1 + (1 - e^{-cr}) + eps (V(x)+V(y)) 1;
* linear-growth type ("W1"): the concave head  int_0^r e^{-c Psi(s)} ds
  pasted twice continuously differentiable onto an asymptotically linear
  tail at r1 + l0;
* polynomial-growth type ("Wp"): the same head pasted onto
  A (r - (r1+l0))^p + (1/c) e^{-c Psi(r1+l0)} (1 - e^{-c(r-(r1+l0))}),
  whose second derivative vanishes exactly at (k+1)(r1+l0).

Constants are chosen at the smallest admissible values so the one-step drift
inequalities close in every radius regime.  Heads that need quadrature are
cached on a 4096-knot table and evaluated by monotone cubic interpolation;
evaluation therefore round-trips bit-exactly through JSON serialisation.
"""

import enum
import json
import math
from dataclasses import dataclass, field, replace
from functools import cached_property

import numpy as np
from scipy.interpolate import PchipInterpolator

from .envelopes import ConcavityProfile, CouplingEnvelopes, LyapunovDrift, WassersteinEnvelopes, identity_profile
from .errors import AssumptionViolation
from .quadrature import cumulative_integral

HEAD_KNOTS = 1 << 12
_HEAD_INCREMENT_TOL = 1e-13


class DistanceKind(enum.Enum):
    TV = "tv"
    WEIGHTED_TV = "weighted_tv"
    W1 = "w1"
    WP = "wp"


@dataclass(frozen=True)
class DistanceSpec:
    """A fully parameterised distance-like function.

    Immutable after construction; safe to share across workers.  ``profile``
    and ``lyapunov`` are callables and are not serialised; everything else
    round-trips bit-exactly through :meth:`to_json`.
    """

    kind: DistanceKind
    c: float
    r1: float
    a: float = 0.0
    epsilon: float = 0.0
    l0: float = 0.0
    p: float = 0.0
    k: float = 0.0
    tail_coeff: float = 0.0
    simplified: bool = False
    head_end: float = 0.0
    slope_end: float = 0.0
    curv_end: float = 0.0
    knots_r: tuple = ()
    knots_f: tuple = ()
    notes: str = ""
    profile: ConcavityProfile | None = field(default=None, compare=False, repr=False)
    lyapunov: object = field(default=None, compare=False, repr=False)

    # -- evaluation ---------------------------------------------------------
    @cached_property
    def _head(self):
        if not self.knots_r:
            return None
        return PchipInterpolator(np.asarray(self.knots_r), np.asarray(self.knots_f))

    @property
    def splice_radius(self) -> float:
        return self.r1 + self.l0

    def radial(self, r) -> np.ndarray:
        """The radial part f(r); vectorised, f(0) = 0."""
        r = np.asarray(r, dtype=float)
        if self.kind is DistanceKind.TV:
            return 1.0 - np.exp(-self.c * r) + self.c * math.exp(-self.c * self.r1) * r
        if self.kind is DistanceKind.WEIGHTED_TV:
            return 1.0 - np.exp(-self.c * r)
        rr = np.atleast_1d(r)
        out = np.empty_like(rr)
        s = self.splice_radius
        head = rr <= s
        out[head] = self._head(np.clip(rr[head], 0.0, s))
        tail = ~head
        if tail.any():
            u = rr[tail] - s
            if self.kind is DistanceKind.W1:
                b = 2.0 * self.curv_end / self.slope_end
                out[tail] = self.head_end + 0.5 * self.slope_end * (u + np.expm1(b * u) / b)
            else:
                out[tail] = (
                    self.head_end
                    + self.tail_coeff * u**self.p
                    - self.slope_end / self.c * np.expm1(-self.c * u)
                )
        return out.reshape(np.shape(r)) if np.ndim(r) else float(out[0])

    def radial_prime(self, r) -> np.ndarray:
        """Closed-form f'(r) (head needs the stored profile)."""
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.kind is DistanceKind.TV:
            out = self.c * np.exp(-self.c * r) + self.c * math.exp(-self.c * self.r1)
        elif self.kind is DistanceKind.WEIGHTED_TV:
            out = self.c * np.exp(-self.c * r)
        else:
            s = self.splice_radius
            out = np.empty_like(r)
            head = r <= s
            if head.any():
                if self.profile is not None:
                    out[head] = np.exp(-self.c * np.asarray(self.profile.psi(r[head])))
                else:
                    out[head] = self._head.derivative()(r[head])
            tail = ~head
            if tail.any():
                u = r[tail] - s
                if self.kind is DistanceKind.W1:
                    b = 2.0 * self.curv_end / self.slope_end
                    out[tail] = 0.5 * self.slope_end * (1.0 + np.exp(b * u))
                else:
                    out[tail] = self.tail_coeff * self.p * u ** (self.p - 1.0) + self.slope_end * np.exp(
                        -self.c * u
                    )
        return out

    def radial_second(self, r) -> np.ndarray:
        r = np.atleast_1d(np.asarray(r, dtype=float))
        if self.kind is DistanceKind.TV:
            return -self.c**2 * np.exp(-self.c * r)
        if self.kind is DistanceKind.WEIGHTED_TV:
            return -self.c**2 * np.exp(-self.c * r)
        s = self.splice_radius
        out = np.empty_like(r)
        head = r <= s
        if head.any():
            if self.profile is not None:
                psi = np.asarray(self.profile.psi(r[head]))
                psi_p = np.asarray(self.profile.psi_prime(r[head]))
                out[head] = -self.c * psi_p * np.exp(-self.c * psi)
            else:
                out[head] = self._head.derivative(2)(r[head])
        tail = ~head
        if tail.any():
            u = r[tail] - s
            if self.kind is DistanceKind.W1:
                b = 2.0 * self.curv_end / self.slope_end
                out[tail] = self.curv_end * np.exp(b * u)
            else:
                out[tail] = self.tail_coeff * self.p * (self.p - 1.0) * u ** (
                    self.p - 2.0
                ) - self.c * self.slope_end * np.exp(-self.c * u)
        return out

    def with_lyapunov(self, V) -> "DistanceSpec":
        return replace(self, lyapunov=V)

    # -- serialisation --------------------------------------------------------
    def to_dict(self) -> dict:
        return {
            "kind": self.kind.value,
            "a": self.a,
            "c": self.c,
            "epsilon": self.epsilon,
            "r1": self.r1,
            "l0": self.l0,
            "p": self.p,
            "k": self.k,
            "tail_coeff": self.tail_coeff,
            "simplified": self.simplified,
            "head_end": self.head_end,
            "slope_end": self.slope_end,
            "curv_end": self.curv_end,
            "knots_r": list(self.knots_r),
            "knots_f": list(self.knots_f),
            "notes": self.notes,
        }

    def to_json(self) -> str:
        return json.dumps(self.to_dict(), sort_keys=True)

    @classmethod
    def from_dict(cls, data: dict) -> "DistanceSpec":
        return cls(
            kind=DistanceKind(data["kind"]),
            a=data["a"],
            c=data["c"],
            epsilon=data["epsilon"],
            r1=data["r1"],
            l0=data["l0"],
            p=data["p"],
            k=data["k"],
            tail_coeff=data["tail_coeff"],
            simplified=data["simplified"],
            head_end=data["head_end"],
            slope_end=data["slope_end"],
            curv_end=data["curv_end"],
            knots_r=tuple(data["knots_r"]),
            knots_f=tuple(data["knots_f"]),
            notes=data["notes"],
        )

    @classmethod
    def from_json(cls, text: str) -> "DistanceSpec":
        return cls.from_dict(json.loads(text))


def eval_rho(spec: DistanceSpec, x, y) -> np.ndarray | float:
    """Evaluate the distance-like function at point pairs.

    ``x`` and ``y`` have shape (d,) or (n, d).  Raises on NaN inputs.
    """
    x = np.asarray(x, dtype=float)
    y = np.asarray(y, dtype=float)
    r = np.linalg.norm(np.atleast_2d(x) - np.atleast_2d(y), axis=-1)
    if np.any(~np.isfinite(r)) or np.any(r < 0):
        raise ValueError("negative distance: non-finite or negative pair distance")
    positive = r > 0.0
    base = np.asarray(spec.radial(r), dtype=float)
    if spec.kind is DistanceKind.TV:
        out = base + spec.a * positive
    elif spec.kind is DistanceKind.WEIGHTED_TV:
        if spec.lyapunov is None:
            raise ValueError("weighted spec evaluated without an attached Lyapunov function")
        vx = np.asarray(spec.lyapunov(np.atleast_2d(x)), dtype=float)
        vy = np.asarray(spec.lyapunov(np.atleast_2d(y)), dtype=float)
        if np.any(~np.isfinite(vx)) or np.any(~np.isfinite(vy)) or np.any(vx < 0) or np.any(vy < 0):
            raise ValueError("negative distance: Lyapunov function returned NaN or negative value")
        out = base + (spec.a + spec.epsilon * (vx + vy)) * positive
    else:
        out = base
    return out if x.ndim > 1 or y.ndim > 1 else float(out[0])


# ---------------------------------------------------------------------------
# builders
# ---------------------------------------------------------------------------


def build_tv_distance(env: CouplingEnvelopes, simplified: bool = False) -> DistanceSpec:
    """Total-variation-type distance with the smallest admissible (c, a).

    In simplified mode the coalescence window is the whole (0, r1], the
    exponent is fixed at c = 1 and the fluctuation envelope is not used.
    """
    env.validate()
    if simplified:
        c = 1.0
        sup_ratio = env.sup_beta_plus_over_pi(0.0, env.r1)
        a = 2.0 * (1.0 + math.exp(-env.r1)) * sup_ratio + 1.0
    else:
        c = env.sup_four_beta_over_alpha(env.r0, env.r1) + 1.0
        sup_ratio = env.sup_beta_plus_over_pi(0.0, env.r0)
        a = 2.0 * c * (1.0 + math.exp(-c * env.r1)) * sup_ratio + 1.0
    return DistanceSpec(kind=DistanceKind.TV, a=a, c=c, r1=env.r1, simplified=simplified)


def build_weighted_tv_distance(env: CouplingEnvelopes, lyap: LyapunovDrift) -> DistanceSpec:
    """Lyapunov-weighted total-variation-type distance."""
    env.validate(require_drift_tail=False)
    if not 0.0 < lyap.lam < 1.0:
        raise AssumptionViolation("lambda out of range: %r not in (0, 1)" % (lyap.lam,))
    r1 = lyap.r1
    if not math.isfinite(r1):
        raise AssumptionViolation("r1 unbounded")
    if r1 <= env.r0:
        raise AssumptionViolation(
            "assumption A violated: coalescence window r0=%g must sit below r1=%g" % (env.r0, r1)
        )
    inf_alpha = env.inf_alpha(env.r0, r1)
    if not (inf_alpha > 0 and math.isfinite(inf_alpha)):
        raise AssumptionViolation("assumption A violated: a2")
    big_a = 16.0 * lyap.K * lyap.C0 / (lyap.lam * inf_alpha)
    c = env.sup_two_beta_over_alpha(env.r0, r1) + big_a + 1.0
    eps = c**2 * math.exp(-c * r1) * inf_alpha / (8.0 * lyap.C0)
    inf_pi = env.inf_pi(0.0, env.r0)
    if inf_pi <= 0:
        raise AssumptionViolation("assumption A violated: a1")
    a = 2.0 * (c * env.sup_beta_plus(0.0, env.r0) + 2.0 * eps * lyap.C0) / inf_pi
    return DistanceSpec(
        kind=DistanceKind.WEIGHTED_TV,
        a=a,
        c=c,
        epsilon=eps,
        r1=r1,
        lyapunov=lyap.V,
        notes="weights: eps*(V(x)+V(y)) on the off-diagonal",
    )


def _build_head(c: float, psi: ConcavityProfile, splice: float):
    knots = np.linspace(0.0, splice, HEAD_KNOTS)

    def integrand(s: float) -> float:
        return math.exp(-c * float(np.asarray(psi.psi(np.array([s])))[0]))

    values = cumulative_integral(integrand, knots, tol=_HEAD_INCREMENT_TOL)
    return tuple(knots.tolist()), tuple(values)


def build_w1_distance(env: WassersteinEnvelopes) -> DistanceSpec:
    """Linear-growth concave distance f(r) = int_0^r e^{-c Psi} with C2 tail."""
    env.validate()
    c = env.c_value()
    psi_l0 = float(np.asarray(env.psi.psi(np.array([env.l0])))[0])
    if c * psi_l0 > math.log(2.0) + 1e-12:
        raise AssumptionViolation(
            "b2 violated: c * Psi(l0) = %.6g exceeds log 2" % (c * psi_l0,)
        )
    splice = env.r1 + env.l0
    knots_r, knots_f = _build_head(c, env.psi, splice)
    psi_end = float(np.asarray(env.psi.psi(np.array([splice])))[0])
    psi_p_end = float(np.asarray(env.psi.psi_prime(np.array([splice])))[0])
    slope_end = math.exp(-c * psi_end)
    return DistanceSpec(
        kind=DistanceKind.W1,
        c=c,
        r1=env.r1,
        l0=env.l0,
        head_end=knots_f[-1],
        slope_end=slope_end,
        curv_end=-c * psi_p_end * slope_end,
        knots_r=knots_r,
        knots_f=knots_f,
        profile=env.psi,
    )


def build_wp_distance(
    env: WassersteinEnvelopes, p: float, l: float, k: float | None = None
) -> DistanceSpec:
    """Polynomial-growth distance for couplings with one-step jumps <= l."""
    if p <= 2.0:
        raise ValueError("polynomial exponent must exceed 2")
    if l < 0.0:
        raise ValueError("jump bound l must be nonnegative")
    env.validate()
    if env.r1 < l + 1.0:
        raise AssumptionViolation("r1 too small vs l: need r1 >= l + 1")
    c = env.c_value()
    psi_l0 = float(np.asarray(env.psi.psi(np.array([env.l0])))[0])
    if c * psi_l0 > math.log(2.0) + 1e-12:
        raise AssumptionViolation(
            "b2 violated: c * Psi(l0) = %.6g exceeds log 2" % (c * psi_l0,)
        )
    splice = env.r1 + env.l0
    floor = 1.0 + max(
        2.0 * l * math.exp(c * l) / (env.c0 * splice),
        4.0**p * l / (env.c0 * splice),
    )
    if k is None:
        k = floor
    elif k < floor * (1 - 1e-12):
        raise AssumptionViolation("k below floor: need k >= %.9g" % floor)
    psi_end = float(np.asarray(env.psi.psi(np.array([splice])))[0])
    psi_p_end = float(np.asarray(env.psi.psi_prime(np.array([splice])))[0])
    if abs(psi_p_end - 1.0) > 1e-9:
        raise AssumptionViolation(
            "profile incompatible with polynomial tail: Psi'(r1+l0) must equal 1"
        )
    log_coeff = (
        -math.log(p * (p - 1.0))
        + (2.0 - p) * math.log(k * splice)
        + math.log(c)
        - c * (psi_end + k * splice)
    )
    if log_coeff < math.log(5e-324) + 40.0:
        raise AssumptionViolation(
            "tail coefficient underflow: c*(Psi(r1+l0) + k(r1+l0)) = %.4g is too large"
            % (c * (psi_end + k * splice))
        )
    tail_coeff = math.exp(log_coeff)
    knots_r, knots_f = _build_head(c, env.psi, splice)
    slope_end = math.exp(-c * psi_end)
    return DistanceSpec(
        kind=DistanceKind.WP,
        c=c,
        r1=env.r1,
        l0=env.l0,
        p=p,
        k=k,
        tail_coeff=tail_coeff,
        head_end=knots_f[-1],
        slope_end=slope_end,
        curv_end=-c * psi_p_end * slope_end,
        knots_r=knots_r,
        knots_f=knots_f,
        profile=env.psi,
    )


# ---------------------------------------------------------------------------
# diagnostics
# ---------------------------------------------------------------------------


def comparability_bounds(spec: DistanceSpec, r_lo: float = 1e-6, r_hi: float = 1e3, n: int = 10**4):
    """Constant cbar >= 1 sandwiching the spec between its reference gauge.

    The gauge is 1 + r (atom kinds), r (linear-growth) or max(r, r^p)
    (polynomial growth); validated by grid search over [r_lo, r_hi].
    """
    r = np.geomspace(r_lo, r_hi, n)
    f = np.asarray(spec.radial(r), dtype=float)
    if np.any(~np.isfinite(f)) or np.any(f < 0):
        raise ValueError("negative distance: radial part must be finite and nonnegative")
    if spec.kind is DistanceKind.TV:
        gauge = 1.0 + r
        vals = (spec.a + f) / gauge
    elif spec.kind is DistanceKind.WEIGHTED_TV:
        # Weight sums S enter through (a + f + eps S)/(1 + S), monotone in S
        # with limits a + f (S = 0) and eps (S -> inf).
        hi = max(spec.a + float(f.max()), spec.epsilon)
        lo = min(spec.a + float(f.min()), spec.epsilon)
        cbar = max(hi, 1.0 / lo, 1.0)
        return 1.0 / cbar, cbar
    elif spec.kind is DistanceKind.W1:
        vals = f / r
    else:
        vals = f / np.maximum(r, r**spec.p)
    # Grid search can only under-estimate the extrema; pad the bound so the
    # sandwich also holds between grid points.
    cbar = max(float(vals.max()), 1.0 / float(vals.min()), 1.0) * (1.0 + 1e-6)
    return 1.0 / cbar, cbar


def shape_report(spec: DistanceSpec, n: int = 10**4, r_lo: float = 1e-6, r_hi: float = 1e3) -> dict:
    """Finite-difference sign diagnostics for the radial part.

    First differences use the step 1e-6 max(r, 1); second and third
    differences use larger steps (1e-4 and 3e-3 times max(r, 1)) so that
    cancellation noise stays well below the reported margins.
    """
    r = np.geomspace(r_lo, r_hi, n)
    f = spec.radial

    s1 = 1e-6 * np.maximum(r, 1.0)
    keep = r - 2 * s1 > 0
    r1g, s1 = r[keep], s1[keep]
    d1 = (f(r1g + s1) - f(r1g - s1)) / (2 * s1)

    s2 = 1e-4 * np.maximum(r, 1.0)
    keep2 = r - 2 * s2 > 0
    r2g, s2 = r[keep2], s2[keep2]
    d2 = (f(r2g + s2) - 2 * f(r2g) + f(r2g - s2)) / s2**2

    s3 = 3e-3 * np.maximum(r, 1.0)
    keep3 = r - 3 * s3 > 0
    r3g, s3 = r[keep3], s3[keep3]
    d3 = (f(r3g + 2 * s3) - 2 * f(r3g + s3) + 2 * f(r3g - s3) - f(r3g - 2 * s3)) / (2 * s3**3)

    report = {
        "r1_grid": r1g,
        "d1": d1,
        "r2_grid": r2g,
        "d2": d2,
        "r3_grid": r3g,
        "d3": d3,
        "min_d1": float(d1.min()),
    }
    if spec.kind is DistanceKind.WP:
        flip = (spec.k + 1.0) * spec.splice_radius
        report["second_deriv_at_flip"] = float(spec.radial_second(np.array([flip]))[0])
        report["flip_radius"] = flip
    return report
