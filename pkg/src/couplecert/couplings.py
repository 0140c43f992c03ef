"""One-step joint samplers for Euler chains with exact coalescence.

All couplers draw a single noise vector ``z`` for the first marginal
``X = x_hat + g z`` and realise the second marginal by thinning: a uniform
variable routes ``z`` into branch sub-measures identified by pointwise
density ratios, which is exact because every branch measure is absolutely
continuous with respect to the noise law with an explicit ratio.

Coalescence is bit-exact: when the coalescing branch fires and the one-step
gap fits inside the truncation radius, ``Y`` is assigned ``X`` verbatim, so
the met-pairs count needs no tolerance.  Reported after-distances follow the
branch arithmetic (``r_hat -+ min(r_hat, kappa)``, ``r_hat``) rather than a
floating-point vector norm wherever the branch fixes them exactly.
"""

import enum
import math
from dataclasses import dataclass

import numpy as np

from .errors import AssumptionViolation
from .noise import Noise
from .rates import EulerModel


class Branch(enum.IntEnum):
    COALESCE_MOVE = 0
    ANTI_MOVE = 1
    REFLECTED = 2
    SYNCHRONOUS = 3


@dataclass(frozen=True)
class CoupledStep:
    """One joint transition of a coupled pair."""

    X: np.ndarray
    Y: np.ndarray
    branch: Branch
    coalesced: bool
    r_before: float
    r_hat: float
    r_after: float


@dataclass(frozen=True)
class BatchSteps:
    """Vectorised coupled transitions (arrays over the pair index)."""

    X: np.ndarray
    Y: np.ndarray
    branch: np.ndarray
    coalesced: np.ndarray
    r_before: np.ndarray
    r_hat: np.ndarray
    r_after: np.ndarray

    def __len__(self) -> int:
        return self.r_before.size

    def single(self, i: int = 0) -> CoupledStep:
        return CoupledStep(
            X=self.X[i].copy(),
            Y=self.Y[i].copy(),
            branch=Branch(int(self.branch[i])),
            coalesced=bool(self.coalesced[i]),
            r_before=float(self.r_before[i]),
            r_hat=float(self.r_hat[i]),
            r_after=float(self.r_after[i]),
        )


def truncate_kappa(x: np.ndarray, kappa: float) -> np.ndarray:
    """Shrink ``x`` radially to length at most ``kappa`` (identity if inside).

    ``kappa = inf`` disables truncation; the origin maps to itself.
    """
    x = np.asarray(x, dtype=float)
    if math.isinf(kappa):
        return x
    norm = np.linalg.norm(x, axis=-1, keepdims=True)
    factor = np.where(norm > kappa, np.divide(kappa, norm, where=norm > 0), 1.0)
    return x * factor


def reflect(x_hat: np.ndarray, y_hat: np.ndarray, z: np.ndarray) -> np.ndarray:
    """Householder reflection of ``z`` across the hyperplane orthogonal to
    ``x_hat - y_hat``; the identity when the anchors coincide."""
    x_hat = np.atleast_2d(np.asarray(x_hat, dtype=float))
    y_hat = np.atleast_2d(np.asarray(y_hat, dtype=float))
    z2 = np.atleast_2d(np.asarray(z, dtype=float))
    diff = x_hat - y_hat
    norm2 = np.sum(diff * diff, axis=-1, keepdims=True)
    coef = np.divide(
        2.0 * np.sum(diff * z2, axis=-1, keepdims=True), norm2, where=norm2 > 0
    )
    out = np.where(norm2 > 0, z2 - coef * diff, z2)
    return out.reshape(np.shape(z))


class _CouplingBase:
    def __init__(self, model: EulerModel, noise: Noise):
        if noise.d != model.d:
            raise ValueError("noise dimension %d != model dimension %d" % (noise.d, model.d))
        self.model = model
        self.noise = noise

    def _prepare(self, x, y):
        x = np.atleast_2d(np.asarray(x, dtype=float))
        y = np.atleast_2d(np.asarray(y, dtype=float))
        xh = self.model.drift_hat(x)
        yh = self.model.drift_hat(y)
        r_before = np.linalg.norm(x - y, axis=-1)
        diff = xh - yh
        r_hat = np.linalg.norm(diff, axis=-1)
        return x, y, xh, yh, diff, r_before, r_hat

    def _ratio(self, z, shift, log_m_z):
        """min(1, m(z - shift)/m(z)), with m(z) = 0 resolved to ratio 0."""
        log_shifted = self.noise.log_density_at(z - shift)
        with np.errstate(invalid="ignore"):
            ratio = np.exp(np.minimum(0.0, log_shifted - log_m_z))
        return np.where(np.isfinite(log_m_z), ratio, 0.0)

    def step(self, x, y, rng) -> CoupledStep:
        return self.step_batch(x, y, rng).single(0)

    def sample_steps(self, x, y, n: int, rng) -> BatchSteps:
        """n independent one-step transitions from the same starting pair."""
        x = np.asarray(x, dtype=float).reshape(1, -1)
        y = np.asarray(y, dtype=float).reshape(1, -1)
        return self.step_batch(np.repeat(x, n, 0), np.repeat(y, n, 0), rng)


class RefinedBasicCoupling(_CouplingBase):
    """Three-branch coupling moving Y by the truncated anchor gap.

    With probability slices of ``(1/2) min(1, m(z - v)/m(z))`` for the two
    opposite shifted copies, Y jumps toward (coalescing when the gap fits
    inside ``kappa``) or away from X by the truncated gap; otherwise the
    noise is shared synchronously.  After-distances take exactly the three
    values ``r_hat - min(r_hat, kappa)``, ``r_hat + min(r_hat, kappa)`` and
    ``r_hat``.
    """

    name = "refined_basic"

    def step_batch(self, x, y, rng) -> BatchSteps:
        model = self.model
        x, y, xh, yh, diff, r_before, r_hat = self._prepare(x, y)
        n = r_before.size
        g = model.g_of_h
        trunc = truncate_kappa(diff, model.kappa)
        v_plus = trunc / g
        z = self.noise.sample(n, rng)
        u = rng.random(n)
        log_m_z = self.noise.log_density_at(z)
        p_coal = 0.5 * self._ratio(z, -v_plus, log_m_z)
        p_anti = 0.5 * self._ratio(z, v_plus, log_m_z)
        coal = u < p_coal
        anti = (~coal) & (u < p_coal + p_anti)
        degenerate = r_hat == 0.0
        coal, anti = coal & ~degenerate, anti & ~degenerate

        X = xh + g * z
        Y = yh + g * z
        Y[coal] += trunc[coal]
        Y[anti] -= trunc[anti]
        cap = np.minimum(r_hat, model.kappa)
        r_after = np.where(coal, r_hat - cap, np.where(anti, r_hat + cap, r_hat))
        coalesced = (coal & (r_hat <= model.kappa)) | degenerate
        Y[coalesced] = X[coalesced]
        r_after = np.where(coalesced, 0.0, r_after)
        branch = np.full(n, Branch.SYNCHRONOUS, dtype=np.int8)
        branch[coal] = Branch.COALESCE_MOVE
        branch[anti] = Branch.ANTI_MOVE
        return BatchSteps(X, Y, branch, coalesced, r_before, r_hat, r_after)


class ReflectionCoupling(_CouplingBase):
    """Maximal-coalescence branch plus Householder-reflected noise.

    Requires a rotationally invariant density, non-increasing in the radius;
    the full overlap slice ``min(1, m(z - v)/m(z))`` coalesces, the rest
    reflects the noise across the hyperplane orthogonal to the anchor gap.
    """

    name = "reflection"

    def __init__(self, model: EulerModel, noise: Noise):
        super().__init__(model, noise)
        if not (noise.is_radial and noise.radial_non_increasing):
            raise AssumptionViolation(
                "condition c4 violated: reflection needs a non-increasing radial density"
            )

    def step_batch(self, x, y, rng) -> BatchSteps:
        model = self.model
        x, y, xh, yh, diff, r_before, r_hat = self._prepare(x, y)
        n = r_before.size
        g = model.g_of_h
        trunc = truncate_kappa(diff, model.kappa)
        v_plus = trunc / g
        z = self.noise.sample(n, rng)
        u = rng.random(n)
        log_m_z = self.noise.log_density_at(z)
        coal = u < self._ratio(z, -v_plus, log_m_z)
        degenerate = r_hat == 0.0
        coal &= ~degenerate

        X = xh + g * z
        Y = yh + g * z
        Y[coal] += trunc[coal]
        refl = ~(coal | degenerate)
        Y[refl] = yh[refl] + g * reflect(xh[refl], yh[refl], z[refl])
        cap = np.minimum(r_hat, model.kappa)
        coalesced = (coal & (r_hat <= model.kappa)) | degenerate
        Y[coalesced] = X[coalesced]
        r_after = np.where(coal, r_hat - cap, np.linalg.norm(X - Y, axis=-1))
        r_after = np.where(coalesced, 0.0, r_after)
        branch = np.full(n, Branch.REFLECTED, dtype=np.int8)
        branch[coal] = Branch.COALESCE_MOVE
        branch[degenerate] = Branch.SYNCHRONOUS
        return BatchSteps(X, Y, branch, coalesced, r_before, r_hat, r_after)


@dataclass(frozen=True)
class MixedCouplingParams:
    """Switching radius and jump cap for the gated reflection coupling."""

    s: float
    l_prime: float

    def __post_init__(self):
        if self.s <= 0 or self.l_prime <= 0:
            raise ValueError("switching radius and jump cap must be positive")

    def jump_bound(self, model: EulerModel) -> float:
        """One-step growth bound l: |X - Y| <= |x - y| + l on every step."""
        return model.h * model.L * self.s + max(
            model.kappa, 2.0 * model.g_of_h * self.l_prime
        )


class MixedCoupling(_CouplingBase):
    """Reflection coupling gated to bounded jumps, synchronous elsewhere.

    Pairs farther apart than ``s`` move synchronously; closer pairs behave
    like the reflection coupling but only on the event that both the drawn
    noise and its coalescence-shifted copy have length at most ``l_prime``.
    """

    name = "mixed"

    def __init__(self, model: EulerModel, noise: Noise, params: MixedCouplingParams):
        super().__init__(model, noise)
        if not (noise.is_radial and noise.radial_non_increasing):
            raise AssumptionViolation(
                "condition c4 violated: reflection needs a non-increasing radial density"
            )
        self.params = params

    def step_batch(self, x, y, rng) -> BatchSteps:
        model = self.model
        p = self.params
        x, y, xh, yh, diff, r_before, r_hat = self._prepare(x, y)
        n = r_before.size
        g = model.g_of_h
        trunc = truncate_kappa(diff, model.kappa)
        v_plus = trunc / g
        z = self.noise.sample(n, rng)
        u = rng.random(n)
        log_m_z = self.noise.log_density_at(z)
        near = r_before <= p.s
        gate = (
            near
            & (np.linalg.norm(z, axis=-1) <= p.l_prime)
            & (np.linalg.norm(z + v_plus, axis=-1) <= p.l_prime)
        )
        coal = gate & (u < self._ratio(z, -v_plus, log_m_z))
        degenerate = r_hat == 0.0
        coal &= ~degenerate
        refl = gate & ~coal & ~degenerate

        X = xh + g * z
        Y = yh + g * z
        Y[coal] += trunc[coal]
        Y[refl] = yh[refl] + g * reflect(xh[refl], yh[refl], z[refl])
        cap = np.minimum(r_hat, model.kappa)
        coalesced = (coal & (r_hat <= model.kappa)) | degenerate
        Y[coalesced] = X[coalesced]
        r_after = np.where(coal, r_hat - cap, np.linalg.norm(X - Y, axis=-1))
        r_after = np.where(coalesced, 0.0, r_after)
        branch = np.full(n, Branch.SYNCHRONOUS, dtype=np.int8)
        branch[coal] = Branch.COALESCE_MOVE
        branch[refl] = Branch.REFLECTED
        return BatchSteps(X, Y, branch, coalesced, r_before, r_hat, r_after)


REFINED_BASIC = "refined_basic"
REFLECTION = "reflection"
MIXED = "mixed"


def make_coupling(kind: str, model: EulerModel, noise: Noise, params=None):
    if kind == REFINED_BASIC:
        return RefinedBasicCoupling(model, noise)
    if kind == REFLECTION:
        return ReflectionCoupling(model, noise)
    if kind == MIXED:
        if params is None:
            raise ValueError("mixed coupling needs MixedCouplingParams")
        return MixedCoupling(model, noise, params)
    raise ValueError("unknown coupling kind: %r" % kind)
