"""Additive noise families: sampling, densities, and overlap functionals.

The overlap functionals are the quantities that drive one-step coalescence:

* ``overlap_mass(v)`` is the total mass of ``mu ^ (delta_v * mu)``, the
  common part of the noise law and its translate by ``v``;
* ``overlap_J(kappa)`` is the infimum of ``overlap_mass`` over shifts of
  length at most ``kappa``.

For a rotationally invariant density ``m(|z|)`` that is non-increasing in
the radius, the overlap reduces exactly to twice the one-dimensional
marginal tail at ``|v|/2`` (split the integral along the shift axis), in
every dimension.  Families without a known marginal fall back to the
certified bound ``(1/d) mu(|z| >= sqrt(d) |v|/2)`` plus a Monte Carlo
estimate of ``E[min(1, m(xi - v)/m(xi))]`` with its standard error.
"""

import math
from dataclasses import dataclass

import numpy as np
from scipy import stats
from scipy.special import gammaln

from . import stable
from .errors import DensityUnavailable, EstimatorVarianceError, MomentUnavailable
from .quadrature import adaptive_simpson

_LOG_2PI = math.log(2.0 * math.pi)


@dataclass(frozen=True)
class OverlapBound:
    """Overlap information when no exact value is computable.

    ``lower`` is a certified lower bound; ``mc``/``se`` are a Monte Carlo
    estimate of the true overlap and its standard error.
    """

    lower: float
    mc: float
    se: float
    method: str

    def __float__(self) -> float:
        return self.lower


class Noise:
    """Base class; subclasses are immutable after construction."""

    d: int
    name: str
    is_radial: bool = False
    radial_non_increasing: bool = False
    has_finite_first_moment: bool = False
    #: stability index used for the Euler scale g(h) = h**(1/alpha); 2 = Gaussian
    stable_index: float | None = None

    # -- sampling ---------------------------------------------------------
    def sample(self, n: int, rng: np.random.Generator) -> np.ndarray:
        raise NotImplementedError

    # -- densities --------------------------------------------------------
    def log_density_at(self, z: np.ndarray) -> np.ndarray:
        """Log density at points ``z`` of shape (n, d)."""
        raise DensityUnavailable("density unavailable for %s" % self.name)

    def density_radial(self, r) -> np.ndarray:
        """Radial density profile m(r); only for rotationally invariant laws."""
        raise DensityUnavailable("density unavailable for %s" % self.name)

    def density_at(self, z: np.ndarray) -> np.ndarray:
        return np.exp(self.log_density_at(z))

    # -- 1D marginal (radial families) -------------------------------------
    def marginal_cdf(self, x):
        raise DensityUnavailable("marginal cdf unavailable for %s" % self.name)

    def marginal_tail(self, x):
        return 1.0 - self.marginal_cdf(x)

    def log_marginal_tail(self, x):
        return np.log(self.marginal_tail(x))

    # -- overlap ------------------------------------------------------------
    def overlap_mass(self, v):
        """Mass of the common part of the law and its translate by ``v``."""
        v = np.atleast_1d(np.asarray(v, dtype=float))
        speed = float(np.linalg.norm(v))
        if speed == 0.0:
            return 1.0
        if self.is_radial and self.radial_non_increasing:
            try:
                return float(2.0 * self.marginal_tail(speed / 2.0))
            except DensityUnavailable:
                pass
        return self._overlap_fallback(v)

    def overlap_J(self, kappa: float):
        """Infimum of the overlap over shifts of length at most ``kappa``."""
        if kappa == 0.0:
            return 1.0
        if self.is_radial and self.radial_non_increasing:
            return self.overlap_mass(_axis_vector(self.d, kappa))
        return self._overlap_J_fallback(kappa)

    def log_overlap_J(self, kappa: float) -> float:
        """log of overlap_J, exact even where the value underflows."""
        if kappa == 0.0:
            return 0.0
        if self.is_radial and self.radial_non_increasing:
            return math.log(2.0) + float(self.log_marginal_tail(kappa / 2.0))
        val = self.overlap_J(kappa)
        return math.log(float(val))

    def _overlap_fallback(self, v):
        raise DensityUnavailable("density unavailable for %s" % self.name)

    def _overlap_J_fallback(self, kappa):
        raise DensityUnavailable("density unavailable for %s" % self.name)

    # -- moments -------------------------------------------------------------
    def abs_moment(self, theta: float) -> float:
        """E |xi|^theta; raises MomentUnavailable when infinite."""
        raise MomentUnavailable("moment unavailable for %s" % self.name)

    def _mc_overlap(self, v: np.ndarray, n: int, rng: np.random.Generator):
        z = self.sample(n, rng)
        ratio = np.exp(
            np.minimum(0.0, self.log_density_at(z - v[None, :]) - self.log_density_at(z))
        )
        mc = float(ratio.mean())
        se = float(ratio.std(ddof=1) / math.sqrt(n))
        if mc > 0 and se / mc > 0.05:
            raise EstimatorVarianceError(
                "estimator variance too high: relative SE %.3f" % (se / mc)
            )
        return mc, se


def _axis_vector(d: int, length: float) -> np.ndarray:
    v = np.zeros(d)
    v[0] = length
    return v


class GaussianNoise(Noise):
    """Standard normal law on R^d."""

    is_radial = True
    radial_non_increasing = True
    has_finite_first_moment = True
    stable_index = 2.0

    def __init__(self, d: int = 1):
        self.d = d
        self.name = "gaussian"

    def sample(self, n, rng):
        return rng.standard_normal((n, self.d))

    def log_density_at(self, z):
        z = np.asarray(z, dtype=float)
        return -0.5 * np.sum(z * z, axis=-1) - 0.5 * self.d * _LOG_2PI

    def density_radial(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(-0.5 * r * r) / (2.0 * math.pi) ** (self.d / 2.0)

    def marginal_cdf(self, x):
        return stats.norm.cdf(x)

    def marginal_tail(self, x):
        return stats.norm.sf(x)

    def log_marginal_tail(self, x):
        return stats.norm.logsf(x)

    def abs_moment(self, theta):
        if theta <= 0:
            return 1.0
        return math.exp(
            theta / 2.0 * math.log(2.0) + gammaln((self.d + theta) / 2.0) - gammaln(self.d / 2.0)
        )


class CauchyNoise(Noise):
    """Isotropic Cauchy law (multivariate t with one degree of freedom)."""

    is_radial = True
    radial_non_increasing = True
    has_finite_first_moment = False
    stable_index = 1.0

    def __init__(self, d: int = 1):
        self.d = d
        self.name = "cauchy"
        self._log_norm = gammaln((d + 1) / 2.0) - (d + 1) / 2.0 * math.log(math.pi)

    def sample(self, n, rng):
        z = rng.standard_normal((n, self.d))
        u = rng.chisquare(1, n)
        return z / np.sqrt(u)[:, None]

    def log_density_at(self, z):
        z = np.asarray(z, dtype=float)
        r2 = np.sum(z * z, axis=-1)
        return self._log_norm - (self.d + 1) / 2.0 * np.log1p(r2)

    def density_radial(self, r):
        r = np.asarray(r, dtype=float)
        return np.exp(self._log_norm - (self.d + 1) / 2.0 * np.log1p(r * r))

    def marginal_cdf(self, x):
        return stats.cauchy.cdf(x)

    def marginal_tail(self, x):
        return stats.cauchy.sf(x)

    def log_marginal_tail(self, x):
        # sf(x) = atan(1/x)/pi for x > 0: stays exact far into the tail.
        return stats.cauchy.logsf(x)

    def abs_moment(self, theta):
        if theta <= 0:
            return 1.0
        if theta >= 1:
            raise MomentUnavailable("moment unavailable: Cauchy has no moment of order %g" % theta)
        return math.exp(
            gammaln((self.d + theta) / 2.0)
            + gammaln((1.0 - theta) / 2.0)
            - gammaln(self.d / 2.0)
            - gammaln(0.5)
        )


class StableNoise(Noise):
    """Isotropic alpha-stable law with characteristic function exp(-|t|^alpha)."""

    is_radial = True
    radial_non_increasing = True

    def __init__(self, alpha: float, d: int = 1):
        if not 0.0 < alpha < 2.0:
            raise ValueError("alpha out of range: %r not in (0, 2)" % (alpha,))
        self.alpha = alpha
        self.d = d
        self.name = "stable:%g" % alpha
        self.has_finite_first_moment = alpha > 1.0
        self.stable_index = alpha
        self._cauchy = CauchyNoise(d) if abs(alpha - 1.0) < 1e-12 else None

    @property
    def _table(self) -> stable.StableTable:
        return stable.stable_table(self.alpha)

    def sample(self, n, rng):
        if self.d == 1:
            return stable.sample_symmetric_1d(self.alpha, n, rng)[:, None]
        return stable.sample_isotropic(self.alpha, self.d, n, rng)

    def log_density_at(self, z):
        z = np.asarray(z, dtype=float)
        if self.d == 1:
            return np.log(self._table.density(z[..., 0]))
        if self._cauchy is not None:
            return self._cauchy.log_density_at(z)
        raise DensityUnavailable(
            "density unavailable: isotropic stable in d=%d needs alpha in {1, 2}" % self.d
        )

    def density_radial(self, r):
        if self.d == 1:
            return self._table.density(r)
        if self._cauchy is not None:
            return self._cauchy.density_radial(r)
        raise DensityUnavailable(
            "density unavailable: isotropic stable in d=%d needs alpha in {1, 2}" % self.d
        )

    def marginal_cdf(self, x):
        return self._table.cdf(x)

    def marginal_tail(self, x):
        return self._table.tail(np.asarray(x, dtype=float))

    def log_marginal_tail(self, x):
        x = np.asarray(x, dtype=float)
        if np.all(x >= stable.SERIES_SWITCH):
            return np.log(stable.series_tail(self.alpha, x))
        return np.log(self._table.tail(x))

    def abs_moment(self, theta):
        if theta <= 0:
            return 1.0
        if theta >= self.alpha:
            raise MomentUnavailable(
                "moment unavailable: alpha-stable with theta=%g >= alpha=%g" % (theta, self.alpha)
            )
        return math.exp(
            theta * math.log(2.0)
            + gammaln(1.0 - theta / self.alpha)
            + gammaln((self.d + theta) / 2.0)
            - gammaln(1.0 - theta / 2.0)
            - gammaln(self.d / 2.0)
        )


class RadialDensityNoise(Noise):
    """User-supplied rotationally invariant density with its sampler."""

    is_radial = True

    def __init__(
        self,
        density,
        sampler,
        d: int = 1,
        non_increasing: bool = True,
        finite_first_moment: bool = True,
        name: str = "radial",
    ):
        self.d = d
        self._m = density
        self._sampler = sampler
        self.radial_non_increasing = non_increasing
        self.has_finite_first_moment = finite_first_moment
        self.name = name

    def sample(self, n, rng):
        out = np.asarray(self._sampler(n, rng), dtype=float)
        if out.ndim == 1:
            out = out[:, None]
        return out

    def density_radial(self, r):
        return np.asarray(self._m(np.asarray(r, dtype=float)), dtype=float)

    def log_density_at(self, z):
        z = np.asarray(z, dtype=float)
        r = np.sqrt(np.sum(z * z, axis=-1))
        with np.errstate(divide="ignore"):
            return np.log(self.density_radial(r))

    def _tail_cut(self, start: float) -> float:
        cut = max(start, 1.0)
        while self._m(cut) > 1e-14 and cut < 1e12:
            cut *= 2.0
        return cut

    def marginal_tail(self, x):
        if self.d != 1:
            raise DensityUnavailable("marginal cdf unavailable for %s in d=%d" % (self.name, self.d))
        x = float(x)
        cut = self._tail_cut(abs(x))
        val = adaptive_simpson(lambda u: float(self._m(u)), abs(x), cut, tol=1e-10)
        return val if x >= 0 else 1.0 - val

    def marginal_cdf(self, x):
        return 1.0 - self.marginal_tail(x)

    def overlap_mass(self, v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        speed = float(np.linalg.norm(v))
        if speed == 0.0:
            return 1.0
        if self.d == 1 and self.radial_non_increasing:
            cut = self._tail_cut(speed / 2.0)
            return 2.0 * adaptive_simpson(lambda u: float(self._m(u)), speed / 2.0, cut, tol=1e-10)
        return self._overlap_fallback(v)

    def _overlap_fallback(self, v):
        speed = float(np.linalg.norm(v))
        lower = self._tail_bound(speed)
        rng = np.random.Generator(np.random.Philox(key=0x0E1A))
        mc, se = self._mc_overlap(v, 1 << 16, rng)
        return OverlapBound(lower=lower, mc=mc, se=se, method="radial-tail-bound")

    def _tail_bound(self, speed: float) -> float:
        # (1/d) * mu(|z| >= sqrt(d) speed / 2) via the surface-area integral.
        t = math.sqrt(self.d) * speed / 2.0
        cut = self._tail_cut(t)
        surface = 2.0 * math.pi ** (self.d / 2.0) / math.exp(gammaln(self.d / 2.0))
        mass = adaptive_simpson(
            lambda u: surface * u ** (self.d - 1) * float(self._m(u)), t, cut, tol=1e-10
        )
        return mass / self.d

    def _overlap_J_fallback(self, kappa):
        return self.overlap_mass(_axis_vector(self.d, kappa))

    def abs_moment(self, theta):
        if not self.has_finite_first_moment and theta >= 1:
            raise MomentUnavailable("moment unavailable for %s" % self.name)
        surface = 2.0 * math.pi ** (self.d / 2.0) / math.exp(gammaln(self.d / 2.0))
        cut = self._tail_cut(1.0)
        return adaptive_simpson(
            lambda u: surface * u ** (self.d - 1 + theta) * float(self._m(u)),
            0.0,
            cut,
            tol=1e-10,
            max_depth=48,
        )


class NonIsotropicExampleNoise(Noise):
    """Heavy-tailed law supported on the slab 0 < z_1 <= 1.

    Density proportional to (1 + |z|)^(-d-alpha) on the slab.  The overlap
    over shifts along the slab axis has, in d = 1, the closed form
    ((1+v)^-alpha - 2^-alpha)/(1 - 2^-alpha).
    """

    is_radial = False
    has_finite_first_moment = True

    def __init__(self, alpha: float, d: int = 1):
        if not 0.0 < alpha < 2.0:
            raise ValueError("alpha out of range: %r not in (0, 2)" % (alpha,))
        self.alpha = alpha
        self.d = d
        self.name = "example-nonisotropic:%g" % alpha
        self.stable_index = alpha
        self._log_m_norm = math.log(self._normalizer())

    def _normalizer(self) -> float:
        a, d = self.alpha, self.d
        if d == 1:
            return (1.0 - 2.0 ** (-a)) / a
        # Integrate over z1 in (0, 1], radial coordinate s = |z_tilde|.
        surface = 2.0 * math.pi ** ((d - 1) / 2.0) / math.exp(gammaln((d - 1) / 2.0))

        def inner(z1: float) -> float:
            def g(s: float) -> float:
                return s ** (d - 2) * (1.0 + math.hypot(z1, s)) ** (-d - a)

            cut = 10.0 ** (14.0 / (2.0 + a))  # integrand below ~1e-14 past this
            return surface * adaptive_simpson(g, 0.0, cut, tol=1e-10, max_depth=48)

        return adaptive_simpson(inner, 0.0, 1.0, tol=1e-8, max_depth=30)

    def sample(self, n, rng):
        a, d = self.alpha, self.d
        if d == 1:
            u = rng.random(n)
            c = 1.0 - 2.0 ** (-a)
            return ((1.0 - c * u) ** (-1.0 / a) - 1.0)[:, None]
        out = np.empty((n, d))
        filled = 0
        while filled < n:
            m = 2 * (n - filled) + 64
            z1 = rng.random(m)
            b = rng.beta(d - 1, a + 1, m) if d > 2 else rng.beta(1.0, a + 1.0, m)
            s = b / (1.0 - b)
            accept_p = ((1.0 + np.hypot(z1, s)) / (1.0 + s)) ** (-(d + a))
            keep = rng.random(m) < accept_p
            z1, s = z1[keep], s[keep]
            k = min(z1.size, n - filled)
            dirs = rng.standard_normal((k, d - 1))
            dirs /= np.linalg.norm(dirs, axis=1, keepdims=True)
            out[filled : filled + k, 0] = z1[:k]
            out[filled : filled + k, 1:] = s[:k, None] * dirs
            filled += k
        return out

    def log_density_at(self, z):
        z = np.asarray(z, dtype=float)
        r = np.sqrt(np.sum(z * z, axis=-1))
        val = -self._log_m_norm - (self.d + self.alpha) * np.log1p(r)
        ok = (z[..., 0] > 0.0) & (z[..., 0] <= 1.0)
        return np.where(ok, val, -np.inf)

    def cdf1d(self, x):
        """CDF in d = 1 (for goodness-of-fit tests)."""
        x = np.clip(np.asarray(x, dtype=float), 0.0, 1.0)
        return (1.0 - (1.0 + x) ** (-self.alpha)) / (1.0 - 2.0 ** (-self.alpha))

    def overlap_mass(self, v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        speed = float(np.linalg.norm(v))
        if speed == 0.0:
            return 1.0
        if self.d == 1:
            if speed >= 1.0:
                return 0.0
            a = self.alpha
            return ((1.0 + speed) ** (-a) - 2.0 ** (-a)) / (1.0 - 2.0 ** (-a))
        rng = np.random.Generator(np.random.Philox(key=0x0E1B))
        mc, se = self._mc_overlap(v, 1 << 16, rng)
        return OverlapBound(lower=max(mc - 3.0 * se, 0.0), mc=mc, se=se, method="mc")

    def overlap_J(self, kappa):
        if self.d == 1:
            return self.overlap_mass(np.array([min(kappa, 1.0)]))
        # Scan shift directions and magnitudes; certified within MC confidence.
        dirs = np.vstack([np.eye(self.d), -np.eye(self.d)])
        best = 1.0
        for u in dirs:
            val = self.overlap_mass(kappa * u)
            best = min(best, float(val.lower if isinstance(val, OverlapBound) else val))
        return best

    def derived_overlap_constant(self) -> float:
        """Constant c with J_kappa >= c((1+kappa)^-alpha - 2^-alpha) on (0,1).

        Exact in d = 1; in higher dimension a Monte Carlo lower-confidence
        value over a shift grid (implementation-derived, not from theory).
        """
        a = self.alpha
        if self.d == 1:
            return 1.0 / (1.0 - 2.0 ** (-a))
        kappas = np.linspace(0.05, 0.95, 10)
        ratios = []
        for k in kappas:
            rhs = (1.0 + k) ** (-a) - 2.0 ** (-a)
            ratios.append(self.overlap_J(float(k)) / rhs)
        return 0.9 * min(ratios)

    def abs_moment(self, theta):
        if theta >= self.alpha:
            raise MomentUnavailable(
                "moment unavailable: tail index %g admits moments below it" % self.alpha
            )
        rng = np.random.Generator(np.random.Philox(key=0x0E1C))
        z = self.sample(1 << 17, rng)
        r = np.linalg.norm(z, axis=1) ** theta
        return float(r.mean())


class LatticeNoise(Noise):
    """Probability mass function on a symmetric 1D lattice (exact oracles)."""

    is_radial = True
    has_finite_first_moment = True

    def __init__(self, offsets: np.ndarray, pmf: np.ndarray):
        offsets = np.asarray(offsets, dtype=float)
        pmf = np.asarray(pmf, dtype=float)
        if offsets.ndim != 1 or offsets.size != pmf.size:
            raise ValueError("offsets and pmf must be 1D arrays of equal length")
        if offsets.size < 2:
            raise ValueError("lattice needs at least two atoms")
        spacing = np.diff(offsets)
        if not np.allclose(spacing, spacing[0], rtol=0, atol=1e-12):
            raise ValueError("lattice must be uniform")
        if not np.allclose(offsets, -offsets[::-1], atol=1e-12):
            raise ValueError("lattice must be symmetric about 0")
        total = pmf.sum()
        if abs(total - 1.0) > 1e-12:
            raise ValueError("pmf must sum to 1 within 1e-12 (got %r)" % total)
        self.d = 1
        self.name = "lattice"
        self.offsets = offsets
        self.pmf = pmf
        self.spacing = float(spacing[0])
        self.radial_non_increasing = bool(
            np.all(np.diff(pmf[offsets >= 0]) <= 1e-15)
        )

    def sample(self, n, rng):
        idx = rng.choice(self.offsets.size, size=n, p=self.pmf)
        return self.offsets[idx][:, None]

    def pmf_at(self, z) -> np.ndarray:
        """PMF at (possibly off-lattice) points; off-lattice points get 0."""
        z = np.asarray(z, dtype=float)
        pos = (z - self.offsets[0]) / self.spacing
        idx = np.rint(pos).astype(int)
        aligned = np.abs(pos - idx) < 1e-6
        inside = (idx >= 0) & (idx < self.offsets.size)
        out = np.zeros_like(z)
        ok = aligned & inside
        out[ok] = self.pmf[idx[ok]]
        return out

    def log_density_at(self, z):
        z = np.asarray(z, dtype=float)
        with np.errstate(divide="ignore"):
            return np.log(self.pmf_at(z[..., 0]))

    def marginal_tail(self, x):
        return float(self.pmf[self.offsets > float(x)].sum())

    def overlap_mass(self, v):
        v = np.atleast_1d(np.asarray(v, dtype=float))
        shifted = self.pmf_at(self.offsets - v[0])
        return float(np.minimum(self.pmf, shifted).sum())

    def overlap_J(self, kappa):
        return self.overlap_mass(np.array([kappa]))

    def abs_moment(self, theta):
        return float((np.abs(self.offsets) ** theta * self.pmf).sum())


def lattice_from_noise(
    base: Noise, spacing: float = 0.05, quantile: float = 1e-6
) -> LatticeNoise:
    """Discretise a 1D radial noise by integrating its density over cells."""
    if base.d != 1:
        raise ValueError("lattice discretisation is one-dimensional")
    cut = 1.0
    while float(base.marginal_tail(cut)) > quantile and cut < 1e9:
        cut *= 2.0
    n_half = int(math.ceil(cut / spacing))
    offsets = spacing * np.arange(-n_half, n_half + 1)
    edges = np.concatenate([offsets - spacing / 2.0, [offsets[-1] + spacing / 2.0]])
    cdf = np.asarray(base.marginal_cdf(edges), dtype=float)
    pmf = np.diff(cdf)
    pmf = np.clip(pmf, 0.0, None)
    pmf /= pmf.sum()
    return LatticeNoise(offsets, pmf)


def from_key(key: str, d: int = 1) -> Noise:
    """Build a noise family from its configuration key.

    Keys: ``gaussian``, ``cauchy``, ``stable:<alpha>``,
    ``example-nonisotropic:<alpha>``.
    """
    key = key.strip().lower()
    if key == "gaussian":
        return GaussianNoise(d)
    if key == "cauchy":
        return CauchyNoise(d)
    if key.startswith("stable:"):
        return StableNoise(float(key.split(":", 1)[1]), d)
    if key.startswith("example-nonisotropic:"):
        return NonIsotropicExampleNoise(float(key.split(":", 1)[1]), d)
    raise ValueError("unknown noise key: %r" % key)
