"""Monte Carlo estimation, statistical verification, and exact oracles.

Audit policy: a certificate claim E[rho(X, Y)] <= (1 - c*) rho(x, y) is
checked statistically by the flag ``mean + 3 * SE <= threshold``; the 3-SE
criterion is an implementation policy, recorded in every report.

Reproducibility: all sampling work is split into fixed-size tasks whose
Philox stream is keyed by the task index alone, and partial results are
reduced in task order, so reports are byte-identical for any worker count.
"""

import json
import math
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass, field

import numpy as np
from scipy import stats as _scipy_stats

from .couplings import BatchSteps
from .errors import EstimatorVarianceError, InstanceTooLarge
from .noise import LatticeNoise, NonIsotropicExampleNoise
from .rates import EulerModel, RateCertificate
from .rho import DistanceSpec, eval_rho
from .streams import TASK_CHUNK, stream, task_plan

AUDIT_POLICY = (
    "pass flag: empirical mean + 3 * SE <= (1 - c_star) * rho(x, y); "
    "the 3-SE criterion is an implementation policy"
)


def _map_tasks(fn, plan, workers: int):
    if workers <= 1:
        return [fn(*t) for t in plan]
    with ThreadPoolExecutor(max_workers=workers) as pool:
        return list(pool.map(lambda t: fn(*t), plan))


# ---------------------------------------------------------------------------
# coupling statistics
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class StatsEstimate:
    """Empirical coalescence/drift/fluctuation statistics with errors."""

    pi_hat: float
    pi_se: float
    beta_hat: float
    beta_se: float
    alpha_hat: dict
    n: int
    r_before: float
    r_hat: float


def estimate_coupling_stats(coupler, x, y, l_values, n: int, rng) -> StatsEstimate:
    """One-step statistics from ``n`` independent transitions of one pair."""
    if n < 10**3:
        raise ValueError("need n >= 1000 samples")
    batch = coupler.sample_steps(x, y, n, rng)
    coal = batch.coalesced.astype(float)
    delta = batch.r_after - batch.r_before
    alpha = {}
    for l in l_values:
        w = 0.5 * delta**2 * (batch.r_after < batch.r_before + l)
        alpha[float(l)] = (float(w.mean()), float(w.std(ddof=1) / math.sqrt(n)))
    return StatsEstimate(
        pi_hat=float(coal.mean()),
        pi_se=float(coal.std(ddof=1) / math.sqrt(n)),
        beta_hat=float(delta.mean()),
        beta_se=float(delta.std(ddof=1) / math.sqrt(n)),
        alpha_hat=alpha,
        n=n,
        r_before=float(batch.r_before[0]),
        r_hat=float(batch.r_hat[0]),
    )


# ---------------------------------------------------------------------------
# marginal verification
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class MarginalReport:
    x_statistic: float
    x_pvalue: float
    y_statistic: float
    y_pvalue: float
    level: float
    method: str

    @property
    def passed(self) -> bool:
        return self.x_pvalue > self.level and self.y_pvalue > self.level


def _cdf_1d(noise):
    if isinstance(noise, NonIsotropicExampleNoise):
        return noise.cdf1d if noise.d == 1 else None
    if isinstance(noise, LatticeNoise):
        return None
    try:
        noise.marginal_cdf(np.array([0.0]))
    except Exception:
        return None
    return lambda v: np.asarray(noise.marginal_cdf(v), dtype=float)


def verify_marginals(coupler, x, y, n: int, rng, level: float = 0.001) -> MarginalReport:
    """Kolmogorov-Smirnov check that both coupled marginals follow the noise.

    The statistic is computed on g(h)^(-1)(X - x_hat) and
    g(h)^(-1)(Y - y_hat), projected onto the pre-step gap direction when the
    state dimension exceeds one (valid for rotationally invariant noise).
    """
    if n < 10**4:
        raise EstimatorVarianceError("insufficient samples: need n >= 10^4")
    model = coupler.model
    batch = coupler.sample_steps(x, y, n, rng)
    xh = model.drift_hat(np.asarray(x, dtype=float).reshape(1, -1))
    yh = model.drift_hat(np.asarray(y, dtype=float).reshape(1, -1))
    ux = (batch.X - xh) / model.g_of_h
    uy = (batch.Y - yh) / model.g_of_h
    if model.d == 1:
        sx, sy = ux[:, 0], uy[:, 0]
    else:
        e = (xh - yh)[0]
        norm = np.linalg.norm(e)
        e = e / norm if norm > 0 else np.eye(model.d)[0]
        sx, sy = ux @ e, uy @ e
    cdf = _cdf_1d(coupler.noise)
    if cdf is not None:
        kx = _scipy_stats.kstest(sx, cdf)
        ky = _scipy_stats.kstest(sy, cdf)
        method = "one-sample KS against the marginal CDF"
    else:
        ref = coupler.noise.sample(n, rng)
        ref = ref[:, 0] if model.d == 1 else ref @ e
        kx = _scipy_stats.ks_2samp(sx, ref)
        ky = _scipy_stats.ks_2samp(sy, ref)
        method = "two-sample KS against direct draws"
    return MarginalReport(
        x_statistic=float(kx.statistic),
        x_pvalue=float(kx.pvalue),
        y_statistic=float(ky.statistic),
        y_pvalue=float(ky.pvalue),
        level=level,
        method=method,
    )


# ---------------------------------------------------------------------------
# contraction audit
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class AuditRow:
    index: int
    r_before: float
    rho_xy: float
    e_rho_hat: float
    se: float
    threshold: float
    coalesced_frac: float
    passed: bool


@dataclass(frozen=True)
class AuditReport:
    rows: list
    certificate: RateCertificate
    n: int
    seed: int
    policy: str = AUDIT_POLICY
    extra: dict = field(default_factory=dict)

    @property
    def pass_rate(self) -> float:
        return sum(r.passed for r in self.rows) / len(self.rows)

    @property
    def all_passed(self) -> bool:
        return all(r.passed for r in self.rows)

    def to_csv(self) -> str:
        lines = ["index,r,rho_xy,e_rho_hat,se,threshold,coalesced_frac,passed"]
        for r in self.rows:
            lines.append(
                "%d,%r,%r,%r,%r,%r,%r,%d"
                % (
                    r.index,
                    r.r_before,
                    r.rho_xy,
                    r.e_rho_hat,
                    r.se,
                    r.threshold,
                    r.coalesced_frac,
                    r.passed,
                )
            )
        return "\n".join(lines) + "\n"

    def to_json(self) -> str:
        return json.dumps(
            {
                "policy": self.policy,
                "n": self.n,
                "seed": self.seed,
                "pass_rate": self.pass_rate,
                "all_passed": self.all_passed,
                "certificate": self.certificate.to_dict(),
                "rows": [vars(r) for r in self.rows],
                "extra": dict(sorted(self.extra.items())),
            },
            sort_keys=True,
        )


def contraction_audit(
    coupler,
    spec: DistanceSpec,
    cert: RateCertificate,
    points,
    n: int,
    seed: int,
    workers: int = 1,
) -> AuditReport:
    """Statistically audit E[rho(X, Y)] <= (1 - c*) rho(x, y) at given pairs."""
    d = coupler.model.d
    plan_per_point = task_plan(n)
    tasks = []
    for i, (x, y) in enumerate(points):
        for t, start, count in plan_per_point:
            tasks.append((i, i * len(plan_per_point) + t, count))

    xs = [np.asarray(x, dtype=float).reshape(d) for x, _ in points]
    ys = [np.asarray(y, dtype=float).reshape(d) for _, y in points]

    def run(point_idx: int, task_idx: int, count: int):
        rng = stream(seed, task_idx)
        batch = coupler.sample_steps(xs[point_idx], ys[point_idx], count, rng)
        vals = np.asarray(eval_rho(spec, batch.X, batch.Y), dtype=float)
        return (
            point_idx,
            float(vals.sum()),
            float((vals**2).sum()),
            int(batch.coalesced.sum()),
            count,
        )

    partials = _map_tasks(run, tasks, workers)
    rows = []
    for i, (x, y) in enumerate(points):
        s1 = s2 = 0.0
        coal = cnt = 0
        for p_idx, a, b, c, m in partials:
            if p_idx == i:
                s1 += a
                s2 += b
                coal += c
                cnt += m
        mean = s1 / cnt
        var = max(s2 - cnt * mean**2, 0.0) / (cnt - 1)
        se = math.sqrt(var / cnt)
        rho_xy = float(eval_rho(spec, xs[i], ys[i]))
        threshold = (1.0 - cert.c_star) * rho_xy
        rows.append(
            AuditRow(
                index=i,
                r_before=float(np.linalg.norm(xs[i] - ys[i])),
                rho_xy=rho_xy,
                e_rho_hat=mean,
                se=se,
                threshold=threshold,
                coalesced_frac=coal / cnt,
                passed=bool(mean + 3.0 * se <= threshold),
            )
        )
    return AuditReport(rows=rows, certificate=cert, n=n, seed=seed)


# ---------------------------------------------------------------------------
# coupled-chain simulation
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class TrajectorySummary:
    t: np.ndarray
    e_rho: np.ndarray
    se: np.ndarray
    coalesced_frac: np.ndarray
    w1: np.ndarray
    coalescence_counts: dict
    n_chains: int
    steps: int
    seed: int

    def to_csv(self) -> str:
        lines = ["t,E_rho,se,coalesced_frac,W1"]
        for i in range(self.t.size):
            lines.append(
                "%d,%r,%r,%r,%r"
                % (int(self.t[i]), self.e_rho[i], self.se[i], self.coalesced_frac[i], self.w1[i])
            )
        return "\n".join(lines) + "\n"


_CHAIN_CHUNK = 4096


def simulate_coupled_chain(
    coupler,
    x0,
    y0,
    steps: int,
    n_chains: int,
    seed: int,
    spec: DistanceSpec | None = None,
    workers: int = 1,
) -> TrajectorySummary:
    """Iterate the coupled kernel; per-step distance summaries.

    Reports E[rho] (when a distance spec is given), the coalesced fraction
    (whose complement upper-bounds the total-variation distance of the two
    time marginals), and the empirical 1-Wasserstein distance between the
    marginal ensembles (exact sorted-sample form in one dimension, coupled
    upper bound E|X - Y| otherwise).
    """
    if steps < 1:
        raise ValueError("steps must be >= 1")
    d = coupler.model.d
    x0 = np.asarray(x0, dtype=float).reshape(d)
    y0 = np.asarray(y0, dtype=float).reshape(d)
    plan = task_plan(n_chains, _CHAIN_CHUNK)

    def run(task_idx: int, start: int, count: int):
        rng = stream(seed, task_idx)
        x = np.repeat(x0[None, :], count, axis=0)
        y = np.repeat(y0[None, :], count, axis=0)
        first_coal = np.full(count, -1, dtype=np.int64)
        rho_sum = np.zeros(steps)
        rho_sq = np.zeros(steps)
        coal_cnt = np.zeros(steps, dtype=np.int64)
        xs_1d = np.empty((steps, count)) if d == 1 else None
        ys_1d = np.empty((steps, count)) if d == 1 else None
        gap_sum = np.zeros(steps)
        for t in range(steps):
            batch = coupler.step_batch(x, y, rng)
            x, y = batch.X, batch.Y
            newly = (first_coal < 0) & batch.coalesced
            first_coal[newly] = t
            coal_cnt[t] = int(batch.coalesced.sum())
            if spec is not None:
                vals = np.asarray(eval_rho(spec, x, y), dtype=float)
                rho_sum[t] = vals.sum()
                rho_sq[t] = (vals**2).sum()
            if d == 1:
                xs_1d[t] = x[:, 0]
                ys_1d[t] = y[:, 0]
            else:
                gap_sum[t] = np.linalg.norm(x - y, axis=1).sum()
        return rho_sum, rho_sq, coal_cnt, first_coal, xs_1d, ys_1d, gap_sum

    partials = _map_tasks(run, plan, workers)
    rho_sum = sum(p[0] for p in partials)
    rho_sq = sum(p[1] for p in partials)
    coal = sum(p[2] for p in partials)
    first = np.concatenate([p[3] for p in partials])
    if d == 1:
        xs = np.concatenate([p[4] for p in partials], axis=1)
        ys = np.concatenate([p[5] for p in partials], axis=1)
        w1 = np.abs(np.sort(xs, axis=1) - np.sort(ys, axis=1)).mean(axis=1)
    else:
        w1 = sum(p[6] for p in partials) / n_chains
    mean = rho_sum / n_chains
    var = np.maximum(rho_sq - n_chains * mean**2, 0.0) / max(n_chains - 1, 1)
    se = np.sqrt(var / n_chains)
    counts = {}
    for t in first[first >= 0]:
        counts[int(t)] = counts.get(int(t), 0) + 1
    return TrajectorySummary(
        t=np.arange(steps),
        e_rho=mean,
        se=se,
        coalesced_frac=coal / n_chains,
        w1=w1,
        coalescence_counts=dict(sorted(counts.items())),
        n_chains=n_chains,
        steps=steps,
        seed=seed,
    )


# ---------------------------------------------------------------------------
# exact lattice oracle
# ---------------------------------------------------------------------------


@dataclass(frozen=True)
class OracleInstance:
    """A 1D lattice-noise instance small enough for exact enumeration."""

    noise: LatticeNoise
    model: EulerModel
    coupling_kind: str
    mixed_s: float = math.inf
    mixed_l_prime: float = math.inf

    def __post_init__(self):
        if self.model.d != 1:
            raise ValueError("exact oracle instances are one-dimensional")
        if 3 * self.noise.offsets.size > 10**7:
            raise InstanceTooLarge("instance too large: branch enumeration exceeds 10^7 terms")


@dataclass(frozen=True)
class OracleStats:
    pi: float
    beta: float
    alpha: dict
    e_rho: float | None


def oracle_exact(
    inst: OracleInstance, x: float, y: float, spec: DistanceSpec | None = None, l_values=(0.0,)
) -> OracleStats:
    """Exact one-step statistics by enumerating the branch decomposition."""
    model = inst.model
    g = model.g_of_h
    xs = np.array([[float(x)]])
    ys = np.array([[float(y)]])
    xh = float(model.drift_hat(xs)[0, 0])
    yh = float(model.drift_hat(ys)[0, 0])
    r = abs(float(x) - float(y))
    diff = xh - yh
    r_hat = abs(diff)
    z = inst.noise.offsets
    p = inst.noise.pmf
    cap = min(r_hat, model.kappa)
    trunc = math.copysign(cap, diff) if r_hat > 0 else 0.0
    v_plus = trunc / g

    if r_hat == 0.0:
        branch_masses = [p]
        branch_r_after = [np.zeros_like(z)]
        branch_y = [yh + g * z]
        coal_mass = 1.0
    elif inst.coupling_kind == "refined_basic":
        q1 = 0.5 * np.minimum(p, inst.noise.pmf_at(z + v_plus))
        q2 = 0.5 * np.minimum(p, inst.noise.pmf_at(z - v_plus))
        q3 = p - q1 - q2
        branch_masses = [q1, q2, q3]
        branch_r_after = [
            np.full_like(z, r_hat - cap),
            np.full_like(z, r_hat + cap),
            np.full_like(z, r_hat),
        ]
        branch_y = [yh + g * z + trunc, yh + g * z - trunc, yh + g * z]
        coal_mass = float(q1.sum()) if r_hat <= model.kappa else 0.0
    elif inst.coupling_kind == "reflection":
        q1 = np.minimum(p, inst.noise.pmf_at(z + v_plus))
        q2 = p - q1
        branch_masses = [q1, q2]
        branch_r_after = [np.full_like(z, r_hat - cap), np.abs(diff + 2.0 * g * z)]
        branch_y = [yh + g * z + trunc, yh - g * z]
        coal_mass = float(q1.sum()) if r_hat <= model.kappa else 0.0
    elif inst.coupling_kind == "mixed":
        if r > inst.mixed_s:
            branch_masses = [p]
            branch_r_after = [np.full_like(z, r_hat)]
            branch_y = [yh + g * z]
            coal_mass = 0.0
        else:
            gate = (np.abs(z) <= inst.mixed_l_prime) & (
                np.abs(z + v_plus) <= inst.mixed_l_prime
            )
            q1 = gate * np.minimum(p, inst.noise.pmf_at(z + v_plus))
            q2 = gate * (p - np.minimum(p, inst.noise.pmf_at(z + v_plus)))
            q3 = p - q1 - q2
            branch_masses = [q1, q2, q3]
            branch_r_after = [
                np.full_like(z, r_hat - cap),
                np.abs(diff + 2.0 * g * z),
                np.full_like(z, r_hat),
            ]
            branch_y = [yh + g * z + trunc, yh - g * z, yh + g * z]
            coal_mass = float(q1.sum()) if r_hat <= model.kappa else 0.0
    else:
        raise ValueError("unknown coupling kind: %r" % inst.coupling_kind)

    beta = 0.0
    alpha = {float(l): 0.0 for l in l_values}
    e_rho = 0.0 if spec is not None else None
    x_pos = xh + g * z
    for mass, r_after, y_pos in zip(branch_masses, branch_r_after, branch_y):
        live = mass > 0
        if not live.any():
            continue
        m, ra = mass[live], r_after[live]
        beta += float((m * (ra - r)).sum())
        for l in l_values:
            sel = ra < r + l
            alpha[float(l)] += 0.5 * float((m[sel] * (ra[sel] - r) ** 2).sum())
        if spec is not None:
            # Coalescing outcomes evaluate on exactly equal positions.
            yv = np.where(ra == 0.0, x_pos[live], y_pos[live])
            vals = np.asarray(
                eval_rho(spec, x_pos[live][:, None], yv[:, None]), dtype=float
            )
            e_rho += float((m * vals).sum())
    return OracleStats(pi=coal_mass, beta=beta, alpha=alpha, e_rho=e_rho)
