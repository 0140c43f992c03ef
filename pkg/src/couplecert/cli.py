"""Configuration-driven pipelines and the command-line entry point.

Subcommands: ``certify`` (emit a rate certificate), ``audit`` (certify and
Monte Carlo check the contraction at a radius grid), ``simulate`` (coupled
trajectories), ``compare-noise`` (certificate constants across noise
families), ``verify-couplings`` (marginal goodness-of-fit).  Exit codes:
0 on success, 1 when an audit or statistical test fails, 2 on config errors.

Outputs are plain CSV/JSON, fully determined by the config and the seed;
every certificate embeds a hash of the effective configuration.  Unknown
config keys are rejected rather than ignored.
"""

import hashlib
import json
import math
import sys
from pathlib import Path

import click
import numpy as np

try:
    import tomllib
except ModuleNotFoundError:  # Python 3.10
    import tomli as tomllib

from . import drifts, montecarlo, rates, rho
from .couplings import MixedCouplingParams, make_coupling
from .errors import ConfigError, CouplecertError
from .noise import from_key
from .streams import stream

_SCHEMA = {
    "model": {
        "drift",
        "a1",
        "a2",
        "expr",
        "L",
        "K",
        "R",
        "h",
        "g",
        "kappa",
        "kappa0",
        "d",
    },
    "noise": {"key"},
    "coupling": {"kind", "s", "l_prime"},
    "rho": {"kind", "simplified", "envelope_style", "p", "l", "theta", "m1", "m2", "K"},
    "grids": {"r", "R", "alpha", "h"},
    "mc": {"n", "seed", "workers"},
    "simulate": {"x0", "y0", "steps", "n_chains"},
    "output": {"dir"},
}


def load_config(path) -> dict:
    with open(path, "rb") as fh:
        try:
            cfg = tomllib.load(fh)
        except tomllib.TOMLDecodeError as exc:
            raise ConfigError("config parse error: %s" % exc) from exc
    validate_config(cfg)
    return cfg


def validate_config(cfg: dict) -> None:
    for section, table in cfg.items():
        if section not in _SCHEMA:
            raise ConfigError("%s: unknown config section" % section)
        if not isinstance(table, dict):
            raise ConfigError("%s: must be a table" % section)
        for key in table:
            if key not in _SCHEMA[section]:
                raise ConfigError("%s.%s: unknown key" % (section, key))
    mc = cfg.get("mc", {})
    if "seed" not in mc:
        raise ConfigError("mc.seed: required")
    if not isinstance(mc["seed"], int) or mc["seed"] < 0:
        raise ConfigError("mc.seed: must be a nonnegative integer")
    h = cfg.get("model", {}).get("h")
    if h is not None and (not isinstance(h, (int, float)) or not math.isfinite(h) or h <= 0):
        raise ConfigError("model.h: must be a positive finite number")
    n = mc.get("n", 10**5)
    if not isinstance(n, int) or n <= 0:
        raise ConfigError("mc.n: must be a positive integer")
    workers = mc.get("workers", 1)
    if not isinstance(workers, int) or workers <= 0:
        raise ConfigError("mc.workers: must be a positive integer")


def config_hash(cfg: dict) -> str:
    return hashlib.sha256(json.dumps(cfg, sort_keys=True).encode()).hexdigest()


def _log_grid(spec, default):
    if spec is None:
        spec = default
    lo, hi, n = spec
    return np.geomspace(float(lo), float(hi), int(n))


def _build(cfg: dict):
    nz = from_key(cfg.get("noise", {}).get("key", "gaussian"), int(cfg.get("model", {}).get("d", 1)))
    model = drifts.build_model(cfg.get("model", {}), nz.stable_index)
    return model, nz


def _coupling(cfg, model, nz):
    kind = cfg.get("coupling", {}).get("kind", "refined_basic")
    params = None
    if kind == "mixed":
        cc = cfg["coupling"]
        if "s" not in cc or "l_prime" not in cc:
            raise ConfigError("coupling.s: mixed coupling needs s and l_prime")
        params = MixedCouplingParams(s=float(cc["s"]), l_prime=float(cc["l_prime"]))
    return make_coupling(kind, model, nz, params), kind, params


def _certificate(cfg, model, nz, kind, params):
    rcfg = cfg.get("rho", {})
    rho_kind = rcfg.get("kind", "tv")
    style = rcfg.get("envelope_style", "tight" if model.slope_range is not None else "lemma")
    env_kind = "refined_basic" if kind == "mixed" else kind
    if rho_kind == "tv":
        env = rates.euler_assumption_quantities(model, nz, env_kind, envelope_style=style)
        spec = rho.build_tv_distance(env, simplified=bool(rcfg.get("simplified", True)))
        return rates.c_star_tv(env, spec), spec
    if rho_kind == "weighted_tv":
        lyap = rates.lyapunov_drift_certificate(
            model,
            nz,
            theta=float(rcfg.get("theta", 2.0)),
            m1=float(rcfg.get("m1", 1.0)),
            m2=float(rcfg.get("m2", 1.0)),
            K=float(rcfg.get("K", 1.0)),
        )
        env = rates.euler_assumption_quantities(model, nz, env_kind, envelope_style=style, target="weighted")
        spec = rho.build_weighted_tv_distance(env, lyap)
        return rates.c_star_weighted_tv(env, lyap, spec), spec
    if rho_kind == "w1":
        env = rates.euler_assumption_quantities(model, nz, "reflection", envelope_style=style, target="w1")
        spec = rho.build_w1_distance(env)
        return rates.c_star_w1(env, spec), spec
    if rho_kind == "wp":
        env = rates.euler_assumption_quantities(model, nz, "reflection", envelope_style=style, target="w1")
        if params is None:
            raise ConfigError("coupling.kind: the polynomial-growth route needs the mixed coupling")
        l = float(rcfg.get("l", params.jump_bound(model)))
        spec = rho.build_wp_distance(env, p=float(rcfg.get("p", 3.0)), l=l)
        return rates.c_star_wp(env, spec, l), spec
    raise ConfigError("rho.kind: unknown kind %r" % rho_kind)


def _audit_points(cfg, model):
    rs = _log_grid(cfg.get("grids", {}).get("r"), (0.01, 20.0, 20))
    points = []
    for r in rs:
        x = np.zeros(model.d)
        y = np.zeros(model.d)
        x[0], y[0] = r / 2.0, -r / 2.0
        points.append((x, y))
    return rs, points


def run(subcommand: str, cfg: dict, out_dir) -> int:
    """Execute one pipeline; writes artifacts under ``out_dir``."""
    validate_config(cfg)
    out = Path(out_dir if out_dir is not None else cfg.get("output", {}).get("dir", "out"))
    out.mkdir(parents=True, exist_ok=True)
    digest = config_hash(cfg)
    seed = int(cfg["mc"]["seed"])
    n = int(cfg.get("mc", {}).get("n", 10**5))
    workers = int(cfg.get("mc", {}).get("workers", 1))
    model, nz = _build(cfg)
    coupler, kind, params = _coupling(cfg, model, nz)

    if subcommand == "certify":
        cert, _spec = _certificate(cfg, model, nz, kind, params)
        payload = {"config_sha256": digest, "certificate": cert.to_dict()}
        (out / "certificate.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
        return 0

    if subcommand == "audit":
        cert, spec = _certificate(cfg, model, nz, kind, params)
        _, points = _audit_points(cfg, model)
        report = montecarlo.contraction_audit(coupler, spec, cert, points, n, seed, workers)
        (out / "audit.csv").write_text(report.to_csv())
        payload = json.loads(report.to_json())
        payload["config_sha256"] = digest
        (out / "audit.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
        return 0 if report.all_passed else 1

    if subcommand == "simulate":
        scfg = cfg.get("simulate", {})
        cert, spec = _certificate(cfg, model, nz, kind, params)
        x0 = np.asarray(scfg.get("x0", [1.0] * model.d), dtype=float)
        y0 = np.asarray(scfg.get("y0", [-1.0] * model.d), dtype=float)
        summary = montecarlo.simulate_coupled_chain(
            coupler,
            x0,
            y0,
            steps=int(scfg.get("steps", 100)),
            n_chains=int(scfg.get("n_chains", 1000)),
            seed=seed,
            spec=spec,
            workers=workers,
        )
        (out / "trajectory.csv").write_text(summary.to_csv())
        return 0

    if subcommand == "compare-noise":
        grids = cfg.get("grids", {})
        alphas = grids.get("alpha", [1.2, 1.5, 1.8])
        noises = [from_key("gaussian", model.d)] + [
            from_key("stable:%g" % a, model.d) for a in alphas
        ]
        table = rates.noise_rate_comparison(
            model,
            noises,
            r_grid=_log_grid(grids.get("R"), (5.0, 50.0, 10)),
            h_grid=np.atleast_1d(grids.get("h", [model.h])),
            coupling_kind="reflection",
        )
        (out / "rates.csv").write_text(table.to_csv())
        payload = {"config_sha256": digest, "slopes": table.slopes}
        (out / "slopes.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
        return 0

    if subcommand == "verify-couplings":
        _, points = _audit_points(cfg, model)
        reports = []
        ok = True
        for i, (x, y) in enumerate(points[:5]):
            rep = montecarlo.verify_marginals(coupler, x, y, max(n, 10**4), stream(seed, 7000 + i))
            ok &= rep.passed
            reports.append(
                {
                    "r": float(np.linalg.norm(x - y)),
                    "x_pvalue": rep.x_pvalue,
                    "y_pvalue": rep.y_pvalue,
                    "passed": rep.passed,
                    "method": rep.method,
                }
            )
        payload = {"config_sha256": digest, "level": 0.001, "reports": reports, "all_passed": ok}
        (out / "marginals.json").write_text(json.dumps(payload, sort_keys=True) + "\n")
        return 0 if ok else 1

    raise ConfigError("unknown subcommand: %r" % subcommand)


def _invoke(subcommand, config, seed, out):
    try:
        cfg = load_config(config)
        if seed is not None:
            cfg.setdefault("mc", {})["seed"] = seed
        code = run(subcommand, cfg, out)
    except ConfigError as exc:
        click.echo("config error: %s" % exc, err=True)
        sys.exit(2)
    except CouplecertError as exc:
        click.echo("error: %s" % exc, err=True)
        sys.exit(1)
    sys.exit(code)


def _common(fn):
    fn = click.option("--out", type=click.Path(), default=None, help="Output directory.")(fn)
    fn = click.option("--seed", type=int, default=None, help="Override mc.seed.")(fn)
    fn = click.option(
        "--config", type=click.Path(exists=True, dir_okay=False), required=True
    )(fn)
    return fn


@click.group()
def main():
    """Contraction certificates for coupled Euler chains."""


@main.command()
@_common
def certify(config, seed, out):
    """Emit a rate certificate as JSON."""
    _invoke("certify", config, seed, out)


@main.command()
@_common
def audit(config, seed, out):
    """Certify, then Monte Carlo audit the contraction on a radius grid."""
    _invoke("audit", config, seed, out)


@main.command()
@_common
def simulate(config, seed, out):
    """Simulate coupled trajectories and write per-step summaries."""
    _invoke("simulate", config, seed, out)


@main.command("compare-noise")
@_common
def compare_noise(config, seed, out):
    """Tabulate certificate constants across noise families."""
    _invoke("compare-noise", config, seed, out)


@main.command("verify-couplings")
@_common
def verify_couplings(config, seed, out):
    """Goodness-of-fit checks of both coupled marginals."""
    _invoke("verify-couplings", config, seed, out)


if __name__ == "__main__":
    main()
