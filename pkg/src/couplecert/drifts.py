"""Catalogue of drifts with analytically tracked constants.

Each entry supplies the drift ``b`` (vectorised over (n, d) arrays), a
Lipschitz constant ``L``, dissipativity constants ``(K, R)``, and, where the
one-dimensional geometry allows it, the analytic mean-slope range

    slope_range(r) = (lo(r), hi(r)),
    lo(r) <= <x - y, b(x) - b(y)> / |x - y|^2 <= hi(r)  whenever |x - y| = r,

which powers the tight certificate envelopes.  Arbitrary expression drifts
require user-supplied constants; those are sample-verified when the model is
constructed.
"""

import math
from dataclasses import dataclass

import numpy as np

from .errors import ConfigError
from .rates import EulerModel


@dataclass(frozen=True)
class DriftSpec:
    name: str
    b: object
    L: float
    K: float
    R: float
    slope_range: object = None


def linear(a1: float = 1.0, R: float = 1.0) -> DriftSpec:
    """b(x) = -a1 x; dissipative at every distance with constant a1."""
    if a1 <= 0:
        raise ConfigError("drift.a1: must be positive")

    def b(x):
        return -a1 * np.asarray(x, dtype=float)

    def slope_range(r):
        r = np.asarray(r, dtype=float)
        return -a1 * np.ones_like(r), -a1 * np.ones_like(r)

    return DriftSpec("linear", b, L=a1, K=a1, R=R, slope_range=slope_range)


def linear_tanh(a1: float = 1.0, a2: float = 2.0, d: int = 1) -> DriftSpec:
    """b(x) = -a1 x + a2 tanh(x) componentwise.

    Slope of tanh lies in (0, 1], so L = max(a1, |a2 - a1|).  The mean slope
    over a 1D pair at distance r is at most -a1 + 2 a2 tanh(r/2)/r (the
    symmetric pair straddling the origin), which yields dissipativity with
    K = a1/2 beyond R = 4 a2/a1 since tanh < 1.
    """
    if a1 <= 0 or a2 <= 0:
        raise ConfigError("drift.a1/a2: must be positive")

    def b(x):
        x = np.asarray(x, dtype=float)
        return -a1 * x + a2 * np.tanh(x)

    K = a1 / 2.0
    R = 4.0 * a2 / a1
    if d == 1:

        def slope_range(r):
            r = np.asarray(r, dtype=float)
            hi = -a1 + 2.0 * a2 * np.tanh(r / 2.0) / r
            return -a1 * np.ones_like(r), hi

    else:
        slope_range = None  # small-gap coordinates defeat the 1D bound
    return DriftSpec("linear_tanh", b, L=max(a1, abs(a2 - a1)), K=K, R=R, slope_range=slope_range)


def linear_bump(a1: float = 1.0, a2: float = 0.5) -> DriftSpec:
    """b(x) = -a1 x + a2 x exp(-|x|^2 / 2): a radial bump near the origin.

    |x e^{-|x|^2/2}| <= e^{-1/2} and its Jacobian has operator norm at most
    1, giving L = a1 + a2 and the slope bound -a1 + a2 min(1, 2 e^{-1/2}/r).
    """
    if a1 <= 0 or a2 <= 0:
        raise ConfigError("drift.a1/a2: must be positive")

    def b(x):
        x = np.asarray(x, dtype=float)
        r2 = np.sum(x * x, axis=-1, keepdims=True)
        return -a1 * x + a2 * x * np.exp(-r2 / 2.0)

    cap = 2.0 * math.exp(-0.5)
    K = a1 / 2.0
    R = 2.0 * cap * a2 / a1

    def slope_range(r):
        r = np.asarray(r, dtype=float)
        hi = -a1 + a2 * np.minimum(1.0, cap / r)
        return (-a1 - a2) * np.ones_like(r), hi

    return DriftSpec("linear_bump", b, L=a1 + a2, K=K, R=R, slope_range=slope_range)


_SAFE_FUNCS = {
    name: getattr(np, name)
    for name in (
        "tanh",
        "sin",
        "cos",
        "exp",
        "log",
        "sqrt",
        "abs",
        "arctan",
        "sign",
        "minimum",
        "maximum",
    )
}


def expression(expr: str, L: float, K: float, R: float) -> DriftSpec:
    """Drift from a closed-form expression in ``x`` (numpy semantics).

    The user supplies (L, K, R); they are verified by randomised sampling at
    model construction.
    """
    if L <= 0 or K <= 0 or R < 0:
        raise ConfigError("drift constants: L, K must be positive and R nonnegative")
    code = compile(expr, "<drift>", "eval")

    def b(x):
        x = np.asarray(x, dtype=float)
        return np.asarray(eval(code, {"__builtins__": {}}, {**_SAFE_FUNCS, "x": x}), dtype=float)

    return DriftSpec("expr", b, L=L, K=K, R=R, slope_range=None)


def from_config(cfg: dict, d: int) -> DriftSpec:
    kind = cfg.get("drift")
    if kind == "linear":
        return linear(a1=cfg.get("a1", 1.0), R=cfg.get("R", 1.0))
    if kind == "linear_tanh":
        spec = linear_tanh(a1=cfg.get("a1", 1.0), a2=cfg.get("a2", 2.0), d=d)
    elif kind == "linear_bump":
        spec = linear_bump(a1=cfg.get("a1", 1.0), a2=cfg.get("a2", 0.5))
    elif kind == "expr":
        for key in ("expr", "L", "K", "R"):
            if key not in cfg:
                raise ConfigError("model.%s: required for expression drifts" % key)
        return expression(cfg["expr"], cfg["L"], cfg["K"], cfg["R"])
    else:
        raise ConfigError("model.drift: unknown drift %r" % kind)
    overrides = {k: cfg[k] for k in ("L", "K", "R") if k in cfg}
    if overrides:
        spec = DriftSpec(
            spec.name,
            spec.b,
            L=overrides.get("L", spec.L),
            K=overrides.get("K", spec.K),
            R=overrides.get("R", spec.R),
            slope_range=spec.slope_range,
        )
    return spec


def build_model(cfg: dict, noise_index: float | None) -> EulerModel:
    """EulerModel from a [model] config table."""
    d = int(cfg.get("d", 1))
    spec = from_config(cfg, d)
    h = cfg.get("h")
    if h is None or not (isinstance(h, (int, float)) and h > 0 and math.isfinite(h)):
        raise ConfigError("model.h: must be a positive finite number")
    g = cfg.get("g", "auto")
    if g == "auto":
        if noise_index is None:
            raise ConfigError("model.g: 'auto' needs a noise with a stability index")
        g = float(h) ** (1.0 / noise_index)
    elif not (isinstance(g, (int, float)) and g > 0):
        raise ConfigError("model.g: must be positive or 'auto'")
    kappa = cfg.get("kappa", "inf")
    kappa = math.inf if kappa in ("inf", math.inf) else float(kappa)
    if kappa <= 0:
        raise ConfigError("model.kappa: must be positive or 'inf'")
    return EulerModel(
        b=spec.b,
        L=spec.L,
        K=spec.K,
        R=spec.R,
        h=float(h),
        g_of_h=float(g),
        kappa=kappa,
        kappa0=float(cfg.get("kappa0", 1.0)),
        d=d,
        slope_range=spec.slope_range,
        name=spec.name,
    )
