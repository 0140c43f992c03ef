"""Adaptive Simpson integration with explicit tolerance and depth control."""

from collections.abc import Callable

from .errors import QuadratureError


def _simpson(fa: float, fm: float, fb: float, width: float) -> float:
    return width / 6.0 * (fa + 4.0 * fm + fb)


def adaptive_simpson(
    f: Callable[[float], float],
    a: float,
    b: float,
    tol: float = 1e-10,
    max_depth: int = 40,
    strict: bool = True,
) -> float:
    """Integrate ``f`` over ``[a, b]`` by recursive Simpson bisection.

    The local acceptance test is the usual 15-fold Richardson estimate; the
    accepted value includes the extrapolation correction.  With ``strict``
    the depth limit raises :class:`QuadratureError` instead of returning the
    best available value.
    """
    if a == b:
        return 0.0
    if b < a:
        return -adaptive_simpson(f, b, a, tol, max_depth, strict)

    def recurse(lo, hi, flo, fmid, fhi, whole, tol_here, depth):
        mid = 0.5 * (lo + hi)
        lm = 0.5 * (lo + mid)
        rm = 0.5 * (mid + hi)
        flm = f(lm)
        frm = f(rm)
        left = _simpson(flo, flm, fmid, mid - lo)
        right = _simpson(fmid, frm, fhi, hi - mid)
        err = (left + right - whole) / 15.0
        if abs(err) <= tol_here:
            return left + right + err
        if depth >= max_depth:
            if strict:
                raise QuadratureError(
                    "quadrature non-convergent: depth %d exceeded on [%g, %g]"
                    % (max_depth, lo, hi)
                )
            return left + right + err
        return recurse(lo, mid, flo, flm, fmid, left, tol_here / 2.0, depth + 1) + recurse(
            mid, hi, fmid, frm, fhi, right, tol_here / 2.0, depth + 1
        )

    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = _simpson(fa, fm, fb, b - a)
    return recurse(a, b, fa, fm, fb, whole, tol, 0)


def cumulative_integral(
    f: Callable[[float], float],
    knots,
    tol: float = 1e-13,
    max_depth: int = 40,
) -> list[float]:
    """Antiderivative values ``F(knots[i]) = int_{knots[0]}^{knots[i]} f``.

    Each inter-knot increment is integrated independently at absolute
    tolerance ``tol``, so doubling the resolution moves every cached value
    by at most ``len(knots) * tol``.
    """
    out = [0.0]
    total = 0.0
    for lo, hi in zip(knots[:-1], knots[1:]):
        total += adaptive_simpson(f, lo, hi, tol=tol, max_depth=max_depth)
        out.append(total)
    return out
