"""Small numerical kernels shared across the package.

Only scalar 1-D quadrature and bracketed root finding live here; anything
heavier (interpolation, linear algebra) comes from scipy directly.
"""

from __future__ import annotations

import math


def adaptive_simpson(f, a: float, b: float, tol: float = 1e-12, max_depth: int = 50) -> float:
    """Adaptive Simpson quadrature of ``f`` on [a, b] to absolute tolerance.

    Classic recursive bisection with Richardson correction (the factor 15).
    Recursion also stops once the Richardson estimate falls below the
    relative rounding noise of the panel sums or the panel width hits a
    floor; without those guards, near-singular integrands push the local
    tolerance under machine noise and the tree explodes exponentially.
    """
    if b == a:
        return 0.0
    width_floor = abs(b - a) * 1e-14
    fa, fb = f(a), f(b)
    m = 0.5 * (a + b)
    fm = f(m)
    whole = (b - a) / 6.0 * (fa + 4.0 * fm + fb)

    def recurse(a, fa, b, fb, m, fm, whole, tol, depth):
        lm = 0.5 * (a + m)
        rm = 0.5 * (m + b)
        flm, frm = f(lm), f(rm)
        left = (m - a) / 6.0 * (fa + 4.0 * flm + fm)
        right = (b - m) / 6.0 * (fm + 4.0 * frm + fb)
        delta = left + right - whole
        if (depth <= 0 or abs(delta) <= 15.0 * tol
                or abs(delta) <= 4e-16 * (abs(left) + abs(right))
                or (b - a) <= width_floor):
            return left + right + delta / 15.0
        return (recurse(a, fa, m, fm, lm, flm, left, 0.5 * tol, depth - 1)
                + recurse(m, fm, b, fb, rm, frm, right, 0.5 * tol, depth - 1))

    return recurse(a, fa, b, fb, m, fm, whole, tol, max_depth)


def bisect_root(f, a: float, b: float, *, xtol: float = 1e-13, ftol: float = 0.0,
                max_iter: int = 200) -> float:
    """Bracketed bisection for a continuous f with f(a), f(b) of opposite sign.

    Stops when the bracket is narrower than ``xtol`` (absolute) or, if
    ``ftol`` > 0, as soon as |f(mid)| < ftol.  Unconditionally convergent on
    monotone functions, which is why it is preferred over Newton here.
    """
    fa, fb = f(a), f(b)
    if fa == 0.0:
        return a
    if fb == 0.0:
        return b
    if fa * fb > 0.0:
        raise ValueError(f"root not bracketed: f({a})={fa}, f({b})={fb}")
    for _ in range(max_iter):
        m = 0.5 * (a + b)
        fm = f(m)
        if fm == 0.0 or (ftol > 0.0 and abs(fm) < ftol):
            return m
        if fa * fm < 0.0:
            b, fb = m, fm
        else:
            a, fa = m, fm
        if b - a < xtol:
            return 0.5 * (a + b)
    return 0.5 * (a + b)


def secant_root(f, x0: float, x1: float, *, ftol: float = 1e-12, max_iter: int = 100,
                lo: float = -math.inf, hi: float = math.inf) -> float:
    """Safeguarded secant iteration, clamped to (lo, hi).

    Used as an independent cross-check against bisection; falls back to the
    midpoint of the clamp interval when a step leaves it.
    """
    f0, f1 = f(x0), f(x1)
    for _ in range(max_iter):
        if abs(f1) < ftol:
            return x1
        denom = f1 - f0
        if denom == 0.0:
            break
        x2 = x1 - f1 * (x1 - x0) / denom
        if not (lo < x2 < hi):
            x2 = 0.5 * (max(lo, min(x0, x1)) + min(hi, max(x0, x1)))
        x0, f0 = x1, f1
        x1, f1 = x2, f(x2)
    return x1
