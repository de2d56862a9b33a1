"""Derivative-free scalar search helpers shared by the bound and rate optimizers."""

from __future__ import annotations

import math
from typing import Callable

INV_PHI = (math.sqrt(5.0) - 1.0) / 2.0


def golden_section(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    maximize: bool = False,
    xtol: float = 0.0,
    max_iter: int = 80,
) -> tuple[float, float]:
    """Golden-section search for the extremum of ``func`` on ``[lo, hi]``.

    Both endpoints are evaluated as well, so monotone functions return the
    correct boundary value.  Returns ``(x_best, f_best)``.
    """
    if hi < lo:
        raise ValueError(f"inverted bracket [{lo}, {hi}]")
    sign = -1.0 if maximize else 1.0

    def g(x: float) -> float:
        return sign * func(x)

    best_x, best_f = lo, g(lo)
    if hi == lo:
        return best_x, sign * best_f
    f_hi = g(hi)
    if f_hi < best_f:
        best_x, best_f = hi, f_hi

    a, b = lo, hi
    c = b - INV_PHI * (b - a)
    d = a + INV_PHI * (b - a)
    fc, fd = g(c), g(d)
    for _ in range(max_iter):
        if b - a <= xtol:
            break
        if fc < fd:
            b, d, fd = d, c, fc
            c = b - INV_PHI * (b - a)
            fc = g(c)
        else:
            a, c, fc = c, d, fd
            d = a + INV_PHI * (b - a)
            fd = g(d)
    for x, fx in ((c, fc), (d, fd)):
        if fx < best_f:
            best_x, best_f = x, fx
    return best_x, sign * best_f


def scan_then_golden(
    func: Callable[[float], float],
    lo: float,
    hi: float,
    *,
    points: int = 9,
    max_iter: int = 12,
    maximize: bool = True,
) -> tuple[float, float]:
    """Coarse scan of ``points`` nodes, then golden section around the best node.

    Robust to flat regions (e.g. zero key rate) where a bare golden-section
    search would wander off.
    """
    if hi < lo:
        raise ValueError(f"inverted bracket [{lo}, {hi}]")
    if hi == lo or points < 2:
        return golden_section(func, lo, hi, maximize=maximize, max_iter=max_iter)
    step = (hi - lo) / (points - 1)
    nodes = [lo + i * step for i in range(points)]
    values = [func(x) for x in nodes]
    pick = max if maximize else min
    best = values.index(pick(values))
    a = nodes[max(best - 1, 0)]
    b = nodes[min(best + 1, points - 1)]
    x, fx = golden_section(func, a, b, maximize=maximize, max_iter=max_iter)
    better = fx > values[best] if maximize else fx < values[best]
    return (x, fx) if better else (nodes[best], values[best])
