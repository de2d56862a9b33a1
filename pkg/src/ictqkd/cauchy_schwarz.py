"""Cauchy-Schwarz envelopes, their tangent linearization and reference yields.

For two pure states with squared overlap ``y`` and any measurement operator
``0 <= O <= 1``, the statistic of the second state lies between
``G_minus(x, y)`` and ``G_plus(x, y)`` where ``x`` is the statistic of the
first.  ``g_plus`` is concave and ``g_minus`` convex in ``x``, so tangents
give sound linear constraints.
"""

from __future__ import annotations

import math
from dataclasses import dataclass


def _check_unit(name: str, value: float) -> None:
    if not 0.0 <= value <= 1.0:
        raise ValueError(f"{name} must lie in [0, 1], got {value}")


def g_bounds(x: float, y: float) -> tuple[float, float]:
    """Return ``(G_minus, G_plus)`` at statistic ``x`` and squared overlap ``y``."""
    _check_unit("x", x)
    _check_unit("y", y)
    root = 2.0 * math.sqrt(x * (1 - x) * y * (1 - y))
    base = x + (1 - 2 * x) * (1 - y)
    g_minus = 0.0 if x <= 1 - y else base - root
    g_plus = 1.0 if x >= y else base + root
    return g_minus, g_plus


def g_slopes(x: float, y: float) -> tuple[float, float]:
    """Return ``(G'_minus, G'_plus)``, the derivatives of the envelopes in ``x``.

    At ``x`` in ``{0, 1}`` inside an active branch the slope is unbounded;
    ``math.inf`` (with the appropriate sign) is returned and callers replace
    the tangent by the vacuous line.
    """
    _check_unit("x", x)
    _check_unit("y", y)

    def active_slope(sign: float) -> float:
        if y * (1 - y) == 0.0:
            return -1.0 + 2.0 * y
        if x * (1 - x) == 0.0:
            return sign * (1 - 2 * x) * math.inf
        return -1.0 + 2.0 * y + sign * (1 - 2 * x) * math.sqrt(y * (1 - y) / (x * (1 - x)))

    s_minus = 0.0 if x <= 1 - y else active_slope(-1.0)
    s_plus = 0.0 if x >= y else active_slope(+1.0)
    return s_minus, s_plus


@dataclass(frozen=True)
class TangentCoefficients:
    """Intercepts and slopes of the lower and upper tangent lines."""

    c_minus: float
    m_minus: float
    c_plus: float
    m_plus: float

    def lower(self, x: float) -> float:
        return self.c_minus + self.m_minus * x

    def upper(self, x: float) -> float:
        return self.c_plus + self.m_plus * x


def linearize_cs(reference: float, tau: float) -> TangentCoefficients:
    """Tangent lines to ``G_minus`` and ``G_plus`` at ``x = reference``.

    An unbounded slope at the boundary is replaced by the always-valid
    vacuous line (``0`` below, ``1`` above).
    """
    _check_unit("reference", reference)
    _check_unit("tau", tau)
    g_minus, g_plus = g_bounds(reference, tau)
    s_minus, s_plus = g_slopes(reference, tau)
    if math.isfinite(s_minus):
        c_minus, m_minus = g_minus - s_minus * reference, s_minus
    else:
        c_minus, m_minus = 0.0, 0.0
    if math.isfinite(s_plus):
        c_plus, m_plus = g_plus - s_plus * reference, s_plus
    else:
        c_plus, m_plus = 1.0, 0.0
    return TangentCoefficients(c_minus, m_minus, c_plus, m_plus)


def reference_yield(n: int, eta: float, p_d: float) -> float:
    """Correlation-free ``n``-photon yield of a two-detector receiver."""
    _check_unit("eta", eta)
    if not 0 <= p_d < 1:
        raise ValueError(f"p_d must lie in [0, 1), got {p_d}")
    return 1.0 - (1.0 - p_d) ** 2 * (1.0 - eta) ** n


def reference_error_yield(n: int, eta: float, p_d: float, misalignment: float) -> float:
    """Correlation-free ``n``-photon error yield with random double-click assignment."""
    _check_unit("eta", eta)
    if not 0 <= p_d < 1:
        raise ValueError(f"p_d must lie in [0, 1), got {p_d}")
    cos2 = math.cos(misalignment) ** 2
    sin2 = math.sin(misalignment) ** 2
    q = 1.0 - p_d
    p1 = (1.0 - eta) ** n
    p2 = (1.0 - cos2 * eta) ** n - p1
    p3 = (1.0 - sin2 * eta) ** n - p1
    p4 = 1.0 - p1 - p2 - p3
    e1 = p_d * q + 0.5 * p_d**2
    e2 = q**2 + 1.5 * p_d * q + 0.5 * p_d**2
    e3 = 0.5 * p_d * q + 0.5 * p_d**2
    e4 = 0.5 * q**2 + p_d * q + 0.5 * p_d**2
    return min(max(p1 * e1 + p2 * e2 + p3 * e3 + p4 * e4, 0.0), 1.0)
