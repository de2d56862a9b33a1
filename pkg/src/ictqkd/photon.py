"""Bounds on conditional photon-number probabilities under intensity fluctuations.

The actual intensity of a pulse is ``alpha = alpha_bar * (1 + delta)`` where
``delta`` has zero mean and support ``[delta_lo, delta_hi]`` and the
conditional mean ``alpha_bar`` is only known to lie in an interval.  Because
the first-order term in ``delta`` integrates to zero, the photon-number
probability equals the average of the corrected integrand :func:`f_n`, so its
extrema over the box bound the probability for every admissible density.
"""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import lru_cache

import numpy as np
from scipy import special, stats

from .optimize import golden_section

GRID_POINTS = 64
REFINE_CYCLES = 2
SAFETY_MARGIN = 1e-12


@dataclass(frozen=True)
class DeviationInterval:
    """Support ``[lo, hi]`` of the relative intensity deviation."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("deviation bounds must be finite")
        if self.lo > self.hi:
            raise ValueError(f"inverted deviation interval [{self.lo}, {self.hi}]")
        if self.lo <= -1 or self.hi >= 1:
            raise ValueError(f"deviation interval must lie inside (-1, 1), got [{self.lo}, {self.hi}]")
        if self.lo > 0 or self.hi < 0:
            warnings.warn(
                f"deviation interval [{self.lo}, {self.hi}] excludes 0; "
                "a zero-mean deviation cannot be supported there",
                stacklevel=2,
            )

    @classmethod
    def symmetric(cls, magnitude: float) -> "DeviationInterval":
        return cls(-magnitude, magnitude)

    @property
    def zeta(self) -> float:
        """Largest squared deviation, ``max(lo**2, hi**2)``."""
        return max(self.lo**2, self.hi**2)

    @property
    def width(self) -> float:
        return self.hi - self.lo


@dataclass(frozen=True)
class IntensityInterval:
    """Interval ``[lo, hi]`` containing the conditional mean intensity."""

    lo: float
    hi: float

    def __post_init__(self) -> None:
        if not (math.isfinite(self.lo) and math.isfinite(self.hi)):
            raise ValueError("intensity bounds must be finite")
        if self.lo < 0 or self.lo > self.hi:
            raise ValueError(f"need 0 <= lo <= hi, got [{self.lo}, {self.hi}]")

    @classmethod
    def around(cls, value: float, relative: float) -> "IntensityInterval":
        """Worst-case envelope ``[a(1 - r), a(1 + r)]``."""
        return cls(value * (1.0 - relative), value * (1.0 + relative))

    @property
    def width(self) -> float:
        return self.hi - self.lo

    def contains(self, other: "IntensityInterval") -> bool:
        return self.lo <= other.lo and other.hi <= self.hi


@dataclass(frozen=True)
class PhotonBounds:
    """Per-record bounds ``lower[n] <= p_n <= upper[n]`` for ``n = 0..n_cut``.

    ``tail_upper`` bounds the probability of more than ``n_cut`` photons.
    """

    lower: np.ndarray
    upper: np.ndarray
    n_cut: int
    n_th: int
    tail_upper: float
    method: str = "box"


def poisson_pmf(n: int, alpha: float) -> float:
    """Poisson probability ``exp(-alpha) alpha**n / n!`` evaluated in log space."""
    if n < 0 or alpha < 0:
        raise ValueError(f"poisson_pmf needs n >= 0 and alpha >= 0, got n={n}, alpha={alpha}")
    if alpha == 0:
        return 1.0 if n == 0 else 0.0
    return math.exp(n * math.log(alpha) - alpha - math.lgamma(n + 1))


def _pmf_array(n: int, alpha: np.ndarray) -> np.ndarray:
    alpha = np.asarray(alpha, dtype=float)
    with np.errstate(divide="ignore"):
        logp = special.xlogy(n, alpha) - alpha - special.gammaln(n + 1)
    return np.exp(logp)


def f_n(n: int, x: float, y: float) -> float:
    """Corrected integrand whose zero-mean average gives ``p_n``."""
    if n < 0 or x <= -1 or y < 0:
        raise ValueError(f"f_n needs n >= 0, x > -1, y >= 0; got n={n}, x={x}, y={y}")
    base = poisson_pmf(n, y)
    if base == 0.0:
        return 0.0
    return base * (math.exp(-x * y) * (1.0 + x) ** n - (n - y) * x)


def _f_n_grid(n: int, x: np.ndarray, y: np.ndarray) -> np.ndarray:
    return _pmf_array(n, y) * (np.exp(-x * y) * (1.0 + x) ** n - (n - y) * x)


def _refine(n: int, x_grid, y_grid, values, maximize: bool) -> float:
    """Coordinate-wise golden-section polish around the best grid node."""
    flat = int(np.argmax(values) if maximize else np.argmin(values))
    i, j = np.unravel_index(flat, values.shape)
    best = float(values[i, j])
    x, y = float(x_grid[i]), float(y_grid[j])
    x_lo, x_hi = float(x_grid[max(i - 1, 0)]), float(x_grid[min(i + 1, len(x_grid) - 1)])
    y_lo, y_hi = float(y_grid[max(j - 1, 0)]), float(y_grid[min(j + 1, len(y_grid) - 1)])
    for _ in range(REFINE_CYCLES):
        if x_hi > x_lo:
            x, val = golden_section(lambda t: f_n(n, t, y), x_lo, x_hi, maximize=maximize)
            best = max(best, val) if maximize else min(best, val)
        if y_hi > y_lo:
            y, val = golden_section(lambda t: f_n(n, x, t), y_lo, y_hi, maximize=maximize)
            best = max(best, val) if maximize else min(best, val)
    return best


@lru_cache(maxsize=65536)
def _box_extrema(n: int, x_lo: float, x_hi: float, y_lo: float, y_hi: float) -> tuple[float, float]:
    if x_lo == x_hi and y_lo == y_hi:
        value = f_n(n, x_lo, y_lo)
        return value, value
    nx = 1 if x_lo == x_hi else GRID_POINTS
    ny = 1 if y_lo == y_hi else GRID_POINTS
    x_grid = np.linspace(x_lo, x_hi, nx)
    y_grid = np.linspace(y_lo, y_hi, ny)
    values = _f_n_grid(n, x_grid[:, None], y_grid[None, :])
    lo = _refine(n, x_grid, y_grid, values, maximize=False)
    hi = _refine(n, x_grid, y_grid, values, maximize=True)
    return lo - SAFETY_MARGIN, hi + SAFETY_MARGIN


def fn_box_extrema(
    n: int, x_range: DeviationInterval, y_range: IntensityInterval
) -> tuple[float, float]:
    """Minimum and maximum of :func:`f_n` over the box ``x_range x y_range``.

    A 64x64 grid locates the extremum and two rounds of axis-wise
    golden-section searches polish it.  Non-degenerate boxes are widened by an
    outward margin of 1e-12 so the result brackets the true extrema.
    """
    if n < 0:
        raise ValueError(f"n must be >= 0, got {n}")
    if x_range.lo > x_range.hi or y_range.lo > y_range.hi:
        raise ValueError("inverted box")
    return _box_extrema(int(n), float(x_range.lo), float(x_range.hi), float(y_range.lo), float(y_range.hi))


def box_minima(n_max: int, deviation: DeviationInterval, intensity: IntensityInterval) -> np.ndarray:
    """``min f_m`` over the box for ``m = 0..n_max``."""
    return np.array([fn_box_extrema(m, deviation, intensity)[0] for m in range(n_max + 1)])


def poisson_range_bounds(n: int, alpha_lo: float, alpha_hi: float) -> tuple[float, float]:
    """Bounds on ``pmf(n, alpha)`` for ``alpha`` in ``[alpha_lo, alpha_hi]``.

    The pmf is unimodal in ``alpha`` with its peak at ``alpha = n``.  For
    ``alpha_hi <= n`` this reduces to evaluating the pmf at the two endpoints
    (lower at ``alpha_lo``, upper at ``alpha_hi``).
    """
    lo_val = poisson_pmf(n, alpha_lo)
    hi_val = poisson_pmf(n, alpha_hi)
    peak = poisson_pmf(n, min(max(float(n), alpha_lo), alpha_hi))
    return min(lo_val, hi_val), max(lo_val, hi_val, peak)


def monotone_bounds(
    n: int, intensity: IntensityInterval, deviation: DeviationInterval
) -> tuple[float, float]:
    """Photon-number bounds from the extreme intensities of the envelope alone."""
    alpha_lo = intensity.lo * (1.0 + deviation.lo)
    alpha_hi = intensity.hi * (1.0 + deviation.hi)
    return poisson_range_bounds(n, alpha_lo, alpha_hi)


def photon_bounds(
    intensity: IntensityInterval,
    deviation: DeviationInterval,
    n_cut: int = 3,
    n_th: int = 10,
    method: str = "box",
) -> PhotonBounds:
    """Bounds on ``p_0 .. p_{n_cut}`` for one record.

    ``method="box"`` uses box extrema of :func:`f_n` for ``n <= n_th`` (and
    always for ``n = 0``) and the monotone envelope above ``n_th``.  Both
    bounds are valid, and for asymmetric deviation intervals the linear
    correction in ``f_n`` can make the box looser than the envelope, so below
    ``n_th`` the two are intersected.  ``method="monotone"`` uses the envelope
    for every ``n``; it serves as the baseline that ignores the vanishing
    first-order term.
    """
    if n_cut < 1:
        raise ValueError(f"n_cut must be >= 1, got {n_cut}")
    if n_th < 0:
        raise ValueError(f"n_th must be >= 0, got {n_th}")
    if method not in ("box", "monotone"):
        raise ValueError(f"unknown bound method {method!r}")
    lower = np.empty(n_cut + 1)
    upper = np.empty(n_cut + 1)
    for n in range(n_cut + 1):
        lo, hi = monotone_bounds(n, intensity, deviation)
        if method == "box" and (n == 0 or n <= n_th):
            box_lo, box_hi = fn_box_extrema(n, deviation, intensity)
            lo, hi = max(lo, box_lo), min(hi, box_hi)
        lo = min(max(lo, 0.0), 1.0)
        hi = min(max(hi, lo), 1.0)
        lower[n], upper[n] = lo, hi
    alpha_max = intensity.hi * (1.0 + deviation.hi)
    tail = float(stats.poisson.sf(n_cut, alpha_max)) if alpha_max > 0 else 0.0
    return PhotonBounds(lower, upper, n_cut, n_th, tail, method)


def lower_bounds_upto(
    n_max: int,
    intensity: IntensityInterval,
    deviation: DeviationInterval,
    method: str = "box",
) -> np.ndarray:
    """Lower bounds on ``p_0 .. p_{n_max}`` (clamped at zero)."""
    vals = np.array([monotone_bounds(m, intensity, deviation)[0] for m in range(n_max + 1)])
    if method == "box":
        vals = np.maximum(vals, box_minima(n_max, deviation, intensity))
    return np.clip(vals, 0.0, 1.0)


@dataclass(frozen=True)
class RecordBox:
    """Uncertainty box of one record: mean-intensity interval and deviation support."""

    intensity: IntensityInterval
    deviation: DeviationInterval

    @property
    def alpha_min(self) -> float:
        """Smallest intensity any pulse of this record can have."""
        return self.intensity.lo * (1.0 + self.deviation.lo)

    @property
    def alpha_max(self) -> float:
        return self.intensity.hi * (1.0 + self.deviation.hi)
