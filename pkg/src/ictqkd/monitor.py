"""Certified intervals on conditional mean intensities from local-monitor clicks.

The monitor taps each pulse with relative efficiency ``eta_m`` and a threshold
detector.  Second- and third-order expansions of the non-detection
probability bracket the conditional mean intensity of every record.
"""

from __future__ import annotations

import math
from dataclasses import dataclass
from typing import Mapping, Sequence

from scipy import stats

from .photon import DeviationInterval, IntensityInterval
from .records import Record, record_label


class TaylorBoundError(ValueError):
    """The second-order expansion has no real root for this operating point."""


@dataclass(frozen=True)
class MonitorParams:
    eta_m: float = 1e-3
    p_d: float = 4.2e-6
    p_ap: float = 0.01
    eta_m_uncertainty: float = 0.0

    def __post_init__(self) -> None:
        if not 0 < self.eta_m <= 1:
            raise ValueError(f"eta_m must lie in (0, 1], got {self.eta_m}")
        if not 0 <= self.p_d < 1:
            raise ValueError(f"p_d must lie in [0, 1), got {self.p_d}")
        if not 0 <= self.p_ap < 1:
            raise ValueError(f"p_ap must lie in [0, 1), got {self.p_ap}")
        if self.eta_m_uncertainty < 0:
            raise ValueError("eta_m_uncertainty must be >= 0")


@dataclass(frozen=True)
class MonitorRecordStats:
    record: Record
    trials: int
    clicks: int
    D: float

    def __post_init__(self) -> None:
        if not 0 <= self.clicks <= self.trials:
            raise ValueError(
                f"record {record_label(self.record)}: need 0 <= clicks <= trials, "
                f"got clicks={self.clicks}, trials={self.trials}"
            )
        if not 0 <= self.D <= 1:
            raise ValueError(f"record {record_label(self.record)}: D={self.D} outside [0, 1]")

    @classmethod
    def from_counts(cls, record: Record, trials: int, clicks: int) -> "MonitorRecordStats":
        D = clicks / trials if trials > 0 else 0.0
        return cls(tuple(record), int(trials), int(clicks), D)


@dataclass(frozen=True)
class IntervalEstimate:
    """Estimated interval for one record plus the intermediate quantities."""

    record: Record
    interval: IntensityInterval
    D: float
    D_low: float
    D_high: float
    rescaled: float
    clamped: bool


def rescaled_nondetection(D: float, params: MonitorParams) -> tuple[float, bool]:
    """``(1 - D) / [(1 - p_d)(1 - p_ap)]`` clamped to ``[0, 1]``.

    Returns the value and whether the upper clamp was applied.
    """
    if not 0 <= D <= 1:
        raise ValueError(f"D must lie in [0, 1], got {D}")
    if params.p_d >= 1 or params.p_ap >= 1:
        raise ValueError("p_d and p_ap must be < 1")
    value = (1.0 - D) / ((1.0 - params.p_d) * (1.0 - params.p_ap))
    if value > 1.0:
        return 1.0, True
    return value, False


def detection_complement(D: float, params: MonitorParams) -> tuple[float, bool]:
    """``1 - rescaled_nondetection(D)`` computed without cancellation.

    Written as ``(D - q) / k`` with ``k = (1 - p_d)(1 - p_ap)`` and
    ``q = 1 - k``, so a click probability near zero keeps its relative
    precision.  Returns the value and whether it was clamped at zero.
    """
    rescaled_nondetection(D, params)  # validation
    k = (1.0 - params.p_d) * (1.0 - params.p_ap)
    q = params.p_d + params.p_ap - params.p_d * params.p_ap
    value = (D - q) / k
    if value < 0.0:
        return 0.0, True
    return min(value, 1.0), False


def _upper_from_complement(s: float, eta_m: float, zeta: float) -> float:
    disc = 1.0 - 2.0 * s * (1.0 + zeta)
    if disc < 0:
        raise TaylorBoundError(
            f"second-order bound inapplicable (discriminant {disc:.3e} < 0); "
            "lower eta_m * alpha at the monitor"
        )
    # 1 - sqrt(disc) loses precision for tiny s; use the conjugate form.
    return 2.0 * s / (eta_m * (1.0 + math.sqrt(disc)))


def _lower_from_complement(s: float, eta_m: float, alpha_upper: float) -> float:
    value = s / eta_m + s**2 / (2.0 * eta_m) - eta_m**2 * alpha_upper**3 / 6.0
    return max(value, 0.0)


def intensity_upper_bound(rescaled: float, eta_m: float, zeta: float) -> float:
    return _upper_from_complement(1.0 - rescaled, eta_m, zeta)


def intensity_lower_bound(rescaled: float, eta_m: float, alpha_upper: float) -> float:
    return _lower_from_complement(1.0 - rescaled, eta_m, alpha_upper)


def _interval_at(s: float, eta_m: float, zeta: float) -> tuple[float, float]:
    """Intensity interval from the detection complement ``s``."""
    upper = _upper_from_complement(s, eta_m, zeta)
    # lower <= upper holds exactly; clamp the last-ulp rounding at tiny eta_m * alpha
    return min(_lower_from_complement(s, eta_m, upper), upper), upper


def binomial_interval(clicks: int, trials: int, confidence: float) -> tuple[float, float]:
    """Two-sided Clopper-Pearson interval on a click probability."""
    if trials == 0:
        return 0.0, 1.0
    tail = (1.0 - confidence) / 2.0
    lo = 0.0 if clicks == 0 else float(stats.beta.ppf(tail, clicks, trials - clicks + 1))
    hi = 1.0 if clicks == trials else float(stats.beta.ppf(1 - tail, clicks + 1, trials - clicks))
    return lo, hi


def estimate_intensity_intervals(
    stats_list: Sequence[MonitorRecordStats],
    params: MonitorParams,
    deviations: Mapping[Record, DeviationInterval],
    confidence: float | None = None,
) -> dict[Record, IntervalEstimate]:
    """Intervals on the conditional mean intensity of every record.

    The bounds are evaluated at both ends of the ``eta_m`` calibration
    interval and the loosest pair is kept.  By default ``D`` is the plug-in
    ratio ``clicks / trials``.  Passing ``confidence`` replaces it by a
    Clopper-Pearson interval so the result also covers finite-sample noise:
    the upper intensity bound uses the upper end of ``D`` and vice versa.
    Records with zero trials carry an exact ``D`` and are never widened.
    """
    results: dict[Record, IntervalEstimate] = {}
    errors: list[str] = []
    u = params.eta_m_uncertainty
    etas = [params.eta_m] if u == 0 else [params.eta_m * (1 - u), params.eta_m * (1 + u)]
    for st in stats_list:
        record = tuple(st.record)
        if record not in deviations:
            errors.append(f"{record_label(record)}: no deviation interval")
            continue
        zeta = deviations[record].zeta
        if confidence is None or st.trials == 0:
            # zero trials marks an exact (asymptotic) click probability
            D_low = D_high = st.D
        else:
            D_low, D_high = binomial_interval(st.clicks, st.trials, confidence)
        s_low, clamped = detection_complement(D_low, params)
        s_high, clamped_high = detection_complement(D_high, params)
        r_mid, clamped_mid = rescaled_nondetection(st.D, params)
        try:
            # Larger D (larger complement) means larger intensity.
            lows = [_interval_at(s_low, eta, zeta)[0] for eta in etas]
            highs = [_interval_at(s_high, eta, zeta)[1] for eta in etas]
        except TaylorBoundError as exc:
            errors.append(f"{record_label(record)}: {exc}")
            continue
        results[record] = IntervalEstimate(
            record=record,
            interval=IntensityInterval(min(lows), max(highs)),
            D=st.D,
            D_low=D_low,
            D_high=D_high,
            rescaled=r_mid,
            clamped=clamped or clamped_high or clamped_mid,
        )
    if errors:
        raise ValueError("intensity estimation failed for " + "; ".join(errors))
    return results
