"""Channel/detector model, ground-truth correlation patterns and monitor simulation."""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np

from .monitor import MonitorParams, MonitorRecordStats
from .records import (
    LABELS,
    ProtocolParams,
    Record,
    enumerate_records,
    normalize_label,
)

SIGN = {"m": 1.0, "n": 0.0, "w": -1.0}


@dataclass(frozen=True)
class ChannelParams:
    """Fibre channel and receiver parameters (attenuation in dB/km, distance in km)."""

    eta_det: float
    p_d: float
    attenuation: float = 0.2
    distance: float = 0.0
    misalignment: float = 0.08
    f_ec: float = 1.16

    def __post_init__(self) -> None:
        if not 0 < self.eta_det <= 1:
            raise ValueError(f"eta_det must lie in (0, 1], got {self.eta_det}")
        if not 0 <= self.p_d < 1:
            raise ValueError(f"p_d must lie in [0, 1), got {self.p_d}")
        if self.attenuation < 0:
            raise ValueError("attenuation must be >= 0")
        if self.distance < 0:
            raise ValueError("distance must be >= 0")
        if self.f_ec < 1:
            raise ValueError(f"f_ec must be >= 1, got {self.f_ec}")

    @property
    def eta(self) -> float:
        """Overall transmittance: channel times detector efficiency."""
        return self.eta_det * 10.0 ** (-self.attenuation * self.distance / 10.0)

    def at_distance(self, distance: float) -> "ChannelParams":
        return ChannelParams(
            self.eta_det, self.p_d, self.attenuation, distance, self.misalignment, self.f_ec
        )


def _per_setting(values: Mapping[str, float] | float) -> dict[str, float]:
    if isinstance(values, Mapping):
        out = {normalize_label(k): float(v) for k, v in values.items()}
        if set(out) != set(LABELS):
            raise ValueError("per-setting values must define mu, nu and omega")
        return out
    return {k: float(values) for k in LABELS}


@dataclass(frozen=True)
class GroundTruthCorrelation:
    """Correlation envelope and, for simulation, the true correlation pattern.

    ``delta_corr[a]`` bounds ``|1 - alpha_bar / a|`` and ``delta_rand[a]``
    bounds the relative random deviation around ``alpha_bar``.  The true
    deviation density is uniform on ``[-delta_rand, delta_rand]``.
    """

    model: str = "none"
    decay: float = 0.5
    delta_corr: Mapping[str, float] = field(default_factory=lambda: {k: 0.0 for k in LABELS})
    delta_rand: Mapping[str, float] = field(default_factory=lambda: {k: 0.0 for k in LABELS})

    def __post_init__(self) -> None:
        object.__setattr__(self, "delta_corr", _per_setting(self.delta_corr))
        object.__setattr__(self, "delta_rand", _per_setting(self.delta_rand))
        if self.model not in ("none", "nearest-pull"):
            raise ValueError(f"unknown correlation model {self.model!r}")
        if not 0 <= self.decay < 1:
            raise ValueError(f"decay must lie in [0, 1), got {self.decay}")
        for name in ("delta_corr", "delta_rand"):
            for label, v in getattr(self, name).items():
                if not 0 <= v < 1:
                    raise ValueError(f"{name}[{label}] must lie in [0, 1), got {v}")


def gain(a: float, channel: ChannelParams) -> float:
    """Click probability for a pulse of mean photon number ``a``."""
    if a < 0:
        raise ValueError("intensity must be >= 0")
    return -math.expm1(2.0 * math.log1p(-channel.p_d) - channel.eta * a)


def error_gain(a: float, channel: ChannelParams) -> float:
    """Probability of a click carrying a bit error."""
    if a < 0:
        raise ValueError("intensity must be >= 0")
    p_d = channel.p_d
    ea = channel.eta * a
    # expm1 forms keep precision when eta * a is tiny
    h = 0.5 * (
        math.expm1(-ea * math.cos(channel.misalignment) ** 2)
        - math.expm1(-ea * math.sin(channel.misalignment) ** 2)
    )
    signal = h - 0.5 * math.expm1(-ea)
    return 0.5 * p_d**2 + p_d * (1 - p_d) * (1 + h) + (1 - p_d) ** 2 * signal


def error_rate(a: float, channel: ChannelParams) -> float:
    """Expected QBER ``error_gain / gain`` of setting ``a``."""
    g = gain(a, channel)
    return error_gain(a, channel) / g if g > 0 else 0.0


def ground_truth_means(
    record: Record, intensities: Mapping[str, float], model: GroundTruthCorrelation
) -> float:
    """True conditional mean intensity of the last setting of ``record``."""
    current = record[-1]
    a = intensities[current]
    if model.model == "none" or len(record) == 1:
        return a
    history = record[:-1]
    num = den = 0.0
    for i, label in enumerate(reversed(history), start=1):
        weight = model.decay ** (i - 1)
        num += weight * SIGN[label]
        den += weight
    return a * (1.0 + model.delta_corr[current] * num / den)


def analytic_monitor_rate(
    record: Record,
    intensities: Mapping[str, float],
    model: GroundTruthCorrelation,
    monitor: MonitorParams,
) -> float:
    """Monitor click probability with a uniform deviation density."""
    alpha_bar = ground_truth_means(record, intensities, model)
    x = monitor.eta_m * alpha_bar
    d = model.delta_rand[record[-1]]
    t = x * d
    # sinh(t)/t - 1 with a series for small arguments
    excess = t * t / 6.0 + t**4 / 120.0 if abs(t) < 1e-4 else math.sinh(t) / t - 1.0
    # click probability of the tapped pulse, 1 - exp(-x) sinh(t)/t, without cancellation
    c = -math.expm1(-x) - math.exp(-x) * excess
    k = (1 - monitor.p_d) * (1 - monitor.p_ap)
    return (monitor.p_d + monitor.p_ap - monitor.p_d * monitor.p_ap) + k * c


def simulate_monitor_clicks(
    params: ProtocolParams,
    model: GroundTruthCorrelation,
    monitor: MonitorParams,
    rounds: int | None = None,
    seed: int = 0,
    chunk: int = 1 << 20,
) -> list[MonitorRecordStats]:
    """Round-by-round Monte Carlo of the monitor click tallies per record.

    Settings are i.i.d. with the protocol probabilities; each round draws a
    uniform deviation and a click.  Settings, deviations and clicks come from
    three PCG64 streams spawned from ``seed``, each consuming one uniform per
    round, and the last ``xi`` settings are carried across chunk boundaries,
    so the tallies depend only on the seed and not on ``chunk``.  The first
    ``xi`` rounds have no full record and are not tallied.
    """
    n_rounds = params.rounds if rounds is None else int(rounds)
    if n_rounds < 1:
        raise ValueError("rounds must be >= 1")
    xi = params.xi
    records = enumerate_records(xi)
    n_rec = len(records)
    probs = np.array([params.probabilities[k] for k in LABELS])
    alpha_bar = np.array([ground_truth_means(r, params.intensities, model) for r in records])
    spread = np.array([model.delta_rand[r[-1]] for r in records])
    noise = (1 - monitor.p_d) * (1 - monitor.p_ap)

    # independent streams per quantity make the tallies independent of ``chunk``
    rng_set, rng_dev, rng_click = (
        np.random.Generator(np.random.PCG64(child)) for child in np.random.SeedSequence(seed).spawn(3)
    )
    trials = np.zeros(n_rec, dtype=np.int64)
    clicks = np.zeros(n_rec, dtype=np.int64)
    history = np.zeros(0, dtype=np.int64)
    done = 0
    while done < n_rounds:
        size = min(chunk, n_rounds - done)
        settings = rng_set.choice(3, size=size, p=probs)
        seq = np.concatenate([history, settings])
        if len(seq) > xi:
            idx = np.zeros(len(seq) - xi, dtype=np.int64)
            for j in range(xi + 1):
                idx = idx * 3 + seq[j : len(seq) - xi + j]
            delta = rng_dev.uniform(-1.0, 1.0, size=len(idx)) * spread[idx]
            p_click = 1.0 - noise * np.exp(-monitor.eta_m * alpha_bar[idx] * (1.0 + delta))
            hit = rng_click.random(len(idx)) < p_click
            trials += np.bincount(idx, minlength=n_rec)
            clicks += np.bincount(idx, weights=hit, minlength=n_rec).astype(np.int64)
        history = seq[len(seq) - xi :] if xi > 0 else history
        done += size
    return [
        MonitorRecordStats.from_counts(r, int(t), int(c)) for r, t, c in zip(records, trials, clicks)
    ]


def analytic_monitor_stats(
    params: ProtocolParams, model: GroundTruthCorrelation, monitor: MonitorParams
) -> list[MonitorRecordStats]:
    """Asymptotic tallies: every record gets its exact click probability."""
    out = []
    for r in enumerate_records(params.xi):
        D = analytic_monitor_rate(r, params.intensities, model, monitor)
        out.append(MonitorRecordStats(r, 0, 0, D))
    return out
