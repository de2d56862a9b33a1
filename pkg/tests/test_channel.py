import math

import numpy as np
import pytest
import mpmath
from scipy import stats

from ictqkd.channel import (
    ChannelParams,
    GroundTruthCorrelation,
    analytic_monitor_rate,
    analytic_monitor_stats,
    error_gain,
    error_rate,
    gain,
    ground_truth_means,
    simulate_monitor_clicks,
)
from ictqkd.monitor import MonitorParams
from ictqkd.records import ProtocolParams, enumerate_records, record_probability

INTENS = {"m": 0.5, "n": 0.1, "w": 0.0}


def test_gain_examples():
    ch = ChannelParams(0.2, 0.0)
    assert gain(1e4, ch) == pytest.approx(1.0)
    ch = ChannelParams(0.2, 1e-3)
    assert gain(0.0, ch) == pytest.approx(1 - (1 - 1e-3) ** 2)


def test_gain_monte_carlo():
    ch = ChannelParams(0.2, 4.2e-6, 0.2, 50.0)
    rng = np.random.default_rng(1)
    trials = 5_000_000
    photons = rng.poisson(0.5, trials)
    detected = rng.binomial(photons, ch.eta)
    dark = (rng.random((trials, 2)) < ch.p_d).any(axis=1)
    est = ((detected > 0) | dark).mean()
    sigma = math.sqrt(est * (1 - est) / trials)
    assert abs(est - gain(0.5, ch)) <= 3 * sigma


def test_error_gain_examples():
    ch = ChannelParams(0.2, 0.0, misalignment=0.0)
    for a in (0.0, 0.1, 0.5, 3.0):
        assert error_gain(a, ch) == pytest.approx(0.0, abs=1e-15)
    p_d = 1e-3
    ch = ChannelParams(0.2, p_d)
    assert error_gain(0.0, ch) == pytest.approx(p_d**2 / 2 + p_d * (1 - p_d))


def test_error_rate_small_signal_limit():
    ch = ChannelParams(1e-6, 0.0, misalignment=0.08)
    assert error_rate(1e-3, ch) == pytest.approx(math.sin(0.08) ** 2, rel=1e-6)
    with_dark = ChannelParams(1e-3, 1e-7, misalignment=0.08)
    floor = error_rate(0.0, with_dark)
    e = error_rate(0.5, with_dark)
    assert math.sin(0.08) ** 2 < e < floor


def test_monotone_in_intensity():
    ch = ChannelParams(0.2, 4.2e-6, distance=30)
    grid = np.linspace(0.0, 2.0, 200)
    g = [gain(a, ch) for a in grid]
    r = [error_rate(a, ch) for a in grid[1:]]
    assert np.all(np.diff(g) > 0)
    assert np.all(np.diff(r) < 0)


def test_ground_truth_means():
    none = GroundTruthCorrelation(model="none", delta_corr=0.1)
    for rec in enumerate_records(2):
        assert ground_truth_means(rec, INTENS, none) == INTENS[rec[-1]]
    pull = GroundTruthCorrelation(model="nearest-pull", decay=0.5, delta_corr=0.1)
    assert ground_truth_means(("m", "m", "m"), INTENS, pull) == pytest.approx(0.5 * 1.1)
    # history (mu, omega) before the current setting: weights 1 (nearest) and 0.5
    assert ground_truth_means(("m", "w", "m"), INTENS, pull) == pytest.approx(0.5 * (1 + 0.1 * (-1 + 0.5) / 1.5))
    assert ground_truth_means(("w", "m", "m"), INTENS, pull) == pytest.approx(0.5 * (1 + 0.1 / 3))
    for rec in enumerate_records(3):
        a = INTENS[rec[-1]]
        if a > 0:
            assert abs(1 - ground_truth_means(rec, INTENS, pull) / a) <= 0.1 + 1e-15


def test_analytic_rate_limits():
    mon = MonitorParams(1e-3, 0.0, 0.0)
    model = GroundTruthCorrelation(delta_rand=0.0)
    assert analytic_monitor_rate(("m",), INTENS, model, mon) == pytest.approx(1 - math.exp(-5e-4))
    mon2 = MonitorParams(1e-3, 1e-4, 0.01)
    assert analytic_monitor_rate(("w",), INTENS, model, mon2) == pytest.approx(1 - (1 - 1e-4) * 0.99)


def test_analytic_rate_quadrature():
    mon = MonitorParams(1e-3, 4.2e-6, 0.01)
    model = GroundTruthCorrelation(delta_rand=0.03)
    d, x = 0.03, 1e-3 * 0.5
    mpmath.mp.dps = 30
    integral = mpmath.quad(lambda t: mpmath.e ** (-x * (1 + t)) / (2 * d), [-d, d])
    oracle = float(1 - (1 - mpmath.mpf(4.2e-6)) * mpmath.mpf(0.99) * integral)
    assert analytic_monitor_rate(("m",), INTENS, model, mon) == pytest.approx(oracle, abs=1e-12)


@pytest.mark.parametrize("alpha,eta,d", [(1e-12, 1e-4, 0.05), (0.5, 0.05, 0.2), (0.1, 1e-3, 0.0)])
def test_analytic_rate_relative_precision(alpha, eta, d):
    """Tiny click probabilities keep their relative precision."""
    mpmath.mp.dps = 50
    x = mpmath.mpf(eta) * alpha
    t = x * d
    avg = mpmath.sinh(t) / t if d else 1
    oracle = float(1 - mpmath.exp(-x) * avg)
    rate = analytic_monitor_rate(("m",), {"m": alpha, "n": 0.0, "w": 0.0}, GroundTruthCorrelation(delta_rand=d), MonitorParams(eta, 0.0, 0.0))
    assert rate == pytest.approx(oracle, rel=1e-13)


def test_simulation_determinism_and_totals():
    params = ProtocolParams(INTENS, {"m": 0.5, "n": 0.3, "w": 0.2}, xi=2, rounds=100_000)
    model = GroundTruthCorrelation(model="nearest-pull", delta_corr=0.01, delta_rand=0.03)
    mon = MonitorParams()
    a = simulate_monitor_clicks(params, model, mon, seed=3, chunk=7919)
    b = simulate_monitor_clicks(params, model, mon, seed=3)
    assert a == b
    assert sum(s.trials for s in a) == params.rounds - params.xi
    assert a != simulate_monitor_clicks(params, model, mon, seed=4)


def test_degenerate_distribution():
    params = ProtocolParams(INTENS, {"m": 1, "n": 0, "w": 0}, xi=1, rounds=10_000)
    out = simulate_monitor_clicks(params, GroundTruthCorrelation(), MonitorParams(), seed=0)
    assert {s.record for s in out if s.trials > 0} == {("m", "m")}


def test_record_frequencies_chi_square():
    params = ProtocolParams(INTENS, {"m": 0.6, "n": 0.25, "w": 0.15}, xi=1, rounds=10**7)
    out = simulate_monitor_clicks(params, GroundTruthCorrelation(), MonitorParams(), seed=9)
    observed = np.array([s.trials for s in out])
    expected = np.array([record_probability(s.record, params) for s in out]) * observed.sum()
    chi2 = float(((observed - expected) ** 2 / expected).sum())
    # overlapping records are weakly dependent; a loose quantile still catches bias
    assert chi2 < stats.chi2.ppf(0.9999, len(out) - 1) * 2


@pytest.mark.slow
def test_simulation_converges_to_analytic_rates():
    params = ProtocolParams(INTENS, {"m": 0.6, "n": 0.25, "w": 0.15}, xi=1, rounds=10**8)
    model = GroundTruthCorrelation(model="nearest-pull", delta_corr=0.01, delta_rand=0.03)
    mon = MonitorParams(1e-3, 4.2e-6, 0.01)
    sim = simulate_monitor_clicks(params, model, mon, seed=21)
    exact = {s.record: s.D for s in analytic_monitor_stats(params, model, mon)}
    for s in sim:
        if s.trials < 10**4:
            continue
        D = exact[s.record]
        sigma = math.sqrt(D * (1 - D) / s.trials)
        assert abs(s.D - D) <= 4 * sigma


def test_channel_validation():
    with pytest.raises(ValueError):
        ChannelParams(0.0, 1e-6)
    with pytest.raises(ValueError):
        ChannelParams(0.2, 1e-6, f_ec=0.9)
    with pytest.raises(ValueError):
        GroundTruthCorrelation(model="other")
    assert ChannelParams(0.2, 0, 0.2, 0).at_distance(50).eta == pytest.approx(0.02)
