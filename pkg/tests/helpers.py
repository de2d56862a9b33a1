"""Scenario builders shared by the LP, key-rate and acceptance tests."""

from __future__ import annotations

from ictqkd.cauchy_schwarz import reference_error_yield, reference_yield
from ictqkd.channel import ChannelParams, GroundTruthCorrelation
from ictqkd.decoy_lp import ObservedStatistics, build_error_lp, build_yield_lp
from ictqkd.keyrate import Scenario, record_boxes, scenario_taus
from ictqkd.photon import photon_bounds
from ictqkd.records import ProtocolParams

SPD = ChannelParams(0.2, 4.2e-6, 0.2, 0.0, 0.08, 1.16)


def make_scenario(
    xi=1,
    delta=0.0,
    mode="worst-case",
    distance=20.0,
    probabilities=(0.6, 0.2, 0.2),
    intensities=(0.5, 0.1, 0.0),
    model="nearest-pull",
    **kwargs,
):
    """``delta`` is the total envelope, split evenly between correlation and fluctuation."""
    params = ProtocolParams(
        dict(zip("mnw", intensities)), dict(zip("mnw", probabilities)), q_z=0.5, xi=xi
    )
    corr = GroundTruthCorrelation(model=model, decay=0.5, delta_corr=delta / 2, delta_rand=delta / 2)
    return Scenario(params, SPD.at_distance(distance), corr, mode=mode, **kwargs)


def scenario_lps(scenario, observed=None):
    """``(yield_min, yield_max, error_max, error_min)`` LPs of a scenario."""
    sc = scenario
    boxes = record_boxes(sc)
    bounds = {
        r: photon_bounds(b.intensity, b.deviation, sc.n_cut, sc.n_th, sc.bound_method)
        for r, b in boxes.items()
    }
    taus = scenario_taus(sc, boxes)
    obs = observed or ObservedStatistics.from_channel(sc.params, sc.channel)
    ch = sc.channel
    refs = [reference_yield(n, ch.eta, ch.p_d) for n in range(sc.n_cut + 1)]
    erefs = [reference_error_yield(n, ch.eta, ch.p_d, ch.misalignment) for n in range(sc.n_cut + 1)]
    return (
        build_yield_lp(obs, bounds, taus, refs, sc.params, "min"),
        build_yield_lp(obs, bounds, taus, refs, sc.params, "max"),
        build_error_lp(obs, bounds, taus, erefs, sc.params, "max"),
        build_error_lp(obs, bounds, taus, erefs, sc.params, "min"),
    )
