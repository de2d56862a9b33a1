"""Shared fixtures and helpers."""

from __future__ import annotations

import pytest

from ictqkd.channel import ChannelParams, GroundTruthCorrelation
from ictqkd.records import ProtocolParams

SPD = dict(eta_det=0.2, p_d=4.2e-6, attenuation=0.2, misalignment=0.08, f_ec=1.16)


@pytest.fixture
def spd_channel() -> ChannelParams:
    return ChannelParams(**SPD)


@pytest.fixture
def params_xi1() -> ProtocolParams:
    return ProtocolParams(
        {"m": 0.5, "n": 0.1, "w": 0.0}, {"m": 0.6, "n": 0.2, "w": 0.2}, q_z=0.5, xi=1
    )


def correlation(delta_corr: float = 0.0, delta_rand: float = 0.0, model: str = "nearest-pull"):
    return GroundTruthCorrelation(model=model, decay=0.5, delta_corr=delta_corr, delta_rand=delta_rand)
