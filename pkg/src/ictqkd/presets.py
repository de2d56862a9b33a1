"""Bundled parameter sets for the two reproduction targets."""

from __future__ import annotations

import copy
from importlib import resources

import yaml

from .config import RunConfig, validate_config

PRESETS = ("fig1", "fig3")


def load_preset(name: str) -> dict:
    if name not in PRESETS:
        raise ValueError(f"unknown preset {name!r}; choose from {', '.join(PRESETS)}")
    text = resources.files("ictqkd").joinpath("presets").joinpath(f"{name}.yaml").read_text(encoding="utf-8")
    return yaml.safe_load(text)


def fig1_configs(overrides: dict | None = None) -> list[tuple[str, RunConfig]]:
    """One config per receiver, correlation range, magnitude and bound method."""
    data = load_preset("fig1")
    out = []
    for receiver, det in data["receivers"].items():
        for xi in data["xi"]:
            for delta in data["delta_max"]:
                for method in data["bound_methods"]:
                    cfg = copy.deepcopy(data["base"])
                    cfg["channel"].update(det)
                    cfg["protocol"]["xi"] = xi
                    cfg["correlation"]["delta_corr"] = delta / 2
                    cfg["correlation"]["delta_rand"] = delta / 2
                    cfg["analysis"]["bound_method"] = method
                    _merge(cfg, overrides)
                    name = f"fig1_{receiver}_xi{xi}_d{delta:.0e}_{method}".replace("e-0", "e-")
                    out.append((name, validate_config(cfg)))
    return out


def fig3_config(overrides: dict | None = None) -> RunConfig:
    cfg = copy.deepcopy(load_preset("fig3")["base"])
    _merge(cfg, overrides)
    return validate_config(cfg)


def _merge(cfg: dict, overrides: dict | None) -> None:
    for section, values in (overrides or {}).items():
        cfg.setdefault(section, {}).update(values)
