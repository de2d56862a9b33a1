"""Run configuration: YAML text validated into domain objects.

Every key has a default except ``protocol.intensities`` and the
``channel`` detector parameters.  Unknown keys are rejected.  Any scalar can
be overridden through environment variables named
``ICTQKD_<SECTION>__<KEY>`` (for example ``ICTQKD_ANALYSIS__N_CUT=4``); the
value is parsed as YAML.
"""

from __future__ import annotations

import os
from pathlib import Path
from typing import Literal, Mapping, Optional, Union

import yaml
from pydantic import BaseModel, ConfigDict, Field, ValidationError, field_validator, model_validator

from .channel import ChannelParams, GroundTruthCorrelation
from .keyrate import Scenario
from .monitor import MonitorParams
from .records import MAX_XI, ProtocolParams, normalize_label

ENV_PREFIX = "ICTQKD_"


class ConfigError(ValueError):
    """Invalid configuration; the message names the offending key."""


class _Strict(BaseModel):
    model_config = ConfigDict(extra="forbid", frozen=True)


class PerSetting(_Strict):
    mu: float
    nu: float
    omega: float

    def as_labels(self) -> dict[str, float]:
        return {"m": self.mu, "n": self.nu, "w": self.omega}


def _per_setting(value):
    """Accept a scalar (same for every setting) or a mapping with any label style."""
    if isinstance(value, (int, float)) and not isinstance(value, bool):
        return {"mu": value, "nu": value, "omega": value}
    if isinstance(value, Mapping):
        names = {"m": "mu", "n": "nu", "w": "omega"}
        out = {}
        for k, v in value.items():
            try:
                out[names[normalize_label(str(k))]] = v
            except ValueError:
                out[k] = v  # left for the strict model to reject
        return out
    return value


class ProtocolSection(_Strict):
    intensities: PerSetting
    probabilities: PerSetting = PerSetting(mu=1 / 3, nu=1 / 3, omega=1 / 3)
    q_z: float = Field(0.5, ge=0.0, le=1.0)
    xi: int = Field(1, ge=0, le=MAX_XI)
    rounds: int = Field(10**7, ge=1)

    _norm = field_validator("intensities", "probabilities", mode="before")(_per_setting)

    @model_validator(mode="after")
    def _check(self):
        i = self.intensities
        if not i.mu > i.nu > i.omega >= 0:
            raise ValueError("intensities must satisfy mu > nu > omega >= 0")
        p = self.probabilities
        if min(p.mu, p.nu, p.omega) < 0 or abs(p.mu + p.nu + p.omega - 1) > 1e-9:
            raise ValueError("probabilities must be >= 0 and sum to 1")
        return self


class ChannelSection(_Strict):
    eta_det: float = Field(gt=0.0, le=1.0)
    p_d: float = Field(ge=0.0, lt=1.0)
    attenuation: float = Field(0.2, ge=0.0)
    distance: float = Field(0.0, ge=0.0)
    misalignment: float = 0.08
    f_ec: float = Field(1.16, ge=1.0)


class CorrelationSection(_Strict):
    model: Literal["none", "nearest-pull"] = "nearest-pull"
    decay: float = Field(0.5, ge=0.0, lt=1.0)
    delta_corr: PerSetting = PerSetting(mu=0.0, nu=0.0, omega=0.0)
    delta_rand: PerSetting = PerSetting(mu=0.0, nu=0.0, omega=0.0)

    _norm = field_validator("delta_corr", "delta_rand", mode="before")(_per_setting)

    @model_validator(mode="after")
    def _check(self):
        for name in ("delta_corr", "delta_rand"):
            for label, v in getattr(self, name).as_labels().items():
                if not 0 <= v < 1:
                    raise ValueError(f"{name} values must lie in [0, 1)")
        return self


class MonitorSection(_Strict):
    eta_m: float = Field(1e-3, gt=0.0, le=1.0)
    p_d: float = Field(4.2e-6, ge=0.0, lt=1.0)
    p_ap: float = Field(0.01, ge=0.0, lt=1.0)
    eta_m_uncertainty: float = Field(0.0, ge=0.0, lt=1.0)
    source: Literal["analytic", "simulated"] = "analytic"
    confidence: Optional[float] = Field(None, gt=0.0, lt=1.0)


class AnalysisSection(_Strict):
    mode: Literal["worst-case", "monitor"] = "worst-case"
    n_cut: int = Field(3, ge=1)
    n_th: int = Field(10, ge=0)
    bound_method: Literal["box", "monotone"] = "box"
    tau_override: Optional[float] = Field(None, ge=0.0, le=1.0)
    solver: Literal["simplex", "highs"] = "simplex"


class DistanceRange(_Strict):
    start: float = Field(ge=0.0)
    stop: float = Field(ge=0.0)
    step: float = Field(gt=0.0)

    def values(self) -> list[float]:
        n = int(round((self.stop - self.start) / self.step))
        return [round(self.start + i * self.step, 9) for i in range(n + 1)]


class SweepSection(_Strict):
    distances: Union[list[float], DistanceRange] = Field(default_factory=lambda: [0.0])
    optimize: bool = False
    fixed_ratio: Optional[float] = Field(None, gt=1.0)
    p_floor: Optional[float] = Field(None, ge=0.0, le=1 / 3)
    optimize_probabilities: bool = True

    @field_validator("distances")
    @classmethod
    def _nonneg(cls, v):
        if isinstance(v, list):
            if not v:
                raise ValueError("distance list must not be empty")
            if any(d < 0 for d in v):
                raise ValueError("distances must be >= 0")
        return v

    def distance_list(self) -> list[float]:
        return self.distances.values() if isinstance(self.distances, DistanceRange) else list(self.distances)


class RunSection(_Strict):
    seed: int = Field(0, ge=0, lt=2**64)
    threads: int = Field(1, ge=1)


class RunConfig(_Strict):
    protocol: ProtocolSection
    channel: ChannelSection
    correlation: CorrelationSection = CorrelationSection()
    monitor: MonitorSection = MonitorSection()
    analysis: AnalysisSection = AnalysisSection()
    sweep: SweepSection = SweepSection()
    run: RunSection = RunSection()

    def protocol_params(self) -> ProtocolParams:
        p = self.protocol
        return ProtocolParams(
            p.intensities.as_labels(), p.probabilities.as_labels(), p.q_z, p.xi, p.rounds
        )

    def scenario(self) -> Scenario:
        c, m, a = self.channel, self.monitor, self.analysis
        return Scenario(
            params=self.protocol_params(),
            channel=ChannelParams(c.eta_det, c.p_d, c.attenuation, c.distance, c.misalignment, c.f_ec),
            correlation=GroundTruthCorrelation(
                self.correlation.model,
                self.correlation.decay,
                self.correlation.delta_corr.as_labels(),
                self.correlation.delta_rand.as_labels(),
            ),
            mode=a.mode,
            monitor=MonitorParams(m.eta_m, m.p_d, m.p_ap, m.eta_m_uncertainty),
            monitor_source=m.source,
            monitor_confidence=m.confidence,
            seed=self.run.seed,
            n_cut=a.n_cut,
            n_th=a.n_th,
            bound_method=a.bound_method,
            tau_override=a.tau_override,
            solver=a.solver,
        )

    def optimizer_options(self) -> dict:
        s = self.sweep
        return {
            "fixed_ratio": s.fixed_ratio,
            "p_floor": s.p_floor,
            "optimize_probabilities": s.optimize_probabilities,
        }

    def updated(self, section: str, **values) -> "RunConfig":
        """Copy with keys of one section replaced (re-validated)."""
        data = self.model_dump(mode="python")
        data[section].update(values)
        return validate_config(data)


def _format_error(exc: ValidationError) -> str:
    parts = []
    for err in exc.errors():
        loc = ".".join(str(x) for x in err["loc"] if not str(x).startswith("function-"))
        parts.append(f"{loc or '<root>'}: {err['msg']}")
    return "; ".join(parts)


def validate_config(data: Mapping) -> RunConfig:
    try:
        return RunConfig.model_validate(data)
    except ValidationError as exc:
        raise ConfigError(_format_error(exc)) from None


def apply_env_overrides(data: dict, environ: Mapping[str, str] | None = None) -> dict:
    """Apply ``ICTQKD_<SECTION>__<KEY>`` overrides to a raw config mapping."""
    environ = os.environ if environ is None else environ
    out = {k: dict(v) if isinstance(v, Mapping) else v for k, v in data.items()}
    for name, raw in sorted(environ.items()):
        if not name.startswith(ENV_PREFIX) or "__" not in name:
            continue
        section, key = name[len(ENV_PREFIX) :].lower().split("__", 1)
        out.setdefault(section, {})
        if not isinstance(out[section], dict):
            raise ConfigError(f"{section}: cannot override a non-section value from {name}")
        out[section][key] = yaml.safe_load(raw)
    return out


def load_raw(source: str | Path) -> dict:
    """Read YAML from a path or from literal text."""
    if isinstance(source, Path) or (isinstance(source, str) and "\n" not in source and Path(source).exists()):
        path = Path(source)
        try:
            text = path.read_text(encoding="utf-8")
        except OSError as exc:
            raise ConfigError(f"cannot read config {path}: {exc}") from None
    else:
        text = str(source)
    try:
        data = yaml.safe_load(text)
    except yaml.YAMLError as exc:
        raise ConfigError(f"malformed YAML: {exc}") from None
    if data is None:
        data = {}
    if not isinstance(data, dict):
        raise ConfigError("<root>: config must be a mapping of sections")
    return data


def parse_config(
    source: str | Path, environ: Mapping[str, str] | None = None, use_env: bool = True
) -> RunConfig:
    """Parse and validate a config file path or YAML text."""
    data = load_raw(source)
    if use_env:
        data = apply_env_overrides(data, environ)
    return validate_config(data)


def serialize(config: RunConfig) -> str:
    """YAML text that parses back to an equal config."""
    return yaml.safe_dump(config.model_dump(mode="json"), sort_keys=False)
