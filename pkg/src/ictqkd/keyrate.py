"""Asymptotic secret key rate, scenario evaluation, intensity optimization and sweeps."""

from __future__ import annotations

import math
from concurrent.futures import ProcessPoolExecutor
from functools import partial
from dataclasses import dataclass, field, replace
from typing import Callable, Sequence

from .cauchy_schwarz import reference_error_yield, reference_yield
from .channel import (
    ChannelParams,
    GroundTruthCorrelation,
    analytic_monitor_stats,
    error_rate,
    gain,
    simulate_monitor_clicks,
)
from .decoy_lp import ObservedStatistics, build_error_lp, build_yield_lp
from .monitor import MonitorParams, MonitorRecordStats, estimate_intensity_intervals
from .optimize import scan_then_golden
from .overlap import TauTable, tau_table, uniform_tau_table
from .photon import DeviationInterval, IntensityInterval, RecordBox, photon_bounds
from .records import ProtocolParams, Record, enumerate_records
from .solver import LPSolver, get_solver

MODES = ("worst-case", "monitor")
START_MU = (0.02, 0.05, 0.1, 0.2, 0.3, 0.5, 0.7, 0.9)
START_NU_RATIO = (0.05, 0.1, 0.2, 0.4, 0.7)


class StageError(RuntimeError):
    """Pipeline failure tagged with the stage that raised it."""

    def __init__(self, stage: str, cause: Exception):
        super().__init__(f"[{stage}] {cause}")
        self.stage = stage
        self.cause = cause


def binary_entropy(x: float) -> float:
    """Binary Shannon entropy in bits."""
    if not 0.0 <= x <= 1.0 or math.isnan(x):
        raise ValueError(f"binary entropy needs x in [0, 1], got {x}")
    if x == 0.0 or x == 1.0:
        return 0.0
    return -x * math.log2(x) - (1.0 - x) * math.log2(1.0 - x)


@dataclass(frozen=True)
class KeyRateResult:
    """Key rate and the quantities it is built from.

    ``Z1L`` includes the Z-basis sifting factor.  ``X1L`` and ``E1U`` are
    conditioned on an X-basis match; only their ratio enters the rate.
    """

    R: float
    Z1L: float
    X1L: float
    E1U: float
    Z_mu: float
    E_tol: float
    phase_error: float
    diagnostics: dict = field(default_factory=dict, compare=False)


def secret_key_rate(
    Z1L: float, X1L: float, E1U: float, Z_mu: float, E_tol: float, f_ec: float
) -> KeyRateResult:
    """``max(0, Z1L [1 - H(min(1/2, E1U/X1L))] - f_EC Z_mu H(E_tol))``."""
    for name, v in (("Z1L", Z1L), ("X1L", X1L), ("E1U", E1U), ("Z_mu", Z_mu), ("E_tol", E_tol)):
        if not 0.0 <= v <= 1.0 or math.isnan(v):
            raise ValueError(f"{name} must lie in [0, 1], got {v}")
    if f_ec < 1:
        raise ValueError(f"f_ec must be >= 1, got {f_ec}")
    diagnostics: dict = {}
    if X1L <= 0.0:
        if E1U > 0.0:
            diagnostics["degenerate"] = "X1L = 0 with E1U > 0"
            return KeyRateResult(0.0, Z1L, X1L, E1U, Z_mu, E_tol, 0.5, diagnostics)
        phase = 0.0
    else:
        phase = min(0.5, E1U / X1L)
    privacy = Z1L * (1.0 - binary_entropy(phase))
    leak = f_ec * Z_mu * binary_entropy(E_tol)
    diagnostics.update(privacy_term=privacy, leak_term=leak)
    return KeyRateResult(max(0.0, privacy - leak), Z1L, X1L, E1U, Z_mu, E_tol, phase, diagnostics)


@dataclass(frozen=True)
class Scenario:
    """Everything needed to evaluate one key rate.

    ``correlation`` supplies the declared envelopes (``delta_corr``,
    ``delta_rand``) and, for monitor mode, the ground-truth pattern that
    generates the monitor statistics.  ``bound_method="monotone"`` switches
    every photon-number bound (including those inside the overlaps) to the
    envelope-only baseline.
    """

    params: ProtocolParams
    channel: ChannelParams
    correlation: GroundTruthCorrelation = field(default_factory=GroundTruthCorrelation)
    mode: str = "worst-case"
    monitor: MonitorParams = field(default_factory=MonitorParams)
    monitor_source: str = "analytic"
    monitor_confidence: float | None = None
    seed: int = 0
    n_cut: int = 3
    n_th: int = 10
    bound_method: str = "box"
    tau_override: float | None = None
    solver: str = "simplex"

    def __post_init__(self) -> None:
        if self.mode not in MODES:
            raise ValueError(f"mode must be one of {MODES}, got {self.mode!r}")
        if self.monitor_source not in ("analytic", "simulated"):
            raise ValueError(f"monitor_source must be 'analytic' or 'simulated', got {self.monitor_source!r}")
        if self.bound_method not in ("box", "monotone"):
            raise ValueError(f"bound_method must be 'box' or 'monotone', got {self.bound_method!r}")
        if self.n_cut < 1 or self.n_th < 0:
            raise ValueError("need n_cut >= 1 and n_th >= 0")
        if self.tau_override is not None and not 0 <= self.tau_override <= 1:
            raise ValueError("tau_override must lie in [0, 1]")
        if self.monitor_confidence is not None and not 0 < self.monitor_confidence < 1:
            raise ValueError("monitor_confidence must lie in (0, 1)")

    def with_distance(self, distance: float) -> "Scenario":
        return replace(self, channel=self.channel.at_distance(distance))

    def with_params(self, params: ProtocolParams) -> "Scenario":
        return replace(self, params=params)


def record_deviations(scenario: Scenario) -> dict[Record, DeviationInterval]:
    """Declared random-fluctuation interval of every record."""
    rand = scenario.correlation.delta_rand
    return {
        r: DeviationInterval.symmetric(rand[r[-1]]) for r in enumerate_records(scenario.params.xi)
    }


def monitor_statistics(scenario: Scenario) -> list[MonitorRecordStats]:
    """Monitor tallies for ``scenario``: exact rates or a seeded simulation."""
    if scenario.monitor_source == "analytic":
        return analytic_monitor_stats(scenario.params, scenario.correlation, scenario.monitor)
    return simulate_monitor_clicks(
        scenario.params, scenario.correlation, scenario.monitor, seed=scenario.seed
    )


def record_boxes(
    scenario: Scenario, monitor_stats: Sequence[MonitorRecordStats] | None = None
) -> dict[Record, RecordBox]:
    """Uncertainty box of every record under the scenario's mode."""
    devs = record_deviations(scenario)
    if scenario.mode == "worst-case":
        corr = scenario.correlation.delta_corr
        return {
            r: RecordBox(IntensityInterval.around(scenario.params.intensities[r[-1]], corr[r[-1]]), d)
            for r, d in devs.items()
        }
    stats = monitor_stats if monitor_stats is not None else monitor_statistics(scenario)
    estimates = estimate_intensity_intervals(
        stats, scenario.monitor, devs, confidence=scenario.monitor_confidence
    )
    return {r: RecordBox(est.interval, devs[r]) for r, est in estimates.items()}


def _stage(name: str, fn: Callable, *args, **kwargs):
    try:
        return fn(*args, **kwargs)
    except StageError:
        raise
    except Exception as exc:  # noqa: BLE001 - re-raised with the stage tag
        raise StageError(name, exc) from exc


def scenario_taus(scenario: Scenario, boxes: dict[Record, RecordBox]) -> TauTable:
    if scenario.tau_override is not None:
        return uniform_tau_table(scenario.params.xi, scenario.tau_override)
    return tau_table(scenario.params, boxes, n_th=scenario.n_th, method=scenario.bound_method)


def evaluate_scenario(
    scenario: Scenario,
    monitor_stats: Sequence[MonitorRecordStats] | None = None,
    solver: LPSolver | None = None,
) -> KeyRateResult:
    """Run the full pipeline and return the key rate with its ingredients."""
    params, channel = scenario.params, scenario.channel
    solver = solver or get_solver(scenario.solver)
    boxes = _stage("intervals", record_boxes, scenario, monitor_stats)
    bounds = _stage(
        "photon-bounds",
        lambda: {
            r: photon_bounds(b.intensity, b.deviation, scenario.n_cut, scenario.n_th, scenario.bound_method)
            for r, b in boxes.items()
        },
    )
    taus = _stage("tau", scenario_taus, scenario, boxes)
    obs = _stage("observed", ObservedStatistics.from_channel, params, channel)
    refs = [reference_yield(n, channel.eta, channel.p_d) for n in range(scenario.n_cut + 1)]
    erefs = [
        reference_error_yield(n, channel.eta, channel.p_d, channel.misalignment)
        for n in range(scenario.n_cut + 1)
    ]
    y_lp = _stage("lp-build", build_yield_lp, obs, bounds, taus, refs, params)
    e_lp = _stage("lp-build", build_error_lp, obs, bounds, taus, erefs, params)
    y_sol = _stage("lp-solve", solver.solve, y_lp)
    e_sol = _stage("lp-solve", solver.solve, e_lp)
    if not (y_sol.optimal and e_sol.optimal):
        raise StageError(
            "lp-solve", RuntimeError(f"LP status yield={y_sol.status}, error={e_sol.status}")
        )
    y1 = min(max(y_sol.objective, 0.0), 1.0)
    e1 = min(max(e_sol.objective, 0.0), 1.0)
    p_mu = params.probabilities["m"]
    mu = params.intensities["m"]
    Z_mu = params.q_z**2 * p_mu * gain(mu, channel)
    result = secret_key_rate(
        Z1L=params.q_z**2 * y1,
        X1L=y1,
        E1U=e1,
        Z_mu=Z_mu,
        E_tol=error_rate(mu, channel),
        f_ec=channel.f_ec,
    )
    diagnostics = dict(result.diagnostics)
    diagnostics.update(
        tau_min=min(taus.entries.values()),
        yield_lp_value=y_sol.objective,
        error_lp_value=e_sol.objective,
    )
    return replace(result, diagnostics=diagnostics)


def _safe_rate(scenario: Scenario, monitor_stats=None) -> float:
    try:
        return evaluate_scenario(scenario, monitor_stats).R
    except StageError:
        return 0.0


@dataclass(frozen=True)
class OptimizationResult:
    scenario: Scenario
    result: KeyRateResult
    trace: list[dict]


def optimize_intensities(
    scenario: Scenario,
    fixed_ratio: float | None = None,
    p_floor: float | None = None,
    optimize_probabilities: bool = True,
    mu_range: tuple[float, float] = (1e-3, 1.0),
    cycles: int = 3,
    scan_points: int = 7,
    line_iter: int = 10,
    monitor_stats: Sequence[MonitorRecordStats] | None = None,
) -> OptimizationResult:
    """Coordinate descent over ``mu``, ``nu`` and the setting probabilities.

    Each coordinate gets a scanned golden-section line search.  The
    probabilities are searched as ``p_mu`` and the share of ``1 - p_mu``
    assigned to ``nu``, which keeps every coordinate range independent.

    ``fixed_ratio`` pins ``nu = mu / fixed_ratio``; ``p_floor`` imposes
    ``p_a >= p_floor`` for every setting.  The search is local and fully
    deterministic.  Monitor statistics depend on the intensities, so a
    supplied ``monitor_stats`` is ignored once the intensities move.
    """
    base = scenario.params
    floor = 0.0 if p_floor is None else float(p_floor)
    if floor < 0 or 3 * floor > 1 + 1e-12:
        raise ValueError(f"no probability vector satisfies p >= {floor} for all settings")
    if fixed_ratio is not None and fixed_ratio <= 1:
        raise ValueError(f"fixed mu/nu ratio must exceed 1, got {fixed_ratio}")
    omega = base.omega
    eps = 1e-6
    trace: list[dict] = []

    # probabilities as p_mu plus the share of the remainder given to nu, so the
    # coordinate boxes are independent: p_mu in [f, 1 - 2f], split in [0, 1]
    def probs(st: dict) -> tuple[float, float, float]:
        rest = max(1.0 - st["p_mu"] - 2 * floor, 0.0)
        p_nu = floor + st["split"] * rest
        return st["p_mu"], p_nu, max(1.0 - st["p_mu"] - p_nu, 0.0)

    p_mu0 = min(max(base.probabilities["m"], floor), 1 - 2 * floor)
    rest0 = 1.0 - p_mu0 - 2 * floor
    split0 = (base.probabilities["n"] - floor) / rest0 if rest0 > 0 else 0.5
    state = {
        "mu": base.mu,
        "nu": base.mu / fixed_ratio if fixed_ratio else base.nu,
        "p_mu": p_mu0,
        "split": min(max(split0, 0.0), 1.0),
    }

    def build(st: dict) -> Scenario | None:
        nu = st["mu"] / fixed_ratio if fixed_ratio else st["nu"]
        if not st["mu"] > nu > omega:
            return None
        p_mu, p_nu, p_w = probs(st)
        params = base.replace(
            intensities={"m": st["mu"], "n": nu, "w": omega},
            probabilities={"m": p_mu, "n": p_nu, "w": p_w},
        )
        return scenario.with_params(params)

    cache: dict[tuple, float] = {}

    def rate(st: dict) -> float:
        key = tuple(st[k] for k in sorted(st))
        if key in cache:
            return cache[key]
        sc = build(st)
        if sc is None:
            return -math.inf
        stats = monitor_stats if sc.params == scenario.params else None
        r = _safe_rate(sc, stats)
        cache[key] = r
        p_mu, p_nu, p_w = probs(st)
        trace.append(
            {"mu": st["mu"], "nu": sc.params.nu, "p_mu": p_mu, "p_nu": p_nu, "p_omega": p_w, "R": r}
        )
        return r

    best = rate(state)
    # coarse multi-start over (mu, nu) so the descent does not begin on a plateau
    # or in the basin of a poor boundary optimum
    lo_mu, hi_mu = mu_range
    for mu in START_MU:
        if not lo_mu <= mu <= hi_mu:
            continue
        for ratio in [fixed_ratio] if fixed_ratio else START_NU_RATIO:
            cand = {**state, "mu": mu, "nu": mu / ratio if fixed_ratio else mu * ratio}
            val = rate(cand)
            if val > best:
                state, best = cand, val
    coords = ["mu"] if fixed_ratio else ["mu", "nu"]
    if optimize_probabilities:
        coords += ["p_mu", "split"]
    for _ in range(cycles):
        improved = False
        for coord in coords:
            if coord == "mu":
                lo = max(mu_range[0], (state["nu"] if not fixed_ratio else omega * fixed_ratio) + eps)
                hi = mu_range[1]
            elif coord == "nu":
                lo, hi = omega + eps, state["mu"] - eps
            elif coord == "p_mu":
                lo, hi = floor, 1 - 2 * floor
            else:
                lo, hi = 0.0, 1.0
            if hi <= lo:
                continue

            def line(t: float, coord: str = coord) -> float:
                return rate({**state, coord: t})

            t, val = scan_then_golden(line, lo, hi, points=scan_points, max_iter=line_iter)
            if val > best * (1 + 1e-9) and val > best:
                state = {**state, coord: t}
                best = val
                improved = True
        if not improved:
            break
    final = build(state)
    assert final is not None
    return OptimizationResult(final, evaluate_scenario(final), trace)


@dataclass(frozen=True)
class SweepRow:
    distance: float
    result: KeyRateResult | None
    scenario: Scenario
    error: str | None = None

    @property
    def ok(self) -> bool:
        return self.error is None


def _sweep_row(
    distance: float,
    scenario: Scenario,
    optimize: bool,
    optimizer_options: dict | None,
    shared_stats: Sequence[MonitorRecordStats] | None,
) -> SweepRow:
    sc = scenario.with_distance(float(distance))
    try:
        if optimize:
            opt = optimize_intensities(sc, **(optimizer_options or {}))
            return SweepRow(float(distance), opt.result, opt.scenario)
        return SweepRow(float(distance), evaluate_scenario(sc, shared_stats), sc)
    except Exception as exc:  # noqa: BLE001 - reported in the row
        return SweepRow(float(distance), None, sc, f"{type(exc).__name__}: {exc}")


def distance_sweep(
    scenario: Scenario,
    distances: Sequence[float],
    optimize: bool = False,
    optimizer_options: dict | None = None,
    threads: int = 1,
) -> list[SweepRow]:
    """Evaluate the scenario at each distance; failures are reported per row.

    Rows are independent, so ``threads > 1`` evaluates them in worker
    processes; the output does not depend on the number of workers.
    """
    if len(distances) == 0:
        raise ValueError("distance list is empty")
    shared_stats = None
    if scenario.mode == "monitor" and not optimize:
        # monitor statistics do not depend on the channel
        shared_stats = monitor_statistics(scenario)
    run = partial(
        _sweep_row,
        scenario=scenario,
        optimize=optimize,
        optimizer_options=optimizer_options,
        shared_stats=shared_stats,
    )
    if threads > 1 and len(distances) > 1:
        with ProcessPoolExecutor(max_workers=min(threads, len(distances))) as pool:
            return list(pool.map(run, distances))
    return [run(d) for d in distances]


def sweep_table(rows: Sequence[SweepRow]) -> list[dict]:
    """Rows for the sweep CSV: the key-rate columns followed by the operating point."""
    out = []
    for row in rows:
        res = row.result
        p = row.scenario.params
        nan = float("nan")
        out.append(
            {
                "L_km": row.distance,
                "R": res.R if res else nan,
                "Z1L": res.Z1L if res else nan,
                "X1L": res.X1L if res else nan,
                "E1U": res.E1U if res else nan,
                "Zmu": res.Z_mu if res else nan,
                "Etol": res.E_tol if res else nan,
                "phase_error": res.phase_error if res else nan,
                "mu": p.mu,
                "nu": p.nu,
                "omega": p.omega,
                "p_mu": p.probabilities["m"],
                "p_nu": p.probabilities["n"],
                "p_omega": p.probabilities["w"],
                "status": "ok" if row.ok else row.error,
            }
        )
    return out


__all__ = [
    "KeyRateResult",
    "OptimizationResult",
    "Scenario",
    "StageError",
    "SweepRow",
    "binary_entropy",
    "distance_sweep",
    "evaluate_scenario",
    "monitor_statistics",
    "optimize_intensities",
    "record_boxes",
    "secret_key_rate",
    "sweep_table",
]
