"""Command-line front end.

Every subcommand reads a YAML config (``--config``), writes CSV files into
``--out`` and exits with 0 on success, 1 on a pipeline failure (message
prefixed with the failing stage in brackets) and 2 on an invalid config.
Config keys can be overridden with ``ICTQKD_<SECTION>__<KEY>`` environment
variables; ``--seed``, ``--mode`` and ``--threads`` take precedence over both.
"""

from __future__ import annotations

import argparse
import sys
from pathlib import Path
from typing import Sequence

from .channel import simulate_monitor_clicks
from .config import ConfigError, RunConfig, parse_config
from .decoy_lp import ObservedStatistics, build_error_lp, build_yield_lp
from .cauchy_schwarz import reference_error_yield, reference_yield
from .io import read_tallies, write_csv, write_tallies
from .keyrate import (
    StageError,
    distance_sweep,
    record_boxes,
    record_deviations,
    scenario_taus,
    sweep_table,
)
from .monitor import estimate_intensity_intervals
from .photon import photon_bounds
from .presets import fig1_configs, fig3_config
from .records import record_label

COMMANDS = ("sweep", "tau", "bounds", "simulate-monitor", "estimate", "reproduce")
SWEEP_HEADER = (
    "L_km", "R", "Z1L", "X1L", "E1U", "Zmu", "Etol", "phase_error",
    "mu", "nu", "omega", "p_mu", "p_nu", "p_omega", "status",
)  # fmt: skip


class CommandError(RuntimeError):
    """Failure of a subcommand, tagged with a stage name."""

    def __init__(self, stage: str, message: str):
        super().__init__(f"[{stage}] {message}")
        self.stage = stage


def build_parser() -> argparse.ArgumentParser:
    common = argparse.ArgumentParser(add_help=False)
    common.add_argument("--out", type=Path, default=Path("."), help="output directory")
    common.add_argument("--seed", type=int, help="RNG seed (unsigned 64-bit)")
    common.add_argument("--mode", choices=("worst-case", "monitor"), help="intensity-interval mode")
    common.add_argument("--threads", type=int, help="worker processes for sweeps")

    with_config = argparse.ArgumentParser(add_help=False, parents=[common])
    with_config.add_argument("--config", type=Path, required=True, help="YAML run configuration")

    parser = argparse.ArgumentParser(
        prog="ictqkd",
        description="Decoy-state key rates under correlated intensity fluctuations.",
    )
    sub = parser.add_subparsers(dest="command", required=True)
    sweep = sub.add_parser("sweep", parents=[with_config], help="key rate versus distance")
    sweep.add_argument("--dump-lp", action="store_true", help="also write the LPs of the first distance")
    sub.add_parser("tau", parents=[with_config], help="intensity-correlation parameters")
    sub.add_parser("bounds", parents=[with_config], help="per-record intensity and photon-number bounds")
    sub.add_parser("simulate-monitor", parents=[with_config], help="Monte Carlo monitor click tallies")
    est = sub.add_parser("estimate", parents=[with_config], help="intensity intervals from tallies")
    est.add_argument("--tallies", type=Path, required=True, help="CSV with record,trials,clicks")
    rep = sub.add_parser("reproduce", parents=[common], help="run a bundled parameter set")
    rep.add_argument("target", choices=("fig1", "fig3"))
    return parser


def _cli_overrides(args: argparse.Namespace) -> dict:
    out: dict = {}
    if args.seed is not None:
        out.setdefault("run", {})["seed"] = args.seed
    if args.threads is not None:
        out.setdefault("run", {})["threads"] = args.threads
    if args.mode is not None:
        out.setdefault("analysis", {})["mode"] = args.mode
    return out


def _apply(config: RunConfig, overrides: dict) -> RunConfig:
    for section, values in overrides.items():
        config = config.updated(section, **values)
    return config


def _sweep_rows(config: RunConfig) -> list[dict]:
    rows = distance_sweep(
        config.scenario(),
        config.sweep.distance_list(),
        optimize=config.sweep.optimize,
        optimizer_options=config.optimizer_options(),
        threads=config.run.threads,
    )
    return sweep_table(rows)


def _check_rows(rows: list[dict], name: str) -> None:
    failed = [r for r in rows if r["status"] != "ok"]
    if failed:
        first = failed[0]
        raise CommandError("sweep", f"{name}: {len(failed)} distance(s) failed, first at {first['L_km']} km: {first['status']}")


def cmd_sweep(config: RunConfig, out: Path, dump_lp: bool = False) -> list[Path]:
    rows = _sweep_rows(config)
    path = out / "sweep.csv"
    write_csv(path, rows, SWEEP_HEADER)
    written = [path]
    if dump_lp:
        written += _dump_lps(config, out)
    _check_rows(rows, "sweep")
    return written


def _dump_lps(config: RunConfig, out: Path) -> list[Path]:
    sc = config.scenario().with_distance(config.sweep.distance_list()[0])
    boxes = record_boxes(sc)
    bounds = {r: photon_bounds(b.intensity, b.deviation, sc.n_cut, sc.n_th, sc.bound_method) for r, b in boxes.items()}
    taus = scenario_taus(sc, boxes)
    obs = ObservedStatistics.from_channel(sc.params, sc.channel)
    ch = sc.channel
    refs = [reference_yield(n, ch.eta, ch.p_d) for n in range(sc.n_cut + 1)]
    erefs = [reference_error_yield(n, ch.eta, ch.p_d, ch.misalignment) for n in range(sc.n_cut + 1)]
    paths = [out / "yield.lp", out / "error.lp"]
    build_yield_lp(obs, bounds, taus, refs, sc.params).dump(paths[0])
    build_error_lp(obs, bounds, taus, erefs, sc.params).dump(paths[1])
    return paths


def cmd_tau(config: RunConfig, out: Path) -> list[Path]:
    sc = config.scenario()
    taus = scenario_taus(sc, record_boxes(sc))
    path = out / "tau.csv"
    write_csv(path, taus.rows(), ("prefix", "a", "a_prime", "tau"))
    return [path]


def cmd_bounds(config: RunConfig, out: Path) -> list[Path]:
    sc = config.scenario()
    header = ["record", "alpha_L", "alpha_U", "delta_L", "delta_U"]
    header += [f"p{n}_{side}" for n in range(sc.n_cut + 1) for side in ("L", "U")]
    header.append("tail_U")
    rows = []
    for record, box in sorted(record_boxes(sc).items()):
        pb = photon_bounds(box.intensity, box.deviation, sc.n_cut, sc.n_th, sc.bound_method)
        row = {
            "record": record_label(record),
            "alpha_L": box.intensity.lo,
            "alpha_U": box.intensity.hi,
            "delta_L": box.deviation.lo,
            "delta_U": box.deviation.hi,
            "tail_U": pb.tail_upper,
        }
        for n in range(sc.n_cut + 1):
            row[f"p{n}_L"] = float(pb.lower[n])
            row[f"p{n}_U"] = float(pb.upper[n])
        rows.append(row)
    path = out / "bounds.csv"
    write_csv(path, rows, header)
    return [path]


def cmd_simulate_monitor(config: RunConfig, out: Path) -> list[Path]:
    sc = config.scenario()
    stats = simulate_monitor_clicks(
        sc.params, sc.correlation, sc.monitor, rounds=config.protocol.rounds, seed=config.run.seed
    )
    path = out / "tallies.csv"
    write_tallies(path, stats)
    return [path]


INTERVAL_HEADER = ("record", "trials", "clicks", "D", "D_L", "D_U", "alpha_L", "alpha_U", "clamped")


def cmd_estimate(config: RunConfig, out: Path, tallies: Path) -> list[Path]:
    sc = config.scenario()
    stats = read_tallies(tallies)
    estimates = estimate_intensity_intervals(
        stats, sc.monitor, record_deviations(sc), confidence=sc.monitor_confidence
    )
    rows = []
    for st in stats:
        est = estimates[tuple(st.record)]
        rows.append(
            {
                "record": record_label(st.record),
                "trials": st.trials,
                "clicks": st.clicks,
                "D": est.D,
                "D_L": est.D_low,
                "D_U": est.D_high,
                "alpha_L": est.interval.lo,
                "alpha_U": est.interval.hi,
                "clamped": est.clamped,
            }
        )
    path = out / "intervals.csv"
    write_csv(path, rows, INTERVAL_HEADER)
    return [path]


def cmd_reproduce(target: str, out: Path, overrides: dict) -> list[Path]:
    written = []
    if target == "fig1":
        jobs = fig1_configs(overrides)
    else:
        jobs = [("fig3", fig3_config(overrides))]
    failures = []
    for name, config in jobs:
        rows = _sweep_rows(config)
        path = out / f"{name}.csv"
        write_csv(path, rows, SWEEP_HEADER)
        written.append(path)
        try:
            _check_rows(rows, name)
        except CommandError as exc:
            failures.append(str(exc))
    if failures:
        raise CommandError("sweep", "; ".join(failures))
    return written


def run_command(args: argparse.Namespace) -> list[Path]:
    """Dispatch a parsed command line; returns the files written."""
    overrides = _cli_overrides(args)
    if args.command == "reproduce":
        return cmd_reproduce(args.target, args.out, overrides)
    config = _apply(parse_config(args.config), overrides)
    if args.command == "sweep":
        return cmd_sweep(config, args.out, args.dump_lp)
    if args.command == "tau":
        return cmd_tau(config, args.out)
    if args.command == "bounds":
        return cmd_bounds(config, args.out)
    if args.command == "simulate-monitor":
        return cmd_simulate_monitor(config, args.out)
    return cmd_estimate(config, args.out, args.tallies)


def main(argv: Sequence[str] | None = None) -> int:
    args = build_parser().parse_args(argv)
    try:
        for path in run_command(args):
            print(path)
    except ConfigError as exc:
        print(f"[config] {exc}", file=sys.stderr)
        return 2
    except (StageError, CommandError) as exc:
        print(str(exc), file=sys.stderr)
        return 1
    except OSError as exc:
        print(f"[io] {exc}", file=sys.stderr)
        return 1
    except ValueError as exc:
        print(f"[{args.command}] {exc}", file=sys.stderr)
        return 1
    return 0


if __name__ == "__main__":
    sys.exit(main())
