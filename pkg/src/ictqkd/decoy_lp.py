"""Decoy-state linear programs with linearized Cauchy-Schwarz constraints.

Variables are the record-conditional yields (or error yields) ``y_{n,r}``
for every full record ``r`` and ``n = 0..n_cut``.  Each record contributes
two decoy rows tying the observed gain to its photon-number bounds, and each
pair of records that share a history but differ in the current setting is
linked by tangent lines to the Cauchy-Schwarz envelopes.  Objectives carry no
basis-sifting prefactor; callers multiply by ``q**2`` where needed.
"""

from __future__ import annotations

import math
from dataclasses import dataclass, field
from pathlib import Path
from typing import Mapping, Sequence

import numpy as np

from .cauchy_schwarz import linearize_cs
from .channel import ChannelParams, error_gain, gain
from .overlap import TauTable
from .photon import PhotonBounds
from .records import LABELS, ProtocolParams, Record, enumerate_records, record_label, record_probability

LE, GE, EQ = "<=", ">=", "="
_KIND = {LE: -1, GE: 1, EQ: 0}


@dataclass(frozen=True)
class Constraint:
    coeffs: dict[int, float]
    relation: str
    rhs: float
    name: str = ""

    def __post_init__(self) -> None:
        if self.relation not in _KIND:
            raise ValueError(f"unknown relation {self.relation!r}")
        if not math.isfinite(self.rhs) or not all(math.isfinite(v) for v in self.coeffs.values()):
            raise ValueError(f"constraint {self.name!r} has non-finite data")

    def activity(self, x: np.ndarray) -> float:
        return float(sum(v * x[i] for i, v in self.coeffs.items()))

    def violation(self, x: np.ndarray) -> float:
        lhs = self.activity(x)
        if self.relation == LE:
            return max(0.0, lhs - self.rhs)
        if self.relation == GE:
            return max(0.0, self.rhs - lhs)
        return abs(lhs - self.rhs)


@dataclass
class LinearProgram:
    """Sparse-row LP with boxed variables."""

    variables: list[str]
    constraints: list[Constraint] = field(default_factory=list)
    objective: np.ndarray | None = None
    sense: str = "min"
    lower: np.ndarray | None = None
    upper: np.ndarray | None = None
    constant: float = 0.0

    def __post_init__(self) -> None:
        n = len(self.variables)
        if len(set(self.variables)) != n:
            raise ValueError("duplicate variable names")
        self.index = {name: i for i, name in enumerate(self.variables)}
        self.objective = np.zeros(n) if self.objective is None else np.asarray(self.objective, float)
        self.lower = np.zeros(n) if self.lower is None else np.asarray(self.lower, float)
        self.upper = np.ones(n) if self.upper is None else np.asarray(self.upper, float)
        if self.sense not in ("min", "max"):
            raise ValueError(f"sense must be 'min' or 'max', got {self.sense!r}")

    @property
    def n_vars(self) -> int:
        return len(self.variables)

    @property
    def n_box_rows(self) -> int:
        """Number of finite variable bounds, i.e. rows if bounds were written as constraints."""
        return int(np.sum(np.isfinite(self.lower)) + np.sum(np.isfinite(self.upper)))

    def add(self, coeffs: Mapping[int, float], relation: str, rhs: float, name: str = "") -> None:
        for i in coeffs:
            if not 0 <= i < self.n_vars:
                raise IndexError(f"constraint {name!r} references undeclared variable {i}")
        self.constraints.append(Constraint(dict(coeffs), relation, float(rhs), name))

    def matrix(self) -> tuple[np.ndarray, np.ndarray, np.ndarray]:
        """Dense ``(A, kinds, b)`` with kinds -1 (<=), +1 (>=), 0 (=)."""
        m = len(self.constraints)
        A = np.zeros((m, self.n_vars))
        kinds = np.empty(m, dtype=int)
        b = np.empty(m)
        for r, con in enumerate(self.constraints):
            for i, v in con.coeffs.items():
                A[r, i] += v
            kinds[r] = _KIND[con.relation]
            b[r] = con.rhs
        return A, kinds, b

    def violations(self, x: np.ndarray, tol: float = 1e-10) -> list[tuple[str, float]]:
        """Rows and bounds violated by ``x`` by more than ``tol``."""
        x = np.asarray(x, float)
        out = []
        for con in self.constraints:
            v = con.violation(x)
            if v > tol:
                out.append((con.name, v))
        for i, name in enumerate(self.variables):
            if x[i] < self.lower[i] - tol or x[i] > self.upper[i] + tol:
                out.append((f"bound:{name}", float(max(self.lower[i] - x[i], x[i] - self.upper[i]))))
        return out

    def is_feasible(self, x: np.ndarray, tol: float = 1e-10) -> bool:
        return not self.violations(x, tol)

    def to_lp_format(self) -> str:
        """Render in the CPLEX LP text format."""

        def expr(coeffs: Mapping[int, float]) -> str:
            terms = [f"{v:+.17g} {self.variables[i]}" for i, v in sorted(coeffs.items()) if v != 0]
            return " ".join(terms) if terms else f"0 {self.variables[0]}"

        lines = ["\\ decoy-state linear program", "Minimize" if self.sense == "min" else "Maximize"]
        lines.append(" obj: " + expr({i: v for i, v in enumerate(self.objective)}))
        lines.append("Subject To")
        for r, con in enumerate(self.constraints):
            name = con.name or f"c{r}"
            lines.append(f" {name}: {expr(con.coeffs)} {con.relation} {con.rhs:.17g}")
        lines.append("Bounds")
        for i, name in enumerate(self.variables):
            lo, hi = self.lower[i], self.upper[i]
            hi_txt = "+inf" if not np.isfinite(hi) else f"{hi:.17g}"
            lines.append(f" {lo:.17g} <= {name} <= {hi_txt}")
        lines.append("End")
        return "\n".join(lines) + "\n"

    def dump(self, path: str | Path) -> None:
        Path(path).write_text(self.to_lp_format(), encoding="utf-8")


@dataclass(frozen=True)
class ObservedStatistics:
    """Per-record conditional gains and error gains (sifting and setting factors removed)."""

    gains: Mapping[Record, float]
    error_gains: Mapping[Record, float]

    def __post_init__(self) -> None:
        for name in ("gains", "error_gains"):
            for rec, v in getattr(self, name).items():
                if not 0.0 <= v <= 1.0:
                    raise ValueError(f"{name}[{record_label(rec)}] = {v} outside [0, 1]")

    @classmethod
    def from_channel(cls, params: ProtocolParams, channel: ChannelParams) -> "ObservedStatistics":
        """Record-independent statistics: each record sees the gain of its current setting."""
        g = {a: gain(params.intensities[a], channel) for a in LABELS}
        e = {a: error_gain(params.intensities[a], channel) for a in LABELS}
        records = enumerate_records(params.xi)
        return cls({r: g[r[-1]] for r in records}, {r: e[r[-1]] for r in records})


def variable_name(n: int, record: Record, symbol: str = "y") -> str:
    return f"{symbol}_{n}_{record_label(record)}"


def _build(
    observed: Mapping[Record, float],
    bounds: Mapping[Record, PhotonBounds],
    taus: TauTable,
    refs: Sequence[float],
    params: ProtocolParams,
    symbol: str,
    sense: str,
    objective_bound: str,
) -> LinearProgram:
    records = enumerate_records(params.xi)
    n_cut = len(refs) - 1
    missing = [record_label(r) for r in records if r not in bounds or r not in observed]
    if missing:
        raise KeyError(f"missing photon bounds or statistics for records {missing[:5]}")
    for r in records:
        if bounds[r].n_cut != n_cut:
            raise ValueError(
                f"record {record_label(r)}: photon bounds cover n <= {bounds[r].n_cut}, "
                f"references cover n <= {n_cut}"
            )
    names = [variable_name(n, r, symbol) for r in records for n in range(n_cut + 1)]
    lp = LinearProgram(names, sense=sense)
    idx = lp.index

    for r in records:
        pb = bounds[r]
        label = record_label(r)
        cols = [idx[variable_name(n, r, symbol)] for n in range(n_cut + 1)]
        lp.add(dict(zip(cols, pb.lower)), LE, observed[r], name=f"decoy_lo_{label}")
        slack = 1.0 - float(np.sum(pb.lower))
        lp.add(dict(zip(cols, pb.upper)), GE, observed[r] - slack, name=f"decoy_hi_{label}")

    for prefix in enumerate_records(params.xi, length_offset=1):
        plabel = record_label(prefix)
        for a in LABELS:
            for b in LABELS:
                if a == b:
                    continue
                tau = taus.get(prefix, a, b)
                for n in range(n_cut + 1):
                    t = linearize_cs(refs[n], tau)
                    src = idx[variable_name(n, prefix + (a,), symbol)]
                    dst = idx[variable_name(n, prefix + (b,), symbol)]
                    tag = f"{plabel}{a}_{b}_{n}"
                    # dst <= c+ + m+ src  and  dst >= c- + m- src
                    lp.add({dst: 1.0, src: -t.m_plus}, LE, t.c_plus, name=f"cs_up_{tag}")
                    lp.add({dst: 1.0, src: -t.m_minus}, GE, t.c_minus, name=f"cs_lo_{tag}")

    p_mu = params.probabilities["m"]
    for prefix in enumerate_records(params.xi, length_offset=1):
        rec = prefix + ("m",)
        p1 = bounds[rec].lower[1] if objective_bound == "lower" else bounds[rec].upper[1]
        weight = p_mu * record_probability(prefix, params) * p1
        lp.objective[idx[variable_name(1, rec, symbol)]] += weight
    return lp


def build_yield_lp(
    obs: ObservedStatistics,
    bounds: Mapping[Record, PhotonBounds],
    taus: TauTable,
    refs: Sequence[float],
    params: ProtocolParams,
    sense: str = "min",
) -> LinearProgram:
    """LP whose minimum lower-bounds the signal single-photon click probability.

    ``sense="max"`` gives the symmetric upper variant (objective weighted by
    the upper single-photon bound).
    """
    return _build(
        obs.gains, bounds, taus, refs, params, "y", sense, "lower" if sense == "min" else "upper"
    )


def build_error_lp(
    obs: ObservedStatistics,
    bounds: Mapping[Record, PhotonBounds],
    taus: TauTable,
    refs: Sequence[float],
    params: ProtocolParams,
    sense: str = "max",
) -> LinearProgram:
    """LP whose maximum upper-bounds the signal single-photon error probability."""
    return _build(
        obs.error_gains, bounds, taus, refs, params, "h", sense, "upper" if sense == "max" else "lower"
    )


def assignment(lp: LinearProgram, values: Mapping[int, float], symbol: str = "y") -> np.ndarray:
    """Vector giving every record the same ``values[n]`` for variable ``{symbol}_n_*``."""
    x = np.zeros(lp.n_vars)
    for i, name in enumerate(lp.variables):
        sym, n, _ = name.split("_", 2)
        if sym == symbol:
            x[i] = values[int(n)]
    return x
