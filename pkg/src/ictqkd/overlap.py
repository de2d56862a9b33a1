"""Lower bounds on the intensity-correlation parameters (squared overlaps).

Two records that share the history ``a_{k-xi} .. a_{k-1}`` and differ only in
the current setting produce states whose overlap is governed by the next
``xi`` rounds, whose photon statistics still depend on ``a_k``.  The overlap
sums, over every future setting sequence, the product of per-round
fidelities ``sum_m sqrt(p_m p'_m)``; each fidelity is lower-bounded with the
box minima up to ``n_th`` and a Poisson tail at the smallest admissible
intensity above it.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import Mapping

import numpy as np
from scipy import stats

from .photon import RecordBox, lower_bounds_upto
from .records import LABELS, ProtocolParams, Record, enumerate_records, record_label


class MissingRecordError(KeyError):
    """A record box needed by the overlap sum was not supplied."""


@dataclass
class TauTable:
    """Squared-overlap lower bounds keyed by ``(prefix, a, a_prime)``.

    ``pair(a, a_prime)`` returns the smallest value over all prefixes, which is
    valid for every history.
    """

    xi: int
    entries: dict[tuple[Record, str, str], float] = field(default_factory=dict)

    def get(self, prefix: Record, a: str, a_prime: str) -> float:
        return self.entries[(tuple(prefix), a, a_prime)]

    def pair(self, a: str, a_prime: str) -> float:
        vals = [v for (_, x, y), v in self.entries.items() if x == a and y == a_prime]
        if not vals:
            raise KeyError((a, a_prime))
        return min(vals)

    def pairs(self) -> dict[tuple[str, str], float]:
        return {(a, b): self.pair(a, b) for a in LABELS for b in LABELS if a != b}

    def rows(self) -> list[dict]:
        return [
            {"prefix": record_label(p), "a": a, "a_prime": b, "tau": v}
            for (p, a, b), v in sorted(self.entries.items())
        ]


class _LowerCache:
    def __init__(self, boxes: Mapping[Record, RecordBox], n_th: int, method: str):
        self.boxes = boxes
        self.n_th = n_th
        self.method = method
        self._lower: dict[Record, np.ndarray] = {}
        self._terms: dict[tuple[Record, Record], float] = {}

    def box(self, record: Record) -> RecordBox:
        try:
            return self.boxes[record]
        except KeyError:
            raise MissingRecordError(f"no uncertainty box for record {record_label(record)}") from None

    def lower(self, record: Record) -> np.ndarray:
        if record not in self._lower:
            box = self.box(record)
            self._lower[record] = lower_bounds_upto(self.n_th, box.intensity, box.deviation, self.method)
        return self._lower[record]

    def term(self, rec_a: Record, rec_b: Record) -> float:
        key = (rec_a, rec_b) if rec_a <= rec_b else (rec_b, rec_a)
        if key not in self._terms:
            tail_intensity = min(self.box(rec_a).alpha_min, self.box(rec_b).alpha_min)
            self._terms[key] = overlap_term_lower(
                self.lower(rec_a), self.lower(rec_b), tail_intensity, self.n_th
            )
        return self._terms[key]


def overlap_term_lower(
    lower_a: np.ndarray, lower_b: np.ndarray, tail_intensity: float, n_th: int
) -> float:
    """Lower bound on ``sum_m sqrt(p_m p'_m)`` for one future round.

    ``lower_a``/``lower_b`` hold lower bounds on ``p_0 .. p_{n_th}`` for the
    two records; photon numbers above ``n_th`` use ``Poisson(tail_intensity)``,
    which lower-bounds both pmfs there.  Equivalent to
    ``1 + sum_{m<=n_th} [sqrt(l_m l'_m) - pmf(m, tail)]`` but with the tail
    summed directly.  Never exceeds 1.
    """
    head = float(np.sum(np.sqrt(np.clip(lower_a[: n_th + 1], 0, None) * np.clip(lower_b[: n_th + 1], 0, None))))
    tail = float(stats.poisson.sf(n_th, tail_intensity)) if tail_intensity > 0 else 0.0
    return min(1.0, head + tail)


def _future_record(prefix: Record, current: str, future: tuple[str, ...], j: int) -> Record:
    """Record of round ``k + j`` given the history, round ``k`` setting and futures."""
    return tuple(prefix[j:]) + (current,) + tuple(future[:j])


def tau_for_prefix(
    prefix: Record,
    a: str,
    a_prime: str,
    params: ProtocolParams,
    cache: _LowerCache,
) -> float:
    xi = len(prefix)
    if a == a_prime:
        raise ValueError("tau needs two distinct settings")
    if xi == 0:
        return 1.0
    overlap = 0.0
    for future in itertools.product(LABELS, repeat=xi):
        weight = 1.0
        for label in future:
            weight *= params.probabilities[label]
        if weight == 0.0:
            continue
        prod = weight
        for j in range(1, xi + 1):
            prod *= cache.term(
                _future_record(prefix, a, future, j), _future_record(prefix, a_prime, future, j)
            )
        overlap += prod
    return min(max(overlap * overlap, 0.0), 1.0)


def tau_lower_bound(
    a: str,
    a_prime: str,
    params: ProtocolParams,
    boxes: Mapping[Record, RecordBox],
    n_th: int = 10,
    prefix: Record | None = None,
    method: str = "box",
) -> float:
    """Lower bound on the squared overlap between records ending in ``a`` and ``a_prime``.

    With ``prefix=None`` the minimum over all histories is returned.
    """
    cache = _LowerCache(boxes, n_th, method)
    if prefix is not None:
        return tau_for_prefix(tuple(prefix), a, a_prime, params, cache)
    return min(
        tau_for_prefix(p, a, a_prime, params, cache)
        for p in enumerate_records(params.xi, length_offset=1)
    )


def tau_table(
    params: ProtocolParams,
    boxes: Mapping[Record, RecordBox],
    n_th: int = 10,
    method: str = "box",
) -> TauTable:
    """Tau for every history prefix and every ordered pair of distinct settings."""
    cache = _LowerCache(boxes, n_th, method)
    table = TauTable(params.xi)
    for prefix in enumerate_records(params.xi, length_offset=1):
        for a in LABELS:
            for b in LABELS:
                if a != b:
                    table.entries[(prefix, a, b)] = tau_for_prefix(prefix, a, b, params, cache)
    return table


def uniform_tau_table(xi: int, value: float) -> TauTable:
    """Table with the same tau everywhere (e.g. 1 for a correlation-free check)."""
    if not 0 <= value <= 1:
        raise ValueError("tau must lie in [0, 1]")
    table = TauTable(xi)
    for prefix in enumerate_records(xi, length_offset=1):
        for a in LABELS:
            for b in LABELS:
                if a != b:
                    table.entries[(prefix, a, b)] = value
    return table
