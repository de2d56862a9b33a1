"""Intensity settings, setting records and protocol parameters.

A record is the tuple of intensity settings ``a_{k-xi} ... a_k`` that
conditions the statistics of round ``k``.  Labels are single characters:
``"m"`` (signal, mu), ``"n"`` (decoy, nu) and ``"w"`` (vacuum, omega), and
records are ordered lexicographically with ``m < n < w``.
"""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass, field
from typing import Iterable, Mapping

LABELS: tuple[str, str, str] = ("m", "n", "w")
LABEL_NAMES = {"m": "mu", "n": "nu", "w": "omega"}
NAME_LABELS = {v: k for k, v in LABEL_NAMES.items()}

#: Records longer than ``MAX_XI + 1`` settings are refused by default.
MAX_XI = 8

Record = tuple[str, ...]


class CapacityError(ValueError):
    """Raised when a record enumeration would exceed the configured cap."""


def normalize_label(label: str) -> str:
    """Accept ``"m"``/``"mu"``/``"μ"`` style labels and return the short form."""
    label = label.strip()
    if label in LABELS:
        return label
    if label in NAME_LABELS:
        return NAME_LABELS[label]
    greek = {"μ": "m", "ν": "n", "ω": "w"}
    if label in greek:
        return greek[label]
    raise ValueError(f"unknown intensity label {label!r}")


def parse_record(text: str) -> Record:
    """Parse a record string such as ``"mnw"`` into a tuple of labels."""
    record = tuple(normalize_label(c) for c in text.strip())
    if not record:
        raise ValueError("empty record")
    return record


def record_label(record: Iterable[str]) -> str:
    return "".join(record)


def enumerate_records(xi: int, length_offset: int = 0, max_xi: int = MAX_XI) -> list[Record]:
    """All records of ``xi + 1 - length_offset`` settings in lexicographic order.

    ``length_offset=1`` returns the length-``xi`` prefixes (histories) that
    precede the current setting.
    """
    if xi < 0:
        raise ValueError(f"xi must be >= 0, got {xi}")
    if length_offset not in (0, 1):
        raise ValueError(f"length_offset must be 0 or 1, got {length_offset}")
    if xi > max_xi:
        raise CapacityError(
            f"xi={xi} needs 3^{xi + 1} = {3 ** (xi + 1)} records; cap is xi <= {max_xi}"
        )
    return list(itertools.product(LABELS, repeat=xi + 1 - length_offset))


def record_index(record: Record) -> int:
    """Position of ``record`` within :func:`enumerate_records` of its length."""
    idx = 0
    for label in record:
        idx = 3 * idx + LABELS.index(label)
    return idx


@dataclass(frozen=True)
class ProtocolParams:
    """Intensities, setting probabilities and basis choice of the protocol.

    ``intensities`` and ``probabilities`` are keyed by short label.
    """

    intensities: Mapping[str, float]
    probabilities: Mapping[str, float] = field(
        default_factory=lambda: {"m": 1 / 3, "n": 1 / 3, "w": 1 / 3}
    )
    q_z: float = 0.5
    xi: int = 1
    rounds: int = 10**7

    def __post_init__(self) -> None:
        intens = {normalize_label(k): float(v) for k, v in self.intensities.items()}
        probs = {normalize_label(k): float(v) for k, v in self.probabilities.items()}
        object.__setattr__(self, "intensities", intens)
        object.__setattr__(self, "probabilities", probs)
        if set(intens) != set(LABELS):
            raise ValueError("intensities must define mu, nu and omega")
        if set(probs) != set(LABELS):
            raise ValueError("probabilities must define mu, nu and omega")
        mu, nu, omega = (intens[k] for k in LABELS)
        if not all(math.isfinite(v) for v in (mu, nu, omega)):
            raise ValueError("intensities must be finite")
        if not mu > nu > omega >= 0:
            raise ValueError(f"need mu > nu > omega >= 0, got {mu}, {nu}, {omega}")
        if any(p < 0 for p in probs.values()) or abs(sum(probs.values()) - 1) > 1e-9:
            raise ValueError(f"probabilities must be >= 0 and sum to 1, got {probs}")
        if not 0 <= self.q_z <= 1:
            raise ValueError(f"q_z must lie in [0, 1], got {self.q_z}")
        if self.xi < 0:
            raise ValueError(f"xi must be >= 0, got {self.xi}")
        if self.rounds < 1:
            raise ValueError(f"rounds must be >= 1, got {self.rounds}")

    @property
    def q_x(self) -> float:
        return 1.0 - self.q_z

    @property
    def mu(self) -> float:
        return self.intensities["m"]

    @property
    def nu(self) -> float:
        return self.intensities["n"]

    @property
    def omega(self) -> float:
        return self.intensities["w"]

    def intensity(self, label: str) -> float:
        return self.intensities[label]

    def replace(self, **changes) -> "ProtocolParams":
        data = {
            "intensities": dict(self.intensities),
            "probabilities": dict(self.probabilities),
            "q_z": self.q_z,
            "xi": self.xi,
            "rounds": self.rounds,
        }
        data.update(changes)
        return ProtocolParams(**data)


def record_probability(record: Iterable[str], params: ProtocolParams) -> float:
    """Product of setting probabilities over the record (no basis factor)."""
    prob = 1.0
    for label in record:
        prob *= params.probabilities[label]
    return prob
