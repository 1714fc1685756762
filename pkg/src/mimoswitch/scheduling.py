"""Fair-switching schedules and traffic-demand realization.

Given the per-derangement link rates of a condensed set, fair switching
weights each derangement inversely to its rate so every ordered station
pair moves the same traffic per round; the per-station throughput is then
the harmonic mean of the rates. Arbitrary unicast/multicast/broadcast
demands are realized by letting each source repeat or vary its payload
across the slots of one round.
"""

from __future__ import annotations

import math
import re
from dataclasses import dataclass
from fractions import Fraction

import numpy as np

from .combinatorics import CondensedSet, Derangement

__all__ = [
    "DimensionMismatch",
    "link_rate",
    "fair_throughput",
    "slot_weights",
    "integer_slot_weights",
    "Schedule",
    "build_schedule",
    "TrafficDemand",
    "SlotAssignment",
    "realize_demand",
    "parse_demand",
]


class DimensionMismatch(ValueError):
    """Station counts of two scheduling inputs disagree."""


def link_rate(sigma_e_sq, log_base: float = 2.0):
    """Shannon rate log(1 + 1/sigma_e_sq), base 2 by default (bits/use).

    Accepts scalars or arrays.
    """
    sig = np.asarray(sigma_e_sq, dtype=float)
    if np.any(sig <= 0):
        raise ValueError("effective noise power must be positive")
    rate = np.log1p(1.0 / sig) / math.log(log_base)
    return float(rate) if np.isscalar(sigma_e_sq) else rate


def fair_throughput(rates):
    """Per-station throughput of a fair round: harmonic mean of the rates.

    ``rates`` holds one positive rate per derangement of a condensed set
    (last axis when given a stacked array): T = (N-1) / sum_n 1/r_n.
    """
    r = np.asarray(rates, dtype=float)
    if r.shape[-1] < 1 or np.any(r <= 0):
        raise ValueError("rates must be a non-empty array of positive values")
    t = r.shape[-1] / (1.0 / r).sum(axis=-1)
    return float(t) if r.ndim == 1 else t


def slot_weights(rates, traffic_per_pair: float) -> np.ndarray:
    """Slots per derangement so each pair moves ``traffic_per_pair`` per round.

    k_n = traffic_per_pair / r_n (real valued; fair throughput is exact for
    fractional weights). See :func:`integer_slot_weights` for the smallest
    proportional integer schedule.
    """
    r = np.asarray(rates, dtype=float)
    if np.any(r <= 0) or not traffic_per_pair > 0:
        raise ValueError("rates and traffic_per_pair must be positive")
    return traffic_per_pair / r


def integer_slot_weights(rates, traffic_per_pair: float,
                         tolerance: float = 1e-6) -> np.ndarray:
    """Smallest integer slot counts proportional to the fair weights.

    Each ratio k_n / k_min is approximated by a rational with relative
    error at most ``tolerance``; the result is the smallest integer vector
    realizing those ratios.
    """
    k = slot_weights(rates, traffic_per_pair)
    base = k.min()
    max_den = max(1, math.ceil(1.0 / tolerance))
    fracs = [Fraction(v / base).limit_denominator(max_den) for v in k]
    lcm = math.lcm(*(f.denominator for f in fracs))
    ints = [int(f * lcm) for f in fracs]
    g = math.gcd(*ints)
    return np.array([v // g for v in ints], dtype=np.int64)


@dataclass(frozen=True)
class Schedule:
    """A fair round: fractional slot weights satisfying k_n * r_n = c."""

    rates: tuple[float, ...]
    weights: tuple[float, ...]
    traffic_per_pair: float

    def __post_init__(self):
        if len(self.rates) != len(self.weights):
            raise ValueError("rates and weights must have the same length")
        for r, k in zip(self.rates, self.weights):
            if abs(k * r - self.traffic_per_pair) > 1e-10 * self.traffic_per_pair:
                raise ValueError("weights do not satisfy k_n * r_n = traffic_per_pair")

    @property
    def round_length(self) -> float:
        return sum(self.weights)

    def throughput(self) -> float:
        """(N-1) * c / round length; equals fair_throughput(rates)."""
        return len(self.weights) * self.traffic_per_pair / self.round_length


def build_schedule(rates, traffic_per_pair: float = 1.0) -> Schedule:
    k = slot_weights(rates, traffic_per_pair)
    return Schedule(tuple(float(r) for r in np.asarray(rates, dtype=float)),
                    tuple(float(v) for v in k), traffic_per_pair)


@dataclass(frozen=True)
class TrafficDemand:
    """A stream label for every ordered station pair.

    ``streams[(i, j)]`` names the stream station i sends to station j
    (0-indexed). Repeating a label across destinations of the same source
    expresses multicast or broadcast. Every ordered pair must be present.
    """

    n: int
    streams: dict

    def __post_init__(self):
        expected = {(i, j) for i in range(self.n) for j in range(self.n) if i != j}
        got = set(self.streams)
        if got != expected:
            missing = sorted(expected - got)
            extra = sorted(got - expected)
            raise ValueError(f"demand pairs mismatch: missing {missing}, unexpected {extra}")

    def stream_counts(self) -> tuple[int, ...]:
        """Number of distinct streams per source station."""
        return tuple(
            len({lab for (i, _), lab in self.streams.items() if i == src})
            for src in range(self.n)
        )

    def to_text(self) -> str:
        lines = [f"n={self.n}"]
        for (i, j) in sorted(self.streams):
            lines.append(f"{i + 1} {j + 1} {self.streams[(i, j)]}")
        return "\n".join(lines) + "\n"


def parse_demand(text: str) -> TrafficDemand:
    """Parse the demand file format: header ``n=<N>`` then ``i j label`` lines."""
    lines = [ln.strip() for ln in text.splitlines() if ln.strip() and not ln.startswith("#")]
    if not lines or not lines[0].startswith("n="):
        raise ValueError("demand file must start with a 'n=<N>' header")
    n = int(lines[0][2:])
    streams = {}
    for ln in lines[1:]:
        fields = ln.split(None, 2)
        if len(fields) != 3:
            raise ValueError(f"bad demand line: {ln!r}")
        i, j, label = int(fields[0]) - 1, int(fields[1]) - 1, fields[2]
        streams[(i, j)] = label
    return TrafficDemand(n, streams)


@dataclass(frozen=True)
class SlotAssignment:
    """Per-slot transmissions realizing a demand over one fair round.

    Each slot pairs the derangement in force with the tuple of labels sent
    (entry i is the stream station i transmits).
    """

    slots: tuple[tuple[Derangement, tuple[str, ...]], ...]

    def served_pairs(self):
        """Every (source, destination, label) delivered, in slot order."""
        out = []
        for der, labels in self.slots:
            for src, dst in enumerate(der.transmit_to()):
                out.append((src, dst, labels[src]))
        return out

    def to_text(self) -> str:
        lines = []
        for k, (der, labels) in enumerate(self.slots, start=1):
            lines.append(f"slot={k} derangement={der.to_line()} tx={','.join(labels)}")
        return "\n".join(lines) + "\n"

    @classmethod
    def from_text(cls, text: str) -> "SlotAssignment":
        slots = []
        pat = re.compile(r"slot=(\d+) derangement=([\d ]+) tx=(.*)")
        for ln in text.splitlines():
            ln = ln.strip()
            if not ln:
                continue
            m = pat.fullmatch(ln)
            if not m:
                raise ValueError(f"bad slot line: {ln!r}")
            der = Derangement.from_line(m.group(2))
            slots.append((der, tuple(m.group(3).split(","))))
        return cls(tuple(slots))


def realize_demand(demand: TrafficDemand, cset: CondensedSet) -> SlotAssignment:
    """Schedule one unit-weight slot per derangement to serve every pair once.

    In the slot for derangement D, station i transmits the stream it owes
    to D's destination for i. The condensed-set property guarantees each
    ordered pair is served exactly once across the round.
    """
    if demand.n != cset.n:
        raise DimensionMismatch(
            f"demand has {demand.n} stations, condensed set has {cset.n}"
        )
    slots = []
    for der in cset.derangements:
        dest = der.transmit_to()
        labels = tuple(demand.streams[(i, dest[i])] for i in range(demand.n))
        slots.append((der, labels))
    return SlotAssignment(tuple(slots))
