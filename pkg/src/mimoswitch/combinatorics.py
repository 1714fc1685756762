"""Switch permutations, derangements and condensed derangement sets.

A switch pattern for ``n`` stations is a permutation: row ``j`` of its
matrix has a one in the column of the station whose data receiver ``j``
gets. A derangement never maps a station to itself. A condensed set is a
family of ``n - 1`` derangements whose matrices sum to the all-ones matrix
minus the identity, i.e. every ordered station pair is served exactly once
per round. Enumeration here is exact and deterministic.

Stations are 0-indexed internally; all text serialization is 1-indexed.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass

import numpy as np

__all__ = [
    "TooLarge",
    "Permutation",
    "Derangement",
    "CondensedSet",
    "derangement_count",
    "enumerate_derangements",
    "is_condensed",
    "enumerate_condensed_sets",
    "parse_condensed_sets",
    "format_condensed_sets",
]

# Full derangement enumeration is capped here; factorial growth makes
# larger n pointless for a simulator with n <= 16 antennas.
ENUMERATION_LIMIT = 10
# Exact-cover search bound for condensed sets.
CONDENSED_SEARCH_LIMIT = 7


class TooLarge(ValueError):
    """Requested enumeration exceeds the supported size bound."""


@dataclass(frozen=True)
class Permutation:
    """A switch pattern: ``recv_from[j]`` is the station receiver ``j`` hears.

    ``recv_from`` is 0-indexed and must be a bijection on ``range(n)``.
    """

    recv_from: tuple[int, ...]

    def __post_init__(self):
        n = len(self.recv_from)
        if n < 1:
            raise ValueError("permutation must be non-empty")
        if sorted(self.recv_from) != list(range(n)):
            raise ValueError(f"recv_from {self.recv_from} is not a bijection on 0..{n - 1}")

    @property
    def n(self) -> int:
        return len(self.recv_from)

    def matrix(self) -> np.ndarray:
        """0/1 switch matrix: row j has a one in column recv_from[j]."""
        p = np.zeros((self.n, self.n))
        p[np.arange(self.n), list(self.recv_from)] = 1.0
        return p

    def transmit_to(self) -> tuple[int, ...]:
        """Inverse map: ``transmit_to[i]`` is the receiver of station i."""
        dest = [0] * self.n
        for j, i in enumerate(self.recv_from):
            dest[i] = j
        return tuple(dest)

    def is_derangement(self) -> bool:
        return all(i != j for j, i in enumerate(self.recv_from))

    def relabel(self, sigma: tuple[int, ...]) -> "Permutation":
        """Apply a station relabeling: new station sigma[k] plays old station k."""
        if sorted(sigma) != list(range(self.n)):
            raise ValueError("sigma must be a bijection of the same size")
        new = [0] * self.n
        for j, i in enumerate(self.recv_from):
            new[sigma[j]] = sigma[i]
        return type(self)(tuple(new))

    def to_line(self) -> str:
        """One-line serialization: 1-indexed recv_from, space separated."""
        return " ".join(str(i + 1) for i in self.recv_from)

    @classmethod
    def from_line(cls, line: str) -> "Permutation":
        fields = line.split()
        if not fields:
            raise ValueError("empty permutation line")
        return cls(tuple(int(f) - 1 for f in fields))

    @classmethod
    def from_transmit_targets(cls, targets) -> "Permutation":
        """Build from the column convention: ``targets[i]`` (1-indexed) is the
        station that station ``i + 1`` transmits to."""
        recv = [0] * len(targets)
        for i, j in enumerate(targets):
            recv[j - 1] = i
        return cls(tuple(recv))


class Derangement(Permutation):
    """A fixed-point-free permutation: no station transmits to itself."""

    def __post_init__(self):
        super().__post_init__()
        for j, i in enumerate(self.recv_from):
            if i == j:
                raise ValueError(f"station {j + 1} maps to itself; not a derangement")


@dataclass(frozen=True)
class CondensedSet:
    """``n - 1`` derangements whose switch matrices sum to J - I.

    Equivalently: for every ordered pair (receiver j, source i), i != j,
    exactly one member has ``recv_from[j] == i``. Validated on construction.
    Members are stored in the order given; :meth:`canonical` sorts them.
    """

    derangements: tuple[Derangement, ...]

    def __post_init__(self):
        if not self.derangements:
            raise ValueError("condensed set must be non-empty")
        if not is_condensed(self.derangements):
            raise ValueError("derangements do not sum to J - I")

    @property
    def n(self) -> int:
        return self.derangements[0].n

    def canonical(self) -> "CondensedSet":
        return CondensedSet(tuple(sorted(self.derangements, key=lambda d: d.recv_from)))

    def relabel(self, sigma: tuple[int, ...]) -> "CondensedSet":
        return CondensedSet(tuple(d.relabel(sigma) for d in self.derangements)).canonical()

    def key(self) -> tuple[tuple[int, ...], ...]:
        """Order-independent identity of the set."""
        return tuple(sorted(d.recv_from for d in self.derangements))

    def to_text(self) -> str:
        return "\n".join(d.to_line() for d in self.derangements)


def derangement_count(n: int) -> int:
    """Number of derangements of n stations: d(1) = 0, d(n) = n*d(n-1) + (-1)^n."""
    if n < 1:
        raise ValueError("n must be >= 1")
    d = 0
    for k in range(2, n + 1):
        d = k * d + (1 if k % 2 == 0 else -1)
    return d


def enumerate_derangements(n: int) -> list[Derangement]:
    """All derangements of n stations in lexicographic order of recv_from."""
    if n < 2:
        raise ValueError("n must be >= 2")
    if n > ENUMERATION_LIMIT:
        raise TooLarge(f"derangement enumeration supports n <= {ENUMERATION_LIMIT}")
    out = []
    for perm in itertools.permutations(range(n)):
        if all(i != j for j, i in enumerate(perm)):
            out.append(Derangement(perm))
    return out


def is_condensed(derangements) -> bool:
    """True iff the permutation matrices sum exactly to J - I."""
    ders = list(derangements)
    if not ders:
        return False
    n = ders[0].n
    if any(d.n != n for d in ders):
        raise ValueError("all derangements must have the same size")
    coverage = np.zeros((n, n), dtype=np.int64)
    for d in ders:
        coverage[np.arange(n), list(d.recv_from)] += 1
    expected = np.ones((n, n), dtype=np.int64) - np.eye(n, dtype=np.int64)
    return bool(np.array_equal(coverage, expected))


def enumerate_condensed_sets(n: int) -> list[CondensedSet]:
    """All condensed derangement sets of n stations (unordered, canonical order).

    Backtracking exact cover over the off-diagonal cells of J - I: cells are
    visited in (row, column) order, candidate derangements in lexicographic
    order, so output is deterministic. Each set is returned once, members
    sorted lexicographically, sets sorted between themselves.
    """
    if n < 3:
        raise ValueError("condensed sets need n >= 3")
    if n > CONDENSED_SEARCH_LIMIT:
        raise TooLarge(f"condensed set search supports n <= {CONDENSED_SEARCH_LIMIT}")

    ders = enumerate_derangements(n)
    # Cell (row j, col i) -> bit j*n + i. The diagonal starts covered.
    masks = []
    for d in ders:
        m = 0
        for j, i in enumerate(d.recv_from):
            m |= 1 << (j * n + i)
        masks.append(m)
    full = (1 << (n * n)) - 1
    start = 0
    for j in range(n):
        start |= 1 << (j * n + j)

    by_cell: dict[int, list[int]] = {}
    for idx, m in enumerate(masks):
        bits = m
        while bits:
            low = bits & -bits
            by_cell.setdefault(low.bit_length() - 1, []).append(idx)
            bits ^= low

    solutions: list[tuple[int, ...]] = []
    chosen: list[int] = []

    def extend(cover: int):
        if cover == full:
            solutions.append(tuple(chosen))
            return
        # lowest uncovered cell, i.e. first in (row, column) order
        cell = ((~cover & full) & -(~cover & full)).bit_length() - 1
        for idx in by_cell.get(cell, ()):
            m = masks[idx]
            if cover & m:
                continue
            chosen.append(idx)
            extend(cover | m)
            chosen.pop()

    extend(start)
    sets = [
        CondensedSet(tuple(ders[i] for i in sol)).canonical() for sol in solutions
    ]
    sets.sort(key=lambda s: tuple(d.recv_from for d in s.derangements))
    return sets


def format_condensed_sets(sets) -> str:
    """Serialize sets: one derangement line per row, blank line between sets."""
    return "\n\n".join(s.to_text() for s in sets) + "\n"


def parse_condensed_sets(text: str) -> list[CondensedSet]:
    sets = []
    for block in text.strip().split("\n\n"):
        lines = [ln for ln in block.splitlines() if ln.strip()]
        if not lines:
            continue
        ders = tuple(Derangement.from_line(ln) for ln in lines)
        sets.append(CondensedSet(ders))
    return sets
