"""Boolean Fourier analysis of planting distributions.

Coefficients are taken with respect to the parity characters: for S a subset
of coordinate positions 1..k,

    coeff(S) = 2^-k * sum_y q(y) * prod_{j in S} y_j.

The empty set always gets 2^-k for a probability distribution. The
distribution complexity of q is the smallest nonempty |S| whose coefficient
reaches 4^-k in absolute value; distributions with no such S report
complexity 1 with no witness.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from typing import Iterable

import numpy as np

from .errors import FormatError, ParameterError
from .instances import PlantingDistribution, atomic_write_text, pattern_index

# Guard band when comparing |coeff| against the 4^-k threshold, so that
# coefficients sitting exactly at the threshold are accepted despite float
# rounding in the transform.
THRESHOLD_GUARD = 1e-14


def _subset_mask(s: Iterable[int], k: int) -> int:
    mask = 0
    for j in s:
        j = int(j)
        if not (1 <= j <= k):
            raise ParameterError(f"subset element {j} outside 1..{k}")
        if mask & (1 << (j - 1)):
            raise ParameterError("subset has a repeated element")
        mask |= 1 << (j - 1)
    return mask


def fourier_coefficient(q: PlantingDistribution, s: Iterable[int]) -> float:
    """Exact sum over the support of q; s is a subset of positions 1..k."""
    mask = _subset_mask(s, q.k)
    total = 0.0
    for y, p in sorted(q.mass.items()):
        sign = 1
        for j in range(q.k):
            if (mask >> j) & 1 and y[j] == -1:
                sign = -sign
        total += p * sign
    return total / (1 << q.k)


@dataclass(frozen=True)
class FourierTable:
    """All 2^k coefficients, indexed by subset bitmask (bit j-1 <-> position j)."""

    k: int
    values: np.ndarray

    def coefficient(self, s: Iterable[int]) -> float:
        return float(self.values[_subset_mask(s, self.k)])

    def items(self):
        for mask in range(1 << self.k):
            subset = frozenset(j + 1 for j in range(self.k) if (mask >> j) & 1)
            yield subset, float(self.values[mask])


def fourier_table(q: PlantingDistribution) -> FourierTable:
    """All coefficients at once via the fast Walsh-Hadamard butterfly."""
    k = q.k
    f = np.zeros(1 << k, dtype=np.float64)
    for y, p in q.mass.items():
        f[int(pattern_index(np.array(y)))] += p
    # After the butterfly, f[mask] = sum_y q(y) * (-1)^{popcount(mask & idx(y))},
    # and the sign pattern convention makes that exactly the character sum.
    h = 1
    while h < len(f):
        for start in range(0, len(f), 2 * h):
            a = f[start : start + h].copy()
            b = f[start + h : start + 2 * h].copy()
            f[start : start + h] = a + b
            f[start + h : start + 2 * h] = a - b
        h *= 2
    return FourierTable(k, f / (1 << k))


def subsets_by_size(k: int):
    """Nonempty subsets of 1..k ordered by size, then lexicographically."""
    for r in range(1, k + 1):
        yield from combinations(range(1, k + 1), r)


def distribution_complexity(q: PlantingDistribution) -> tuple[int, frozenset | None]:
    """Smallest nonempty subset size reaching the 4^-k threshold.

    Returns (r, witness). Ties at the same size resolve to the
    lexicographically smallest subset. If no coefficient reaches the
    threshold, returns (1, None).
    """
    table = fourier_table(q)
    threshold = 4.0 ** (-q.k) - THRESHOLD_GUARD
    for s in subsets_by_size(q.k):
        if abs(table.coefficient(s)) >= threshold:
            return len(s), frozenset(s)
    return 1, None


def verify_nontrivial(q: PlantingDistribution) -> bool:
    """True iff some nonempty coefficient strictly exceeds 4^-k.

    Guaranteed whenever the support of q is a proper subset of the cube.
    """
    table = fourier_table(q)
    best = max(abs(table.coefficient(s)) for s in subsets_by_size(q.k))
    return best > 4.0 ** (-q.k)


# ---------------------------------------------------------------------------
# planting distribution file format


def write_planting(q: PlantingDistribution, path: str):
    lines = [f"plant {q.k}"]
    pats, probs = q.support_arrays()
    for y, p in zip(pats, probs):
        lines.append(" ".join(f"{int(v):+d}" for v in y) + f" {float(p)!r}")
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_planting(path: str) -> PlantingDistribution:
    with open(path) as f:
        header = f.readline().split()
        rows = [line.split() for line in f if line.strip()]
    if len(header) != 2 or header[0] != "plant":
        raise FormatError("expected header 'plant <k>'")
    try:
        k = int(header[1])
    except ValueError as e:
        raise FormatError("bad arity in plant header") from e
    mass: dict[tuple[int, ...], float] = {}
    for row in rows:
        if len(row) != k + 1:
            raise FormatError(f"expected {k} pattern entries plus a mass, got {len(row)} tokens")
        try:
            y = tuple(int(t) for t in row[:k])
            p = float(row[k])
        except ValueError as e:
            raise FormatError("bad token in planting line") from e
        if any(v not in (-1, 1) for v in y):
            raise FormatError("pattern entries must be +-1")
        if y in mass:
            raise FormatError(f"pattern {y} listed twice")
        mass[y] = p
    try:
        return PlantingDistribution(k, mass)
    except ParameterError as e:
        raise FormatError(str(e)) from e
