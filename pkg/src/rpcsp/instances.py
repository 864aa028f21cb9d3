"""Planted XOR and Boolean CSP instances.

Variables take values in {-1,+1} and are indexed 1..n. An XOR clause is an
ordered scope (i_1,...,i_k), possibly with repeats, together with a right-hand
side b in {-1,+1}; the clause asks prod_j x_{i_j} = b. A CSP clause applies a
fixed k-ary predicate to literal-negated variables.

Pattern indexing convention used everywhere (truth tables, planting
distributions): a sign pattern y in {-1,+1}^k maps to the bit index
sum_j 2^(j-1)*[y_j == -1], so the all-plus pattern is index 0.
"""
from __future__ import annotations

import os
from dataclasses import dataclass, field
from typing import Iterable, Iterator

import numpy as np

from .errors import FormatError, ParameterError
from .rng import (
    STREAM_NEGATIONS,
    STREAM_NOISE,
    STREAM_PLANTED,
    STREAM_SCOPES,
    check_seed,
    derived_rng,
)

Assignment = np.ndarray  # shape (n,), int8, entries +-1


# ---------------------------------------------------------------------------
# assignments and small shared helpers


def validate_assignment(x: np.ndarray, n: int | None = None) -> Assignment:
    x = np.asarray(x)
    if x.ndim != 1 or x.size == 0:
        raise ParameterError("assignment must be a nonempty vector")
    if not np.isin(x, (-1, 1)).all():
        raise ParameterError("assignment entries must be +-1")
    if n is not None and x.size != n:
        raise ParameterError(f"assignment has {x.size} entries, expected {n}")
    return x.astype(np.int8)


def random_assignment(n: int, seed: int) -> Assignment:
    if n < 1:
        raise ParameterError("n must be >= 1")
    rng = derived_rng(check_seed(seed), STREAM_PLANTED)
    return (2 * rng.integers(0, 2, size=n) - 1).astype(np.int8)


def sign_round(v: np.ndarray) -> np.ndarray:
    """Entrywise sign with sign(0) = +1."""
    return np.where(np.asarray(v) >= 0, 1, -1).astype(np.int8)


def corr(x: np.ndarray, y: np.ndarray) -> float:
    """Normalized inner product <x,y>/(|x||y|); 0 if either vector is zero."""
    x = np.asarray(x, dtype=np.float64)
    y = np.asarray(y, dtype=np.float64)
    nx = np.linalg.norm(x)
    ny = np.linalg.norm(y)
    if nx == 0.0 or ny == 0.0:
        return 0.0
    return float(x @ y / (nx * ny))


def pattern_index(y: np.ndarray) -> np.ndarray:
    """Bit index of sign pattern(s); last axis is the pattern axis."""
    y = np.asarray(y)
    k = y.shape[-1]
    weights = (1 << np.arange(k, dtype=np.int64))
    return ((y < 0).astype(np.int64) @ weights)


def index_to_pattern(idx: int, k: int) -> tuple[int, ...]:
    return tuple(-1 if (idx >> j) & 1 else 1 for j in range(k))


def all_patterns(k: int) -> np.ndarray:
    """All 2^k sign patterns as an array, row i = pattern with index i."""
    idx = np.arange(1 << k, dtype=np.int64)
    bits = (idx[:, None] >> np.arange(k)) & 1
    return (1 - 2 * bits).astype(np.int8)


# ---------------------------------------------------------------------------
# scopes and XOR instances


@dataclass(frozen=True)
class Scope:
    """Ordered variable tuple of a clause, 1-based, repeats allowed."""

    indices: tuple[int, ...]

    def __post_init__(self):
        if len(self.indices) == 0:
            raise ParameterError("scope must have arity >= 1")
        if any(i < 1 for i in self.indices):
            raise ParameterError("scope indices are 1-based and must be >= 1")

    @property
    def k(self) -> int:
        return len(self.indices)

    @property
    def distinct(self) -> bool:
        return len(set(self.indices)) == len(self.indices)


def evaluate_xor_clause(x: Assignment, scope: Scope | Iterable[int]) -> int:
    """Product of x over the scope entries (repeats square away)."""
    idx = scope.indices if isinstance(scope, Scope) else tuple(scope)
    return int(np.prod(np.asarray(x)[np.asarray(idx, dtype=np.int64) - 1]))


def _check_scope_array(scopes: np.ndarray, n: int) -> np.ndarray:
    scopes = np.asarray(scopes, dtype=np.int64)
    if scopes.ndim != 2:
        raise ParameterError("scopes must be a (m, k) array")
    if scopes.size and (scopes.min() < 1 or scopes.max() > n):
        raise ParameterError("scope index out of range 1..n")
    return scopes


@dataclass
class XorInstance:
    """m XOR clauses of arity k over n variables.

    Scopes are stored as a (m, k) integer array, right-hand sides as a (m,)
    +-1 array. Clause order is significant (the solver splits on it) and
    duplicates are permitted. m = 0 is allowed for derived instances; the
    samplers and file readers enforce m >= 1.
    """

    n: int
    k: int
    scopes: np.ndarray
    rhs: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("n must be >= 1")
        if self.k < 1 or self.k > self.n:
            raise ParameterError("need 1 <= k <= n")
        self.scopes = _check_scope_array(self.scopes, self.n)
        if self.scopes.shape[1] != self.k:
            raise ParameterError("scope arity does not match k")
        self.rhs = np.asarray(self.rhs)
        if self.rhs.shape != (self.scopes.shape[0],):
            raise ParameterError("rhs length does not match clause count")
        if self.rhs.size and not np.isin(self.rhs, (-1, 1)).all():
            raise ParameterError("rhs entries must be +-1")
        self.rhs = self.rhs.astype(np.int8)

    @property
    def m(self) -> int:
        return self.scopes.shape[0]

    def clauses(self) -> Iterator[tuple[Scope, int]]:
        for row, b in zip(self.scopes, self.rhs):
            yield Scope(tuple(int(i) for i in row)), int(b)

    def clause_products(self, x: Assignment) -> np.ndarray:
        """prod_j x_{i_j} per clause, as a (m,) +-1 array."""
        x = np.asarray(x)
        if self.m == 0:
            return np.zeros(0, dtype=np.int8)
        return np.prod(x[self.scopes - 1], axis=1).astype(np.int8)


def clean(inst: XorInstance) -> tuple[XorInstance, float]:
    """Drop clauses with repeated scope entries.

    Returns the restricted instance (order and multiplicity preserved) and
    the fraction of clauses dropped.
    """
    if inst.m == 0:
        return inst, 0.0
    s = np.sort(inst.scopes, axis=1)
    distinct = np.all(s[:, 1:] != s[:, :-1], axis=1) if inst.k > 1 else np.ones(inst.m, bool)
    kept = XorInstance(inst.n, inst.k, inst.scopes[distinct], inst.rhs[distinct])
    return kept, float(1.0 - distinct.mean())


def sample_planted_xor(x_star: Assignment, m: int, k: int, eps: float, seed: int) -> XorInstance:
    """Planted noisy k-XOR.

    Scopes are m i.i.d. uniform draws from [n]^k (with replacement, inside
    each tuple too). Each rhs equals the planted product with probability
    1/2 + eps, independently. eps = 1/2 is the noiseless case.

    The scope stream does not depend on eps: instances with the same seed and
    different eps share their hypergraph.
    """
    x_star = validate_assignment(x_star)
    n = x_star.size
    if m < 1:
        raise ParameterError("m must be >= 1")
    if not (1 <= k <= n):
        raise ParameterError("need 1 <= k <= n")
    if not (0.0 < eps <= 0.5):
        raise ParameterError("eps must lie in (0, 1/2]")
    seed = check_seed(seed)
    scopes = derived_rng(seed, STREAM_SCOPES).integers(1, n + 1, size=(m, k), dtype=np.int64)
    u = derived_rng(seed, STREAM_NOISE).random(m)
    planted = np.prod(x_star[scopes - 1], axis=1).astype(np.int8)
    flip = u >= 0.5 + eps
    rhs = np.where(flip, -planted, planted).astype(np.int8)
    return XorInstance(n, k, scopes, rhs)


def value(inst, x: Assignment) -> float:
    """Fraction of clauses satisfied by x (XOR or CSP instance)."""
    if isinstance(inst, XorInstance):
        x = validate_assignment(x, inst.n)
        if inst.m == 0:
            raise ParameterError("value of an empty instance is undefined")
        return float(np.mean(inst.clause_products(x) == inst.rhs))
    if isinstance(inst, CspInstance):
        return _csp_value(inst, x)
    raise ParameterError(f"unsupported instance type {type(inst).__name__}")


# ---------------------------------------------------------------------------
# predicates, planting distributions, CSP instances


@dataclass(frozen=True)
class CspPredicate:
    """k-ary Boolean predicate as a dense truth table.

    table[i] is the value on the sign pattern with index i.
    """

    k: int
    table: np.ndarray

    def __post_init__(self):
        if not (1 <= self.k <= 20):
            raise ParameterError("predicate arity must be in 1..20")
        t = np.asarray(self.table)
        if t.shape != (1 << self.k,) or not np.isin(t, (0, 1)).all():
            raise ParameterError("truth table must be 2^k entries of 0/1")
        object.__setattr__(self, "table", t.astype(np.uint8))

    @property
    def trivial(self) -> bool:
        return bool(self.table.all())

    def evaluate(self, y: np.ndarray) -> np.ndarray:
        return self.table[pattern_index(y)]

    def satisfying_patterns(self) -> np.ndarray:
        return all_patterns(self.k)[self.table.astype(bool)]

    def to_hex(self) -> str:
        packed = np.packbits(self.table, bitorder="little")
        bits = int.from_bytes(packed.tobytes(), "little")
        width = max(1, ((1 << self.k) + 3) // 4)
        return format(bits, f"0{width}x")

    @classmethod
    def from_hex(cls, k: int, hex_str: str) -> "CspPredicate":
        try:
            bits = int(hex_str, 16)
        except ValueError as e:
            raise FormatError(f"bad truth table hex {hex_str!r}") from e
        if bits < 0 or bits >> (1 << k):
            raise FormatError("truth table hex does not fit 2^k bits")
        raw = bits.to_bytes(((1 << k) + 7) // 8, "little")
        table = np.unpackbits(np.frombuffer(raw, dtype=np.uint8), bitorder="little")[: 1 << k]
        return cls(k, table)

    @classmethod
    def k_sat(cls, k: int) -> "CspPredicate":
        """OR of k literals: false only on the all-minus pattern."""
        table = np.ones(1 << k, dtype=np.uint8)
        table[(1 << k) - 1] = 0
        return cls(k, table)

    @classmethod
    def k_xor(cls, k: int, parity: int = 1) -> "CspPredicate":
        """Product of the k literals equals `parity`."""
        if parity not in (-1, 1):
            raise ParameterError("parity must be +-1")
        prods = all_patterns(k).prod(axis=1)
        return cls(k, (prods == parity).astype(np.uint8))

    @classmethod
    def always_true(cls, k: int) -> "CspPredicate":
        return cls(k, np.ones(1 << k, dtype=np.uint8))


@dataclass(frozen=True)
class PlantingDistribution:
    """Distribution over sign patterns in {-1,+1}^k used to plant clauses."""

    k: int
    mass: dict = field(default_factory=dict)

    def __post_init__(self):
        if not (1 <= self.k <= 20):
            raise ParameterError("planting arity must be in 1..20")
        norm = {}
        for y, p in self.mass.items():
            y = tuple(int(v) for v in y)
            if len(y) != self.k or any(v not in (-1, 1) for v in y):
                raise ParameterError(f"bad pattern {y}")
            if y in norm:
                raise ParameterError(f"pattern {y} listed twice")
            p = float(p)
            if p < 0.0:
                raise ParameterError("masses must be nonnegative")
            if p > 0.0:
                norm[y] = p
        object.__setattr__(self, "mass", norm)
        self.validate()

    def validate(self):
        total = sum(self.mass.values())
        if abs(total - 1.0) > 1e-12:
            raise ParameterError(f"masses sum to {total!r}, not 1")

    def prob(self, y) -> float:
        return self.mass.get(tuple(int(v) for v in y), 0.0)

    def support_arrays(self) -> tuple[np.ndarray, np.ndarray]:
        """Support patterns (sorted by pattern index) and their masses."""
        items = sorted(self.mass.items(), key=lambda kv: pattern_index(np.array(kv[0])))
        pats = np.array([y for y, _ in items], dtype=np.int8)
        probs = np.array([p for _, p in items], dtype=np.float64)
        return pats, probs

    def supported_on(self, pred: CspPredicate) -> bool:
        if pred.k != self.k:
            return False
        return all(pred.evaluate(np.array(y)) == 1 for y in self.mass)

    @classmethod
    def uniform_over(cls, patterns) -> "PlantingDistribution":
        pats = [tuple(int(v) for v in y) for y in patterns]
        if not pats:
            raise ParameterError("need at least one support pattern")
        return cls(len(pats[0]), {y: 1.0 / len(pats) for y in pats})

    @classmethod
    def uniform_satisfying(cls, pred: CspPredicate) -> "PlantingDistribution":
        return cls.uniform_over(pred.satisfying_patterns())

    @classmethod
    def point_mass(cls, y) -> "PlantingDistribution":
        y = tuple(int(v) for v in y)
        return cls(len(y), {y: 1.0})

    @classmethod
    def uniform(cls, k: int) -> "PlantingDistribution":
        return cls.uniform_over(all_patterns(k))


@dataclass
class CspInstance:
    """m applications of one predicate with per-clause literal negations."""

    n: int
    predicate: CspPredicate
    scopes: np.ndarray
    negations: np.ndarray

    def __post_init__(self):
        if self.n < 1:
            raise ParameterError("n must be >= 1")
        k = self.predicate.k
        if k > self.n:
            raise ParameterError("need k <= n")
        self.scopes = _check_scope_array(self.scopes, self.n)
        if self.scopes.shape[1] != k:
            raise ParameterError("scope arity does not match predicate")
        neg = np.asarray(self.negations)
        if neg.shape != self.scopes.shape:
            raise ParameterError("negations shape must match scopes")
        if neg.size and not np.isin(neg, (-1, 1)).all():
            raise ParameterError("negations must be +-1")
        self.negations = neg.astype(np.int8)

    @property
    def k(self) -> int:
        return self.predicate.k

    @property
    def m(self) -> int:
        return self.scopes.shape[0]

    def literal_values(self, x: Assignment) -> np.ndarray:
        return (self.negations * np.asarray(x)[self.scopes - 1]).astype(np.int8)


def _csp_value(inst: CspInstance, x: Assignment) -> float:
    x = validate_assignment(x, inst.n)
    if inst.m == 0:
        raise ParameterError("value of an empty instance is undefined")
    return float(np.mean(inst.predicate.evaluate(inst.literal_values(x))))


def sample_planted_csp(
    x_star: Assignment,
    m: int,
    predicate: CspPredicate,
    q: PlantingDistribution,
    seed: int,
) -> CspInstance:
    """Planted CSP: scopes uniform from [n]^k, negations planted through q.

    Literal negations satisfy P[neg = y] = q(y * x_star_scope) per clause,
    so the planted-through pattern neg * x_star_scope is distributed as q.
    When q is supported on the predicate's satisfying set, x_star satisfies
    every clause.
    """
    x_star = validate_assignment(x_star)
    n = x_star.size
    k = predicate.k
    if m < 1:
        raise ParameterError("m must be >= 1")
    if k > n:
        raise ParameterError("need k <= n")
    if q.k != k:
        raise ParameterError("planting arity does not match predicate")
    q.validate()
    if not q.supported_on(predicate):
        raise ParameterError("planting distribution puts mass on falsifying patterns")
    seed = check_seed(seed)
    scopes = derived_rng(seed, STREAM_SCOPES).integers(1, n + 1, size=(m, k), dtype=np.int64)
    pats, probs = q.support_arrays()
    pick = derived_rng(seed, STREAM_NEGATIONS).choice(len(pats), size=m, p=probs)
    negations = (pats[pick] * x_star[scopes - 1]).astype(np.int8)
    return CspInstance(n, predicate, scopes, negations)


# ---------------------------------------------------------------------------
# file formats

_TMP_SUFFIX = ".tmp"


def atomic_write_text(path: str, text: str):
    tmp = path + _TMP_SUFFIX
    with open(tmp, "w") as f:
        f.write(text)
    os.replace(tmp, path)


def atomic_write_bytes(path: str, data: bytes):
    tmp = path + _TMP_SUFFIX
    with open(tmp, "wb") as f:
        f.write(data)
    os.replace(tmp, path)


def _parse_ints(tokens, what: str) -> np.ndarray:
    try:
        return np.array([int(t) for t in tokens], dtype=np.int64)
    except ValueError as e:
        raise FormatError(f"non-integer token in {what}") from e


def write_xor(inst: XorInstance, path: str):
    lines = [f"xor {inst.n} {inst.m} {inst.k}"]
    for row, b in zip(inst.scopes, inst.rhs):
        lines.append(f"{int(b):+d} " + " ".join(str(int(i)) for i in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_xor(path: str) -> XorInstance:
    with open(path) as f:
        header = f.readline().split()
        body = f.read().split()
    if len(header) != 4 or header[0] != "xor":
        raise FormatError("expected header 'xor <n> <m> <k>'")
    n, m, k = (int(t) for t in header[1:])
    if m < 1:
        raise FormatError("instance must have m >= 1 clauses")
    if len(body) != m * (k + 1):
        raise FormatError(f"expected {m * (k + 1)} body tokens, found {len(body)}")
    flat = _parse_ints(body, "xor clause")
    rows = flat.reshape(m, k + 1)
    rhs = rows[:, 0]
    if not np.isin(rhs, (-1, 1)).all():
        raise FormatError("clause rhs must be +-1")
    try:
        return XorInstance(n, k, rows[:, 1:], rhs)
    except ParameterError as e:
        raise FormatError(str(e)) from e


def write_csp(inst: CspInstance, path: str):
    lines = [f"csp {inst.n} {inst.m} {inst.k} {inst.predicate.to_hex()}"]
    for row, neg in zip(inst.scopes, inst.negations):
        lines.append(" ".join(f"{int(i)} {int(s):+d}" for i, s in zip(row, neg)))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_csp(path: str) -> CspInstance:
    with open(path) as f:
        header = f.readline().split()
        body = f.read().split()
    if len(header) != 5 or header[0] != "csp":
        raise FormatError("expected header 'csp <n> <m> <k> <truth_table_hex>'")
    n, m, k = (int(t) for t in header[1:4])
    if m < 1:
        raise FormatError("instance must have m >= 1 clauses")
    pred = CspPredicate.from_hex(k, header[4])
    if len(body) != m * 2 * k:
        raise FormatError(f"expected {m * 2 * k} body tokens, found {len(body)}")
    flat = _parse_ints(body, "csp clause")
    rows = flat.reshape(m, 2 * k)
    scopes = rows[:, 0::2]
    negs = rows[:, 1::2]
    if not np.isin(negs, (-1, 1)).all():
        raise FormatError("literal negations must be +-1")
    try:
        return CspInstance(n, pred, scopes, negs)
    except ParameterError as e:
        raise FormatError(str(e)) from e


def write_assignment(x: Assignment, path: str):
    x = validate_assignment(x)
    atomic_write_text(path, " ".join(f"{int(v):+d}" for v in x) + "\n")


def read_assignment(path: str) -> Assignment:
    with open(path) as f:
        tokens = f.read().split()
    if not tokens:
        raise FormatError("empty assignment file")
    vals = _parse_ints(tokens, "assignment")
    if not np.isin(vals, (-1, 1)).all():
        raise FormatError("assignment entries must be +-1")
    return vals.astype(np.int8)
