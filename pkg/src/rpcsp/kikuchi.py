"""Kikuchi lift of an even-arity XOR instance and the spectral certificate.

Vertices are the l-subsets of [n] in colex rank order. A clause with distinct
entries, flattened to a set C, connects S and T whenever S xor T = C; each
clause produces exactly

    D = C(k, k/2) * C(n-k, l-k/2)

stored entries of the full symmetric matrix (ordered pairs), all carrying the
clause's rhs. Duplicate clause-sets accumulate additively.

For z_S = prod_{i in S} x_i the quadratic form collapses to

    z^T A z = D * sum_{C in H'} b_C x_C,

so ||A|| * C(n,l) / (m * D), plus the fraction of dropped (repeated-entry)
clauses, upper-bounds max_x over the full instance of the mean signed clause
value. That bound is what refutation_certificate returns.
"""
from __future__ import annotations

from dataclasses import dataclass
from itertools import combinations
from math import comb

import numpy as np
import scipy.sparse as sp

from .errors import (
    ConvergenceError,
    FormatError,
    ParameterError,
    ResourceLimitError,
    UnsupportedConfigError,
)
from .instances import Assignment, XorInstance, atomic_write_bytes, clean, validate_assignment
from .rng import STREAM_SPECTRAL, check_seed, derived_rng

DEFAULT_VERTEX_CAP = 5_000_000


def _comb_table(n: int, ell: int) -> np.ndarray:
    """table[v, j] = C(v, j) for 0 <= v <= n, 0 <= j <= ell."""
    t = np.zeros((n + 1, ell + 1), dtype=np.int64)
    t[:, 0] = 1
    for v in range(1, n + 1):
        for j in range(1, ell + 1):
            t[v, j] = t[v - 1, j] + t[v - 1, j - 1]
    return t


def subset_rank(elems: np.ndarray, table: np.ndarray) -> np.ndarray:
    """Colex rank of sorted 0-based subsets; elems is (..., l)."""
    ell = elems.shape[-1]
    j = np.arange(1, ell + 1)
    return table[elems, j].sum(axis=-1)


def all_subsets(n: int, ell: int) -> np.ndarray:
    """All l-subsets of {0..n-1} as a (C(n,l), l) array, lex order."""
    return np.array(list(combinations(range(n), ell)), dtype=np.int64).reshape(-1, ell)


@dataclass
class KikuchiMatrix:
    n: int
    ell: int
    k: int
    matrix: sp.csr_matrix
    pairs_per_clause: int
    num_vertices: int
    used_clauses: int
    dropped_clauses: int

    @property
    def total_clauses(self) -> int:
        return self.used_clauses + self.dropped_clauses

    def parity_vector(self, x: Assignment) -> np.ndarray:
        """z with z_S = prod_{i in S} x_i, indexed by colex rank."""
        x = validate_assignment(x, self.n)
        subs = all_subsets(self.n, self.ell)
        table = _comb_table(self.n, self.ell)
        z = np.empty(self.num_vertices, dtype=np.int8)
        z[subset_rank(subs, table)] = np.prod(x[subs], axis=1)
        return z

    def quadratic_form(self, x: Assignment) -> int:
        z = self.parity_vector(x).astype(np.int64)
        return int(z @ (self.matrix @ z))


def build_kikuchi(inst: XorInstance, ell: int, vertex_cap: int = DEFAULT_VERTEX_CAP) -> KikuchiMatrix:
    """Assemble the level-l matrix from the distinct-entry clauses of inst."""
    k = inst.k
    if k % 2 != 0:
        raise UnsupportedConfigError(f"Kikuchi lift needs even arity, got k={k}")
    if not (k // 2 <= ell <= inst.n):
        raise ParameterError(f"need k/2 <= ell <= n, got ell={ell}")
    if ell - k // 2 > inst.n - k:
        raise ParameterError("ell too large: clause complements cannot fill a vertex")
    num_vertices = comb(inst.n, ell)
    if num_vertices > vertex_cap:
        raise ResourceLimitError(
            f"C({inst.n},{ell}) = {num_vertices} vertices exceeds cap {vertex_cap}"
        )
    cleaned, _ = clean(inst)
    pairs_per_clause = comb(k, k // 2) * comb(inst.n - k, ell - k // 2)

    table = _comb_table(inst.n, ell)
    if cleaned.m == 0:
        mat = sp.csr_matrix((num_vertices, num_vertices), dtype=np.int64)
        return KikuchiMatrix(inst.n, ell, k, mat, pairs_per_clause, num_vertices,
                             0, inst.m)

    sets = np.sort(cleaned.scopes, axis=1) - 1  # 0-based, sorted
    uniq, inverse = np.unique(sets, axis=0, return_inverse=True)
    weights = np.zeros(len(uniq), dtype=np.int64)
    np.add.at(weights, inverse, cleaned.rhs.astype(np.int64))

    half_choices = list(combinations(range(k), k // 2))
    rows_parts, cols_parts, data_parts = [], [], []
    if ell == k // 2:
        # No complement padding: vectorize over clauses for each half split.
        for half in half_choices:
            rest = tuple(j for j in range(k) if j not in half)
            s_rank = subset_rank(uniq[:, half], table)
            t_rank = subset_rank(uniq[:, rest], table)
            rows_parts.append(s_rank)
            cols_parts.append(t_rank)
            data_parts.append(weights)
    else:
        pad = ell - k // 2
        for cset, w in zip(uniq, weights):
            in_c = np.zeros(inst.n, dtype=bool)
            in_c[cset] = True
            complement = np.flatnonzero(~in_c)
            for half in half_choices:
                rest = tuple(j for j in range(k) if j not in half)
                a = cset[list(half)]
                b = cset[list(rest)]
                for wpad in combinations(complement, pad):
                    s = np.sort(np.concatenate([a, wpad]))
                    t = np.sort(np.concatenate([b, wpad]))
                    rows_parts.append(subset_rank(s[None, :], table))
                    cols_parts.append(subset_rank(t[None, :], table))
                    data_parts.append(np.array([w], dtype=np.int64))

    rows = np.concatenate(rows_parts)
    cols = np.concatenate(cols_parts)
    data = np.concatenate(data_parts)
    mat = sp.coo_matrix((data, (rows, cols)), shape=(num_vertices, num_vertices),
                        dtype=np.int64).tocsr()
    mat.eliminate_zeros()
    return KikuchiMatrix(inst.n, ell, k, mat, pairs_per_clause, num_vertices,
                         cleaned.m, inst.m - cleaned.m)


def spectral_norm(kik: KikuchiMatrix | sp.spmatrix, tol: float = 1e-3,
                  max_iters: int = 20000, seed: int = 0) -> float:
    """Largest singular value estimate by power iteration on A^2.

    The Rayleigh estimate ||A v|| never exceeds ||A|| and is monotone along
    the iteration, so at convergence it lies in [(1-tol)||A||, ||A||].
    Raises ConvergenceError (carrying the best estimate) if the iteration
    budget runs out.
    """
    if not (1e-8 < tol < 0.5):
        raise ParameterError("tol must lie in (1e-8, 0.5)")
    if max_iters < 1:
        raise ParameterError("max_iters must be >= 1")
    a = kik.matrix if isinstance(kik, KikuchiMatrix) else kik
    a = a.tocsr().astype(np.float64)
    if a.nnz == 0:
        return 0.0
    rng = derived_rng(check_seed(seed), STREAM_SPECTRAL)
    dim = a.shape[0]
    v = rng.standard_normal(dim)
    v /= np.linalg.norm(v)
    lam_prev = 0.0
    stable = 0
    for it in range(1, max_iters + 1):
        w = a @ v
        lam = float(np.linalg.norm(w))
        if lam == 0.0:
            v = rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            continue
        y = a @ w
        ny = np.linalg.norm(y)
        if ny == 0.0:
            # w is in the kernel of A but lam = ||w|| > 0 cannot happen for
            # symmetric A with A v = w != 0; restart defensively.
            v = rng.standard_normal(dim)
            v /= np.linalg.norm(v)
            continue
        v = y / ny
        if it >= 30 and lam > 0 and (lam - lam_prev) <= (tol / 8.0) * lam:
            stable += 1
            if stable >= 3:
                return lam
        else:
            stable = 0
        lam_prev = lam
    raise ConvergenceError(
        f"spectral norm estimate did not settle in {max_iters} iterations",
        best_estimate=lam_prev, iterations=max_iters,
    )


@dataclass
class RefutationReport:
    delta_hat: float
    spectral_estimate: float
    num_vertices: int
    pairs_per_clause: int
    used_clauses: int
    dropped_clauses: int
    nnz: int


def refute_report(inst: XorInstance, ell: int, tol: float = 1e-3,
                  max_iters: int = 20000, seed: int = 0,
                  vertex_cap: int = DEFAULT_VERTEX_CAP) -> RefutationReport:
    if inst.m == 0:
        raise ParameterError("cannot certify an empty instance")
    kik = build_kikuchi(inst, ell, vertex_cap=vertex_cap)
    lam = 0.0 if kik.matrix.nnz == 0 else spectral_norm(kik, tol=tol, max_iters=max_iters, seed=seed)
    # lam / (1 - tol) upper-bounds ||A|| at convergence, keeping the bound sound.
    dropped_frac = kik.dropped_clauses / inst.m
    delta = (lam / (1.0 - tol)) * kik.num_vertices / (inst.m * kik.pairs_per_clause) + dropped_frac
    return RefutationReport(
        delta_hat=float(delta),
        spectral_estimate=float(lam),
        num_vertices=kik.num_vertices,
        pairs_per_clause=kik.pairs_per_clause,
        used_clauses=kik.used_clauses,
        dropped_clauses=kik.dropped_clauses,
        nnz=int(kik.matrix.nnz),
    )


def refutation_certificate(inst: XorInstance, ell: int, tol: float = 1e-3,
                           max_iters: int = 20000, seed: int = 0,
                           vertex_cap: int = DEFAULT_VERTEX_CAP) -> float:
    """Certified upper bound on max_x of the mean signed clause value."""
    return refute_report(inst, ell, tol=tol, max_iters=max_iters, seed=seed,
                         vertex_cap=vertex_cap).delta_hat


# ---------------------------------------------------------------------------
# binary dump

_TRIPLE = np.dtype([("row", "<i8"), ("col", "<i8"), ("val", "<i4")])


def write_kikuchi_dump(kik: KikuchiMatrix, path: str):
    coo = kik.matrix.tocoo()
    if coo.data.size and np.abs(coo.data).max() > np.iinfo(np.int32).max:
        raise ParameterError("entry magnitude exceeds the 32-bit dump format")
    out = np.empty(coo.nnz, dtype=_TRIPLE)
    out["row"] = coo.row
    out["col"] = coo.col
    out["val"] = coo.data
    header = f"kik {kik.n} {kik.ell} {coo.nnz}\n".encode()
    atomic_write_bytes(path, header + out.tobytes())


def read_kikuchi_dump(path: str) -> tuple[int, int, sp.csr_matrix]:
    """Returns (n, ell, matrix); arity is not recorded in the format."""
    with open(path, "rb") as f:
        header = f.readline().split()
        body = f.read()
    if len(header) != 4 or header[0] != b"kik":
        raise FormatError("expected header 'kik <n> <ell> <nnz>'")
    try:
        n, ell, nnz = (int(t) for t in header[1:])
    except ValueError as e:
        raise FormatError("bad kik header") from e
    if len(body) != nnz * _TRIPLE.itemsize:
        raise FormatError(f"expected {nnz} triples, found {len(body)} bytes")
    triples = np.frombuffer(body, dtype=_TRIPLE)
    dim = comb(n, ell)
    if nnz and (triples["row"].min() < 0 or triples["row"].max() >= dim
                or triples["col"].min() < 0 or triples["col"].max() >= dim):
        raise FormatError("vertex rank out of range")
    mat = sp.coo_matrix(
        (triples["val"].astype(np.int64), (triples["row"], triples["col"])),
        shape=(dim, dim),
    ).tocsr()
    return n, ell, mat
