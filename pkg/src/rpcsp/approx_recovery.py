"""Degree-2 pseudo-expectation surrogates and their rounding.

A surrogate is a first-moment vector mu1 and a second-moment matrix m2 with
unit diagonal, entries in [-1,1], m2 PSD, and the bordered block
[[1, mu1^T], [mu1, m2]] PSD (all up to a -1e-8 eigenvalue tolerance). Three
backends produce one:

- brute: exact moments of the uniform distribution over the argmax set of the
  signed clause objective, for small n;
- sdp_basic: low-rank coordinate ascent over unit vectors for arity 2,
  returning the Gram matrix with mu1 = 0;
- kikuchi_spectral: top eigenvector of the level-l lift for even arity,
  averaged back down to an n x n matrix, with mu1 = 0.

The zero mu1 of the non-brute backends is deliberate: the global sign is
unidentifiable there and the solver resolves it in its second stage.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from math import comb, sqrt

import numpy as np
import scipy.sparse as sp
import scipy.sparse.linalg as spla

from .errors import ConvergenceError, FormatError, ParameterError, UnsupportedConfigError
from .instances import (
    Assignment,
    XorInstance,
    atomic_write_text,
    sign_round,
    validate_assignment,
)
from .kikuchi import _comb_table, all_subsets, build_kikuchi, subset_rank
from .rng import STREAM_BACKEND, check_seed, derived_rng

PSD_TOL = 1e-8

BACKEND_KINDS = ("brute", "sdp_basic", "kikuchi_spectral")


@dataclass(frozen=True)
class BackendChoice:
    kind: str
    rank: int | None = None
    iters: int = 200
    assignment_cap: int = 24
    ell: int | None = None

    def __post_init__(self):
        if self.kind not in BACKEND_KINDS:
            raise ParameterError(f"unknown backend {self.kind!r}")
        if self.rank is not None and self.rank < 1:
            raise ParameterError("rank must be >= 1")
        if self.iters < 1:
            raise ParameterError("iteration budget must be >= 1")
        if not (1 <= self.assignment_cap <= 30):
            raise ParameterError("assignment cap must be in 1..30")
        if self.ell is not None and self.ell < 1:
            raise ParameterError("ell must be >= 1")

    @classmethod
    def brute(cls, assignment_cap: int = 24) -> "BackendChoice":
        return cls("brute", assignment_cap=assignment_cap)

    @classmethod
    def sdp_basic(cls, rank: int | None = None, iters: int = 200) -> "BackendChoice":
        return cls("sdp_basic", rank=rank, iters=iters)

    @classmethod
    def kikuchi_spectral(cls, ell: int | None = None, iters: int = 200) -> "BackendChoice":
        return cls("kikuchi_spectral", ell=ell, iters=iters)


@dataclass
class PseudoExpectation:
    n: int
    mu1: np.ndarray
    m2: np.ndarray
    backend: str
    info: dict = field(default_factory=dict)

    def validate(self, psd_tol: float = PSD_TOL):
        mu1 = np.asarray(self.mu1, dtype=np.float64)
        m2 = np.asarray(self.m2, dtype=np.float64)
        if mu1.shape != (self.n,) or m2.shape != (self.n, self.n):
            raise ParameterError("moment shapes do not match n")
        if np.abs(mu1).max(initial=0.0) > 1.0 + 1e-12:
            raise ParameterError("mu1 entries must lie in [-1, 1]")
        if np.abs(m2).max(initial=0.0) > 1.0 + 1e-12:
            raise ParameterError("m2 entries must lie in [-1, 1]")
        if np.abs(np.diag(m2) - 1.0).max() > 1e-9:
            raise ParameterError("m2 diagonal must be 1")
        if np.abs(m2 - m2.T).max() > 1e-9:
            raise ParameterError("m2 must be symmetric")
        if np.linalg.eigvalsh((m2 + m2.T) / 2).min() < -psd_tol:
            raise ParameterError("m2 is not PSD within tolerance")
        block = np.empty((self.n + 1, self.n + 1))
        block[0, 0] = 1.0
        block[0, 1:] = mu1
        block[1:, 0] = mu1
        block[1:, 1:] = m2
        if np.linalg.eigvalsh((block + block.T) / 2).min() < -psd_tol:
            raise ParameterError("bordered moment block is not PSD within tolerance")

    def expect_inner_product(self, x_star: Assignment) -> float:
        """Surrogate expectation of <x, x_star>."""
        x_star = validate_assignment(x_star, self.n)
        return float(self.mu1 @ x_star)

    def expect_inner_product_sq(self, x_star: Assignment) -> float:
        """Surrogate expectation of <x, x_star>^2."""
        x_star = validate_assignment(x_star, self.n)
        xf = x_star.astype(np.float64)
        return float(xf @ self.m2 @ xf)


def clause_objective(inst: XorInstance, m2: np.ndarray) -> float:
    """sum over clauses of rhs * m2 entry (arity-2 instances)."""
    if inst.k != 2:
        raise ParameterError("clause_objective is defined for arity 2")
    i = inst.scopes[:, 0] - 1
    j = inst.scopes[:, 1] - 1
    return float(np.sum(inst.rhs.astype(np.float64) * m2[i, j]))


# ---------------------------------------------------------------------------
# brute backend

_CHUNK = 1 << 16


def _clause_masks(inst: XorInstance) -> np.ndarray:
    """Per-clause parity bitmask; repeated indices cancel pairwise."""
    bits = np.uint64(1) << (inst.scopes - 1).astype(np.uint64)
    return np.bitwise_xor.reduce(bits, axis=1)


def _brute_scan(inst: XorInstance):
    """Exact argmax of the signed clause objective over all assignments.

    Assignment a encodes x_i = -1 iff bit i-1 of a is set. Returns
    (best objective, list of argmax codes as uint64 arrays).
    """
    n = inst.n
    masks = _clause_masks(inst)
    rhs = inst.rhs.astype(np.int64)
    total = 1 << n
    best = None
    for start in range(0, total, _CHUNK):
        a = np.arange(start, min(start + _CHUNK, total), dtype=np.uint64)
        obj = np.zeros(a.size, dtype=np.int64)
        for mask, b in zip(masks, rhs):
            parity = (np.bitwise_count(a & mask) & np.uint64(1)).astype(np.int64)
            obj += b * (1 - 2 * parity)
        chunk_best = int(obj.max())
        if best is None or chunk_best > best:
            best = chunk_best
    winners = []
    for start in range(0, total, _CHUNK):
        a = np.arange(start, min(start + _CHUNK, total), dtype=np.uint64)
        obj = np.zeros(a.size, dtype=np.int64)
        for mask, b in zip(masks, rhs):
            parity = (np.bitwise_count(a & mask) & np.uint64(1)).astype(np.int64)
            obj += b * (1 - 2 * parity)
        winners.append(a[obj == best])
    return best, winners


def _decode(codes: np.ndarray, n: int) -> np.ndarray:
    bits = (codes[:, None] >> np.arange(n, dtype=np.uint64)) & np.uint64(1)
    return (1 - 2 * bits.astype(np.int8)).astype(np.int8)


def _brute_backend(inst: XorInstance, backend: BackendChoice) -> PseudoExpectation:
    if inst.n > backend.assignment_cap:
        raise UnsupportedConfigError(
            f"brute backend capped at n <= {backend.assignment_cap}, got n={inst.n}"
        )
    best, winners = _brute_scan(inst)
    count = sum(w.size for w in winners)
    mu_sum = np.zeros(inst.n, dtype=np.float64)
    m2_sum = np.zeros((inst.n, inst.n), dtype=np.float64)
    for codes in winners:
        if codes.size == 0:
            continue
        x = _decode(codes, inst.n).astype(np.float64)
        mu_sum += x.sum(axis=0)
        m2_sum += x.T @ x
    mu1 = mu_sum / count
    m2 = m2_sum / count
    return PseudoExpectation(
        inst.n, mu1, m2, backend="brute",
        info={"objective": best, "argmax_count": count},
    )


# ---------------------------------------------------------------------------
# sdp_basic backend (arity 2)


def _pair_weights(inst: XorInstance) -> sp.csr_matrix:
    """Symmetric signed weight matrix; diagonal (i==j) clauses are constants."""
    i = inst.scopes[:, 0] - 1
    j = inst.scopes[:, 1] - 1
    off = i != j
    i, j, b = i[off], j[off], inst.rhs[off].astype(np.float64)
    w = sp.coo_matrix(
        (np.concatenate([b, b]), (np.concatenate([i, j]), np.concatenate([j, i]))),
        shape=(inst.n, inst.n),
    )
    return w.tocsr()


def _sdp_backend(inst: XorInstance, backend: BackendChoice, seed: int) -> PseudoExpectation:
    if inst.k != 2:
        raise UnsupportedConfigError(f"sdp_basic handles arity 2, got k={inst.k}")
    n = inst.n
    rank = backend.rank or max(2, int(np.ceil(sqrt(2.0 * n))))
    rank = min(rank, n)
    w = _pair_weights(inst)
    rng = derived_rng(check_seed(seed), STREAM_BACKEND)
    v = rng.standard_normal((n, rank))
    v /= np.linalg.norm(v, axis=1, keepdims=True)
    obj_prev = -np.inf
    iters_run = 0
    for it in range(backend.iters):
        g = w @ v
        norms = np.linalg.norm(g, axis=1)
        keep = norms <= 1e-300  # rows with no gradient keep their value
        norms[keep] = 1.0
        v = np.where(keep[:, None], v, g / norms[:, None])
        obj = float(np.sum(v * (w @ v)))
        iters_run = it + 1
        if obj - obj_prev <= 1e-12 * max(1.0, abs(obj)) and it >= 5:
            break
        obj_prev = obj
    m2 = np.clip(v @ v.T, -1.0, 1.0)
    np.fill_diagonal(m2, 1.0)
    pe = PseudoExpectation(
        n, np.zeros(n), m2, backend="sdp_basic",
        info={"objective": clause_objective(inst, m2), "rank": rank, "iters": iters_run},
    )
    return pe


# ---------------------------------------------------------------------------
# kikuchi_spectral backend (even arity)


def _psd_project_unit_diag(m: np.ndarray) -> np.ndarray:
    """Clip negative eigenvalues, then rescale back to a unit diagonal."""
    sym = (m + m.T) / 2.0
    vals, vecs = np.linalg.eigh(sym)
    vals = np.maximum(vals, 0.0)
    proj = (vecs * vals) @ vecs.T
    d = np.maximum(np.diag(proj).copy(), 1e-12)
    proj /= np.sqrt(np.outer(d, d))
    np.fill_diagonal(proj, 1.0)
    return np.clip(proj, -1.0, 1.0)


def _kikuchi_backend(inst: XorInstance, backend: BackendChoice, seed: int) -> PseudoExpectation:
    if inst.k % 2 != 0:
        raise UnsupportedConfigError(f"kikuchi_spectral needs even arity, got k={inst.k}")
    ell = backend.ell if backend.ell is not None else inst.k // 2
    kik = build_kikuchi(inst, ell)
    n = inst.n
    dim = kik.num_vertices
    if kik.matrix.nnz == 0:
        # No usable clauses: the uninformative uniform-distribution surrogate.
        return PseudoExpectation(n, np.zeros(n), np.eye(n), backend="kikuchi_spectral",
                                 info={"top_eigenvalue": 0.0, "ell": ell})
    a = kik.matrix.astype(np.float64)
    rng = derived_rng(check_seed(seed), STREAM_BACKEND)
    if dim <= 256:
        vals, vecs = np.linalg.eigh(a.toarray())
        top = float(vals[-1])
        v = vecs[:, -1]
    else:
        v0 = rng.standard_normal(dim)
        try:
            vals, vecs = spla.eigsh(a, k=1, which="LA", v0=v0, maxiter=50 * backend.iters)
        except spla.ArpackNoConvergence as e:
            raise ConvergenceError("Kikuchi eigenvector did not converge",
                                   best_estimate=float("nan"), iterations=50 * backend.iters) from e
        top = float(vals[0])
        v = vecs[:, 0]
    w = v * sqrt(dim) / np.linalg.norm(v)

    # Average w_S * w_T over the C(n-2, l-1) vertex pairs with S xor T = {i,j}.
    subs = all_subsets(n, ell)
    table = _comb_table(n, ell)
    ranks = subset_rank(subs, table)
    vertex_vals = w[ranks]
    rows, cols, data = [], [], []
    for p in range(ell):
        dropped = np.delete(subs, p, axis=1)
        rows.append(subs[:, p])
        cols.append(subset_rank(dropped, table) if ell > 1
                    else np.zeros(len(subs), dtype=np.int64))
        data.append(vertex_vals)
    u = sp.coo_matrix(
        (np.concatenate(data), (np.concatenate(rows), np.concatenate(cols))),
        shape=(n, comb(n, ell - 1)),
    ).tocsr()
    raw = (u @ u.T).toarray() / comb(n - 2, ell - 1)
    m2 = np.clip(raw, -1.0, 1.0)
    np.fill_diagonal(m2, 1.0)
    m2 = _psd_project_unit_diag(m2)
    return PseudoExpectation(n, np.zeros(n), m2, backend="kikuchi_spectral",
                             info={"top_eigenvalue": top, "ell": ell})


def solve_pseudo_expectation(inst: XorInstance, backend: BackendChoice, seed: int) -> PseudoExpectation:
    """Run one backend and return its validated surrogate."""
    if inst.m == 0:
        raise ParameterError("cannot build a surrogate from an empty instance")
    if backend.kind == "brute":
        pe = _brute_backend(inst, backend)
    elif backend.kind == "sdp_basic":
        pe = _sdp_backend(inst, backend, seed)
    else:
        pe = _kikuchi_backend(inst, backend, seed)
    pe.validate()
    return pe


# ---------------------------------------------------------------------------
# rounding


def round_odd(pe: PseudoExpectation) -> Assignment:
    """Entrywise sign of the first moments (sign(0) = +1)."""
    return sign_round(np.asarray(pe.mu1))


def round_even_detail(pe: PseudoExpectation, agreement_fraction: float = 0.99):
    """Consensus row rounding.

    Rounds every row of m2 to signs, scores row i by how well its sign vector
    correlates with the others (delta_i = 1 minus the ceil(af*n)-th largest
    absolute correlation), and returns the row with the smallest delta
    (smallest index on ties) together with the per-row deltas.
    """
    if pe.n < 2:
        raise ParameterError("row consensus rounding needs n >= 2")
    if not (0.0 < agreement_fraction <= 1.0):
        raise ParameterError("agreement_fraction must lie in (0, 1]")
    x_rows = sign_round(np.asarray(pe.m2)).astype(np.float64)
    g = np.abs(x_rows @ x_rows.T) / pe.n
    t = int(np.ceil(agreement_fraction * pe.n))
    kth = np.partition(g, pe.n - t, axis=1)[:, pe.n - t]
    deltas = 1.0 - kth
    i_star = int(np.argmin(deltas))
    return x_rows[i_star].astype(np.int8), deltas, i_star


def round_even(pe: PseudoExpectation, agreement_fraction: float = 0.99) -> Assignment:
    x, _, _ = round_even_detail(pe, agreement_fraction)
    return x


# ---------------------------------------------------------------------------
# surrogate dump format


def write_pexp(pe: PseudoExpectation, path: str):
    lines = [f"pexp {pe.n}"]
    lines.append(" ".join(f"{v:.17g}" for v in np.asarray(pe.mu1, dtype=np.float64)))
    for row in np.asarray(pe.m2, dtype=np.float64):
        lines.append(" ".join(f"{v:.17g}" for v in row))
    atomic_write_text(path, "\n".join(lines) + "\n")


def read_pexp(path: str) -> PseudoExpectation:
    with open(path) as f:
        header = f.readline().split()
        rows = [line.split() for line in f if line.strip()]
    if len(header) != 2 or header[0] != "pexp":
        raise FormatError("expected header 'pexp <n>'")
    try:
        n = int(header[1])
    except ValueError as e:
        raise FormatError("bad n in pexp header") from e
    if len(rows) != n + 1:
        raise FormatError(f"expected mu1 plus {n} matrix rows")
    try:
        mu1 = np.array([float(t) for t in rows[0]], dtype=np.float64)
        m2 = np.array([[float(t) for t in row] for row in rows[1:]], dtype=np.float64)
    except ValueError as e:
        raise FormatError("non-numeric token in pexp body") from e
    if mu1.shape != (n,) or m2.shape != (n, n):
        raise FormatError("pexp body shapes do not match header")
    return PseudoExpectation(n, mu1, m2, backend="file")
