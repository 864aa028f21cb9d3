"""End-to-end solvers for planted noisy XOR and planted CSP instances.

The XOR solver splits the clause list in half: the first half feeds a
pseudo-expectation backend whose rounding gives an approximate assignment
(up to a global sign), and the second half majority-corrects both signed
versions, keeping whichever scores higher. Arity 1 is plain per-variable
majority; odd arities at scale are first paired down to an even-arity
instance for the backend stage.

The CSP solver projects the instance onto XOR instances over position
subsets (smallest subsets first), solves each side, and returns the first
candidate that satisfies every clause.
"""
from __future__ import annotations

from dataclasses import dataclass, field
from typing import Iterable

import numpy as np

from .approx_recovery import (
    BackendChoice,
    round_even_detail,
    round_odd,
    solve_pseudo_expectation,
)
from .errors import ParameterError
from .exact_rounding import majority_round_detail
from .fourier import distribution_complexity, fourier_table, subsets_by_size
from .instances import (
    Assignment,
    CspInstance,
    PlantingDistribution,
    XorInstance,
    clean,
    validate_assignment,
    value,
)
from .rng import STREAM_PAIRING, cell_seed, check_seed, derived_rng


@dataclass
class SolveReport:
    output: Assignment
    candidates: list = field(default_factory=list)
    stats: dict = field(default_factory=dict)
    matched_planted: bool | None = None


def pair_to_even(inst: XorInstance, seed: int) -> XorInstance:
    """Pair clauses with disjoint variable sets into arity-2k clauses.

    Clauses with repeated entries are dropped first (their pairings would be
    dropped by downstream arity checks anyway). The remaining clause order is
    shuffled by the seed, then pairing is greedy first-fit over the shuffled
    order; unpairable clauses are dropped. The paired rhs is the product of
    the two rhs values, so a corruption rate of 1/2 - eps composes to
    1/2 - 2*eps^2.
    """
    if 2 * inst.k > inst.n:
        raise ParameterError("pairing needs n >= 2k for disjoint scopes")
    base, _ = clean(inst)
    empty = XorInstance(inst.n, 2 * inst.k, np.zeros((0, 2 * inst.k), np.int64),
                        np.zeros(0, np.int8))
    if base.m == 0:
        return empty
    order = derived_rng(check_seed(seed), STREAM_PAIRING).permutation(base.m)
    pending: list[tuple[frozenset, int]] = []
    pairs: list[tuple[int, int]] = []
    for idx in order:
        vars_here = frozenset(int(v) for v in base.scopes[idx])
        for t, (vars_pend, j) in enumerate(pending):
            if vars_here.isdisjoint(vars_pend):
                pairs.append((j, int(idx)))
                pending.pop(t)
                break
        else:
            pending.append((vars_here, int(idx)))
    if not pairs:
        return empty
    first = np.array([a for a, _ in pairs], dtype=np.int64)
    second = np.array([b for _, b in pairs], dtype=np.int64)
    scopes = np.concatenate([base.scopes[first], base.scopes[second]], axis=1)
    rhs = (base.rhs[first].astype(np.int64) * base.rhs[second]).astype(np.int8)
    return XorInstance(inst.n, 2 * inst.k, scopes, rhs)


def _slice(inst: XorInstance, lo: int, hi: int) -> XorInstance:
    return XorInstance(inst.n, inst.k, inst.scopes[lo:hi], inst.rhs[lo:hi])


def _majority_k1(inst: XorInstance) -> tuple[Assignment, dict]:
    sums = np.zeros(inst.n, dtype=np.int64)
    np.add.at(sums, inst.scopes[:, 0] - 1, inst.rhs.astype(np.int64))
    counts = np.bincount(inst.scopes[:, 0] - 1, minlength=inst.n)
    out = np.where(sums >= 0, 1, -1).astype(np.int8)
    info = {
        "empty_votes": int((counts == 0).sum()),
        "tied_votes": int(((sums == 0) & (counts > 0)).sum()),
        "min_margin": int(np.abs(sums[counts > 0]).min()) if (counts > 0).any() else 0,
    }
    return out, info


def solve_xor(
    inst: XorInstance,
    ell: int | None,
    backend: BackendChoice,
    seed: int,
    planted: Assignment | None = None,
) -> SolveReport:
    """Two-stage recovery; see the module docstring.

    ell is the Kikuchi level for the kikuchi_spectral backend; None picks
    half the stage-1 arity. For odd k with a non-brute backend the stage-1
    instance is the paired arity-2k instance, and the backend preconditions
    apply to it.
    """
    if inst.m == 0:
        raise ParameterError("cannot solve an empty instance")
    seed = check_seed(seed)
    stats: dict = {"n": inst.n, "k": inst.k, "m": inst.m, "backend": backend.kind}

    if inst.k == 1:
        out, info = _majority_k1(inst)
        stats["majority"] = info
        stats["value"] = value(inst, out)
        report = SolveReport(out, candidates=[out], stats=stats)
    else:
        h1_size = (inst.m + 1) // 2
        h1 = _slice(inst, 0, h1_size)
        h2 = _slice(inst, h1_size, inst.m)
        stats["split"] = [h1.m, h2.m]

        stage1 = h1
        paired = inst.k % 2 == 1 and backend.kind != "brute"
        if paired:
            stage1 = pair_to_even(h1, seed)
            if stage1.m == 0:
                raise ParameterError("pairing produced no clauses; too few or overlapping scopes")
            stats["paired_m"] = stage1.m
        stats["paired"] = paired

        eff_backend = backend
        if backend.kind == "kikuchi_spectral" and backend.ell is None:
            eff_backend = BackendChoice(
                "kikuchi_spectral", iters=backend.iters,
                ell=ell if ell is not None else stage1.k // 2,
            )
        pe = solve_pseudo_expectation(stage1, eff_backend, seed)
        stats["backend_info"] = dict(pe.info)

        if backend.kind == "brute" and inst.k % 2 == 1:
            x_hat = round_odd(pe)
            stats["stage1_rounding"] = "first_moment_sign"
        else:
            x_hat, deltas, i_star = round_even_detail(pe)
            stats["stage1_rounding"] = "row_consensus"
            stats["delta_istar"] = float(deltas[i_star])
        stats["stage1_signs"] = x_hat.copy()

        if h2.m == 0:
            # Nothing to correct or score against; return the raw stage-1 guess.
            stats["stage2"] = "skipped_empty_h2"
            report = SolveReport(x_hat, candidates=[x_hat, -x_hat], stats=stats)
        else:
            cand_plus, info_plus = majority_round_detail(h2, x_hat)
            cand_minus, info_minus = majority_round_detail(h2, -x_hat)
            val_plus = value(h2, cand_plus)
            val_minus = value(h2, cand_minus)
            if val_minus > val_plus:
                out, info, chosen = cand_minus, info_minus, "minus"
            else:
                out, info, chosen = cand_plus, info_plus, "plus"
            stats["stage2_values"] = [val_plus, val_minus]
            stats["stage2_sign"] = chosen
            stats["majority"] = info
            stats["value"] = value(inst, out)
            report = SolveReport(out, candidates=[cand_plus, cand_minus], stats=stats)

    if planted is not None:
        planted = validate_assignment(planted, inst.n)
        exact = bool((report.output == planted).all())
        if inst.k % 2 == 0:
            exact = exact or bool((report.output == -planted).all())
        report.matched_planted = exact
    return report


def solve_csp(
    psi: CspInstance,
    ell: int | None,
    backend: BackendChoice,
    seed: int,
    q: PlantingDistribution | None = None,
    planted: Assignment | None = None,
) -> SolveReport:
    """Reduce to XOR over position subsets and return a satisfying assignment.

    Subsets are tried smallest-first (then lexicographically), positive sign
    before negative, and each sub-solve output is checked together with its
    negation; the first candidate of value 1 is returned. If none reaches
    value 1 the best candidate is returned with stats["no_perfect_candidate"]
    set. Passing the planting distribution q switches to the fast path that
    only tries the distribution-complexity witness with its coefficient sign.
    """
    if psi.m == 0:
        raise ParameterError("cannot solve an empty instance")
    seed = check_seed(seed)
    k = psi.k
    all_ones = np.ones(psi.n, dtype=np.int8)
    stats: dict = {"n": psi.n, "k": k, "m": psi.m, "backend": backend.kind}

    if psi.predicate.trivial:
        stats["trivial_predicate"] = True
        stats["value"] = 1.0
        stats["no_perfect_candidate"] = False
        report = SolveReport(all_ones, candidates=[], stats=stats)
        if planted is not None:
            report.matched_planted = bool((all_ones == validate_assignment(planted, psi.n)).all())
        return report

    if q is not None:
        r, witness = distribution_complexity(q)
        stats["complexity"] = r
        if witness is not None:
            coeff = fourier_table(q).coefficient(witness)
            tasks = [(tuple(sorted(witness)), 1 if coeff >= 0 else -1)]
            stats["fast_path"] = True
        else:
            tasks = [(s, sign) for s in subsets_by_size(k) for sign in (1, -1)]
            stats["fast_path"] = False
    else:
        tasks = [(s, sign) for s in subsets_by_size(k) for sign in (1, -1)]

    from .reduction import build_xor_side

    candidates: list[Assignment] = []
    task_log: list[dict] = []
    best_val = -1.0
    best: Assignment | None = None
    cap = 1 << (k + 2)
    for ti, (s, sign) in enumerate(tasks):
        side = build_xor_side(psi, s, sign)
        sub_ell = ell if len(s) == k else None
        rep = solve_xor(side, sub_ell, backend, cell_seed(seed, "csp_task", ti))
        entry = {"s": list(s), "sign": sign}
        for cand in (rep.output, -rep.output):
            candidates.append(cand)
            assert len(candidates) <= cap
            v = value(psi, cand)
            entry.setdefault("values", []).append(v)
            if v > best_val:
                best_val, best = v, cand
            if v == 1.0:
                task_log.append(entry)
                stats["tasks"] = task_log
                stats["value"] = 1.0
                stats["no_perfect_candidate"] = False
                report = SolveReport(cand, candidates=candidates, stats=stats)
                if planted is not None:
                    report.matched_planted = bool(
                        (cand == validate_assignment(planted, psi.n)).all()
                    )
                return report
        task_log.append(entry)

    stats["tasks"] = task_log
    stats["no_perfect_candidate"] = True
    stats["value"] = best_val
    report = SolveReport(best, candidates=candidates, stats=stats)
    if planted is not None:
        report.matched_planted = bool((best == validate_assignment(planted, psi.n)).all())
    return report
