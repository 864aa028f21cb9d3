"""Tests for the two-stage XOR solver, arity pairing, and the CSP driver."""
import numpy as np
import pytest

from rpcsp import (
    BackendChoice,
    CspInstance,
    CspPredicate,
    ParameterError,
    PlantingDistribution,
    XorInstance,
    corr,
    pair_to_even,
    random_assignment,
    sample_planted_csp,
    sample_planted_xor,
    solve_csp,
    solve_xor,
    value,
)
from rpcsp.rng import cell_seed, derived_rng


# --------------------------------------------------------------- arity pairing

def test_pair_to_even_shapes_and_determinism():
    inst = sample_planted_xor(random_assignment(30, 1), 501, 3, 0.4, 1)
    a = pair_to_even(inst, 1)
    b = pair_to_even(inst, 1)
    assert a.k == 6
    assert a.m <= inst.m // 2
    assert np.array_equal(a.scopes, b.scopes)
    assert np.array_equal(a.rhs, b.rhs)
    assert not np.array_equal(a.scopes, pair_to_even(inst, 2).scopes)


def test_pair_to_even_scopes_have_distinct_entries():
    inst = sample_planted_xor(random_assignment(25, 2), 400, 3, 0.4, 2)
    paired = pair_to_even(inst, 2)
    for row in paired.scopes:
        assert len(set(row.tolist())) == 6


def test_pair_to_even_preserves_noiseless_plant():
    x = random_assignment(30, 3)
    inst = sample_planted_xor(x, 600, 3, 0.5, 3)
    paired = pair_to_even(inst, 3)
    assert paired.m > 0
    assert value(paired, x) == 1.0


def test_pair_to_even_noise_rate_squares():
    x = random_assignment(40, 4)
    eps = 0.25
    inst = sample_planted_xor(x, 60000, 3, eps, 4)
    paired = pair_to_even(inst, 4)
    agree = value(paired, x)
    predicted = 0.5 + 2 * eps ** 2
    se = np.sqrt(0.25 / paired.m)
    assert abs(agree - predicted) < 4 * se


def test_pair_to_even_empty_input():
    inst = XorInstance(9, 3, np.zeros((0, 3), dtype=np.int64),
                       np.zeros(0, dtype=np.int8))
    paired = pair_to_even(inst, 0)
    assert paired.m == 0 and paired.k == 6


def test_pair_to_even_needs_room_for_disjoint_scopes():
    inst = sample_planted_xor(random_assignment(5, 0), 20, 3, 0.5, 0)
    with pytest.raises(ParameterError):
        pair_to_even(inst, 0)


def test_pair_to_even_drops_repeated_entry_clauses():
    scopes = np.array([[1, 1, 2], [3, 4, 5], [6, 7, 8]], dtype=np.int64)
    rhs = np.array([1, -1, 1], dtype=np.int8)
    paired = pair_to_even(XorInstance(9, 3, scopes, rhs), 1)
    assert paired.m == 1
    assert sorted(paired.scopes[0].tolist()) == [3, 4, 5, 6, 7, 8]
    assert paired.rhs[0] == -1


# ------------------------------------------------------------------- solve_xor

def test_solve_xor_k1_majority():
    x = random_assignment(50, 5)
    inst = sample_planted_xor(x, 20000, 1, 0.3, 5)
    rep = solve_xor(inst, None, BackendChoice.brute(), 5, planted=x)
    assert rep.matched_planted is True
    assert np.array_equal(rep.output, x)


def test_solve_xor_odd_brute_recovers_exactly():
    x = random_assignment(12, 6)
    inst = sample_planted_xor(x, 120, 3, 0.5, 6)
    rep = solve_xor(inst, None, BackendChoice.brute(), 6, planted=x)
    assert np.array_equal(rep.output, x)
    assert rep.matched_planted is True
    assert rep.stats["stage1_signs"].shape == (12,)
    h1, h2 = rep.stats["split"]
    assert h1 + h2 == inst.m and h1 == -(-inst.m // 2)
    assert len(rep.stats["stage2_values"]) == 2


def test_solve_xor_even_reports_sign_match():
    x = random_assignment(60, 7)
    eps = 0.4
    m = int(np.ceil(40 / eps ** 2 * 60 * np.log(60)))
    inst = sample_planted_xor(x, m, 2, eps, 7)
    rep = solve_xor(inst, None, BackendChoice.sdp_basic(), 7, planted=x)
    assert rep.matched_planted is True
    assert np.array_equal(rep.output, x) or np.array_equal(rep.output, -x)


def test_solve_xor_odd_spectral_goes_through_pairing():
    x = random_assignment(36, 8)
    inst = sample_planted_xor(x, 90000, 3, 0.5, 8)
    rep = solve_xor(inst, 3, BackendChoice.kikuchi_spectral(), 8, planted=x)
    assert rep.stats["paired_m"] > 0
    assert np.array_equal(rep.output, x)


def test_solve_xor_single_clause_skips_stage_two():
    inst = XorInstance(6, 2, np.array([[1, 2]], dtype=np.int64),
                       np.array([1], dtype=np.int8))
    rep = solve_xor(inst, None, BackendChoice.brute(), 0)
    assert rep.output.shape == (6,)
    assert rep.stats["split"][1] == 0


def test_solve_xor_stage_two_corrects_stage_one():
    # count fixed coordinates: stage-2 majority must not lose accuracy
    x = random_assignment(80, 9)
    eps = 0.3
    m = int(np.ceil(40 / eps ** 2 * 80 * np.log(80)))
    inst = sample_planted_xor(x, m, 2, eps, 9)
    rep = solve_xor(inst, None, BackendChoice.sdp_basic(), 9, planted=x)
    stage1 = rep.stats["stage1_signs"]
    final_err = min(int((rep.output != x).sum()), int((rep.output != -x).sum()))
    stage1_err = min(int((stage1 != x).sum()), int((stage1 != -x).sum()))
    assert final_err <= stage1_err


def test_solve_xor_rejects_missing_level_for_spectral():
    inst = sample_planted_xor(random_assignment(10, 0), 40, 4, 0.5, 0)
    rep = solve_xor(inst, 2, BackendChoice.kikuchi_spectral(), 0)
    assert rep.output.shape == (10,)


def test_solve_xor_stage_one_ignores_second_half_order():
    # the candidate comes from the first half only, the vote from the second
    inst = sample_planted_xor(random_assignment(10, 3), 61, 3, 0.3, 3)
    h1 = -(-inst.m // 2)
    perm = derived_rng(3, 99).permutation(inst.m - h1) + h1
    order = np.concatenate([np.arange(h1), perm])
    shuffled = XorInstance(inst.n, inst.k, inst.scopes[order], inst.rhs[order])
    a = solve_xor(inst, None, BackendChoice.brute(), 3)
    b = solve_xor(shuffled, None, BackendChoice.brute(), 3)
    assert np.array_equal(a.stats["stage1_signs"], b.stats["stage1_signs"])
    assert np.array_equal(a.output, b.output)


# ------------------------------------------------------------------- solve_csp

def _sat3_setup(n, m, seed):
    pred = CspPredicate.k_sat(3)
    q = PlantingDistribution.uniform_satisfying(pred)
    x = random_assignment(n, seed)
    psi = sample_planted_csp(x, m, pred, q, seed)
    return pred, q, x, psi


def test_solve_csp_trivial_predicate_short_circuits():
    pred = CspPredicate.always_true(2)
    q = PlantingDistribution.uniform(2)
    x = random_assignment(8, 1)
    psi = sample_planted_csp(x, 20, pred, q, 1)
    rep = solve_csp(psi, None, BackendChoice.brute(), 1)
    assert np.array_equal(rep.output, np.ones(8, dtype=np.int8))
    assert rep.candidates == []
    assert rep.stats["value"] == 1.0


def test_solve_csp_full_enumeration_finds_perfect_assignment():
    _, _, x, psi = _sat3_setup(40, 12000, 13)
    rep = solve_csp(psi, None, BackendChoice.sdp_basic(), 13, planted=x)
    assert rep.stats["value"] == 1.0
    assert len(rep.candidates) <= 2 ** (3 + 2)
    assert rep.stats["no_perfect_candidate"] is False


def test_solve_csp_fast_path_agrees_with_full_path():
    pred, q, x, psi = _sat3_setup(40, 12000, 14)
    fast = solve_csp(psi, None, BackendChoice.sdp_basic(), 14, q=q, planted=x)
    full = solve_csp(psi, None, BackendChoice.sdp_basic(), 14, planted=x)
    assert fast.stats["value"] == 1.0
    assert np.array_equal(fast.output, full.output)
    # fast path tries only the witness subset of the planting
    assert len(fast.candidates) < len(full.candidates) or len(full.candidates) == 1


def test_solve_csp_flags_unsatisfiable_projection():
    # two clauses with identical scopes but contradictory negations: no
    # assignment can satisfy both parity constraints
    pred = CspPredicate.k_xor(2)
    scopes = np.array([[1, 2], [1, 2]], dtype=np.int64)
    negations = np.array([[1, 1], [1, -1]], dtype=np.int8)
    psi = CspInstance(4, pred, scopes, negations)
    rep = solve_csp(psi, None, BackendChoice.brute(), 2)
    assert rep.stats["no_perfect_candidate"] is True
    assert rep.stats["value"] < 1.0
    assert len(rep.candidates) <= 2 ** (2 + 2)


def test_solve_csp_task_log_tracks_candidates():
    _, _, x, psi = _sat3_setup(30, 9000, 15)
    rep = solve_csp(psi, None, BackendChoice.sdp_basic(), 15, planted=x)
    logged = sum(len(t["values"]) for t in rep.stats["tasks"])
    assert logged == len(rep.candidates)
    assert max(v for t in rep.stats["tasks"] for v in t["values"]) == rep.stats["value"]


def test_solve_csp_value_dominates_all_logged_candidates():
    # mixing two plants leaves no perfect assignment, so every (S, sign)
    # task runs; the reported value must beat each logged candidate
    pred, q, xa, psa = _sat3_setup(14, 120, 21)
    psb = sample_planted_csp(random_assignment(14, 22), 120, pred, q, 22)
    mixed = CspInstance(14, pred, np.vstack([psa.scopes, psb.scopes]),
                        np.vstack([psa.negations, psb.negations]))
    rep = solve_csp(mixed, None, BackendChoice.brute(), 21)
    assert rep.stats["no_perfect_candidate"] is True
    for task in rep.stats["tasks"]:
        assert all(v <= rep.stats["value"] + 1e-12 for v in task["values"])
    assert value(mixed, rep.output) == rep.stats["value"]


def test_solve_csp_matched_planted_semantics():
    pred, q, x, psi = _sat3_setup(60, 20000, 16)
    rep = solve_csp(psi, None, BackendChoice.sdp_basic(), 16, q=q, planted=x)
    if rep.matched_planted:
        assert value(psi, rep.output) == 1.0
