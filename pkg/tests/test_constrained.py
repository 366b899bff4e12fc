"""Constrained solvers: Lagrangian machinery, LP, enumeration, relative safety."""
import itertools
import json
from fractions import Fraction

import numpy as np
import pytest

import safemdp as sm

GOLDEN = np.array([1.0, 3.6, 4.0])


def members_entrywise_min(adm):
    return np.min(np.stack([m.value for m in adm.members]), axis=0)


# ---------------------------------------------------------------- lagrangian


def test_lagrangian_golden(ex1_model, ex1_policy):
    L = sm.lagrangian(ex1_model, ex1_policy, np.ones(3), p=0.5)
    assert np.allclose(L, [0.9, 3.5, 3.9], atol=1e-12)


def test_lagrangian_zero_multiplier_is_value(ex1_model, ex1_policy):
    L = sm.lagrangian(ex1_model, ex1_policy, np.zeros(3), p=0.7)
    assert np.allclose(L, GOLDEN, atol=1e-12)


def test_lagrangian_rejects_negative_multiplier(ex1_model, ex1_policy):
    with pytest.raises(ValueError):
        sm.lagrangian(ex1_model, ex1_policy, np.array([-1.0, 0, 0]), p=0.5)


def test_lagrangian_zero_slack(ex1_model, ex1_policy):
    """Safety exactly at p makes the penalty vanish for any multiplier."""
    L = sm.lagrangian(ex1_model, ex1_policy, np.array([5.0, 2.0, 9.0]), p=0.4)
    assert np.allclose(L, GOLDEN, atol=1e-12)


# ---------------------------------------------------------------- dual inner


def test_dual_inner_zero_is_unconstrained(ex1_model):
    q, pol = sm.dual_inner(ex1_model, np.zeros(3), p=0.5)
    assert np.allclose(q, GOLDEN, atol=1e-9)
    assert tuple(pol.assignment()[:3]) == (0, 1, 0)


def test_dual_inner_penalty_inverts_choice(ex1_model):
    """A heavy multiplier on state a rewards the safer action there."""
    q, pol = sm.dual_inner(ex1_model, np.array([10.0, 0.0, 0.0]), p=0.5)
    assert np.allclose(q, [0.0, 7.6, 8.0], atol=1e-9)
    assert pol.assignment()[0] == 0


def test_dual_inner_single_policy_matches_lagrangian():
    doc = {
        "states": ["h0", "u0", "e0"],
        "actions": ["a0"],
        "partition": {"taboo": ["h0"], "forbidden": ["u0"], "target": ["e0"]},
        "transitions": [
            {"from": "h0", "action": "a0", "to": "h0", "p": 0.2},
            {"from": "h0", "action": "a0", "to": "u0", "p": 0.3},
            {"from": "h0", "action": "a0", "to": "e0", "p": 0.5},
            {"from": "u0", "action": "a0", "to": "u0", "p": 1.0},
            {"from": "e0", "action": "a0", "to": "e0", "p": 1.0},
        ],
        "rewards": [{"state": "h0", "action": "a0", "rho": 1.0}],
    }
    model = sm.load_model(json.dumps(doc))
    pol = sm.pure_policy(model, {0: 0})
    lam = np.array([2.0])
    q, _ = sm.dual_inner(model, lam, p=0.6)
    L = sm.lagrangian(model, pol, lam, p=0.6)
    assert np.abs(q - L).max() <= 1e-9


# ------------------------------------------------------------------------ lp


def test_build_lp_structure(ex1_model):
    problem = sm.build_lp(ex1_model, p=0.5)
    assert problem.has_multiplier
    assert problem.column_labels == ("l[a]", "l[b]", "l[c]", "t")
    assert problem.rows.shape == (6, 4)
    assert set(problem.row_labels) == {
        f"{s}:{u}" for s in "abc" for u in ("u1", "u2")
    }
    text = problem.dump()
    assert "maximize" in text and "a:u1" in text and "<=" in text


def test_build_lp_drops_multiplier_without_forbidden():
    doc = {
        "states": ["h0", "e0"],
        "actions": ["cheap", "dear"],
        "partition": {"taboo": ["h0"], "forbidden": [], "target": ["e0"]},
        "transitions": [
            {"from": "h0", "action": "cheap", "to": "e0", "p": 1.0},
            {"from": "h0", "action": "dear", "to": "e0", "p": 1.0},
            {"from": "e0", "action": "cheap", "to": "e0", "p": 1.0},
            {"from": "e0", "action": "dear", "to": "e0", "p": 1.0},
        ],
        "rewards": [
            {"state": "h0", "action": "cheap", "rho": 1.0},
            {"state": "h0", "action": "dear", "rho": 2.0},
        ],
    }
    model = sm.load_model(json.dumps(doc))
    problem = sm.build_lp(model, p=0.5)
    assert not problem.has_multiplier
    sol = sm.solve_lp(problem)
    assert sol.l[0] == pytest.approx(1.0, abs=1e-9)
    assert sol.multipliers[0] == 0.0


def test_solve_lp_golden(ex1_model):
    sol = sm.solve_lp(sm.build_lp(ex1_model, p=0.5))
    assert np.abs(sol.l - GOLDEN).max() <= 1e-9
    assert sol.multipliers[0] == pytest.approx(0.0, abs=1e-9)
    assert sol.objective == pytest.approx(8.6, abs=1e-9)
    assert np.abs(sol.value - GOLDEN).max() <= 1e-9


def test_solve_lp_unbounded_signals_infeasible_p(ex1_model):
    with pytest.raises(sm.LpUnboundedError):
        sm.solve_lp(sm.build_lp(ex1_model, p=0.3))


def test_lp_value_bounded_by_members(solver_corpus):
    """The penalized vector never exceeds any admissible policy's value."""
    for model, p in solver_corpus:
        adm = sm.enumerate_admissible(model, p)
        if not adm.members:
            continue
        sol = sm.solve_lp(sm.build_lp(model, p))
        assert (sol.value <= members_entrywise_min(adm) + 1e-6).all()


def test_lp_raw_variables_can_exceed_members():
    """With an active multiplier, l alone is not a value bound; l - p t is.

    One taboo state, a safe expensive action and a risky free one, with p
    between their exit risks.  The optimum mixes, t goes positive, and the
    l variable rises above the best pure admissible value while the
    penalized combination stays below it.
    """
    doc = {
        "states": ["h0", "u0", "e0"],
        "actions": ["risky", "safe"],
        "partition": {"taboo": ["h0"], "forbidden": ["u0"], "target": ["e0"]},
        "transitions": [
            {"from": "h0", "action": "risky", "to": "u0", "p": 0.5},
            {"from": "h0", "action": "risky", "to": "e0", "p": 0.5},
            {"from": "h0", "action": "safe", "to": "u0", "p": 0.1},
            {"from": "h0", "action": "safe", "to": "e0", "p": 0.9},
            {"from": "u0", "action": "risky", "to": "u0", "p": 1.0},
            {"from": "u0", "action": "safe", "to": "u0", "p": 1.0},
            {"from": "e0", "action": "risky", "to": "e0", "p": 1.0},
            {"from": "e0", "action": "safe", "to": "e0", "p": 1.0},
        ],
        "rewards": [{"state": "h0", "action": "safe", "rho": 10.0}],
    }
    model = sm.load_model(json.dumps(doc))
    sol = sm.solve_lp(sm.build_lp(model, p=0.2))
    best_pure = 10.0
    assert sol.multipliers[0] == pytest.approx(25.0, abs=1e-6)
    assert sol.l[0] == pytest.approx(12.5, abs=1e-6)
    assert sol.l[0] > best_pure
    assert sol.value[0] == pytest.approx(7.5, abs=1e-6)
    assert sol.value[0] <= best_pure + 1e-9


# ----------------------------------------------------------------- dual ascent


def test_dual_ascent_golden(ex1_model):
    rep = sm.dual_ascent(ex1_model, p=0.5)
    assert rep.feasible
    assert np.abs(rep.value - GOLDEN).max() <= 1e-6
    assert np.allclose(rep.multipliers, 0.0, atol=1e-9)
    assert rep.method == "dual-ascent"
    s = sm.safety(ex1_model, rep.policy)
    assert (s <= 0.5 + 1e-10).all()


def test_dual_ascent_infeasible_reports_floor(ex1_model):
    rep = sm.dual_ascent(ex1_model, p=0.3)
    assert not rep.feasible
    assert np.allclose(rep.info["min_safety"], 0.4, atol=1e-10)
    assert np.abs(rep.value - GOLDEN).max() <= 1e-9
    assert (sm.safety(ex1_model, rep.policy) <= 0.4 + 1e-10).all()


def test_dual_ascent_agrees_with_lp(solver_corpus):
    for model, p in solver_corpus:
        sol = sm.solve_lp(sm.build_lp(model, p))
        rep = sm.dual_ascent(model, p)
        assert rep.feasible
        assert abs(float(rep.value.sum()) - sol.objective) <= 1e-3


def test_dual_ascent_complementary_slackness(solver_corpus):
    """Active multipliers require the reported policy to sit on the bound."""
    for model, p in solver_corpus:
        rep = sm.dual_ascent(model, p)
        s = sm.safety(model, rep.policy)
        assert float((rep.multipliers * (s - p)).max()) <= 1e-6


def test_dual_ascent_oracle_gap(ex1_model):
    oracle = sm.brute_force_constrained(ex1_model, 0.5)
    rep = sm.dual_ascent(ex1_model, 0.5, oracle_total=float(oracle.value.sum()))
    assert rep.gap is not None and abs(rep.gap) <= 1e-6


# ----------------------------------------------------------------- enumeration


def test_enumerate_admissible_golden(ex1_model):
    adm = sm.enumerate_admissible(ex1_model, p=0.5)
    assert adm.total == 8
    assert len(adm.members) == 4
    assert all(m.assignment[0] == 0 for m in adm.members)
    assert [m.assignment for m in adm.members] == [
        (0, 0, 0), (0, 0, 1), (0, 1, 0), (0, 1, 1)
    ]
    assert not adm.non_transient


def test_enumerate_admissible_extremes(ex1_model):
    assert len(sm.enumerate_admissible(ex1_model, p=1.0).members) == 8
    assert not sm.enumerate_admissible(ex1_model, p=0.0).members


def test_enumerate_admissible_cap(ex1_model):
    with pytest.raises(sm.CapExceededError):
        sm.enumerate_admissible(ex1_model, p=0.5, cap=7)


# ------------------------------------------------------------------ cone check


def test_cone_check_golden(ex1_model, ex1_policy):
    rep = sm.cone_check(ex1_model, ex1_policy, p=0.5)
    assert rep.admissible
    assert np.allclose(rep.alpha, 0.1, atol=1e-12)


def test_cone_check_boundary(ex1_model, ex1_policy):
    rep = sm.cone_check(ex1_model, ex1_policy, p=0.4)
    assert rep.admissible
    assert np.allclose(rep.alpha, 0.0, atol=1e-12)


def test_cone_check_rejects(ex1_model):
    pol = sm.pure_policy(ex1_model, {"a": "u2", "b": "u2", "c": "u1"})
    rep = sm.cone_check(ex1_model, pol, p=0.5)
    assert not rep.admissible
    assert np.allclose(rep.alpha, -0.4, atol=1e-12)


def test_cone_matches_direct_filter(solver_corpus):
    for model, p in solver_corpus[:10]:
        h, m = model.n_taboo, model.n_actions
        for assign in itertools.product(range(m), repeat=h):
            pol = sm.pure_policy(model, dict(enumerate(assign)))
            direct = bool((sm.safety(model, pol) <= p + 1e-10).all())
            assert sm.cone_check(model, pol, p).admissible == direct


# ------------------------------------------------------------- constrained vi


def test_constrained_vi_golden(ex1_model):
    rep = sm.constrained_vi_pure(ex1_model, p=0.5)
    assert rep.feasible
    assert np.abs(rep.value - GOLDEN).max() <= 1e-9
    assert tuple(rep.policy.assignment()[:3]) == (0, 1, 0)
    assert rep.info["sweep_matches_best_policy"]
    assert rep.info["admissible_count"] == 4


def test_constrained_vi_singleton():
    doc = {
        "states": ["h0", "u0", "e0"],
        "actions": ["a0"],
        "partition": {"taboo": ["h0"], "forbidden": ["u0"], "target": ["e0"]},
        "transitions": [
            {"from": "h0", "action": "a0", "to": "u0", "p": 0.3},
            {"from": "h0", "action": "a0", "to": "e0", "p": 0.7},
            {"from": "u0", "action": "a0", "to": "u0", "p": 1.0},
            {"from": "e0", "action": "a0", "to": "e0", "p": 1.0},
        ],
        "rewards": [{"state": "h0", "action": "a0", "rho": 4.0}],
    }
    model = sm.load_model(json.dumps(doc))
    rep = sm.constrained_vi_pure(model, p=0.5)
    pol = sm.pure_policy(model, {0: 0})
    assert np.abs(rep.value - sm.value(model, pol)).max() <= 1e-9


def test_constrained_vi_full_set_is_unconstrained(ex1_model):
    rep = sm.constrained_vi_pure(ex1_model, p=1.0)
    assert np.abs(rep.value - sm.value_iteration(ex1_model).value).max() <= 1e-9


def test_constrained_vi_infeasible(ex1_model):
    with pytest.raises(sm.InfeasibleError):
        sm.constrained_vi_pure(ex1_model, p=0.3)


def test_constrained_vi_against_enumeration(solver_corpus):
    """Sweep limit: below all members always, equal when the set is a box.

    The per-sweep minimum recombines actions across states, so on coupled
    admissible sets its fixed point can undercut every single member; the
    report must flag those runs.  When the admissible set is a full product
    of its per-state projections the recombination stays inside the set and
    the limit matches the entrywise minimum exactly.
    """
    for model, p in solver_corpus:
        adm = sm.enumerate_admissible(model, p)
        if not adm.members:
            continue
        entry = members_entrywise_min(adm)
        rep = sm.constrained_vi_pure(model, p)
        assert (rep.value <= entry + 1e-8).all()
        proj = [
            len({m.assignment[i] for m in adm.members})
            for i in range(model.n_taboo)
        ]
        if len(adm.members) == int(np.prod(proj)):
            assert np.abs(rep.value - entry).max() <= 1e-8
        elif (rep.value < entry - 1e-8).any():
            assert not rep.info["sweep_matches_best_policy"]
        best = sm.value(model, rep.policy)
        assert (entry <= best + 1e-9).all()
        assert (sm.safety(model, rep.policy) <= p + 1e-8).all()


# ------------------------------------------------------------- relative safety


def test_relative_admissible_golden(ex1_model):
    sets = sm.relative_admissible(ex1_model, q=2.0)
    at_a = sets[0]
    assert at_a.pure_count == 1
    assert len(at_a.vertices) == 2
    assert np.allclose(at_a.vertices[0], [1.0, 0.0], atol=0)
    assert np.allclose(at_a.vertices[1], [7 / 15, 8 / 15], atol=1e-12)
    for i in (1, 2):
        assert sets[i].pure_count == 2
        assert len(sets[i].vertices) == 2


def test_relative_boundary_mixture_sits_on_boundary(ex1_model):
    """K and qL agree exactly at the mixed vertex."""
    sets = sm.relative_admissible(ex1_model, q=2.0)
    d = sets[0].vertices[1]
    K = d[0] * 0.4 + d[1] * 0.9
    L = d[0] * 0.6 + d[1] * 0.1
    assert K == pytest.approx(2.0 * L, abs=1e-12)


def test_relative_admissible_zero_q(ex1_model):
    sets = sm.relative_admissible(ex1_model, q=0.0)
    assert not sets[0].feasible
    assert sets[1].feasible and sets[2].feasible


def test_relative_vi_golden(ex1_model):
    rep = sm.relative_vi(ex1_model, q=2.0)
    assert np.abs(rep.value - GOLDEN).max() <= 1e-9
    assert rep.policy.pure
    assert tuple(rep.policy.assignment()[:3]) == (0, 1, 0)
    assert rep.method == "relative-vi"


def test_relative_vi_large_q_is_unconstrained(ex1_model):
    rep = sm.relative_vi(ex1_model, q=1e9)
    assert np.abs(rep.value - sm.value_iteration(ex1_model).value).max() <= 1e-9


def test_relative_vi_infeasible_names_state(ex1_model):
    with pytest.raises(sm.InfeasibleError, match="a"):
        sm.relative_vi(ex1_model, q=0.0)


def test_relative_vi_respects_constraint_on_corpus(solver_corpus):
    for model, _ in solver_corpus[:10]:
        for q in (0.5, 2.0):
            try:
                rep = sm.relative_vi(model, q)
            except sm.InfeasibleError:
                continue
            ci = sm.cost_inputs(model, rep.policy)
            assert (ci.to_forbidden <= q * ci.to_target + 1e-9).all()


def test_monotone_in_p_and_q(ex1_model):
    """Larger feasible sets cannot raise the optimum."""
    totals = []
    for p in (0.4, 0.5, 0.7, 1.0):
        totals.append(float(sm.constrained_vi_pure(ex1_model, p).value.sum()))
    assert all(a >= b - 1e-9 for a, b in zip(totals, totals[1:]))
    rel_totals = []
    for q in (2 / 3, 1.0, 7 / 3, 9.0):
        rel_totals.append(float(sm.relative_vi(ex1_model, q).value.sum()))
    assert all(a >= b - 1e-9 for a, b in zip(rel_totals, rel_totals[1:]))


def test_p_to_q_values():
    assert sm.p_to_q(0.5) == 1.0
    assert sm.p_to_q(0.0) == 0.0
    assert sm.p_to_q(Fraction(2, 3)) == 2
    assert sm.p_to_q(2 / 3) == pytest.approx(2.0, rel=1e-15)
    with pytest.raises(ValueError):
        sm.p_to_q(1.0)
