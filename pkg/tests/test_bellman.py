"""Unconstrained Bellman solver: operator, iteration, safest policy, certificates."""
import json

import numpy as np
import pytest

import safemdp as sm

GOLDEN = np.array([1.0, 3.6, 4.0])


def test_bellman_apply_golden(ex1_model):
    tv, greedy = sm.bellman_apply(ex1_model, np.array([1.0, 2.0, 3.0]))
    assert np.allclose(tv, [1, 3.4, 4], atol=1e-12)
    assert tuple(greedy.assignment()[:3]) == (0, 1, 0)


def test_bellman_apply_zero_start(ex1_model):
    tv, _ = sm.bellman_apply(ex1_model, np.zeros(3))
    assert np.allclose(tv, [1, 2, 3], atol=1e-15)


def test_bellman_apply_offsets_shift_choice(ex1_model):
    """A large per-action penalty on u2 at b flips the greedy action."""
    offsets = np.zeros((3, 2))
    offsets[1, 1] = 10.0
    _, greedy = sm.bellman_apply(ex1_model, np.array([1.0, 2.0, 3.0]), offsets)
    assert greedy.assignment()[1] == 0


def test_value_iteration_golden_sequence(ex1_model):
    res = sm.value_iteration(ex1_model, keep_history=True)
    assert np.abs(res.value - GOLDEN).max() <= 1e-9
    assert tuple(res.policy.assignment()[:3]) == (0, 1, 0)
    hist = res.history
    assert np.allclose(hist[0], [0, 0, 0], atol=0)
    assert np.array_equal(hist[1], [1, 2, 3])
    assert np.abs(hist[2] - [1, 3.4, 4]).max() <= 1e-12
    assert np.abs(hist[3] - GOLDEN).max() <= 1e-12
    assert np.array_equal(hist[4], hist[3])
    assert res.residual <= 1e-10


def test_value_iteration_nonnegative_start_required(ex1_model):
    with pytest.raises(ValueError):
        sm.value_iteration(ex1_model, v0=np.array([-1.0, 0, 0]))


def test_value_iteration_budget(ex1_model):
    with pytest.raises(sm.MaxIterationsError) as err:
        sm.value_iteration(ex1_model, tol=0.0, max_iter=2)
    assert err.value.last is not None


def test_value_iteration_divergence_guard():
    doc = {
        "states": ["h0", "e0"],
        "actions": ["a0"],
        "partition": {"taboo": ["h0"], "forbidden": [], "target": ["e0"]},
        "transitions": [
            {"from": "h0", "action": "a0", "to": "h0", "p": 1.0},
            {"from": "e0", "action": "a0", "to": "e0", "p": 1.0},
        ],
        "rewards": [{"state": "h0", "action": "a0", "rho": 1.0}],
    }
    model = sm.load_model(json.dumps(doc))
    with pytest.raises(sm.DivergenceError):
        sm.value_iteration(model, max_iter=10**8)


def test_single_action_model_reduces_to_evaluation():
    doc = {
        "states": ["h0", "h1", "e0"],
        "actions": ["a0"],
        "partition": {"taboo": ["h0", "h1"], "forbidden": [], "target": ["e0"]},
        "transitions": [
            {"from": "h0", "action": "a0", "to": "h1", "p": 0.5},
            {"from": "h0", "action": "a0", "to": "e0", "p": 0.5},
            {"from": "h1", "action": "a0", "to": "e0", "p": 1.0},
            {"from": "e0", "action": "a0", "to": "e0", "p": 1.0},
        ],
        "rewards": [
            {"state": "h0", "action": "a0", "rho": 1.0},
            {"state": "h1", "action": "a0", "rho": 3.0},
        ],
    }
    model = sm.load_model(json.dumps(doc))
    pol = sm.pure_policy(model, {0: 0, 1: 0})
    res = sm.value_iteration(model)
    assert np.abs(res.value - sm.value(model, pol)).max() <= 1e-9


def test_ties_break_to_lowest_action_index(ex1_model):
    """States b and c have equal continuation under both actions of c."""
    res = sm.value_iteration(ex1_model)
    assert res.policy.assignment()[2] == 0


def test_safest_policy_golden(ex1_model):
    s_star, pol = sm.safest_policy(ex1_model)
    assert np.allclose(s_star, 0.4, atol=1e-10)
    assert pol.assignment()[0] == 0
    assert tuple(pol.assignment()[:3]) == (0, 0, 0)


def test_optimum_dominates_corpus(solver_corpus):
    """V* sits below every pure policy value, coordinate by coordinate."""
    import itertools

    for model, _ in solver_corpus[:8]:
        res = sm.value_iteration(model)
        h, m = model.n_taboo, model.n_actions
        for assign in itertools.product(range(m), repeat=h):
            pol = sm.pure_policy(model, dict(enumerate(assign)))
            assert (res.value <= sm.value(model, pol) + 1e-8).all()


def test_certify_supremum_accepts_optimum(ex1_model):
    import itertools

    policies = [
        sm.pure_policy(ex1_model, dict(enumerate(assign)))
        for assign in itertools.product(range(2), repeat=3)
    ]
    res = sm.value_iteration(ex1_model)
    report = sm.certify_supremum(ex1_model, res.value, policies)
    assert report.ok
    assert report.skipped_non_transient == 0


def test_certify_supremum_rejects_inflated_vector(ex1_model):
    import itertools

    policies = [
        sm.pure_policy(ex1_model, dict(enumerate(assign)))
        for assign in itertools.product(range(2), repeat=3)
    ]
    report = sm.certify_supremum(ex1_model, GOLDEN + 0.5, policies)
    assert not report.ok
    assert report.membership_violations
