"""Walk through the three-state worked example end to end.

A process moves on five states. Three of them (a, b, c) are taboo:
the process keeps evolving there. State d is forbidden, state e is the
target; both absorb. At a the action picks the exit odds, at b it
picks where the walk continues, at c both actions return to a.

The script validates the model, evaluates one fixed policy, and then
lets value iteration find the optimum from scratch.
"""

import json

import numpy as np

import safemdp as sm

MODEL = {
    "states": ["a", "b", "c", "d", "e"],
    "actions": ["u1", "u2"],
    "partition": {"taboo": ["a", "b", "c"], "forbidden": ["d"], "target": ["e"]},
    "transitions": [
        {"from": "a", "action": "u1", "to": "d", "p": 0.4},
        {"from": "a", "action": "u1", "to": "e", "p": 0.6},
        {"from": "a", "action": "u2", "to": "d", "p": 0.9},
        {"from": "a", "action": "u2", "to": "e", "p": 0.1},
        {"from": "b", "action": "u1", "to": "a", "p": 0.3},
        {"from": "b", "action": "u1", "to": "c", "p": 0.7},
        {"from": "b", "action": "u2", "to": "a", "p": 0.8},
        {"from": "b", "action": "u2", "to": "c", "p": 0.2},
        {"from": "c", "action": "u1", "to": "a", "p": 1.0},
        {"from": "c", "action": "u2", "to": "a", "p": 1.0},
        {"from": "d", "action": "u1", "to": "d", "p": 1.0},
        {"from": "d", "action": "u2", "to": "d", "p": 1.0},
        {"from": "e", "action": "u1", "to": "e", "p": 1.0},
        {"from": "e", "action": "u2", "to": "e", "p": 1.0},
    ],
    "rewards": [
        {"state": "a", "action": "u1", "rho": 1},
        {"state": "a", "action": "u2", "rho": 1},
        {"state": "b", "action": "u1", "rho": 2},
        {"state": "b", "action": "u2", "rho": 2},
        {"state": "c", "action": "u1", "rho": 3},
        {"state": "c", "action": "u2", "rho": 3},
    ],
}


def show(label, vec, states):
    pairs = ", ".join(f"{s}: {x:.6g}" for s, x in zip(states, vec))
    print(f"  {label} = [{pairs}]")


def main():
    model = sm.load_model(json.dumps(MODEL))
    print(f"model loaded: {model.n_states} states, {model.n_actions} actions,")
    print(f"  taboo {model.partition.taboo}, forbidden {model.partition.forbidden},"
          f" target {model.partition.target}")
    print(f"  validation violations: {sm.validate_model(model)}")

    taboo = model.states[: model.n_taboo]

    # Fix the policy u1 at a, u2 at b, u1 at c and evaluate it.
    policy = sm.pure_policy(model, {"a": "u1", "b": "u2", "c": "u1"})
    print("\nevaluating policy (a: u1, b: u2, c: u1)")
    cq = sm.chain_quantities(model, policy)
    v = cq.green @ cq.inputs.stage_cost
    s = cq.green @ cq.inputs.to_forbidden
    t = cq.green @ cq.inputs.to_target
    show("value  V", v, taboo)
    show("safety S", s, taboo)
    show("reach  T", t, taboo)
    print(f"  S + T - 1 max deviation: {np.abs(s + t - 1).max():.2e}")
    print("  Green operator (expected visits before leaving the taboo set):")
    for i, row in enumerate(cq.green):
        show(f"G[{taboo[i]}]", row, taboo)

    # Swapping the action at a multiplies the forbidden exit odds.
    risky = sm.pure_policy(model, {"a": "u2", "b": "u2", "c": "u1"})
    s_risky = sm.safety(model, risky)
    print()
    show("safety with u2 at a", s_risky, taboo)
    print("  every start is exactly as unsafe as the exit state a itself")

    print("\nvalue iteration from V = 0:")
    res = sm.value_iteration(model, keep_history=True)
    for k, iterate in enumerate(res.history[:5]):
        show(f"V^{k}", iterate, taboo)
    print(f"  converged in {res.iterations} sweeps, residual {res.residual:.2e}")
    assignment = res.policy.assignment()[: model.n_taboo]
    chosen = {taboo[i]: model.actions[u] for i, u in enumerate(assignment)}
    print(f"  optimal actions: {chosen}")
    print("  the optimum matches the fixed policy above, so that policy was optimal")


if __name__ == "__main__":
    main()
