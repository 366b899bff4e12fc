"""Check the linear algebra against walkers that know nothing about it.

Monte Carlo rollouts and exhaustive path enumeration both operate on
raw trajectories. If the Green-operator arithmetic is right, the
sample means land within a few standard errors of the analytic values
and the enumerated path mass brackets them from below.
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


def main():
    model = sm.load_model(json.dumps(MODEL))
    policy = sm.pure_policy(model, {"a": "u1", "b": "u2", "c": "u1"})
    cq = sm.chain_quantities(model, policy)
    analytic_s = cq.green @ cq.inputs.to_forbidden
    analytic_v = cq.green @ cq.inputs.stage_cost

    traj = sm.simulate(model, policy, start=1, seed=4)
    path = " -> ".join(str(s) for s in traj.states)
    print(f"one rollout from b (seed 4): {path}")
    print(f"  collected reward {sum(traj.rewards)}, absorbed in {traj.absorbed_in}")

    n = 20_000
    print(f"\nMonte Carlo with {n} rollouts per start:")
    print("  start   S analytic   S sampled (dev)    V analytic   V sampled (dev)")
    for start in range(3):
        rep = sm.mc_estimates(model, policy, start, n, seed=12)
        rows = []
        for est, exact in ((rep.s_hat, analytic_s[start]), (rep.v_hat, analytic_v[start])):
            dev = 0.0 if est.std_error == 0 else abs(est.mean - exact) / est.std_error
            rows.append(f"{exact:.4f}       {est.mean:.4f} ({dev:.2f} SE)")
        print(f"  {model.states[start]}       " + "    ".join(rows))

    again = sm.mc_estimates(model, policy, 1, n, seed=12)
    once = sm.mc_estimates(model, policy, 1, n, seed=12)
    print(f"  reruns under one seed are bit-identical: {again == once}")

    print("\nexhaustive path enumeration from b, growing depth:")
    print("  depth   paths   settled mass   value bracket low")
    for depth in (1, 3, 5, 8, 12):
        bounds = sm.exhaustive_paths(model, policy, "b", depth)
        print(f"  {depth:>5}   {bounds.nodes:>5}   {1 - bounds.mass_remaining:>12.6f}"
              f"   {bounds.v_lo:.6f}")
    print(f"  analytic value at b: {analytic_v[1]:.6f}; the bracket climbs toward it")

    oracle = sm.brute_force_constrained(model, 0.5)
    print(f"\nbrute-force constrained oracle at p = 0.5:")
    print(f"  {oracle.admissible_count} admissible of {oracle.total} pure policies,"
          f" best total {oracle.value.sum():.4f}")


if __name__ == "__main__":
    main()
