"""Occupation measure, hitting distribution, and the evolution identity.

Builds a small random process whose taboo rows always leak at least 20
percent of their mass toward the absorbing states, so every policy is
transient, then shows the three measures and the identity tying them
together: lambda = mu + gamma (P - I).
"""

import json

import numpy as np

import safemdp as sm


def random_doc(rng, n_taboo=4):
    states = [f"h{i}" for i in range(n_taboo)] + ["u0", "e0"]
    transitions = []
    for i in range(n_taboo):
        row = rng.random(n_taboo + 2)
        row[:n_taboo] *= 0.8 / row[:n_taboo].sum()
        row[n_taboo:] *= 0.2 / row[n_taboo:].sum()
        for j, p in enumerate(row):
            transitions.append(
                {"from": f"h{i}", "action": "go", "to": states[j], "p": float(p)}
            )
    for absorbing in ("u0", "e0"):
        transitions.append(
            {"from": absorbing, "action": "go", "to": absorbing, "p": 1.0}
        )
    rewards = [
        {"state": f"h{i}", "action": "go", "rho": float(rng.integers(1, 5))}
        for i in range(n_taboo)
    ]
    return {
        "states": states,
        "actions": ["go"],
        "partition": {"taboo": states[:n_taboo], "forbidden": ["u0"], "target": ["e0"]},
        "transitions": transitions,
        "rewards": rewards,
    }


def main():
    rng = np.random.default_rng(2)
    model = sm.load_model(json.dumps(random_doc(rng)))
    policy = sm.pure_policy(model, {s: "go" for s in model.partition.taboo})
    h = model.n_taboo

    cq = sm.chain_quantities(model, policy)
    print(f"spectral radius of the taboo block: {cq.spectral_radius:.4f}")
    print("Green operator (row i counts expected visits to j from i):")
    print(np.array_str(cq.green, precision=4))

    neumann = sm.green_neumann(cq.blocks.q)
    print(f"direct solve vs Neumann series: {np.abs(cq.green - neumann).max():.2e}")

    # Start the walk in h0 with certainty.
    initial = np.zeros(model.n_states)
    initial[0] = 1.0
    gamma = sm.occupation(model, policy, initial)
    lam = sm.hitting(model, policy, initial)
    print(f"\noccupation gamma (expected time per taboo state): {np.round(gamma, 4)}")
    print(f"  total expected time before absorption: {gamma.sum():.4f}")
    print(f"hitting distribution over (u0, e0): {np.round(lam, 4)}")
    print(f"  absorption probabilities sum to {lam.sum():.6f}")

    residual = sm.evolution_residual(initial, gamma, lam, cq.matrix)
    print(f"evolution identity residual: {residual:.2e}")

    v = cq.green @ cq.inputs.stage_cost
    print(f"\nvalue from h0 (reward-weighted occupation): {v[0]:.4f}")
    direct = gamma @ cq.inputs.stage_cost[:h]
    print(f"same number through gamma directly:          {direct:.4f}")

    # A two-state cycle never leaves the taboo set; the package refuses it.
    loop = {
        "states": ["h0", "h1", "e0"],
        "actions": ["go"],
        "partition": {"taboo": ["h0", "h1"], "forbidden": [], "target": ["e0"]},
        "transitions": [
            {"from": "h0", "action": "go", "to": "h1", "p": 1.0},
            {"from": "h1", "action": "go", "to": "h0", "p": 1.0},
            {"from": "e0", "action": "go", "to": "e0", "p": 1.0},
        ],
        "rewards": [],
    }
    recurrent = sm.load_model(json.dumps(loop))
    spin = sm.pure_policy(recurrent, {"h0": "go", "h1": "go"})
    try:
        sm.chain_quantities(recurrent, spin)
    except sm.NotTransientError as exc:
        print(f"\nrecurrent cycle rejected: {exc}")


if __name__ == "__main__":
    main()
