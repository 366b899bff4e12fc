"""Random-instance builders shared by the property and acceptance tests.

Every taboo row is a uniform-random distribution blended with an exit
mass of at least 0.1 spread over the forbidden and target states, so the
taboo block of every policy has row sums at most 0.9.  That makes every
policy transient by construction, which the corpus tests rely on.
"""
import json

import numpy as np

import safemdp as sm


def _assemble(states, actions, h, nu, trans, rewards):
    doc = {
        "states": states,
        "actions": actions,
        "partition": {
            "taboo": states[:h],
            "forbidden": states[h : h + nu],
            "target": states[h + nu :],
        },
        "transitions": [
            {"from": states[i], "action": actions[u], "to": states[j],
             "p": float(trans[i, u, j])}
            for i in range(len(states))
            for u in range(len(actions))
            for j in range(len(states))
            if trans[i, u, j] > 0
        ],
        "rewards": [
            {"state": states[i], "action": actions[u], "rho": float(rewards[u, i])}
            for u in range(len(actions))
            for i in range(h)
        ],
    }
    return sm.load_model(json.dumps(doc))


def _fill(rng, h, nu, ne, m, min_exit):
    n = h + nu + ne
    states = [f"h{i}" for i in range(h)] + [f"u{i}" for i in range(nu)] + [
        f"e{i}" for i in range(ne)
    ]
    actions = [f"a{k}" for k in range(m)]
    trans = np.zeros((n, m, n))
    for i in range(h):
        for u in range(m):
            w = rng.random(n)
            w /= w.sum()
            eps = min_exit + rng.random() * 0.3
            exit_w = rng.random(nu + ne)
            exit_w /= exit_w.sum()
            row = (1 - eps) * w
            row[h:] += eps * exit_w
            trans[i, u] = row / row.sum()
    for j in range(h, n):
        trans[j, :, j] = 1.0
    rewards = np.zeros((m, n))
    rewards[:, :h] = rng.uniform(0.0, 5.0, size=(m, h))
    return _assemble(states, actions, h, nu, trans, rewards)


def random_model(rng, max_h=4, max_u=1, max_actions=3, min_exit=0.1):
    """Instance with small taboo and action sets, for the solver corpus."""
    h = int(rng.integers(2, max_h + 1))
    nu = int(rng.integers(0, max_u + 1))
    ne = int(rng.integers(1, 3))
    m = int(rng.integers(2, max_actions + 1))
    return _fill(rng, h, nu, ne, m, min_exit)


def random_model_small(rng, max_actions=3):
    """Instance with at most 6 states, for the chain-identity corpus."""
    h = int(rng.integers(1, 5))
    nu = int(rng.integers(0, min(2, 6 - h - 1) + 1))
    ne = int(rng.integers(1, 6 - h - nu + 1))
    m = int(rng.integers(1, max_actions + 1))
    return _fill(rng, h, nu, ne, m, 0.1)


def random_policy(rng, model):
    rows = rng.random((model.n_states, model.n_actions))
    rows /= rows.sum(axis=1, keepdims=True)
    return sm.make_policy(model, rows)


def random_initial(rng, model):
    mu = rng.random(model.n_states)
    return mu / mu.sum()


def feasible_p(rng, model):
    """A safety level above the best attainable, so some policy qualifies."""
    s_star, _ = sm.safest_policy(model)
    smax = float(s_star.max()) if s_star.size else 0.0
    frac = rng.uniform(0.05, 0.95)
    return min(smax + frac * (1.0 - smax), 0.999)
