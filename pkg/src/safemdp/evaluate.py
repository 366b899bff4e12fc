"""Evaluation of a fixed policy: expected cost, safety and reach probabilities.

For a policy pi with taboo block Q(pi) and Green operator G(pi), the three
headline quantities over taboo states are

* value   V = G(pi) R,   the expected cost accumulated before absorption,
* safety  S = G(pi) K,   the probability of being absorbed in a forbidden state,
* reach   T = G(pi) L,   the probability of being absorbed in a target state,

where R is the policy-averaged stage cost, K the one-step mass sent to
forbidden states and L the one-step mass sent to target states.  S + T = 1
on transient chains.
"""

from __future__ import annotations

from dataclasses import dataclass

import numpy as np

from .chain import BlockDecomposition, check_transient, decompose, green
from .exceptions import MaxIterationsError, NotTransientError
from .model import MdpModel, Policy, induced_matrix


@dataclass(frozen=True)
class CostInputs:
    """Policy-averaged stage cost and one-step exit masses over taboo states."""

    stage_cost: np.ndarray
    to_forbidden: np.ndarray
    to_target: np.ndarray


@dataclass(frozen=True)
class ChainQuantities:
    """Everything the evaluators need about one induced chain."""

    matrix: np.ndarray
    blocks: BlockDecomposition
    green: np.ndarray
    spectral_radius: float
    inputs: CostInputs


def cost_inputs(model: MdpModel, policy: Policy) -> CostInputs:
    """Average the stage cost and exit masses under a policy.

    Returns
    -------
    CostInputs
        ``stage_cost[i] = sum_u pi[i, u] rho[u, i]`` and the row sums of the
        H-to-U and H-to-E blocks, all over taboo states.
    """
    h = model.n_taboo
    pi_h = policy.matrix[:h]
    stage = np.einsum("iu,ui->i", pi_h, model.rewards[:, :h])
    P = induced_matrix(model, policy)
    blocks = decompose(P, model.partition)
    return CostInputs(
        stage_cost=stage,
        to_forbidden=blocks.hu.sum(axis=1),
        to_target=blocks.he.sum(axis=1),
    )


def chain_quantities(model: MdpModel, policy: Policy) -> ChainQuantities:
    """Induced matrix, blocks, Green operator and cost inputs for one policy.

    Raises
    ------
    NotTransientError
        When the taboo block of the induced chain is not transient.
    """
    P = induced_matrix(model, policy)
    blocks = decompose(P, model.partition)
    transient, radius = check_transient(blocks.q)
    if not transient:
        raise NotTransientError(radius)
    G = green(blocks.q)
    h = model.n_taboo
    pi_h = policy.matrix[:h]
    stage = np.einsum("iu,ui->i", pi_h, model.rewards[:, :h])
    inputs = CostInputs(
        stage_cost=stage,
        to_forbidden=blocks.hu.sum(axis=1),
        to_target=blocks.he.sum(axis=1),
    )
    return ChainQuantities(
        matrix=P, blocks=blocks, green=G, spectral_radius=radius, inputs=inputs
    )


def value(model: MdpModel, policy: Policy) -> np.ndarray:
    """Expected accumulated cost before absorption, one entry per taboo state."""
    cq = chain_quantities(model, policy)
    return cq.green @ cq.inputs.stage_cost


def safety(model: MdpModel, policy: Policy) -> np.ndarray:
    """Probability of absorption in a forbidden state, per taboo start state."""
    cq = chain_quantities(model, policy)
    return cq.green @ cq.inputs.to_forbidden


def reach(model: MdpModel, policy: Policy) -> np.ndarray:
    """Probability of absorption in a target state, per taboo start state."""
    cq = chain_quantities(model, policy)
    return cq.green @ cq.inputs.to_target


def value_iterative(
    model: MdpModel,
    policy: Policy,
    v0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, int]:
    """Fixed-point iteration ``V <- R + Q V`` for the policy value.

    Returns the final iterate and the number of sweeps taken.  Raises
    MaxIterationsError (carrying the last iterate) when the sup-norm change
    still exceeds ``tol`` after ``max_iter`` sweeps.
    """
    cq = chain_quantities(model, policy)
    return _affine_iteration(cq.blocks.q, cq.inputs.stage_cost, v0, tol, max_iter)


def safety_iterative(
    model: MdpModel,
    policy: Policy,
    s0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> tuple[np.ndarray, int]:
    """Fixed-point iteration ``S <- Q S + K`` for the policy safety."""
    cq = chain_quantities(model, policy)
    return _affine_iteration(cq.blocks.q, cq.inputs.to_forbidden, s0, tol, max_iter)


def _affine_iteration(Q, offset, x0, tol, max_iter):
    x = np.zeros(Q.shape[0]) if x0 is None else np.asarray(x0, dtype=float).copy()
    for sweep in range(1, max_iter + 1):
        nxt = offset + Q @ x
        diff = np.abs(nxt - x).max() if x.size else 0.0
        x = nxt
        if diff <= tol:
            return x, sweep
    raise MaxIterationsError(
        f"no convergence within {max_iter} sweeps (last change {diff:.3g})", last=x
    )


def set_safety(safety_vector: np.ndarray, states) -> float:
    """Worst-case safety over a non-empty set of taboo state indices."""
    idx = np.asarray(list(states), dtype=int)
    if idx.size == 0:
        raise ValueError("state set must be non-empty")
    s = np.asarray(safety_vector, dtype=float)
    if idx.min() < 0 or idx.max() >= s.shape[0]:
        raise ValueError("state index out of range for the safety vector")
    return float(s[idx].max())
