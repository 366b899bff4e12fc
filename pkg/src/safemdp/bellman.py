"""Bellman operator and value iteration for the unconstrained problem.

The operator acts on vectors over taboo states,

    (T V)(i) = min_u [ rho(u, i) + sum_{j in H} p[i, u, j] V(j) ],

optionally with additive per-(state, action) offsets.  The per-state
objective is linear in the action distribution, so the minimum over
distributions is attained at a pure action; ties break to the lowest
action index.
"""

from __future__ import annotations

from dataclasses import dataclass, field

import numpy as np

from .evaluate import chain_quantities
from .exceptions import DivergenceError, MaxIterationsError, NotTransientError
from .model import MdpModel, Policy

DIVERGENCE_FACTOR = 1e6


@dataclass(frozen=True)
class BellmanResult:
    """Outcome of a value-iteration run.

    ``residual`` is the sup-norm of one more operator application at the
    returned value, so it is bounded by the convergence tolerance.
    ``history`` holds every iterate (including the start) when requested.
    """

    value: np.ndarray
    policy: Policy
    iterations: int
    residual: float
    history: list[np.ndarray] = field(default_factory=list, repr=False)


def _taboo_tensor(model: MdpModel) -> np.ndarray:
    h = model.n_taboo
    return model.transitions[:h, :, :h]


def _stage_cost_matrix(model: MdpModel) -> np.ndarray:
    # rewards are indexed [action, state]; sweeps want [state, action]
    return model.rewards[:, : model.n_taboo].T


def _exit_mass_matrix(model: MdpModel) -> np.ndarray:
    h, nu = model.n_taboo, model.n_forbidden
    return model.transitions[:h, :, h : h + nu].sum(axis=2)


def _greedy_policy(model: MdpModel, greedy: np.ndarray) -> Policy:
    matrix = np.zeros((model.n_states, model.n_actions))
    matrix[np.arange(model.n_taboo), greedy] = 1.0
    matrix[model.n_taboo :, 0] = 1.0
    return Policy(matrix=matrix)


def bellman_apply(
    model: MdpModel, v: np.ndarray, offsets: np.ndarray | None = None
) -> tuple[np.ndarray, Policy]:
    """One application of the Bellman operator.

    Parameters
    ----------
    v : ndarray, shape (n_taboo,)
        Current value estimate over taboo states.
    offsets : ndarray, shape (n_taboo, n_actions), optional
        Additive per-(state, action) terms entering the minimization.

    Returns
    -------
    (ndarray, Policy)
        The updated values and the greedy pure policy attaining them.
    """
    v = np.asarray(v, dtype=float)
    h = model.n_taboo
    if v.shape != (h,):
        raise ValueError(f"value vector has shape {v.shape}, expected {(h,)}")
    totals = _stage_cost_matrix(model) + _taboo_tensor(model) @ v
    if offsets is not None:
        offsets = np.asarray(offsets, dtype=float)
        if offsets.shape != totals.shape:
            raise ValueError(
                f"offsets have shape {offsets.shape}, expected {totals.shape}"
            )
        totals = totals + offsets
    greedy = totals.argmin(axis=1)
    return totals.min(axis=1), _greedy_policy(model, greedy)


def _iterate(
    model: MdpModel,
    stage: np.ndarray,
    v0: np.ndarray,
    tol: float,
    max_iter: int,
    keep_history: bool,
) -> BellmanResult:
    """Shared sweep loop for any per-(state, action) stage-cost matrix."""
    h = model.n_taboo
    PH = _taboo_tensor(model)
    guard = DIVERGENCE_FACTOR * (1.0 + np.abs(stage).max(initial=0.0) * h)
    v = np.asarray(v0, dtype=float).copy()
    history = [v.copy()] if keep_history else []
    greedy = np.zeros(h, dtype=int)
    for sweep in range(1, max_iter + 1):
        totals = stage + PH @ v
        greedy = totals.argmin(axis=1)
        nxt = totals.min(axis=1)
        diff = np.abs(nxt - v).max() if h else 0.0
        v = nxt
        if keep_history:
            history.append(v.copy())
        if np.abs(v).max(initial=0.0) > guard:
            raise DivergenceError(
                f"iterates exceeded {guard:.3g} after {sweep} sweeps; "
                "some policy appears non-transient"
            )
        if diff <= tol:
            residual = float(
                np.abs((stage + PH @ v).min(axis=1) - v).max() if h else 0.0
            )
            return BellmanResult(
                value=v,
                policy=_greedy_policy(model, greedy),
                iterations=sweep,
                residual=residual,
                history=history,
            )
    raise MaxIterationsError(
        f"no convergence within {max_iter} sweeps (last change {diff:.3g})", last=v
    )


def value_iteration(
    model: MdpModel,
    v0: np.ndarray | None = None,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    keep_history: bool = False,
) -> BellmanResult:
    """Value iteration for the minimal expected cost until absorption.

    Starts from ``v0`` (zeros by default; must be nonnegative) and sweeps the
    Bellman operator until the sup-norm change drops to ``tol``.  Divergent
    growth beyond ``1e6 * (1 + max|rho| * |H|)`` raises DivergenceError.
    """
    h = model.n_taboo
    v0 = np.zeros(h) if v0 is None else np.asarray(v0, dtype=float)
    if (v0 < 0).any():
        raise ValueError("starting values must be nonnegative")
    return _iterate(model, _stage_cost_matrix(model), v0, tol, max_iter, keep_history)


def safest_policy(
    model: MdpModel, tol: float = 1e-12, max_iter: int = 100_000
) -> tuple[np.ndarray, Policy]:
    """Minimal absorption-in-forbidden probability and a policy attaining it.

    Runs value iteration with the one-step forbidden-exit mass as the stage
    cost; the fixed point is the coordinate-wise minimal safety over all
    policies.
    """
    result = _iterate(
        model, _exit_mass_matrix(model), np.zeros(model.n_taboo), tol, max_iter, False
    )
    return result.value, result.policy


@dataclass(frozen=True)
class CertificateReport:
    """Membership and dominance checks of a claimed optimal value vector."""

    membership_violations: list[tuple[int, int, float]]
    dominance_violations: list[tuple[int, int, float]]
    skipped_non_transient: int

    @property
    def ok(self) -> bool:
        return not self.membership_violations and not self.dominance_violations


def certify_supremum(
    model: MdpModel,
    v_star: np.ndarray,
    sample_policies: list[Policy],
    tol: float = 1e-9,
) -> CertificateReport:
    """Check that a value vector behaves like the optimum against sampled policies.

    Membership requires ``v - Q(pi) v <= R_pi + tol`` row-wise for every
    sampled policy; dominance requires ``v <= V_pi + tol`` for every sampled
    policy whose chain is transient.  Violations are reported as
    (policy index, state index, excess).
    """
    v_star = np.asarray(v_star, dtype=float)
    h = model.n_taboo
    membership: list[tuple[int, int, float]] = []
    dominance: list[tuple[int, int, float]] = []
    skipped = 0
    PH = _taboo_tensor(model)
    rewards_h = model.rewards[:, :h]
    for k, pol in enumerate(sample_policies):
        pi_h = pol.matrix[:h]
        q = np.einsum("iu,iuj->ij", pi_h, PH)
        r = np.einsum("iu,ui->i", pi_h, rewards_h)
        slack = (v_star - q @ v_star) - r
        for i in np.nonzero(slack > tol)[0]:
            membership.append((k, int(i), float(slack[i])))
        try:
            cq = chain_quantities(model, pol)
        except NotTransientError:
            skipped += 1
            continue
        v_pi = cq.green @ cq.inputs.stage_cost
        excess = v_star - v_pi
        for i in np.nonzero(excess > tol)[0]:
            dominance.append((k, int(i), float(excess[i])))
    return CertificateReport(
        membership_violations=membership,
        dominance_violations=dominance,
        skipped_non_transient=skipped,
    )
