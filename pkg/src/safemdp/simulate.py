"""Trajectory simulation and exhaustive oracles.

Everything here is deliberately independent of the analytic solvers so
the two can be checked against each other: a counter-based Monte Carlo
simulator, a finite-depth path enumerator with rigorous bounds, and a
brute-force constrained optimizer over pure policies.

Randomness: each trajectory owns a Philox stream keyed by (master seed,
trajectory index).  Estimates are therefore bit-identical across reruns
and across any parallel execution order.
"""

from __future__ import annotations

import os
from bisect import bisect_right
from concurrent.futures import ThreadPoolExecutor
from dataclasses import dataclass
from itertools import accumulate, product
from typing import NamedTuple

import numpy as np

from .evaluate import chain_quantities
from .exceptions import CapExceededError, NotTransientError, PathExplosionError
from .model import MdpModel, Policy, pure_policy

UNIFORM_BLOCK = 16
MAX_DEPTH = 64


@dataclass(frozen=True)
class Trajectory:
    """One realized path: visited states, chosen actions, accrued rewards.

    ``states`` includes the start and, unless truncated, ends at the
    absorbing state.  ``actions`` and ``rewards`` have one entry per
    transition taken.  ``absorbed_in`` is "forbidden", "target" or
    "truncated".
    """

    states: tuple
    actions: tuple
    rewards: tuple
    absorbed_in: str


class McEstimate(NamedTuple):
    mean: float
    std_error: float
    n: int


@dataclass(frozen=True)
class McReport:
    """Monte Carlo estimates of safety, reach and value from one start state."""

    s_hat: McEstimate
    t_hat: McEstimate
    v_hat: McEstimate
    truncated: int
    n: int


@dataclass(frozen=True)
class PathBounds:
    """Exact bounds from expanding every support path to a fixed depth.

    ``s_lo <= S <= s_hi`` always; ``v_lo <= V`` for nonnegative rewards.
    ``mass_remaining`` is the probability still in taboo states at the
    depth cutoff.
    """

    s_lo: float
    s_hi: float
    v_lo: float
    mass_remaining: float
    nodes: int


@dataclass(frozen=True)
class BruteForceResult:
    """Best admissible pure policy by exhaustive enumeration."""

    feasible: bool
    assignment: tuple[int, ...] | None
    policy: Policy | None
    value: np.ndarray | None
    safety: np.ndarray | None
    admissible_count: int
    total: int


def _stream(seed: int, index: int) -> np.random.Generator:
    key = np.array([seed, index], dtype=np.uint64)
    return np.random.Generator(np.random.Philox(key=key))


def _sampling_tables(model: MdpModel, policy: Policy):
    """Cumulative action and successor rows as plain lists for bisect."""
    h = model.n_taboo
    act = [list(accumulate(policy.matrix[i])) for i in range(h)]
    trans = [
        [list(accumulate(model.transitions[i, u])) for u in range(model.n_actions)]
        for i in range(h)
    ]
    return act, trans


class _Walker:
    """Shared immutable tables plus the per-trajectory sampling loop."""

    def __init__(self, model: MdpModel, policy: Policy):
        if policy.matrix.shape != (model.n_states, model.n_actions):
            raise ValueError("policy shape does not match the model")
        self.h = model.n_taboo
        self.nu = model.n_forbidden
        self.n_actions = model.n_actions
        self.act_cum, self.trans_cum = _sampling_tables(model, policy)
        self.rewards = [list(model.rewards[:, i]) for i in range(self.h)]

    def run(self, start: int, rng: np.random.Generator, max_steps: int):
        """Walk until absorption; returns (path, actions, rewards, outcome)."""
        states = [start]
        actions: list[int] = []
        rewards: list[float] = []
        i = start
        if i >= self.h:
            return states, actions, rewards, self._outcome(i)
        block: list[float] = []
        cursor = 0
        for _ in range(max_steps):
            if cursor + 2 > len(block):
                block = rng.random(UNIFORM_BLOCK).tolist()
                cursor = 0
            u = bisect_right(self.act_cum[i], block[cursor])
            if u >= self.n_actions:
                u = self.n_actions - 1
            row = self.trans_cum[i][u]
            j = bisect_right(row, block[cursor + 1])
            if j >= len(row):
                j = len(row) - 1
            cursor += 2
            actions.append(u)
            rewards.append(self.rewards[i][u])
            states.append(j)
            if j >= self.h:
                return states, actions, rewards, self._outcome(j)
            i = j
        return states, actions, rewards, "truncated"

    def _outcome(self, j: int) -> str:
        return "forbidden" if j < self.h + self.nu else "target"


def simulate(
    model: MdpModel,
    policy: Policy,
    start,
    seed: int,
    max_steps: int = 10**5,
) -> Trajectory:
    """Sample one trajectory from ``start`` under the policy.

    Deterministic given ``seed`` (the trajectory uses stream index 0).
    A start already in a forbidden or target state returns immediately
    with no transitions.
    """
    i = model.state_index(start)
    walker = _Walker(model, policy)
    states, actions, rewards, outcome = walker.run(i, _stream(seed, 0), max_steps)
    return Trajectory(
        states=tuple(model.states[s] for s in states),
        actions=tuple(model.actions[u] for u in actions),
        rewards=tuple(float(r) for r in rewards),
        absorbed_in=outcome,
    )


def _worker_count() -> int:
    raw = os.environ.get("SAFE_MDP_THREADS", "1")
    try:
        return max(1, int(raw))
    except ValueError:
        return 1


def mc_estimates(
    model: MdpModel,
    policy: Policy,
    start,
    n: int,
    seed: int,
    max_steps: int = 10**5,
) -> McReport:
    """Monte Carlo safety, reach and value estimates from one start state.

    Truncated trajectories are excluded from the means but counted.
    Standard errors are sample standard deviations (ddof=1) over root n.
    The SAFE_MDP_THREADS environment variable caps the worker count; the
    per-index streams make the result independent of the split.
    """
    if n < 1:
        raise ValueError("trajectory count must be positive")
    i0 = model.state_index(start)
    walker = _Walker(model, policy)

    hit_u = np.zeros(n)
    hit_e = np.zeros(n)
    totals = np.zeros(n)
    truncated = np.zeros(n, dtype=bool)

    def run_range(lo: int, hi: int) -> None:
        for k in range(lo, hi):
            _, _, rewards, outcome = walker.run(i0, _stream(seed, k), max_steps)
            if outcome == "truncated":
                truncated[k] = True
            else:
                hit_u[k] = 1.0 if outcome == "forbidden" else 0.0
                hit_e[k] = 1.0 - hit_u[k]
                totals[k] = sum(rewards)

    workers = min(_worker_count(), n)
    if workers == 1:
        run_range(0, n)
    else:
        bounds = np.linspace(0, n, workers + 1).astype(int)
        with ThreadPoolExecutor(max_workers=workers) as pool:
            list(pool.map(lambda w: run_range(bounds[w], bounds[w + 1]), range(workers)))

    keep = ~truncated
    kept = int(keep.sum())

    def estimate(x: np.ndarray) -> McEstimate:
        if kept == 0:
            return McEstimate(mean=float("nan"), std_error=float("nan"), n=0)
        vals = x[keep]
        se = float(np.std(vals, ddof=1) / np.sqrt(kept)) if kept > 1 else float("nan")
        return McEstimate(mean=float(np.mean(vals)), std_error=se, n=kept)

    return McReport(
        s_hat=estimate(hit_u),
        t_hat=estimate(hit_e),
        v_hat=estimate(totals),
        truncated=int(truncated.sum()),
        n=n,
    )


def exhaustive_paths(
    model: MdpModel,
    policy: Policy,
    start,
    depth: int,
    node_budget: int = 10**6,
) -> PathBounds:
    """Expand every positive-probability path to ``depth`` transitions.

    Yields exact absorption bounds: the mass absorbed in forbidden
    states so far, plus the unresolved taboo mass as the gap to the
    upper bound.  Rewards accumulate along each expanded edge, giving a
    lower bound on the value when rewards are nonnegative.
    """
    if not 0 <= depth <= MAX_DEPTH:
        raise ValueError(f"depth must lie in [0, {MAX_DEPTH}]")
    i0 = model.state_index(start)
    h, nu = model.n_taboo, model.n_forbidden
    if policy.matrix.shape != (model.n_states, model.n_actions):
        raise ValueError("policy shape does not match the model")

    s_lo = 0.0
    v_lo = 0.0
    mass_remaining = 0.0
    nodes = 0
    if i0 >= h:
        s_lo = 1.0 if i0 < h + nu else 0.0
        return PathBounds(s_lo, s_lo, 0.0, 0.0, nodes)

    stack = [(i0, 1.0, 0)]
    while stack:
        i, mass, t = stack.pop()
        nodes += 1
        if nodes > node_budget:
            raise PathExplosionError(
                f"path tree exceeded {node_budget} nodes at depth {t}"
            )
        if t == depth:
            mass_remaining += mass
            continue
        for u in range(model.n_actions):
            pu = policy.matrix[i, u]
            if pu == 0.0:
                continue
            step_mass = mass * pu
            row = model.transitions[i, u]
            for j in np.nonzero(row)[0]:
                child = step_mass * row[j]
                v_lo += child * model.rewards[u, i]
                if j < h:
                    stack.append((int(j), child, t + 1))
                elif j < h + nu:
                    s_lo += child
    return PathBounds(
        s_lo=s_lo,
        s_hi=s_lo + mass_remaining,
        v_lo=v_lo,
        mass_remaining=mass_remaining,
        nodes=nodes,
    )


def brute_force_constrained(
    model: MdpModel, p: float, cap: int = 10**6
) -> BruteForceResult:
    """Exhaustively find the admissible pure policy with the least summed value.

    The reference oracle for the constrained solvers: every pure policy
    is evaluated exactly; those with any safety coordinate above
    p + 1e-10 or with a non-transient chain are rejected.  Ties on the
    summed value keep the earliest policy in product order.
    """
    h, m = model.n_taboo, model.n_actions
    total = m**h
    if total > cap:
        raise CapExceededError(f"{total} pure policies exceed the cap of {cap}")
    best = None
    best_sum = np.inf
    admissible = 0
    for assignment in product(range(m), repeat=h):
        pol = pure_policy(model, dict(enumerate(assignment)))
        try:
            cq = chain_quantities(model, pol)
        except NotTransientError:
            continue
        s = cq.green @ cq.inputs.to_forbidden
        if (s > p + 1e-10).any():
            continue
        admissible += 1
        v = cq.green @ cq.inputs.stage_cost
        if float(v.sum()) < best_sum:
            best_sum = float(v.sum())
            best = (assignment, pol, v, s)
    if best is None:
        return BruteForceResult(
            feasible=False,
            assignment=None,
            policy=None,
            value=None,
            safety=None,
            admissible_count=0,
            total=total,
        )
    assignment, pol, v, s = best
    return BruteForceResult(
        feasible=True,
        assignment=assignment,
        policy=pol,
        value=v,
        safety=s,
        admissible_count=admissible,
        total=total,
    )
