"""Safety-constrained solvers.

Four routes to the same problem, minimizing expected cost subject to a
bound on the probability of absorption in a forbidden state:

* Lagrangian dual ascent over multiplier levels,
* a linear program over pure-policy constraint rows,
* exact enumeration of the admissible pure policies,
* value iteration restricted to the enumerated admissible set.

A fifth solver handles the local one-step variant, where per-state action
distributions are constrained by the ratio of forbidden-exit to
target-exit mass.

On multipliers: the per-state dual function is evaluated exactly as
written by ``lagrangian`` and ``dual_inner``, but the outer search in
``dual_ascent`` and the LP in ``build_lp`` restrict multipliers to a
common level across states (a vector t*1).  Along any per-state
direction that loads a single multiplier coordinate, the penalized value
grows without bound whenever the occupation weights amplify the penalty
faster than the p-discharge subtracts it, so the unrestricted search is
unbounded even on feasible models.  Constant vectors keep the dual value
equal to the penalized-cost optimum and reproduce the no-gap behaviour
the rest of the package tests against.
"""

from __future__ import annotations

import itertools
from dataclasses import dataclass, field
from typing import NamedTuple

import numpy as np

from .bellman import _iterate, _stage_cost_matrix, safest_policy
from .evaluate import chain_quantities
from .exceptions import (
    CapExceededError,
    DivergenceError,
    InfeasibleError,
    MaxIterationsError,
    NotTransientError,
)
from .model import MdpModel, Policy, pure_policy
from .simplex import solve_min

ADMISSIBLE_TOL = 1e-10
RELATIVE_TOL = 1e-12


@dataclass(frozen=True)
class ConstrainedSolveReport:
    """Common result shape for the constrained solvers.

    ``value`` and ``multipliers`` are vectors over taboo states;
    ``gap`` compares against an enumeration oracle when one was supplied
    and is None otherwise; ``info`` carries method-specific diagnostics.
    When ``feasible`` is False the value and policy fall back to the
    safest-policy baseline and the rest is advisory.
    """

    value: np.ndarray
    policy: Policy
    multipliers: np.ndarray
    method: str
    feasible: bool
    gap: float | None
    info: dict = field(default_factory=dict)


class ConeReport(NamedTuple):
    admissible: bool
    alpha: np.ndarray


@dataclass(frozen=True)
class AdmissibleMember:
    """One admissible pure policy with its exact evaluation."""

    assignment: tuple[int, ...]
    policy: Policy
    value: np.ndarray
    safety: np.ndarray


@dataclass(frozen=True)
class AdmissibleSet:
    members: tuple[AdmissibleMember, ...]
    non_transient: tuple[tuple[int, ...], ...]
    total: int
    p: float


def _taboo_tensor(model: MdpModel) -> np.ndarray:
    h = model.n_taboo
    return model.transitions[:h, :, :h]


def _exit_masses(model: MdpModel) -> tuple[np.ndarray, np.ndarray]:
    """Per-(state, action) one-step mass into forbidden and into target."""
    h, nu = model.n_taboo, model.n_forbidden
    k = model.transitions[:h, :, h : h + nu].sum(axis=2)
    l = model.transitions[:h, :, h + nu :].sum(axis=2)
    return k, l


def _check_multipliers(model: MdpModel, lam) -> np.ndarray:
    lam = np.asarray(lam, dtype=float)
    if lam.shape != (model.n_taboo,):
        raise ValueError(
            f"multiplier vector has shape {lam.shape}, expected ({model.n_taboo},)"
        )
    if (lam < 0).any():
        raise ValueError("multipliers must be nonnegative")
    return lam


def lagrangian(model: MdpModel, policy: Policy, lam, p: float) -> np.ndarray:
    """Penalized value V + lam * (S - p), componentwise over taboo states."""
    lam = _check_multipliers(model, lam)
    cq = chain_quantities(model, policy)
    v = cq.green @ cq.inputs.stage_cost
    s = cq.green @ cq.inputs.to_forbidden
    return v + lam * (s - p)


def _multiplier_offsets(model: MdpModel, lam: np.ndarray, p: float) -> np.ndarray:
    k, _ = _exit_masses(model)
    return k * lam[:, None] - p * (lam[:, None] - _taboo_tensor(model) @ lam)


def dual_inner(
    model: MdpModel,
    lam,
    p: float,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    v0: np.ndarray | None = None,
) -> tuple[np.ndarray, Policy]:
    """Minimize the penalized value over policies for fixed multipliers.

    Runs value iteration with the per-(state, action) stage cost

        rho(u, i) + K(u, i) lam(i) - p (lam(i) - sum_j p_iuj lam(j)),

    whose fixed point is the dual function at ``lam``.  Returns the
    converged vector and the greedy pure policy.
    """
    lam = _check_multipliers(model, lam)
    stage = _stage_cost_matrix(model) + _multiplier_offsets(model, lam, p)
    start = np.zeros(model.n_taboo) if v0 is None else np.asarray(v0, dtype=float)
    result = _iterate(model, stage, start, tol, max_iter, False)
    return result.value, result.policy


def _policy_safety(model: MdpModel, policy: Policy) -> np.ndarray:
    cq = chain_quantities(model, policy)
    return cq.green @ cq.inputs.to_forbidden


def dual_ascent(
    model: MdpModel,
    p: float,
    alpha0: float = 1.0,
    tol: float = 1e-6,
    max_outer: int = 2000,
    oracle_total: float | None = None,
    inner_tol: float = 1e-10,
) -> ConstrainedSolveReport:
    """Maximize the dual function over multiplier levels t >= 0.

    Stage one follows the projected subgradient schedule
    ``t <- max(0, t + alpha0/(1 + n/50) * sum(S - p))`` driven by the
    safety of the inner greedy policy.  Stage two shrinks a bracket
    around the best level by ternary search; the summed dual value is
    concave and piecewise linear in t, so the bracket converges to the
    maximizer.  Infeasibility (some coordinate of the minimal safety
    above p) is detected up front and reported, not raised.
    """
    h = model.n_taboo
    ones = np.ones(h)
    s_star, safe_pol = safest_policy(model)
    if (s_star > p + ADMISSIBLE_TOL).any():
        v0, _ = dual_inner(model, np.zeros(h), p, tol=inner_tol)
        return ConstrainedSolveReport(
            value=v0,
            policy=safe_pol,
            multipliers=np.zeros(h),
            method="dual-ascent",
            feasible=False,
            gap=None,
            info={"min_safety": s_star, "p": p},
        )

    best = {"sum": -np.inf, "t": 0.0, "value": None, "policy": None}
    last_feasible: Policy | None = None
    warm = np.zeros(h)

    def evaluate(t: float) -> tuple[float, np.ndarray, Policy]:
        nonlocal warm
        q_vec, pol = dual_inner(model, t * ones, p, tol=inner_tol, v0=warm)
        warm = q_vec
        total = float(q_vec.sum())
        if total > best["sum"]:
            best.update(sum=total, t=t, value=q_vec, policy=pol)
        return total, q_vec, pol

    def slope(pol: Policy) -> float:
        return float(_policy_safety(model, pol).sum()) - p * h

    # Stage one: the prescribed subgradient schedule on the level t.
    t = 0.0
    outer = 0
    exit_reason = "max_outer"
    for n in range(max_outer):
        outer = n + 1
        _, _, pol = evaluate(t)
        g = slope(pol)
        if (_policy_safety(model, pol) <= p + ADMISSIBLE_TOL).all():
            last_feasible = pol
        t_new = max(0.0, t + alpha0 / (1.0 + n / 50.0) * g)
        if abs(t_new - t) < tol:
            exit_reason = "stationary"
            t = t_new
            break
        if oracle_total is not None and oracle_total - best["sum"] < tol:
            exit_reason = "oracle-gap"
            break
        t = t_new

    # Stage two: bracket the maximizer and shrink by ternary search.
    refine = 0
    _, _, pol_lo = evaluate(0.0)
    refine += 1
    if slope(pol_lo) > 0:
        lo, hi = 0.0, max(1.0, 2.0 * best["t"])
        for _ in range(60):
            _, _, pol_hi = evaluate(hi)
            refine += 1
            if slope(pol_hi) <= 0:
                break
            lo, hi = hi, 2.0 * hi
        while hi - lo > 1e-11 * (1.0 + hi) and refine < 400:
            m1 = lo + (hi - lo) / 3.0
            m2 = hi - (hi - lo) / 3.0
            f1, _, _ = evaluate(m1)
            f2, _, _ = evaluate(m2)
            refine += 2
            if f1 < f2:
                lo = m1
            else:
                hi = m2
        evaluate(0.5 * (lo + hi))
        refine += 1

    policy = best["policy"]
    try:
        policy_feasible = bool(
            (_policy_safety(model, policy) <= p + ADMISSIBLE_TOL).all()
        )
    except NotTransientError:
        policy_feasible = False
    if policy_feasible:
        last_feasible = policy
    reported = last_feasible if last_feasible is not None else safe_pol
    gap = None if oracle_total is None else float(oracle_total - best["sum"])
    return ConstrainedSolveReport(
        value=best["value"],
        policy=reported,
        multipliers=best["t"] * ones,
        method="dual-ascent",
        feasible=True,
        gap=gap,
        info={
            "level": best["t"],
            "outer_iterations": outer,
            "refinement_evaluations": refine,
            "exit": exit_reason,
            "inner_policy_feasible": policy_feasible,
        },
    )


@dataclass(frozen=True)
class LpProblem:
    """Maximize ``objective @ x`` over ``rows @ x <= rhs``, ``x >= 0``.

    Variables are the value candidates l, one per taboo state, followed
    by the multiplier level t when the model has forbidden states.  One
    row per (taboo state, action), except rows whose coefficients all
    vanish (a self-looping action that never leaves its state).
    """

    objective: np.ndarray
    rows: np.ndarray
    rhs: np.ndarray
    row_labels: tuple[str, ...]
    column_labels: tuple[str, ...]
    n_taboo: int
    p: float

    @property
    def has_multiplier(self) -> bool:
        return self.rows.shape[1] > self.n_taboo

    def dump(self) -> str:
        """Readable tableau: objective, then one constraint per line."""
        terms = [
            f"{c:+g} {name}"
            for c, name in zip(self.objective, self.column_labels)
            if c != 0.0
        ]
        lines = ["maximize " + " ".join(terms), "subject to"]
        width = max(len(r) for r in self.row_labels) if self.row_labels else 0
        for label, row, b in zip(self.row_labels, self.rows, self.rhs):
            body = " ".join(
                f"{c:+.6g} {name}"
                for c, name in zip(row, self.column_labels)
                if c != 0.0
            )
            lines.append(f"  {label:<{width}}  {body} <= {b:g}")
        lines.append("  all variables >= 0")
        return "\n".join(lines)


@dataclass(frozen=True)
class LpSolution:
    """Optimal l, the multiplier vector, and the penalized value l - p*t."""

    l: np.ndarray
    multipliers: np.ndarray
    value: np.ndarray
    objective: float
    iterations: int


def build_lp(model: MdpModel, p: float) -> LpProblem:
    """Assemble the pure-policy constraint program for the bound p.

    Row (i, u) reads ``l(i) - sum_j p_iuj l(j) - K(u, i) t <= rho(u, i)``;
    the objective maximizes ``sum_i l(i) - p |H| t``.  Stochastic
    policies add no further constraints: their rows are convex
    combinations of these.  Models without forbidden states get no t
    column.
    """
    h, m = model.n_taboo, model.n_actions
    PH = _taboo_tensor(model)
    K, _ = _exit_masses(model)
    stage = _stage_cost_matrix(model)
    with_t = model.n_forbidden > 0
    width = h + 1 if with_t else h

    rows, rhs, labels = [], [], []
    for i in range(h):
        for u in range(m):
            row = np.zeros(width)
            row[:h] = -PH[i, u]
            row[i] += 1.0
            if with_t:
                row[h] = -K[i, u]
            if np.abs(row).max() <= 1e-15:
                continue
            rows.append(row)
            rhs.append(stage[i, u])
            labels.append(f"{model.states[i]}:{model.actions[u]}")

    objective = np.ones(width)
    if with_t:
        objective[h] = -p * h
    columns = [f"l[{s}]" for s in model.states[:h]]
    if with_t:
        columns.append("t")
    return LpProblem(
        objective=objective,
        rows=np.array(rows).reshape(len(rows), width),
        rhs=np.array(rhs),
        row_labels=tuple(labels),
        column_labels=tuple(columns),
        n_taboo=h,
        p=p,
    )


def solve_lp(problem: LpProblem) -> LpSolution:
    """Solve the assembled program with the in-package simplex.

    An unbounded program means no multiplier level can discharge the
    penalty, which is exactly the infeasible-p regime; the
    LpUnboundedError from the solver propagates to the caller.
    """
    res = solve_min(-problem.objective, problem.rows, problem.rhs)
    h = problem.n_taboo
    l = res.x[:h]
    t = float(res.x[h]) if problem.has_multiplier else 0.0
    return LpSolution(
        l=l,
        multipliers=t * np.ones(h),
        value=l - problem.p * t,
        objective=float(-res.objective),
        iterations=res.iterations,
    )


def enumerate_admissible(model: MdpModel, p: float, cap: int = 10**6) -> AdmissibleSet:
    """Evaluate every pure policy and keep those with safety <= p throughout.

    Enumeration order is the action-index product over taboo states in
    canonical order, last state varying fastest.  Policies whose induced
    chain is not transient cannot be evaluated and are listed separately.
    """
    h, m = model.n_taboo, model.n_actions
    total = m**h
    if total > cap:
        raise CapExceededError(f"{total} pure policies exceed the cap of {cap}")
    members: list[AdmissibleMember] = []
    skipped: list[tuple[int, ...]] = []
    for assignment in itertools.product(range(m), repeat=h):
        policy = pure_policy(model, dict(enumerate(assignment)))
        try:
            cq = chain_quantities(model, policy)
        except NotTransientError:
            skipped.append(assignment)
            continue
        s = cq.green @ cq.inputs.to_forbidden
        if (s <= p + ADMISSIBLE_TOL).all():
            members.append(
                AdmissibleMember(
                    assignment=assignment,
                    policy=policy,
                    value=cq.green @ cq.inputs.stage_cost,
                    safety=s,
                )
            )
    return AdmissibleSet(
        members=tuple(members), non_transient=tuple(skipped), total=total, p=p
    )


def cone_check(model: MdpModel, policy: Policy, p: float) -> ConeReport:
    """Admissibility via the occupation-weighted slack alpha = G(pi) M_pi.

    M_pi pairs the p-scaled one-step leaving mass against the
    forbidden-exit mass; nonnegativity of alpha (up to 1e-10) is
    equivalent to the direct safety filter S_pi <= p.
    """
    cq = chain_quantities(model, policy)
    ones = np.ones(model.n_taboo)
    m_pi = p * (ones - cq.blocks.q @ ones) - cq.inputs.to_forbidden
    alpha = cq.green @ m_pi
    return ConeReport(admissible=bool((alpha >= -ADMISSIBLE_TOL).all()), alpha=alpha)


def constrained_vi_pure(
    model: MdpModel,
    p: float,
    tol: float = 1e-10,
    max_iter: int = 100_000,
    cap: int = 10**6,
) -> ConstrainedSolveReport:
    """Value iteration over the enumerated admissible pure policies.

    Each sweep takes the coordinate-wise minimum of R + Q V across the
    admissible set.  The sweep limit can undercut every single member
    (coordinates may be claimed by different policies), so the report
    carries both: ``value`` is the sweep limit, ``policy`` the member
    with the smallest summed exact value, and ``info`` flags a gap
    between the two beyond 1e-8.
    """
    adm = enumerate_admissible(model, p, cap)
    if not adm.members:
        raise InfeasibleError(
            f"no pure policy keeps safety within {p} everywhere "
            f"({adm.total} enumerated, {len(adm.non_transient)} non-transient)"
        )
    h = model.n_taboo
    PH = _taboo_tensor(model)
    stage_all = _stage_cost_matrix(model)
    picks = np.array([m.assignment for m in adm.members])
    idx = np.arange(h)
    R = np.stack([stage_all[idx, a] for a in picks])
    Q = np.stack([PH[idx, a] for a in picks])

    v = np.zeros(h)
    for sweep in range(1, max_iter + 1):
        nxt = (R + Q @ v).min(axis=0)
        diff = np.abs(nxt - v).max()
        v = nxt
        if diff <= tol:
            break
    else:
        raise MaxIterationsError(f"no convergence within {max_iter} sweeps", last=v)

    sums = [float(m.value.sum()) for m in adm.members]
    best = adm.members[int(np.argmin(sums))]
    spread = float(np.abs(best.value - v).max())
    return ConstrainedSolveReport(
        value=v,
        policy=best.policy,
        multipliers=np.zeros(h),
        method="constrained-vi",
        feasible=True,
        gap=float(best.value.sum() - v.sum()),
        info={
            "sweeps": sweep,
            "admissible_count": len(adm.members),
            "non_transient_count": len(adm.non_transient),
            "sweep_matches_best_policy": bool(spread <= 1e-8),
            "sweep_vs_best_policy": spread,
        },
    )


@dataclass(frozen=True)
class RelativeVertexSet:
    """Vertices of one state's admissible action-distribution polytope.

    Each vertex is a weight row over actions: the pure admissible
    actions first (ascending index), then boundary mixtures of one
    admissible and one violating action, ordered by that index pair.
    """

    state: int
    vertices: tuple[np.ndarray, ...]
    pure_count: int

    @property
    def feasible(self) -> bool:
        return bool(self.vertices)


def relative_admissible(model: MdpModel, q: float) -> list[RelativeVertexSet]:
    """Per-state vertex description of {d : d.K <= q d.L}.

    The constraint is a half-space cut through the action simplex, so
    every vertex is either an admissible pure action or the boundary
    point on an edge between a strictly admissible and a strictly
    violating action: weight x = g_v / (g_v - g_s) on the admissible
    one, where g = K - qL.
    """
    if q < 0:
        raise ValueError("q must be nonnegative")
    K, L = _exit_masses(model)
    out: list[RelativeVertexSet] = []
    m = model.n_actions
    for i in range(model.n_taboo):
        g = K[i] - q * L[i]
        vertices: list[np.ndarray] = []
        pure = [u for u in range(m) if g[u] <= RELATIVE_TOL]
        for u in pure:
            row = np.zeros(m)
            row[u] = 1.0
            vertices.append(row)
        for s in range(m):
            if g[s] >= -RELATIVE_TOL:
                continue
            for vv in range(m):
                if g[vv] <= RELATIVE_TOL:
                    continue
                x = g[vv] / (g[vv] - g[s])
                row = np.zeros(m)
                row[s] = x
                row[vv] = 1.0 - x
                vertices.append(row)
        out.append(
            RelativeVertexSet(state=i, vertices=tuple(vertices), pure_count=len(pure))
        )
    return out


def relative_vi(
    model: MdpModel,
    q: float,
    tol: float = 1e-10,
    max_iter: int = 100_000,
) -> ConstrainedSolveReport:
    """Bellman iteration with per-state minimization over admissible vertices.

    The per-state objective is linear in the action distribution, so the
    minimum over the cut simplex is attained at one of the vertices from
    relative_admissible; ties resolve to the first vertex in that
    ordering.  Entirely local: each state's update reads only its own
    vertex data and the current values of its successors.
    """
    sets = relative_admissible(model, q)
    for vs in sets:
        if not vs.vertices:
            raise InfeasibleError(
                f"state '{model.states[vs.state]}' admits no action distribution "
                f"at relative level q={q}"
            )
    h, m = model.n_taboo, model.n_actions
    PH = _taboo_tensor(model)
    stage_all = _stage_cost_matrix(model)
    counts = [len(vs.vertices) for vs in sets]
    kmax = max(counts)
    stage = np.full((h, kmax), np.inf)
    qrows = np.zeros((h, kmax, h))
    for i, vs in enumerate(sets):
        for k, d in enumerate(vs.vertices):
            stage[i, k] = d @ stage_all[i]
            qrows[i, k] = d @ PH[i]

    finite = stage[np.isfinite(stage)]
    guard = 1e6 * (1.0 + (np.abs(finite).max() if finite.size else 0.0) * h)
    v = np.zeros(h)
    chosen = np.zeros(h, dtype=int)
    for sweep in range(1, max_iter + 1):
        totals = stage + np.einsum("ikj,j->ik", qrows, v)
        chosen = totals.argmin(axis=1)
        nxt = totals.min(axis=1)
        diff = np.abs(nxt - v).max()
        v = nxt
        if np.abs(v).max() > guard:
            raise DivergenceError(
                f"iterates exceeded {guard:.3g}; the admissible vertices trap "
                "the process in taboo states"
            )
        if diff <= tol:
            break
    else:
        raise MaxIterationsError(f"no convergence within {max_iter} sweeps", last=v)

    matrix = np.zeros((model.n_states, m))
    for i, vs in enumerate(sets):
        matrix[i] = vs.vertices[chosen[i]]
    matrix[h:, 0] = 1.0
    return ConstrainedSolveReport(
        value=v,
        policy=Policy(matrix=matrix),
        multipliers=np.zeros(h),
        method="relative-vi",
        feasible=True,
        gap=None,
        info={
            "sweeps": sweep,
            "q": q,
            "vertices_per_state": counts,
            "chosen_vertex": [int(c) for c in chosen],
        },
    )


def p_to_q(p):
    """Convert a global safety level to the matching one-step ratio p/(1-p).

    Exact for Fraction inputs; floats go through float division.
    """
    if not 0 <= p < 1:
        raise ValueError("p must lie in [0, 1)")
    return p / (1 - p)
