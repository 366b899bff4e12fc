"""Finite Markov decision process models with a taboo/forbidden/target state split.

A model couples a finite state set, a finite action set, a transition tensor
``p[i, u, j]`` and a per-step cost table ``rho[u, i]``.  States are kept in a
canonical order: taboo states (the interior, written H) first, then forbidden
states (U), then target states (E).  The process runs until it first leaves H;
costs accrue on every step taken from an H state and the optimizers minimize
their expected sum.

JSON document format (omitted transition triples and cost entries are zero)::

    {
      "states": ["a", "b"],
      "actions": ["u1"],
      "partition": {"taboo": ["a"], "forbidden": [], "target": ["b"]},
      "transitions": [{"from": "a", "action": "u1", "to": "b", "p": 1.0}],
      "rewards": [{"state": "a", "action": "u1", "rho": 2.0}]
    }

Policy documents list one row per state::

    {"policy": [{"state": "a", "dist": {"u1": 1.0}}]}
"""

from __future__ import annotations

import json
from dataclasses import dataclass
from functools import cached_property

import numpy as np

from .exceptions import ModelFormatError, ModelValidationError, PolicyError

ROW_SUM_TOL = 1e-12
SIMPLEX_TOL = 1e-12


def _frozen(a: np.ndarray) -> np.ndarray:
    a = np.asarray(a, dtype=float)
    a.flags.writeable = False
    return a


@dataclass(frozen=True)
class StatePartition:
    """Ordered split of the state set into taboo (H), forbidden (U) and target (E)."""

    taboo: tuple[str, ...]
    forbidden: tuple[str, ...]
    target: tuple[str, ...]

    def __post_init__(self):
        object.__setattr__(self, "taboo", tuple(self.taboo))
        object.__setattr__(self, "forbidden", tuple(self.forbidden))
        object.__setattr__(self, "target", tuple(self.target))


@dataclass(frozen=True)
class MdpModel:
    """Finite MDP in canonical state order (taboo, forbidden, target).

    Parameters
    ----------
    states : tuple of str
        State labels; must equal ``partition.taboo + partition.forbidden +
        partition.target`` for a valid model.
    actions : tuple of str
        Action labels.
    partition : StatePartition
    transitions : ndarray, shape (n, m, n)
        ``transitions[i, u, j]`` is the probability of moving to state j when
        action u is taken in state i.  Every (i, u) row sums to one.
    rewards : ndarray, shape (m, n)
        ``rewards[u, i]`` is the cost charged for taking action u in state i.
        Must be zero on target states.
    """

    states: tuple[str, ...]
    actions: tuple[str, ...]
    partition: StatePartition
    transitions: np.ndarray
    rewards: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "states", tuple(self.states))
        object.__setattr__(self, "actions", tuple(self.actions))
        object.__setattr__(self, "transitions", _frozen(self.transitions))
        object.__setattr__(self, "rewards", _frozen(self.rewards))

    @property
    def n_states(self) -> int:
        return len(self.states)

    @property
    def n_actions(self) -> int:
        return len(self.actions)

    @property
    def n_taboo(self) -> int:
        return len(self.partition.taboo)

    @property
    def n_forbidden(self) -> int:
        return len(self.partition.forbidden)

    @property
    def n_target(self) -> int:
        return len(self.partition.target)

    @cached_property
    def _state_index(self) -> dict[str, int]:
        return {s: i for i, s in enumerate(self.states)}

    @cached_property
    def _action_index(self) -> dict[str, int]:
        return {u: k for k, u in enumerate(self.actions)}

    def state_index(self, state) -> int:
        """Map a state label (or pass through an index) to its canonical index."""
        if isinstance(state, str):
            try:
                return self._state_index[state]
            except KeyError:
                raise KeyError(f"unknown state label {state!r}") from None
        i = int(state)
        if not 0 <= i < self.n_states:
            raise KeyError(f"state index {i} out of range")
        return i

    def action_index(self, action) -> int:
        """Map an action label (or pass through an index) to its index."""
        if isinstance(action, str):
            try:
                return self._action_index[action]
            except KeyError:
                raise KeyError(f"unknown action label {action!r}") from None
        k = int(action)
        if not 0 <= k < self.n_actions:
            raise KeyError(f"action index {k} out of range")
        return k

    @property
    def taboo_slice(self) -> slice:
        return slice(0, self.n_taboo)

    @property
    def exit_slice(self) -> slice:
        """Indices of forbidden and target states (everything after H)."""
        return slice(self.n_taboo, self.n_states)


@dataclass(frozen=True)
class Policy:
    """Row-stochastic decision rule, one distribution over actions per state.

    Rows for forbidden and target states carry no decision; by convention they
    are filled with action index 0.
    """

    matrix: np.ndarray

    def __post_init__(self):
        object.__setattr__(self, "matrix", _frozen(self.matrix))

    @property
    def pure(self) -> bool:
        """True when every row puts all mass on a single action."""
        return bool((self.matrix.max(axis=1) == 1.0).all())

    def assignment(self) -> np.ndarray:
        """Per-state argmax action index (meaningful for pure policies)."""
        return self.matrix.argmax(axis=1)


def validate_model(model: MdpModel) -> list[str]:
    """Check every model invariant and return the violations found.

    An empty list means the model is valid.  Each entry names the offending
    index so the report can stand on its own.
    """
    v: list[str] = []
    part = model.partition
    canonical = part.taboo + part.forbidden + part.target
    seen: set[str] = set()
    for s in canonical:
        if s in seen:
            v.append(f"partition lists overlap on state {s!r}")
        seen.add(s)
    missing = [s for s in model.states if s not in seen]
    if missing:
        v.append(f"partition does not cover states: {', '.join(map(repr, missing))}")
    extra = [s for s in canonical if s not in model.states]
    if extra:
        v.append(f"partition names undeclared states: {', '.join(map(repr, extra))}")
    if not extra and not missing and canonical != model.states:
        v.append("states are not in canonical order (taboo, forbidden, target)")
    if not part.taboo:
        v.append("taboo set is empty (H must be non-empty)")
    if not part.target:
        v.append("target set is empty (E must be non-empty)")

    n, m = model.n_states, model.n_actions
    if model.transitions.shape != (n, m, n):
        v.append(
            f"transition tensor has shape {model.transitions.shape}, expected {(n, m, n)}"
        )
        return v
    if model.rewards.shape != (m, n):
        v.append(f"reward table has shape {model.rewards.shape}, expected {(m, n)}")
        return v

    if not np.isfinite(model.transitions).all():
        v.append("transition tensor contains non-finite entries")
        return v
    if not np.isfinite(model.rewards).all():
        v.append("reward table contains non-finite entries")

    for i in range(n):
        for u in range(m):
            row = model.transitions[i, u]
            if (row < 0).any() or (row > 1).any():
                v.append(
                    f"transition row ({model.states[i]}, {model.actions[u]}) "
                    "has entries outside [0, 1]"
                )
                continue
            s = row.sum()
            if abs(s - 1.0) > ROW_SUM_TOL:
                v.append(
                    f"transition row ({model.states[i]}, {model.actions[u]}) sums to {s:.12g}"
                )

    for j, s in enumerate(model.states):
        if s in part.target:
            col = model.rewards[:, j]
            if (col != 0).any():
                u = int(np.nonzero(col)[0][0])
                v.append(
                    f"reward nonzero on target state {s!r} (action {model.actions[u]})"
                )
    return v


def _require_list(doc: dict, key: str, default=None):
    if key not in doc:
        if default is not None:
            return default
        raise ModelFormatError(f"document is missing the {key!r} list")
    val = doc[key]
    if not isinstance(val, list):
        raise ModelFormatError(f"{key!r} must be a list")
    return val


def load_model(text: str) -> MdpModel:
    """Parse and validate a model document.

    Parameters
    ----------
    text : str
        JSON document in the format described in the module docstring.

    Returns
    -------
    MdpModel
        Validated model with states reordered canonically.

    Raises
    ------
    ModelFormatError
        On malformed JSON, missing sections, unknown labels or duplicates.
    ModelValidationError
        When the parsed model violates an invariant; carries the full
        violation list.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict):
        raise ModelFormatError("top-level document must be an object")

    states = _require_list(doc, "states")
    actions = _require_list(doc, "actions")
    if len(set(states)) != len(states):
        raise ModelFormatError("duplicate state labels")
    if len(set(actions)) != len(actions):
        raise ModelFormatError("duplicate action labels")
    if not actions:
        raise ModelFormatError("action set is empty")

    part_doc = doc.get("partition", {})
    if not isinstance(part_doc, dict):
        raise ModelFormatError("'partition' must be an object")
    part = StatePartition(
        taboo=tuple(part_doc.get("taboo", [])),
        forbidden=tuple(part_doc.get("forbidden", [])),
        target=tuple(part_doc.get("target", [])),
    )
    state_set = set(states)
    for s in part.taboo + part.forbidden + part.target:
        if s not in state_set:
            raise ModelFormatError(f"partition names unknown state {s!r}")

    canonical = list(part.taboo + part.forbidden + part.target)
    if set(canonical) == state_set and len(canonical) == len(states):
        order = canonical
    else:
        # Incomplete partitions cannot be reordered; keep document order and
        # let validation report the defect.
        order = list(states)
    sidx = {s: i for i, s in enumerate(order)}
    aidx = {u: k for k, u in enumerate(actions)}

    n, m = len(order), len(actions)
    p = np.zeros((n, m, n))
    seen_triples = set()
    for entry in _require_list(doc, "transitions", default=[]):
        if not isinstance(entry, dict):
            raise ModelFormatError("transition entries must be objects")
        try:
            src, act, dst, prob = entry["from"], entry["action"], entry["to"], entry["p"]
        except KeyError as exc:
            raise ModelFormatError(f"transition entry missing key {exc}") from None
        for label, kind in ((src, "state"), (dst, "state")):
            if label not in sidx:
                raise ModelFormatError(f"transition names unknown {kind} {label!r}")
        if act not in aidx:
            raise ModelFormatError(f"transition names unknown action {act!r}")
        triple = (src, act, dst)
        if triple in seen_triples:
            raise ModelFormatError(f"duplicate transition triple {triple}")
        seen_triples.add(triple)
        p[sidx[src], aidx[act], sidx[dst]] = float(prob)

    rho = np.zeros((m, n))
    seen_pairs = set()
    for entry in _require_list(doc, "rewards", default=[]):
        if not isinstance(entry, dict):
            raise ModelFormatError("reward entries must be objects")
        try:
            st, act, val = entry["state"], entry["action"], entry["rho"]
        except KeyError as exc:
            raise ModelFormatError(f"reward entry missing key {exc}") from None
        if st not in sidx:
            raise ModelFormatError(f"reward names unknown state {st!r}")
        if act not in aidx:
            raise ModelFormatError(f"reward names unknown action {act!r}")
        pair = (st, act)
        if pair in seen_pairs:
            raise ModelFormatError(f"duplicate reward entry {pair}")
        seen_pairs.add(pair)
        rho[aidx[act], sidx[st]] = float(val)

    model = MdpModel(
        states=tuple(order),
        actions=tuple(actions),
        partition=part,
        transitions=p,
        rewards=rho,
    )
    violations = validate_model(model)
    if violations:
        raise ModelValidationError(violations)
    return model


def serialize_model(model: MdpModel) -> str:
    """Serialize a model to the JSON document format; inverse of load_model."""
    transitions = []
    for i, s in enumerate(model.states):
        for u, a in enumerate(model.actions):
            for j, t in enumerate(model.states):
                prob = model.transitions[i, u, j]
                if prob != 0.0:
                    transitions.append({"from": s, "action": a, "to": t, "p": prob})
    rewards = []
    for u, a in enumerate(model.actions):
        for i, s in enumerate(model.states):
            val = model.rewards[u, i]
            if val != 0.0:
                rewards.append({"state": s, "action": a, "rho": val})
    doc = {
        "states": list(model.states),
        "actions": list(model.actions),
        "partition": {
            "taboo": list(model.partition.taboo),
            "forbidden": list(model.partition.forbidden),
            "target": list(model.partition.target),
        },
        "transitions": transitions,
        "rewards": rewards,
    }
    return json.dumps(doc, indent=2)


def make_policy(model: MdpModel, matrix: np.ndarray) -> Policy:
    """Wrap a full (n_states, n_actions) matrix as a policy, checking each row."""
    matrix = np.asarray(matrix, dtype=float)
    if matrix.shape != (model.n_states, model.n_actions):
        raise PolicyError(
            f"policy matrix has shape {matrix.shape}, expected "
            f"{(model.n_states, model.n_actions)}"
        )
    for i, row in enumerate(matrix):
        if (row < -SIMPLEX_TOL).any() or abs(row.sum() - 1.0) > SIMPLEX_TOL:
            raise PolicyError(
                f"policy row for state {model.states[i]!r} is not a distribution"
            )
    return Policy(matrix=matrix)


def pure_policy(model: MdpModel, assignment) -> Policy:
    """Build a deterministic policy from a state-to-action assignment.

    Parameters
    ----------
    assignment : mapping
        Maps each taboo state (label or index) to an action (label or index).
        Entries for forbidden or target states are honored if present;
        otherwise those rows default to action index 0.

    Raises
    ------
    PolicyError
        If a taboo state has no assigned action.
    """
    chosen = {}
    for state, action in assignment.items():
        chosen[model.state_index(state)] = model.action_index(action)
    matrix = np.zeros((model.n_states, model.n_actions))
    for i in range(model.n_states):
        if i < model.n_taboo and i not in chosen:
            raise PolicyError(
                f"assignment is missing taboo state {model.states[i]!r}"
            )
        matrix[i, chosen.get(i, 0)] = 1.0
    return Policy(matrix=matrix)


def load_policy(text: str, model: MdpModel) -> Policy:
    """Parse a policy document against a model.

    Every taboo state needs a row; rows for forbidden or target states are
    optional and default to action index 0.
    """
    try:
        doc = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ModelFormatError(f"not valid JSON: {exc}") from None
    if not isinstance(doc, dict) or not isinstance(doc.get("policy"), list):
        raise ModelFormatError("policy document must contain a 'policy' list")
    matrix = np.zeros((model.n_states, model.n_actions))
    seen = set()
    for entry in doc["policy"]:
        if not isinstance(entry, dict) or "state" not in entry or "dist" not in entry:
            raise ModelFormatError("policy entries need 'state' and 'dist' keys")
        label = entry["state"]
        if label not in model._state_index:
            raise ModelFormatError(f"policy names unknown state {label!r}")
        i = model.state_index(label)
        if i in seen:
            raise ModelFormatError(f"duplicate policy row for state {label!r}")
        seen.add(i)
        dist = entry["dist"]
        if not isinstance(dist, dict):
            raise ModelFormatError(f"policy row for {label!r} must map actions to mass")
        for act, mass in dist.items():
            if act not in model._action_index:
                raise ModelFormatError(f"policy names unknown action {act!r}")
            matrix[i, model.action_index(act)] = float(mass)
    for i in range(model.n_states):
        if i not in seen:
            if i < model.n_taboo:
                raise ModelFormatError(
                    f"policy is missing taboo state {model.states[i]!r}"
                )
            matrix[i, 0] = 1.0
    return make_policy(model, matrix)


def serialize_policy(model: MdpModel, policy: Policy) -> str:
    """Serialize a policy to the JSON document format (taboo rows only are required)."""
    rows = []
    for i, s in enumerate(model.states):
        dist = {
            model.actions[u]: policy.matrix[i, u]
            for u in range(model.n_actions)
            if policy.matrix[i, u] != 0.0
        }
        rows.append({"state": s, "dist": dist})
    return json.dumps({"policy": rows}, indent=2)


def induced_matrix(model: MdpModel, policy: Policy) -> np.ndarray:
    """Chain transition matrix under a policy, ``P[i, j] = sum_u pi[i, u] p[i, u, j]``.

    The map is affine in the policy: mixing two policies row-wise mixes the
    induced matrices with the same weights.
    """
    if policy.matrix.shape != (model.n_states, model.n_actions):
        raise PolicyError(
            f"policy matrix has shape {policy.matrix.shape}, expected "
            f"{(model.n_states, model.n_actions)}"
        )
    return np.einsum("iu,iuj->ij", policy.matrix, model.transitions)
