"""Tabular discounted MDPs with policy evaluation, policy iteration and value iteration."""

from __future__ import annotations

from dataclasses import dataclass
from functools import cached_property
from typing import Iterator, NamedTuple, Sequence

import numpy as np

from solver_config import DEFAULT_SETTINGS, SolverSettings


class PreconditionError(ValueError):
    """Raised when a solver receives an MDP, policy or tolerance it cannot accept."""


class SolverError(RuntimeError):
    """Raised when a safety cap trips; a valid finite discounted MDP never gets here."""


class Outcome(NamedTuple):
    """One successor of a (state, action) pair together with R(s, a, s')."""

    next_state: int
    probability: float
    reward: float


class ValidationIssue(NamedTuple):
    """A single violated MDP invariant and where it was found."""

    state: int | None
    action: int | None
    message: str


class _Compiled(NamedTuple):
    row_state: np.ndarray
    row_action: np.ndarray
    offsets: np.ndarray
    out_row: np.ndarray
    out_next: np.ndarray
    out_prob: np.ndarray
    out_reward: np.ndarray
    expected_reward: np.ndarray
    row_lookup: tuple[dict[int, int], ...]


@dataclass(frozen=True)
class TabularMdp:
    """The quad-tuple <S, A, P, R> plus a discount factor.

    ``actions[s]`` lists the action identifiers available in state ``s`` and
    ``transitions[s][k]`` holds the outcomes of taking ``actions[s][k]``.
    Rewards ride on the outcomes because they depend on the successor.
    """

    num_states: int
    actions: tuple[tuple[int, ...], ...]
    transitions: tuple[tuple[tuple[Outcome, ...], ...], ...]
    discount: float = DEFAULT_SETTINGS.discount

    @classmethod
    def from_arrays(
        cls,
        probabilities: np.ndarray,
        rewards: np.ndarray,
        discount: float,
        action_counts: Sequence[int] | None = None,
    ) -> "TabularMdp":
        """Build an MDP from dense ``p[s, a, s']`` and ``r[s, a, s']`` arrays.

        Args:
            probabilities: Array shaped (states, actions, states).
            rewards: Array with the same shape holding R(s, a, s').
            discount: Discount factor in [0, 1).
            action_counts: Optional per-state number of leading actions to keep.
        Goal:
            Bridge the dense array form common in textbook solvers to the tabular form.
        Returns:
            TabularMdp with zero-probability successors dropped.
        """
        p = np.asarray(probabilities, dtype=float)
        r = np.asarray(rewards, dtype=float)
        num_states, num_actions, _ = p.shape
        counts = list(action_counts) if action_counts is not None else [num_actions] * num_states

        actions = []
        transitions = []
        for s in range(num_states):
            actions.append(tuple(range(counts[s])))
            per_action = []
            for a in range(counts[s]):
                successors = np.flatnonzero(p[s, a] > 0)
                per_action.append(
                    tuple(Outcome(int(n), float(p[s, a, n]), float(r[s, a, n])) for n in successors)
                )
            transitions.append(tuple(per_action))
        return cls(num_states, tuple(actions), tuple(transitions), float(discount))

    @cached_property
    def issues(self) -> tuple[ValidationIssue, ...]:
        return tuple(_collect_issues(self))

    @cached_property
    def compiled(self) -> _Compiled:
        """Flatten (state, action) rows and outcomes into numpy arrays."""
        row_state, row_action, offsets = [], [], []
        out_row, out_next, out_prob, out_reward = [], [], [], []
        lookup = []
        row = 0
        for s in range(self.num_states):
            offsets.append(row)
            state_rows = {}
            for action, outcomes in zip(self.actions[s], self.transitions[s]):
                state_rows[action] = row
                row_state.append(s)
                row_action.append(action)
                for outcome in outcomes:
                    out_row.append(row)
                    out_next.append(outcome.next_state)
                    out_prob.append(outcome.probability)
                    out_reward.append(outcome.reward)
                row += 1
            lookup.append(state_rows)

        out_row_arr = np.asarray(out_row, dtype=np.int64)
        out_prob_arr = np.asarray(out_prob, dtype=float)
        out_reward_arr = np.asarray(out_reward, dtype=float)
        expected = np.bincount(out_row_arr, weights=out_prob_arr * out_reward_arr, minlength=row)
        return _Compiled(
            row_state=np.asarray(row_state, dtype=np.int64),
            row_action=np.asarray(row_action, dtype=np.int64),
            offsets=np.asarray(offsets, dtype=np.int64),
            out_row=out_row_arr,
            out_next=np.asarray(out_next, dtype=np.int64),
            out_prob=out_prob_arr,
            out_reward=out_reward_arr,
            expected_reward=expected,
            row_lookup=tuple(lookup),
        )


@dataclass(frozen=True)
class Policy:
    """Deterministic stationary policy: one action identifier per state."""

    action_of: tuple[int, ...]

    def __getitem__(self, state: int) -> int:
        return self.action_of[state]

    def __len__(self) -> int:
        return len(self.action_of)


@dataclass(frozen=True)
class ValueFunction:
    """Expected discounted cumulative reward per state."""

    value_of: tuple[float, ...]

    def __getitem__(self, state: int) -> float:
        return self.value_of[state]

    def __len__(self) -> int:
        return len(self.value_of)

    @classmethod
    def from_array(cls, values: np.ndarray) -> "ValueFunction":
        return cls(tuple(np.asarray(values, dtype=float).tolist()))

    def as_array(self) -> np.ndarray:
        return np.asarray(self.value_of, dtype=float)


class PolicyIterationResult(NamedTuple):
    policy: Policy
    values: ValueFunction
    iterations: int


class ValueIterationResult(NamedTuple):
    policy: Policy
    values: ValueFunction
    converged: bool
    iterations: int
    residuals: tuple[float, ...]


def _collect_issues(mdp: TabularMdp, tolerance: float = DEFAULT_SETTINGS.probability_tolerance):
    if mdp.num_states <= 0:
        yield ValidationIssue(None, None, f"num_states must be positive, got {mdp.num_states}")
        return
    if not 0.0 <= mdp.discount < 1.0:
        yield ValidationIssue(None, None, f"discount {mdp.discount} outside [0, 1)")
    if len(mdp.actions) != mdp.num_states or len(mdp.transitions) != mdp.num_states:
        yield ValidationIssue(None, None, "actions/transitions length does not match num_states")
        return

    for s in range(mdp.num_states):
        actions = mdp.actions[s]
        if not actions:
            yield ValidationIssue(s, None, f"state {s} has no actions")
            continue
        if len(set(actions)) != len(actions):
            yield ValidationIssue(s, None, f"duplicate action identifiers in state {s}")
        if len(mdp.transitions[s]) != len(actions):
            yield ValidationIssue(s, None, f"state {s} lists {len(actions)} actions but {len(mdp.transitions[s])} transition rows")
            continue

        for action, outcomes in zip(actions, mdp.transitions[s]):
            total = 0.0
            for outcome in outcomes:
                if not 0 <= outcome.next_state < mdp.num_states:
                    yield ValidationIssue(s, action, f"next_state {outcome.next_state} index out of range at ({s},{action})")
                if not 0.0 <= outcome.probability <= 1.0:
                    yield ValidationIssue(s, action, f"probability {outcome.probability} outside [0, 1] at ({s},{action})")
                if not np.isfinite(outcome.reward):
                    yield ValidationIssue(s, action, f"non-finite reward at ({s},{action})")
                total += outcome.probability
            if abs(total - 1.0) > tolerance:
                yield ValidationIssue(s, action, f"row sum {total:.12g} != 1 at ({s},{action})")


def validate_mdp(mdp: TabularMdp) -> list[ValidationIssue]:
    """Report every violated invariant of ``mdp``.

    Args:
        mdp: Candidate MDP.
    Goal:
        Diagnose malformed inputs before a solver touches them.
    Returns:
        Empty list for a well-formed MDP, otherwise one ValidationIssue per violation.
    Raises:
        None
    """
    return list(mdp.issues)


def _require_valid(mdp: TabularMdp) -> None:
    if mdp.issues:
        details = "; ".join(issue.message for issue in mdp.issues[:5])
        raise PreconditionError(f"MDP failed validation ({len(mdp.issues)} issues): {details}")


def default_policy(mdp: TabularMdp) -> Policy:
    """Pick the lowest action identifier in every state."""
    return Policy(tuple(min(actions) for actions in mdp.actions))


def _policy_rows(mdp: TabularMdp, policy: Policy) -> np.ndarray:
    if len(policy) != mdp.num_states:
        raise PreconditionError(f"policy covers {len(policy)} states, MDP has {mdp.num_states}")
    lookup = mdp.compiled.row_lookup
    rows = np.empty(mdp.num_states, dtype=np.int64)
    for s, action in enumerate(policy.action_of):
        row = lookup[s].get(action)
        if row is None:
            raise PreconditionError(f"action {action} not available in state {s}")
        rows[s] = row
    return rows


def _q_rows(mdp: TabularMdp, values: np.ndarray) -> np.ndarray:
    c = mdp.compiled
    weights = c.out_prob * (c.out_reward + mdp.discount * values[c.out_next])
    return np.bincount(c.out_row, weights=weights, minlength=len(c.row_state))


def _policy_backup(mdp: TabularMdp, rows: np.ndarray, values: np.ndarray) -> np.ndarray:
    # T_pi V restricted to the outcomes of the chosen rows
    c = mdp.compiled
    chosen = rows[c.row_state[c.out_row]] == c.out_row
    weights = c.out_prob[chosen] * (c.out_reward[chosen] + mdp.discount * values[c.out_next[chosen]])
    return np.bincount(c.row_state[c.out_row[chosen]], weights=weights, minlength=mdp.num_states)


def _dense_solve(mdp: TabularMdp, rows: np.ndarray) -> np.ndarray:
    c = mdp.compiled
    n = mdp.num_states
    chosen = rows[c.row_state[c.out_row]] == c.out_row
    transition = np.zeros((n, n))
    np.add.at(transition, (c.row_state[c.out_row[chosen]], c.out_next[chosen]), c.out_prob[chosen])
    return np.linalg.solve(np.eye(n) - mdp.discount * transition, c.expected_reward[rows])


def policy_evaluation(
    mdp: TabularMdp,
    policy: Policy,
    tolerance: float | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> ValueFunction:
    """Compute the value of ``policy`` to within a Bellman residual of ``tolerance``.

    Args:
        mdp: Valid tabular MDP.
        policy: Deterministic policy whose actions exist in every state.
        tolerance: Max-norm residual bound; defaults to the settings' evaluation tolerance.
        settings: Numeric knobs (dense-solve limit, sweep cap).
    Goal:
        Solve V = r_pi + gamma * P_pi V exactly for small MDPs and by successive
        approximation for large ones, then polish until the residual bound holds.
    Returns:
        ValueFunction for the policy.
    Raises:
        PreconditionError for an invalid MDP, policy or tolerance.
        SolverError when the residual bound cannot be reached within the sweep cap.
    """
    tolerance = settings.evaluation_tolerance if tolerance is None else tolerance
    if not tolerance > 0:
        raise PreconditionError(f"tolerance must be positive, got {tolerance}")
    _require_valid(mdp)
    rows = _policy_rows(mdp, policy)

    if mdp.num_states <= settings.dense_solve_limit:
        values = _dense_solve(mdp, rows)
    else:
        values = np.zeros(mdp.num_states)

    for _ in range(settings.max_evaluation_sweeps):
        backed_up = _policy_backup(mdp, rows, values)
        if np.max(np.abs(backed_up - values)) <= tolerance:
            return ValueFunction.from_array(values)
        values = backed_up

    raise SolverError(f"policy evaluation did not reach residual {tolerance} in {settings.max_evaluation_sweeps} sweeps")


def action_values(mdp: TabularMdp, values: ValueFunction) -> list[dict[int, float]]:
    """Return Q(s, a) for every state as ``{action: q}`` mappings."""
    q = _q_rows(mdp, _checked_values(mdp, values))
    c = mdp.compiled
    table: list[dict[int, float]] = [{} for _ in range(mdp.num_states)]
    for row, (state, action) in enumerate(zip(c.row_state.tolist(), c.row_action.tolist())):
        table[state][action] = float(q[row])
    return table


def _checked_values(mdp: TabularMdp, values: ValueFunction) -> np.ndarray:
    array = values.as_array()
    if array.shape != (mdp.num_states,):
        raise PreconditionError(f"value function covers {array.shape[0]} states, MDP has {mdp.num_states}")
    if not np.all(np.isfinite(array)):
        raise PreconditionError("value function must be finite")
    return array


def _greedy_actions(mdp: TabularMdp, q: np.ndarray, tie_tolerance: float) -> np.ndarray:
    c = mdp.compiled
    best_q = np.maximum.reduceat(q, c.offsets)
    tied = q >= best_q[c.row_state] - tie_tolerance
    candidates = np.where(tied, c.row_action, np.iinfo(np.int64).max)
    return np.minimum.reduceat(candidates, c.offsets)


def policy_improvement(
    mdp: TabularMdp,
    values: ValueFunction,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> Policy:
    """Return the greedy policy with respect to ``values``.

    Actions whose Q-values lie within the tie tolerance of the best are tied;
    the lowest action identifier wins.
    """
    q = _q_rows(mdp, _checked_values(mdp, values))
    return Policy(tuple(_greedy_actions(mdp, q, settings.tie_tolerance).tolist()))


def policy_iteration_steps(
    mdp: TabularMdp,
    initial: Policy | None = None,
    tolerance: float | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> Iterator[tuple[Policy, ValueFunction]]:
    """Yield each (policy, value) pair visited by policy iteration.

    The last pair yielded is the stable policy and its evaluation. A state only
    switches action when the candidate beats the incumbent by the tie tolerance,
    which keeps floating-point noise from cycling the loop.
    """
    _require_valid(mdp)
    policy = initial if initial is not None else default_policy(mdp)
    rows = _policy_rows(mdp, policy)
    lookup = mdp.compiled.row_lookup

    while True:
        values = policy_evaluation(mdp, policy, tolerance, settings)
        yield policy, values

        q = _q_rows(mdp, values.as_array())
        candidate = _greedy_actions(mdp, q, settings.tie_tolerance)
        candidate_rows = np.fromiter(
            (lookup[s][int(a)] for s, a in enumerate(candidate)), dtype=np.int64, count=mdp.num_states
        )
        switch = q[candidate_rows] >= q[rows] + settings.tie_tolerance
        if not switch.any():
            return
        actions = np.where(switch, candidate, np.asarray(policy.action_of, dtype=np.int64))
        policy = Policy(tuple(actions.tolist()))
        rows = np.where(switch, candidate_rows, rows)


def policy_iteration(
    mdp: TabularMdp,
    initial: Policy | None = None,
    tolerance: float | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> PolicyIterationResult:
    """Alternate evaluation and improvement until the policy stops changing.

    Args:
        mdp: Valid tabular MDP.
        initial: Starting policy; the lowest action identifier per state when omitted.
        tolerance: Evaluation residual bound.
        settings: Numeric knobs, including the iteration safety cap.
    Goal:
        Find the optimal deterministic policy of a finite discounted MDP.
    Returns:
        PolicyIterationResult(policy, values, iterations).
    Raises:
        PreconditionError for invalid inputs.
        SolverError if the safety cap is reached.
    """
    result = None
    for iteration, (policy, values) in enumerate(policy_iteration_steps(mdp, initial, tolerance, settings), start=1):
        if iteration > settings.max_policy_iterations:
            raise SolverError(f"policy iteration exceeded {settings.max_policy_iterations} iterations")
        result = PolicyIterationResult(policy, values, iteration)
    return result


def value_iteration(
    mdp: TabularMdp,
    tolerance: float | None = None,
    max_iterations: int | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> ValueIterationResult:
    """Iterate the Bellman optimality operator to a near fixed point.

    Args:
        mdp: Valid tabular MDP.
        tolerance: Target sub-optimality of the returned greedy policy.
        max_iterations: Sweep cap; defaults to the settings' cap.
        settings: Numeric knobs.
    Goal:
        Provide an independent oracle for policy iteration. Sweeps stop once
        successive values differ by at most tolerance * (1 - gamma) / (2 * gamma).
    Returns:
        ValueIterationResult; ``converged`` is False when the cap was reached first.
    Raises:
        PreconditionError for invalid inputs.
        SolverError when a sweep fails to contract by gamma.
    """
    tolerance = settings.value_iteration_tolerance if tolerance is None else tolerance
    max_iterations = settings.max_value_iterations if max_iterations is None else max_iterations
    if not tolerance > 0:
        raise PreconditionError(f"tolerance must be positive, got {tolerance}")
    if max_iterations < 1:
        raise PreconditionError(f"max_iterations must be at least 1, got {max_iterations}")
    _require_valid(mdp)

    gamma = mdp.discount
    stop_at = tolerance * (1.0 - gamma) / (2.0 * gamma) if gamma > 0 else np.inf
    offsets = mdp.compiled.offsets
    values = np.zeros(mdp.num_states)
    residuals: list[float] = []
    converged = False

    for _ in range(max_iterations):
        updated = np.maximum.reduceat(_q_rows(mdp, values), offsets)
        residual = float(np.max(np.abs(updated - values)))
        slack = 1e-12 * max(1.0, float(np.max(np.abs(updated))))
        if residuals and residual > gamma * residuals[-1] + slack:
            raise SolverError(f"Bellman sweep expanded: {residual} > {gamma} * {residuals[-1]}")
        residuals.append(residual)
        values = updated
        if residual <= stop_at:
            converged = True
            break

    values_fn = ValueFunction.from_array(values)
    return ValueIterationResult(
        policy=policy_improvement(mdp, values_fn, settings),
        values=values_fn,
        converged=converged,
        iterations=len(residuals),
        residuals=tuple(residuals),
    )


def random_mdp(
    num_states: int,
    max_actions: int,
    seed: int,
    discount: float = 0.9,
    density: float = 0.5,
) -> TabularMdp:
    """Build a seeded random MDP for solver cross-checks.

    Each state gets between 1 and ``max_actions`` actions; each action reaches a
    random subset of states (at least one) with random probabilities and
    rewards drawn from [0, 1).
    """
    rng = np.random.default_rng(seed)
    p = rng.random((num_states, max_actions, num_states))
    p *= rng.random((num_states, max_actions, num_states)) < density
    # guarantee one successor per (s, a)
    anchor = rng.integers(0, num_states, size=(num_states, max_actions))
    s_idx, a_idx = np.meshgrid(np.arange(num_states), np.arange(max_actions), indexing="ij")
    p[s_idx, a_idx, anchor] += rng.random((num_states, max_actions)) + 0.1
    p /= p.sum(axis=2, keepdims=True)
    r = rng.random((num_states, max_actions, num_states))
    counts = rng.integers(1, max_actions + 1, size=num_states)
    return TabularMdp.from_arrays(p, r, discount, action_counts=counts.tolist())
