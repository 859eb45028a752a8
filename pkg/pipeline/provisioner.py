"""Compile provisioning scenarios into MDPs and derive optimal, greedy and static policies."""

from __future__ import annotations

import math
import warnings
from dataclasses import dataclass
from functools import cached_property
from typing import NamedTuple

import numpy as np

from cloud_model import (
    Configuration,
    DemandLevel,
    DemandModel,
    ModelError,
    Topology,
    check_granularity,
    enumerate_configurations,
    is_feasible,
    migration_count,
    total_allocated,
)
from mdp_core import (
    Outcome,
    Policy,
    PreconditionError,
    SolverError,
    TabularMdp,
    ValueFunction,
    policy_evaluation,
    policy_iteration,
    validate_mdp,
)
from solver_config import DEFAULT_SETTINGS, SolverSettings


class ScenarioInfeasible(ModelError):
    """Raised when no configuration can serve some demand level."""

    def __init__(self, level_id: str):
        super().__init__(f"scenario infeasible for level {level_id}")
        self.level_id = level_id


@dataclass(frozen=True)
class RewardParams:
    """Weights of the provisioning reward.

    R = max_resources - alpha * (r_next - r_current) - beta * migrations
        - violation_penalty * [next demand not met]

    The defaults (alpha=1, beta=0, no penalty) are the literal
    ``maxResources - (r_n - r_m)`` form.
    """

    max_resources: float
    alpha: float = 1.0
    beta: float = 0.0
    violation_penalty: float = 0.0

    def __post_init__(self) -> None:
        for name in ("max_resources", "alpha", "beta", "violation_penalty"):
            value = getattr(self, name)
            if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
                raise ModelError(f"reward {name} must be a finite non-negative number, got {value!r}")


@dataclass(frozen=True)
class ProvisioningSpec:
    """Topology, demand model, lease granularity, reward weights and discount."""

    topology: Topology
    demand_model: DemandModel
    reward: RewardParams
    granularity: int = 1
    discount: float = DEFAULT_SETTINGS.discount

    def __post_init__(self) -> None:
        if isinstance(self.discount, bool) or not isinstance(self.discount, (int, float)) or not 0.0 <= self.discount < 1.0:
            raise ModelError(f"discount must lie in [0, 1), got {self.discount!r}")
        check_granularity(self.topology, self.granularity)
        capacity = self.topology.total_capacity
        # the full-capacity configuration is always on the grid
        for level in self.demand_model.levels:
            if level.required_units > capacity:
                raise ScenarioInfeasible(level.id)
        if self.reward.max_resources < self.reward.alpha * capacity:
            warnings.warn(
                f"max_resources {self.reward.max_resources} is below alpha * total capacity "
                f"({self.reward.alpha * capacity}); some rewards will be negative",
                RuntimeWarning,
                stacklevel=3,
            )


@dataclass(frozen=True)
class StateIndex:
    """Bijection between state ids and (configuration index, demand level index) pairs.

    States are laid out configuration-major: ``state = config * num_levels + level``.
    """

    configurations: tuple[Configuration, ...]
    levels: tuple[DemandLevel, ...]

    @property
    def num_configurations(self) -> int:
        return len(self.configurations)

    @property
    def num_levels(self) -> int:
        return len(self.levels)

    @property
    def num_states(self) -> int:
        return self.num_configurations * self.num_levels

    def state_of(self, config_index: int, level_index: int) -> int:
        if not (0 <= config_index < self.num_configurations and 0 <= level_index < self.num_levels):
            raise IndexError(f"no state for configuration {config_index}, level {level_index}")
        return config_index * self.num_levels + level_index

    def pair_of(self, state: int) -> tuple[int, int]:
        if not 0 <= state < self.num_states:
            raise IndexError(f"state {state} out of range")
        return divmod(state, self.num_levels)

    def configuration_index(self, config: Configuration) -> int:
        try:
            return self._positions[config]
        except KeyError:
            raise ModelError(f"configuration {config.as_dict()} is not on the grid") from None

    @cached_property
    def _positions(self) -> dict[Configuration, int]:
        return {config: i for i, config in enumerate(self.configurations)}

    @cached_property
    def empty_configuration(self) -> int:
        return self.configuration_index(Configuration())

    @cached_property
    def totals(self) -> np.ndarray:
        return np.asarray([total_allocated(c) for c in self.configurations], dtype=np.int64)

    @cached_property
    def required(self) -> np.ndarray:
        return np.asarray([level.required_units for level in self.levels], dtype=np.int64)

    @cached_property
    def migrations(self) -> np.ndarray:
        """``migrations[i, j]`` = migration_count(config i, config j)."""
        node_ids = sorted({node_id for c in self.configurations for node_id, _ in c.entries})
        units = np.asarray([[c.units(n) for n in node_ids] for c in self.configurations], dtype=np.int64)
        if not node_ids:
            return np.zeros((self.num_configurations, self.num_configurations), dtype=np.int64)
        return np.maximum(0, units[None, :, :] - units[:, None, :]).sum(axis=2)


class SolvedProvisioning(NamedTuple):
    policy: Policy
    values: ValueFunction
    index: StateIndex


class PolicyComparison(NamedTuple):
    differences: tuple[float, ...]
    min_difference: float
    max_difference: float
    mean_difference: float


def build_state_index(spec: ProvisioningSpec, settings: SolverSettings = DEFAULT_SETTINGS) -> StateIndex:
    """Pair every grid configuration with every demand level."""
    configurations = enumerate_configurations(spec.topology, spec.granularity, settings.state_space_cap)
    return StateIndex(tuple(configurations), spec.demand_model.levels)


def transition_reward(spec: ProvisioningSpec, current: Configuration, target: Configuration, next_level: str) -> float:
    """Reward for moving ``current`` to ``target`` when ``next_level`` is realized."""
    params = spec.reward
    reward = params.max_resources - params.alpha * (total_allocated(target) - total_allocated(current))
    reward -= params.beta * migration_count(current, target)
    if not is_feasible(target, next_level, spec.demand_model):
        reward -= params.violation_penalty
    return float(reward)


def reward_table(spec: ProvisioningSpec, index: StateIndex) -> np.ndarray:
    """Return ``R[c, c', d']`` for every configuration pair and realized level."""
    params = spec.reward
    totals = index.totals.astype(float)
    base = (
        params.max_resources
        - params.alpha * (totals[None, :] - totals[:, None])
        - params.beta * index.migrations
    )
    shortfall = totals[:, None] < index.required[None, :]
    return base[:, :, None] - params.violation_penalty * shortfall[None, :, :]


def build_mdp(
    spec: ProvisioningSpec,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> tuple[TabularMdp, StateIndex]:
    """Compile a provisioning scenario into a tabular MDP.

    Args:
        spec: Validated scenario.
        settings: Supplies the enumeration cap.
    Goal:
        One action per target configuration in every state; the configuration
        move is deterministic and the demand level evolves by the demand chain,
        so all stochasticity is exogenous.
    Returns:
        (TabularMdp, StateIndex) with action ids equal to target configuration indices.
    Raises:
        StateSpaceTooLarge when the grid exceeds the cap.
        SolverError if the compiled MDP fails validation.
    """
    index = build_state_index(spec, settings)
    rewards = reward_table(spec, index).tolist()
    matrix = spec.demand_model.transition_matrix
    num_configs, num_levels = index.num_configurations, index.num_levels
    targets = tuple(range(num_configs))

    actions = []
    transitions = []
    for c in range(num_configs):
        for d in range(num_levels):
            successors = [(d_next, p) for d_next, p in enumerate(matrix[d]) if p > 0]
            per_action = tuple(
                tuple(
                    Outcome(target * num_levels + d_next, p, rewards[c][target][d_next])
                    for d_next, p in successors
                )
                for target in targets
            )
            actions.append(targets)
            transitions.append(per_action)

    mdp = TabularMdp(index.num_states, tuple(actions), tuple(transitions), float(spec.discount))
    issues = validate_mdp(mdp)
    if issues:
        raise SolverError(f"compiled MDP is malformed: {issues[0].message}")
    return mdp, index


def greedy_policy(spec: ProvisioningSpec, index: StateIndex) -> Policy:
    """Myopic baseline: the cheapest configuration that serves the CURRENT demand.

    Ties on total allocation go to the fewest migrations from the current
    configuration, then to the lowest configuration index. The demand chain is
    never consulted.
    """
    totals = index.totals.tolist()
    migrations = index.migrations.tolist()
    required = index.required.tolist()

    actions = []
    for state in range(index.num_states):
        c, d = index.pair_of(state)
        feasible = [t for t in range(index.num_configurations) if totals[t] >= required[d]]
        if not feasible:
            raise ScenarioInfeasible(index.levels[d].id)
        actions.append(min(feasible, key=lambda t: (totals[t], migrations[c][t], t)))
    return Policy(tuple(actions))


def static_policy(spec: ProvisioningSpec, index: StateIndex) -> Policy:
    """Static provisioning: hold the cheapest configuration sized for peak demand in every state."""
    peak = int(index.required.max())
    totals = index.totals.tolist()
    target = min((t for t in range(index.num_configurations) if totals[t] >= peak), key=lambda t: (totals[t], t))
    return Policy((target,) * index.num_states)


def mdp_policy(
    spec: ProvisioningSpec,
    tolerance: float | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
    built: tuple[TabularMdp, StateIndex] | None = None,
) -> SolvedProvisioning:
    """Solve the provisioning MDP by policy iteration.

    ``built`` lets callers reuse an MDP already compiled from ``spec``.
    """
    mdp, index = built if built is not None else build_mdp(spec, settings)
    result = policy_iteration(mdp, tolerance=tolerance, settings=settings)
    return SolvedProvisioning(result.policy, result.values, index)


def compare_policies(
    mdp: TabularMdp,
    a: Policy,
    b: Policy,
    tolerance: float | None = None,
    settings: SolverSettings = DEFAULT_SETTINGS,
) -> PolicyComparison:
    """Evaluate both policies and report V_a - V_b per state with min/max/mean."""
    values_a = policy_evaluation(mdp, a, tolerance, settings).as_array()
    values_b = policy_evaluation(mdp, b, tolerance, settings).as_array()
    differences = values_a - values_b
    return PolicyComparison(
        differences=tuple(differences.tolist()),
        min_difference=float(differences.min()),
        max_difference=float(differences.max()),
        mean_difference=float(differences.mean()),
    )


def check_policy(index: StateIndex, policy: Policy) -> None:
    """Reject a policy that does not map every state to a grid configuration."""
    if len(policy) != index.num_states:
        raise PreconditionError(f"policy covers {len(policy)} states, index has {index.num_states}")
    for state, target in enumerate(policy.action_of):
        if not 0 <= target < index.num_configurations:
            raise PreconditionError(f"action {target} not available in state {state}")
