"""Static RSU network, VM configurations, demand levels and migration accounting."""

from __future__ import annotations

import itertools
import math
from dataclasses import dataclass
from functools import cached_property
from typing import Mapping

from solver_config import DEFAULT_SETTINGS


class ModelError(ValueError):
    """Raised when a topology, configuration or demand model breaks its invariants."""


class StateSpaceTooLarge(ModelError):
    """Raised when configuration enumeration would exceed the configured cap."""


def _is_count(value) -> bool:
    return isinstance(value, int) and not isinstance(value, bool) and value >= 0


@dataclass(frozen=True)
class Node:
    """An RSU hosting up to ``capacity`` VM units."""

    id: str
    capacity: int

    def __post_init__(self) -> None:
        if not isinstance(self.id, str) or not self.id:
            raise ModelError(f"node id must be a non-empty string, got {self.id!r}")
        if not _is_count(self.capacity):
            raise ModelError(f"capacity of node {self.id!r} must be a non-negative integer, got {self.capacity!r}")


@dataclass(frozen=True)
class Topology:
    """Ordered, fixed set of RSUs."""

    nodes: tuple[Node, ...]

    def __post_init__(self) -> None:
        if not self.nodes:
            raise ModelError("topology needs at least one node")
        ids = [node.id for node in self.nodes]
        duplicates = sorted({node_id for node_id in ids if ids.count(node_id) > 1})
        if duplicates:
            raise ModelError(f"duplicate node ids: {', '.join(duplicates)}")

    @cached_property
    def node_ids(self) -> tuple[str, ...]:
        return tuple(node.id for node in self.nodes)

    @cached_property
    def capacities(self) -> dict[str, int]:
        return {node.id: node.capacity for node in self.nodes}

    @property
    def total_capacity(self) -> int:
        return sum(node.capacity for node in self.nodes)


@dataclass(frozen=True)
class Configuration:
    """Snapshot of leased VM units as (node id, units) entries; omitted nodes lease 0.

    Build instances through ``Configuration.of`` so entries are checked against
    a topology and stored in its node order with zero leases dropped.
    """

    entries: tuple[tuple[str, int], ...] = ()

    @classmethod
    def of(cls, topology: Topology, leases: Mapping[str, int] | None = None) -> "Configuration":
        leases = dict(leases or {})
        unknown = sorted(set(leases) - set(topology.node_ids))
        if unknown:
            raise ModelError(f"configuration references unknown nodes: {', '.join(unknown)}")
        entries = []
        for node in topology.nodes:
            units = leases.get(node.id, 0)
            if not _is_count(units):
                raise ModelError(f"lease at {node.id!r} must be a non-negative integer, got {units!r}")
            if units > node.capacity:
                raise ModelError(f"lease of {units} at {node.id!r} exceeds capacity {node.capacity}")
            if units:
                entries.append((node.id, units))
        return cls(tuple(entries))

    def units(self, node_id: str) -> int:
        return dict(self.entries).get(node_id, 0)

    def as_dict(self) -> dict[str, int]:
        return dict(self.entries)


@dataclass(frozen=True)
class DemandLevel:
    id: str
    required_units: int


@dataclass(frozen=True)
class DemandModel:
    """First-order Markov chain over discrete demand levels, one step per provisioning epoch."""

    levels: tuple[DemandLevel, ...]
    transition_matrix: tuple[tuple[float, ...], ...]

    def __post_init__(self) -> None:
        if not self.levels:
            raise ModelError("demand model needs at least one level")
        ids = [level.id for level in self.levels]
        if len(set(ids)) != len(ids):
            raise ModelError("demand level ids must be unique")
        for level in self.levels:
            if not _is_count(level.required_units):
                raise ModelError(f"required_units of level {level.id!r} must be a non-negative integer")

        size = len(self.levels)
        if len(self.transition_matrix) != size:
            raise ModelError(f"transition matrix has {len(self.transition_matrix)} rows for {size} levels")
        tolerance = DEFAULT_SETTINGS.probability_tolerance
        for i, row in enumerate(self.transition_matrix):
            if len(row) != size:
                raise ModelError(f"transition matrix row {i} has {len(row)} entries for {size} levels")
            if any(p < 0 for p in row) or abs(math.fsum(row) - 1.0) > tolerance:
                raise ModelError(f"stochasticity violation at row {i}")

    @cached_property
    def level_ids(self) -> tuple[str, ...]:
        return tuple(level.id for level in self.levels)

    def level_index(self, level_id: str) -> int:
        try:
            return self.level_ids.index(level_id)
        except ValueError:
            raise ModelError(f"unknown demand level {level_id!r}") from None

    def required_units(self, level_id: str) -> int:
        return self.levels[self.level_index(level_id)].required_units


def total_allocated(config: Configuration) -> int:
    """Sum of leased units across all entries."""
    return sum(units for _, units in config.entries)


def is_feasible(config: Configuration, level: str, model: DemandModel) -> bool:
    """True when the configuration's aggregate allocation covers the level's requirement."""
    return total_allocated(config) >= model.required_units(level)


def over_provisioned_units(config: Configuration, level: str, model: DemandModel) -> int:
    """Units leased beyond what ``level`` needs (zero when under-provisioned)."""
    return max(0, total_allocated(config) - model.required_units(level))


def migration_count(source: Configuration, target: Configuration) -> int:
    """Count VM units newly placed when moving from ``source`` to ``target``.

    Teardowns are free, so each moved VM is charged once at its destination.
    """
    return sum(max(0, units - source.units(node_id)) for node_id, units in target.entries)


def check_granularity(topology: Topology, granularity: int) -> None:
    """Reject a granularity that is not a positive divisor of every capacity."""
    if not isinstance(granularity, int) or isinstance(granularity, bool) or granularity < 1:
        raise ModelError(f"granularity must be a positive integer, got {granularity!r}")
    uneven = [node.id for node in topology.nodes if node.capacity % granularity]
    if uneven:
        raise ModelError(f"granularity {granularity} does not divide the capacity of {', '.join(uneven)}")


def count_configurations(topology: Topology, granularity: int) -> int:
    check_granularity(topology, granularity)
    return math.prod(node.capacity // granularity + 1 for node in topology.nodes)


def enumerate_configurations(
    topology: Topology,
    granularity: int = 1,
    cap: int = DEFAULT_SETTINGS.state_space_cap,
) -> list[Configuration]:
    """List every configuration on the granularity grid.

    Args:
        topology: RSU network.
        granularity: Lease step; must divide every capacity.
        cap: Largest number of configurations allowed.
    Goal:
        Produce the configuration half of the MDP state space in canonical
        lexicographic order (node order, then units).
    Returns:
        list[Configuration] of length prod(capacity / granularity + 1).
    Raises:
        ModelError for an invalid granularity.
        StateSpaceTooLarge when the grid exceeds ``cap``.
    """
    count = count_configurations(topology, granularity)
    if count > cap:
        raise StateSpaceTooLarge(f"state space too large: {count} configurations exceed the cap of {cap}")

    ids = topology.node_ids
    grids = [range(0, node.capacity + 1, granularity) for node in topology.nodes]
    return [
        Configuration(tuple((node_id, units) for node_id, units in zip(ids, combo) if units))
        for combo in itertools.product(*grids)
    ]
