"""Seeded epoch-by-epoch simulation of provisioning policies against demand traces."""

from __future__ import annotations

import bisect
import itertools
from dataclasses import dataclass
from typing import NamedTuple, Sequence

import numpy as np
import pandas as pd

from cloud_model import DemandModel, ModelError, is_feasible, over_provisioned_units
from mdp_core import Policy
from provisioner import ProvisioningSpec, StateIndex, check_policy, reward_table

GENERATOR_NAME = f"numpy.random.PCG64 (numpy {np.__version__})"
_MAX_SEED = 2**64


class SimulationError(ValueError):
    """Raised for inconsistent simulation inputs or result sets."""


@dataclass(frozen=True)
class DemandTrace:
    """Demand level indices, one per provisioning window."""

    seed: int
    levels: tuple[int, ...]
    generator: str = GENERATOR_NAME

    def __len__(self) -> int:
        return len(self.levels)


class EpochRecord(NamedTuple):
    epoch: int
    demand_level: int
    config_index: int
    allocated: int
    migrations: int
    violation: bool
    overprovisioned: int


@dataclass(frozen=True)
class RunResult:
    """Per-epoch ledger of one policy over one trace plus cumulative totals."""

    policy_label: str
    seed: int
    initial_config: int
    level_ids: tuple[str, ...]
    records: tuple[EpochRecord, ...]
    cumulative_allocated: int
    cumulative_migrations: int
    cumulative_violations: int
    cumulative_overprovisioned: int
    generator: str = GENERATOR_NAME

    def __len__(self) -> int:
        return len(self.records)


@dataclass(frozen=True, eq=False)
class ComparisonSummary:
    """Tabular aggregation of several runs.

    ``table`` has one row per run, ``aggregate`` one row per policy and
    ``series`` one row per (run, epoch) with running totals for plotting.
    """

    table: pd.DataFrame
    aggregate: pd.DataFrame
    series: pd.DataFrame


def generate_trace(model: DemandModel, length: int, seed: int, initial_level: str) -> DemandTrace:
    """Sample the demand chain for ``length`` epochs starting at ``initial_level``.

    Args:
        model: Demand Markov chain.
        length: Number of epochs (at least 1).
        seed: Unsigned 64-bit seed.
        initial_level: Level id of epoch 0.
    Goal:
        Deterministic, reproducible demand trace for one simulation seed.
    Returns:
        DemandTrace of level indices.
    Raises:
        ModelError for an unknown level, a bad length or an out-of-range seed.
    """
    if not isinstance(length, int) or length < 1:
        raise ModelError(f"trace length must be a positive integer, got {length!r}")
    if not isinstance(seed, int) or not 0 <= seed < _MAX_SEED:
        raise ModelError(f"seed must be an unsigned 64-bit integer, got {seed!r}")
    current = model.level_index(initial_level)

    cumulative = np.cumsum(np.asarray(model.transition_matrix, dtype=float), axis=1)
    cumulative[:, -1] = 1.0
    rows = cumulative.tolist()
    draws = np.random.default_rng(seed).random(length - 1).tolist()

    levels = [current]
    for u in draws:
        current = bisect.bisect_right(rows[current], u)
        levels.append(current)
    return DemandTrace(seed=seed, levels=tuple(levels))


def simulate(
    policy: Policy,
    index: StateIndex,
    spec: ProvisioningSpec,
    trace: DemandTrace,
    initial_config: int | None = None,
    label: str = "policy",
) -> RunResult:
    """Replay ``policy`` over ``trace`` and account for allocation, migrations and violations.

    At epoch t the policy sees (c_t, d_t) and commits c_{t+1}; the commitment
    is then judged against the next realized demand d_{t+1} (the last epoch is
    judged against its own demand). Feasibility and over-provisioning come from
    ``spec.demand_model``.
    """
    check_policy(index, policy)
    start = index.empty_configuration if initial_config is None else initial_config
    if not 0 <= start < index.num_configurations:
        raise SimulationError(f"initial configuration {start} out of range")
    model = spec.demand_model
    if model.levels != index.levels:
        raise SimulationError("state index was built for a different demand model")
    levels = trace.levels
    if not levels or any(not 0 <= d < index.num_levels for d in levels):
        raise SimulationError("trace holds demand levels outside the model")

    totals = index.totals.tolist()
    migrations = index.migrations.tolist()
    actions = policy.action_of
    num_levels = index.num_levels
    last = len(levels) - 1

    # (target, realized level) -> (violation, over-provisioned units)
    judged: dict[tuple[int, int], tuple[bool, int]] = {}
    records = []
    current = start
    for t, demand in enumerate(levels):
        target = actions[current * num_levels + demand]
        realized = levels[t + 1] if t < last else demand
        if (target, realized) not in judged:
            config, level_id = index.configurations[target], model.level_ids[realized]
            judged[target, realized] = (
                not is_feasible(config, level_id, model),
                over_provisioned_units(config, level_id, model),
            )
        violation, overprovisioned = judged[target, realized]
        records.append(
            EpochRecord(
                epoch=t,
                demand_level=demand,
                config_index=target,
                allocated=totals[target],
                migrations=migrations[current][target],
                violation=violation,
                overprovisioned=overprovisioned,
            )
        )
        current = target

    return RunResult(
        policy_label=label,
        seed=trace.seed,
        initial_config=start,
        level_ids=tuple(level.id for level in index.levels),
        records=tuple(records),
        cumulative_allocated=sum(r.allocated for r in records),
        cumulative_migrations=sum(r.migrations for r in records),
        cumulative_violations=sum(r.violation for r in records),
        cumulative_overprovisioned=sum(r.overprovisioned for r in records),
        generator=trace.generator,
    )


def discounted_return(
    result: RunResult,
    spec: ProvisioningSpec,
    index: StateIndex,
    discount: float | None = None,
) -> float:
    """Score a run with the MDP reward: sum of gamma^t R(c_t, c_{t+1}, d_{t+1}).

    The final epoch has no realized successor demand and is left out.
    """
    gamma = spec.discount if discount is None else discount
    if len(result) < 2:
        return 0.0
    configs = np.asarray([result.initial_config] + [r.config_index for r in result.records], dtype=np.int64)
    demands = np.asarray([r.demand_level for r in result.records], dtype=np.int64)
    rewards = reward_table(spec, index)[configs[:-2], configs[1:-1], demands[1:]]
    return float(np.sum(rewards * gamma ** np.arange(len(rewards))))


def summarize(results: Sequence[RunResult]) -> ComparisonSummary:
    """Aggregate runs into a comparison table and per-epoch cumulative series.

    Args:
        results: Runs over traces of identical length.
    Goal:
        Produce the per-policy comparison behind the migration and allocation plots.
    Returns:
        ComparisonSummary with ``table``, ``aggregate`` and ``series`` frames.
    Raises:
        SimulationError for an empty list or mismatched trace lengths.
    """
    if not results:
        raise SimulationError("nothing to summarize")
    lengths = {len(result) for result in results}
    if len(lengths) != 1:
        raise SimulationError(f"results cover different trace lengths: {sorted(lengths)}")
    length = lengths.pop()

    table = pd.DataFrame(
        [
            {
                "policy": result.policy_label,
                "seed": result.seed,
                "cumulative_migrations": result.cumulative_migrations,
                "violations": result.cumulative_violations,
                "allocated_unit_epochs": result.cumulative_allocated,
                "mean_allocated": result.cumulative_allocated / length,
                "mean_overprovisioned": result.cumulative_overprovisioned / length,
            }
            for result in results
        ]
    )

    aggregate = (
        table.groupby("policy", sort=False)
        .agg(
            runs=("seed", "size"),
            cumulative_migrations=("cumulative_migrations", "sum"),
            violations=("violations", "sum"),
            mean_allocated=("mean_allocated", "mean"),
            mean_overprovisioned=("mean_overprovisioned", "mean"),
        )
        .reset_index()
    )

    frames = []
    for result in results:
        frames.append(
            pd.DataFrame(
                {
                    "epoch": np.arange(length),
                    "policy": result.policy_label,
                    "seed": result.seed,
                    "cumulative_migrations": list(itertools.accumulate(r.migrations for r in result.records)),
                    "cumulative_allocated": list(itertools.accumulate(r.allocated for r in result.records)),
                    "cumulative_violations": list(itertools.accumulate(int(r.violation) for r in result.records)),
                }
            )
        )
    series = pd.concat(frames, ignore_index=True)

    return ComparisonSummary(table=table, aggregate=aggregate, series=series)
