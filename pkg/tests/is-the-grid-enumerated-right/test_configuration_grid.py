"""Sanity check: are configurations enumerated, costed and compared the way the provisioning model needs."""

from __future__ import annotations

import itertools
import json
import sys
from pathlib import Path

import numpy as np

repo_root = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(repo_root / "pipeline"))

from cloud_model import (  # noqa: E402
    Configuration,
    DemandLevel,
    DemandModel,
    ModelError,
    Node,
    StateSpaceTooLarge,
    Topology,
    count_configurations,
    enumerate_configurations,
    is_feasible,
    migration_count,
    over_provisioned_units,
    total_allocated,
)
from provisioner import StateIndex  # noqa: E402


def build_topology(*capacities: int) -> Topology:
    return Topology(tuple(Node(f"n{i + 1}", capacity) for i, capacity in enumerate(capacities)))


def build_demand() -> DemandModel:
    levels = (DemandLevel("low", 1), DemandLevel("med", 2), DemandLevel("high", 4))
    matrix = ((0.6, 0.2, 0.2), (0.2, 0.6, 0.2), (0.2, 0.2, 0.6))
    return DemandModel(levels, matrix)


def expect_model_error(build, fragment: str) -> str:
    try:
        build()
    except ModelError as exc:
        assert fragment in str(exc), str(exc)
        return str(exc)
    raise AssertionError(f"expected a ModelError mentioning {fragment!r}")


def test_total_allocated():
    topology = build_topology(2, 2)
    assert total_allocated(Configuration()) == 0
    assert total_allocated(Configuration.of(topology, {"n1": 2, "n2": 1})) == 3


def test_feasibility_against_required_units():
    topology = build_topology(2, 2)
    model = build_demand()
    assert is_feasible(Configuration.of(topology, {"n1": 2, "n2": 1}), "med", model)
    assert not is_feasible(Configuration.of(topology, {"n1": 1}), "med", model)
    expect_model_error(lambda: is_feasible(Configuration(), "peak", model), "unknown demand level")


def test_over_provisioned_units():
    topology = build_topology(2, 2)
    model = build_demand()
    assert over_provisioned_units(Configuration.of(topology, {"n1": 2, "n2": 2}), "low", model) == 3
    assert over_provisioned_units(Configuration.of(topology, {"n1": 1}), "high", model) == 0


def test_small_grids():
    assert len(enumerate_configurations(build_topology(1, 1), 1)) == 4
    grid = enumerate_configurations(build_topology(2, 2, 2), 1)
    assert len(grid) == 27
    assert sum(1 for config in grid if total_allocated(config) >= 2) == 23


def test_grid_is_lexicographic_and_unique():
    topology = build_topology(2, 2, 2)
    grid = enumerate_configurations(topology, 1)
    assert grid[0] == Configuration()
    assert grid[-1] == Configuration.of(topology, {"n1": 2, "n2": 2, "n3": 2})
    keys = [tuple(config.units(node_id) for node_id in topology.node_ids) for config in grid]
    assert keys == sorted(keys)
    assert len(set(grid)) == len(grid)


def test_granularity_steps():
    topology = build_topology(4, 2)
    grid = enumerate_configurations(topology, 2)
    assert len(grid) == count_configurations(topology, 2) == 6
    assert all(units % 2 == 0 for config in grid for _, units in config.entries)
    expect_model_error(lambda: enumerate_configurations(build_topology(3, 2), 2), "does not divide")


def test_state_space_cap():
    try:
        enumerate_configurations(build_topology(9, 9, 9), 1, cap=500)
    except StateSpaceTooLarge as exc:
        assert "state space too large" in str(exc)
        assert "1000" in str(exc)
    else:
        raise AssertionError("the enumeration cap was ignored")
    assert len(enumerate_configurations(build_topology(9, 9, 9), 1, cap=1000)) == 1000


def test_configuration_checks_against_topology():
    topology = build_topology(2, 2)
    expect_model_error(lambda: Configuration.of(topology, {"n3": 1}), "unknown nodes")
    expect_model_error(lambda: Configuration.of(topology, {"n1": 3}), "exceeds capacity")
    assert Configuration.of(topology, {"n1": 0, "n2": 1}) == Configuration.of(topology, {"n2": 1})


def test_migration_counts():
    topology = build_topology(2, 2, 2)
    a = Configuration.of(topology, {"n1": 1, "n2": 1})
    assert migration_count(a, a) == 0
    assert migration_count(Configuration.of(topology, {"n1": 2}), Configuration.of(topology, {"n2": 2})) == 2
    assert migration_count(a, Configuration.of(topology, {"n1": 2, "n3": 1})) == 2
    # teardowns are free
    assert migration_count(Configuration.of(topology, {"n1": 2, "n2": 2}), Configuration.of(topology, {"n1": 1})) == 0


def small_grids():
    for capacities in ((2, 2, 2), (3, 3)):
        yield enumerate_configurations(build_topology(*capacities), 1)


def test_migrations_never_exceed_target_allocation():
    for grid in small_grids():
        for a, b in itertools.product(grid, repeat=2):
            assert 0 <= migration_count(a, b) <= total_allocated(b)


def test_migration_triangle_bound():
    rng = np.random.default_rng(2024)
    for grid in small_grids():
        for i, j, k in rng.integers(0, len(grid), size=(2000, 3)).tolist():
            a, b, c = grid[i], grid[j], grid[k]
            assert migration_count(a, c) <= migration_count(a, b) + migration_count(b, c)


def test_feasibility_is_monotone_in_required_units():
    model = build_demand()
    for grid in small_grids():
        for config in grid:
            for high, low in itertools.product(model.levels, repeat=2):
                if low.required_units <= high.required_units and is_feasible(config, high.id, model):
                    assert is_feasible(config, low.id, model)


def test_grid_matches_brute_force_on_small_capacities():
    for capacities in itertools.product(range(4), repeat=2):
        topology = build_topology(*capacities)
        for granularity in (1, 2, 3):
            if any(capacity % granularity for capacity in capacities):
                continue
            grid = enumerate_configurations(topology, granularity)
            steps = [range(0, capacity + 1, granularity) for capacity in capacities]
            expected = {Configuration.of(topology, {"n1": u1, "n2": u2}) for u1, u2 in itertools.product(*steps)}
            assert len(grid) == len(set(grid)) == count_configurations(topology, granularity)
            assert set(grid) == expected


def test_migration_matrix_matches_scalar_count():
    levels = build_demand().levels
    for grid in small_grids():
        index = StateIndex(tuple(grid), levels)
        assert index.migrations.shape == (len(grid), len(grid))
        for i, j in itertools.product(range(len(grid)), repeat=2):
            assert index.migrations[i, j] == migration_count(grid[i], grid[j])
        assert index.totals.tolist() == [total_allocated(config) for config in grid]


def test_demand_model_rejects_bad_rows():
    levels = (DemandLevel("a", 0), DemandLevel("b", 1))
    expect_model_error(lambda: DemandModel(levels, ((0.6, 0.5), (0.5, 0.5))), "stochasticity violation at row 0")
    expect_model_error(lambda: DemandModel(levels, ((1.2, -0.2), (0.5, 0.5))), "row 0")
    expect_model_error(lambda: DemandModel(levels, ((1.0, 0.0),)), "rows")


def test_topology_rejects_duplicates():
    expect_model_error(lambda: Topology((Node("n1", 1), Node("n1", 2))), "duplicate node ids")
    expect_model_error(lambda: Node("n1", -1), "non-negative")


def run_test() -> dict:
    topology = build_topology(2, 2, 2)
    grid = enumerate_configurations(topology, 1)
    by_total: dict[int, int] = {}
    for config in grid:
        by_total[total_allocated(config)] = by_total.get(total_allocated(config), 0) + 1
    index = StateIndex(tuple(grid), build_demand().levels)
    mismatches = sum(
        int(index.migrations[i, j] != migration_count(grid[i], grid[j]))
        for i, j in itertools.product(range(len(grid)), repeat=2)
    )
    return {
        "configurations": len(grid),
        "with_total_at_least_2": sum(count for total, count in by_total.items() if total >= 2),
        "count_by_total": {str(total): by_total[total] for total in sorted(by_total)},
        "first": grid[0].as_dict(),
        "last": grid[-1].as_dict(),
        "migration_pairs_checked": len(grid) ** 2,
        "migration_matrix_mismatches": mismatches,
    }


def write_results(results: dict) -> None:
    results_dir = Path(__file__).resolve().parent / "results"
    results_dir.mkdir(exist_ok=True)
    with open(results_dir / "test_output.json", "w", encoding="utf-8") as f:
        json.dump(results, f, indent=2)


if __name__ == "__main__":
    summary = run_test()
    write_results(summary)
    print(f"Configurations: {summary['configurations']} ({summary['with_total_at_least_2']} with total >= 2)")
    print(f"By total: {summary['count_by_total']}")
    print(f"Migration matrix mismatches: {summary['migration_matrix_mismatches']} of {summary['migration_pairs_checked']} pairs")
