"""Cross-check: do policy iteration and value iteration land on the same optimum across seeded random MDPs."""

from __future__ import annotations

import json
import sys
from pathlib import Path

import numpy as np

repo_root = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(repo_root / "pipeline"))

from mdp_core import Policy, action_values, policy_iteration, random_mdp, value_iteration  # noqa: E402
from provisioner import compare_policies  # noqa: E402

INSTANCES = 100
GAP = 1e-9


def random_instances(count: int = INSTANCES):
    """Seeded MDPs with 2..50 states and up to 5 actions per state."""
    sizes = np.random.default_rng(2024).integers(2, 51, size=count)
    for seed, size in enumerate(sizes.tolist()):
        yield seed, random_mdp(size, 5, seed=seed, discount=0.9)


def agreement(mdp) -> dict:
    """Compare both solvers on one MDP; returns value gap and policy mismatches on clear-cut states."""
    pi = policy_iteration(mdp)
    vi = value_iteration(mdp, tolerance=1e-10)
    q = action_values(mdp, pi.values)
    mismatches = 0
    for state, row in enumerate(q):
        ranked = sorted(row.values(), reverse=True)
        clear = len(ranked) == 1 or ranked[0] - ranked[1] > GAP
        if clear and pi.policy[state] != vi.policy[state]:
            mismatches += 1
    return {
        "states": mdp.num_states,
        "converged": vi.converged,
        "max_value_gap": float(np.max(np.abs(pi.values.as_array() - vi.values.as_array()))),
        "policy_mismatches": mismatches,
        "value_iteration_sweeps": vi.iterations,
        "policy_iteration_steps": pi.iterations,
    }


def test_solvers_agree_on_random_mdps():
    for seed, mdp in random_instances():
        report = agreement(mdp)
        assert report["converged"], f"value iteration did not converge on instance {seed}"
        assert report["max_value_gap"] < 1e-6, f"instance {seed}: {report['max_value_gap']}"
        assert report["policy_mismatches"] == 0, f"instance {seed}: {report['policy_mismatches']} mismatches"


def test_value_iteration_residuals_contract():
    for seed, mdp in random_instances(10):
        residuals = value_iteration(mdp, tolerance=1e-10).residuals
        for previous, current in zip(residuals, residuals[1:]):
            assert current <= mdp.discount * previous + 1e-9


def test_optimal_policy_dominates_random_policies():
    rng = np.random.default_rng(7)
    for seed, mdp in random_instances(20):
        optimal = policy_iteration(mdp).policy
        for _ in range(5):
            chosen = Policy(tuple(int(rng.choice(actions)) for actions in mdp.actions))
            assert compare_policies(mdp, optimal, chosen).min_difference >= -1e-9


def test_comparing_a_policy_with_itself_gives_zero():
    mdp = random_mdp(25, 4, seed=3)
    optimal = policy_iteration(mdp).policy
    comparison = compare_policies(mdp, optimal, optimal)
    assert all(d == 0.0 for d in comparison.differences)
    assert comparison.min_difference == comparison.max_difference == comparison.mean_difference == 0.0


def run_test() -> dict:
    reports = [agreement(mdp) for _, mdp in random_instances()]
    return {
        "instances": len(reports),
        "worst_value_gap": max(r["max_value_gap"] for r in reports),
        "total_policy_mismatches": sum(r["policy_mismatches"] for r in reports),
        "all_converged": all(r["converged"] for r in reports),
        "mean_value_iteration_sweeps": sum(r["value_iteration_sweeps"] for r in reports) / len(reports),
        "mean_policy_iteration_steps": sum(r["policy_iteration_steps"] for r in reports) / len(reports),
    }


def write_results(results: dict) -> None:
    results_dir = Path(__file__).resolve().parent / "results"
    results_dir.mkdir(exist_ok=True)
    with open(results_dir / "test_output.json", "w", encoding="utf-8") as f:
        json.dump(results, f, indent=2)


if __name__ == "__main__":
    summary = run_test()
    write_results(summary)
    print(f"Instances: {summary['instances']}, worst value gap: {summary['worst_value_gap']:.3e}")
    print(f"Policy mismatches on clear-cut states: {summary['total_policy_mismatches']}")
