#!/usr/bin/env python3
"""Multi-seed cumulative migration comparison; writes the series behind the overhead plot."""

import argparse
import os
import sys
from datetime import datetime

# Add pipeline directory for imports
sys.path.insert(0, os.path.join(os.path.dirname(os.path.dirname(os.path.abspath(__file__))), 'pipeline'))

from progress import ProgressReporter
from provisioner import build_mdp, greedy_policy, mdp_policy, static_policy
from scenario_io import load_scenario, spec_hash
from sim_harness import generate_trace, simulate, summarize


def run_study(scenario_path, seeds, epochs, include_static=False):
    """Simulate every policy over every seed and summarize them together.

    Args:
        scenario_path: Absolute scenario path.
        seeds: Trace seeds.
        epochs: Epochs per trace.
        include_static: Add the peak-sized static baseline.
    Goal:
        One ComparisonSummary covering all seeds so series can be averaged per epoch.
    Returns:
        (spec, ComparisonSummary)
    """
    spec = load_scenario(scenario_path)
    mdp, index = build_mdp(spec)
    policies = {'mdp': mdp_policy(spec, built=(mdp, index)).policy, 'greedy': greedy_policy(spec, index)}
    if include_static:
        policies['static'] = static_policy(spec, index)
    initial_level = spec.demand_model.levels[0].id

    reporter = ProgressReporter(total=len(seeds), label='study')
    results = []
    for seed in seeds:
        trace = generate_trace(spec.demand_model, epochs, seed, initial_level)
        batch = [simulate(policy, index, spec, trace, label=label) for label, policy in policies.items()]
        results.extend(batch)
        reporter.advance(f"seed {seed} " + " ".join(f"{r.policy_label}={r.cumulative_migrations}" for r in batch))
    reporter.complete()
    return spec, summarize(results)


def write_outputs(spec, summary, scenario_path, seeds, epochs):
    """Write the mean cumulative series (CSV) and a markdown summary to experiments/results/."""
    base_path = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    results_dir = os.path.join(base_path, 'experiments', 'results')
    os.makedirs(results_dir, exist_ok=True)
    timestamp = datetime.now().strftime('%Y%m%d_%H%M%S')

    mean_series = (
        summary.series.groupby(['policy', 'epoch'], sort=False)[
            ['cumulative_migrations', 'cumulative_allocated', 'cumulative_violations']
        ]
        .mean()
        .reset_index()
    )
    series_path = os.path.join(results_dir, f'migration_series_{timestamp}.csv')
    mean_series.to_csv(series_path, index=False, encoding='utf-8')

    report_path = os.path.join(results_dir, f'migration_overhead_{timestamp}.md')
    table = summary.table
    with open(report_path, 'w', encoding='utf-8') as f:
        f.write("# Cumulative Migration Overhead\n")
        f.write(f"Generated: {datetime.now().strftime('%Y-%m-%d %H:%M:%S')}\n\n")
        f.write(f"- Scenario: {scenario_path} (hash {spec_hash(spec)[:12]})\n")
        f.write(f"- Seeds: {len(seeds)}, epochs per seed: {epochs}\n\n")
        f.write("## Per-policy totals\n")
        for _, row in summary.aggregate.iterrows():
            f.write(
                f"- {row['policy']}: {int(row['cumulative_migrations'])} migrations, "
                f"{int(row['violations'])} violations, mean allocation {row['mean_allocated']:.3f}, "
                f"mean over-provisioning {row['mean_overprovisioned']:.3f}\n"
            )
        f.write("\n## Seeds where mdp migrated more than greedy\n")
        by_seed = table.pivot_table(index='seed', columns='policy', values='cumulative_migrations')
        worse = by_seed[by_seed['mdp'] > by_seed['greedy']]
        if worse.empty:
            f.write("None.\n")
        for seed, row in worse.iterrows():
            f.write(f"- seed {seed}: mdp {int(row['mdp'])} vs greedy {int(row['greedy'])}\n")

    print(f"Series saved to: {series_path}")
    print(f"Report saved to: {report_path}")
    return series_path, report_path


def main():
    """Run the study with command-line overrides."""
    parser = argparse.ArgumentParser(description='Compare cumulative VM migrations across seeds.')
    parser.add_argument('--scenario', default=os.path.join('data', 'sticky_three_rsu.json'))
    parser.add_argument('--seeds', type=int, default=20, help='Number of seeds (1..N)')
    parser.add_argument('--epochs', type=int, default=10000)
    parser.add_argument('--static', action='store_true', help='Include the static peak-sized baseline')
    args = parser.parse_args()

    base_path = os.path.dirname(os.path.dirname(os.path.abspath(__file__)))
    seeds = list(range(1, args.seeds + 1))
    spec, summary = run_study(os.path.join(base_path, args.scenario), seeds, args.epochs, args.static)
    write_outputs(spec, summary, args.scenario, seeds, args.epochs)


if __name__ == "__main__":
    main()
