"""Persist simulation ledgers as CSV and comparison summaries as JSON."""

from __future__ import annotations

import itertools
from pathlib import Path
from typing import Sequence

import pandas as pd

from sim_harness import ComparisonSummary, RunResult
from solver_config import DEFAULT_SETTINGS
from utils import dump_json

RESULT_COLUMNS = [
    "epoch",
    "demand_level",
    "config_id",
    "allocated",
    "migrations",
    "cumulative_migrations",
    "violation",
    "policy",
    "seed",
]

TOOL_VERSION = "0.1.0"


def results_frame(results: Sequence[RunResult]) -> pd.DataFrame:
    """Stack every run's per-epoch ledger into one frame with the CSV columns."""
    frames = []
    for result in results:
        records = result.records
        frames.append(
            pd.DataFrame(
                {
                    "epoch": [r.epoch for r in records],
                    "demand_level": [result.level_ids[r.demand_level] for r in records],
                    "config_id": [r.config_index for r in records],
                    "allocated": [r.allocated for r in records],
                    "migrations": [r.migrations for r in records],
                    "cumulative_migrations": list(itertools.accumulate(r.migrations for r in records)),
                    "violation": [int(r.violation) for r in records],
                    "policy": result.policy_label,
                    "seed": result.seed,
                },
                columns=RESULT_COLUMNS,
            )
        )
    return pd.concat(frames, ignore_index=True)


def summary_payload(results: Sequence[RunResult], summary: ComparisonSummary, metadata: dict | None = None) -> dict:
    """JSON-ready summary: comparison table, per-policy aggregate, cumulative series and metadata."""
    series = {
        f"{result.policy_label}-seed{result.seed}": list(itertools.accumulate(r.migrations for r in result.records))
        for result in results
    }
    generators = sorted({result.generator for result in results})
    return {
        "table": summary.table.to_dict(orient="records"),
        "aggregate": summary.aggregate.to_dict(orient="records"),
        "series": series,
        "metadata": {"generator": ", ".join(generators), "tool_version": TOOL_VERSION, **(metadata or {})},
    }


def _plain(payload):
    # numpy scalars from DataFrame.to_dict are not JSON serializable
    if isinstance(payload, dict):
        return {key: _plain(value) for key, value in payload.items()}
    if isinstance(payload, list):
        return [_plain(value) for value in payload]
    return payload.item() if hasattr(payload, "item") else payload


def write_results(
    results: Sequence[RunResult],
    summary: ComparisonSummary,
    out_dir: str | Path,
    metadata: dict | None = None,
    tag: str = "",
    digits: int = DEFAULT_SETTINGS.significant_digits,
) -> list[Path]:
    """Write the per-epoch CSV and the JSON summary for a result set.

    Args:
        results: Runs to serialize (one row per epoch per run).
        summary: Output of ``sim_harness.summarize`` for the same runs.
        out_dir: Destination directory, created when missing.
        metadata: Extra run metadata (spec hash, seed, epochs...).
        tag: Filename suffix such as ``seed7``.
        digits: Significant digits kept for reals.
    Goal:
        Byte-identical artifacts for identical inputs.
    Returns:
        [csv_path, json_path]
    Raises:
        OSError when the directory cannot be created or written.
    """
    directory = Path(out_dir)
    directory.mkdir(parents=True, exist_ok=True)
    suffix = f"-{tag}" if tag else ""
    csv_path = directory / f"results{suffix}.csv"
    json_path = directory / f"summary{suffix}.json"

    results_frame(results).to_csv(csv_path, index=False, lineterminator="\n")
    json_path.write_text(dump_json(_plain(summary_payload(results, summary, metadata)), digits), encoding="utf-8")
    return [csv_path, json_path]
