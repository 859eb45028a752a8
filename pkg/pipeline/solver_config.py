"""Centralized numeric settings for the provisioning solvers and simulator."""

from __future__ import annotations

from dataclasses import dataclass, replace


def _clamp_positive(value: float, floor: float = 1e-15) -> float:
    """Keep tolerances strictly positive."""
    return max(floor, float(value))


@dataclass(frozen=True)
class SolverSettings:
    """All solver and simulation knobs derived from a single evaluation tolerance."""

    discount: float
    evaluation_tolerance: float
    value_iteration_tolerance: float
    tie_tolerance: float
    probability_tolerance: float
    scenario_row_tolerance: float
    dense_solve_limit: int
    max_policy_iterations: int
    max_value_iterations: int
    max_evaluation_sweeps: int
    state_space_cap: int
    significant_digits: int


def build_settings(tolerance: float = 1e-9, **overrides) -> SolverSettings:
    """Derive a coherent set of settings anchored on the evaluation tolerance.

    Args:
        tolerance: Max-norm Bellman residual accepted from policy evaluation.
        overrides: Field values that replace the derived defaults.
    Goal:
        Give every caller (CLI, experiments, tests) one place to tune the numerics.
    Returns:
        SolverSettings instance.
    Raises:
        TypeError when an override names an unknown field.
    """
    base = _clamp_positive(tolerance)

    settings = SolverSettings(
        discount=0.95,
        evaluation_tolerance=base,
        value_iteration_tolerance=_clamp_positive(base / 10),
        tie_tolerance=1e-9,
        probability_tolerance=1e-12,
        scenario_row_tolerance=1e-9,
        dense_solve_limit=2_000,
        max_policy_iterations=10_000,
        max_value_iterations=100_000,
        max_evaluation_sweeps=1_000_000,
        state_space_cap=100_000,
        significant_digits=9,
    )
    return replace(settings, **overrides) if overrides else settings


DEFAULT_SETTINGS = build_settings()
