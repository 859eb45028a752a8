"""Load, validate and canonically dump provisioning scenario files (JSON)."""

from __future__ import annotations

import json
import math
from pathlib import Path

from rapidfuzz import fuzz, process

from cloud_model import DemandLevel, DemandModel, ModelError, Node, Topology, check_granularity
from provisioner import ProvisioningSpec, RewardParams, ScenarioInfeasible
from solver_config import DEFAULT_SETTINGS, SolverSettings
from utils import stable_digest

TOP_LEVEL_KEYS = ("nodes", "granularity", "demand", "reward", "discount")
NODE_KEYS = ("id", "capacity")
DEMAND_KEYS = ("levels", "transition_matrix")
LEVEL_KEYS = ("id", "required_units")
REWARD_KEYS = ("max_resources", "alpha", "beta", "violation_penalty")


class ScenarioValidationError(ValueError):
    """A scenario problem tied to the JSON path where it was found."""

    def __init__(self, path: str, message: str):
        super().__init__(f"{path}: {message}")
        self.path = path
        self.message = message


def _suggest(key: str, known: tuple[str, ...]) -> str:
    match = process.extractOne(key, known, scorer=fuzz.ratio, score_cutoff=60)
    return f'; did you mean "{match[0]}"?' if match else ""


def _expect_object(value, path: str, known: tuple[str, ...], required: tuple[str, ...]) -> dict:
    if not isinstance(value, dict):
        raise ScenarioValidationError(path, f"expected an object, got {type(value).__name__}")
    for key in value:
        if key not in known:
            raise ScenarioValidationError(f"{path}.{key}" if path != "$" else key, f"unknown key {key!r}{_suggest(key, known)}")
    for key in required:
        if key not in value:
            raise ScenarioValidationError(path, f"missing required key {key!r}")
    return value


def _expect_list(value, path: str) -> list:
    if not isinstance(value, list) or not value:
        raise ScenarioValidationError(path, "expected a non-empty list")
    return value


def _expect_count(value, path: str, positive: bool = False) -> int:
    if isinstance(value, bool) or not isinstance(value, int) or value < (1 if positive else 0):
        kind = "positive" if positive else "non-negative"
        raise ScenarioValidationError(path, f"expected a {kind} integer, got {value!r}")
    return value


def _expect_real(value, path: str) -> float:
    if isinstance(value, bool) or not isinstance(value, (int, float)) or not math.isfinite(value) or value < 0:
        raise ScenarioValidationError(path, f"expected a finite non-negative number, got {value!r}")
    return float(value)


def _expect_text(value, path: str) -> str:
    if not isinstance(value, str) or not value:
        raise ScenarioValidationError(path, f"expected a non-empty string, got {value!r}")
    return value


def _parse_topology(raw) -> Topology:
    nodes = []
    for i, entry in enumerate(_expect_list(raw, "nodes")):
        path = f"nodes[{i}]"
        entry = _expect_object(entry, path, NODE_KEYS, NODE_KEYS)
        nodes.append(Node(_expect_text(entry["id"], f"{path}.id"), _expect_count(entry["capacity"], f"{path}.capacity")))
    try:
        return Topology(tuple(nodes))
    except ModelError as exc:
        raise ScenarioValidationError("nodes", str(exc)) from exc


def _parse_demand(raw, settings: SolverSettings) -> DemandModel:
    raw = _expect_object(raw, "demand", DEMAND_KEYS, DEMAND_KEYS)
    levels = []
    for i, entry in enumerate(_expect_list(raw["levels"], "demand.levels")):
        path = f"demand.levels[{i}]"
        entry = _expect_object(entry, path, LEVEL_KEYS, LEVEL_KEYS)
        levels.append(
            DemandLevel(_expect_text(entry["id"], f"{path}.id"), _expect_count(entry["required_units"], f"{path}.required_units"))
        )

    rows = _expect_list(raw["transition_matrix"], "demand.transition_matrix")
    if len(rows) != len(levels):
        raise ScenarioValidationError("demand.transition_matrix", f"expected {len(levels)} rows, got {len(rows)}")
    matrix = []
    for i, row in enumerate(rows):
        path = f"demand.transition_matrix[{i}]"
        if not isinstance(row, list) or len(row) != len(levels):
            raise ScenarioValidationError(path, f"expected a row of {len(levels)} probabilities")
        probabilities = [_expect_real(p, f"{path}[{j}]") for j, p in enumerate(row)]
        total = math.fsum(probabilities)
        if abs(total - 1.0) > settings.scenario_row_tolerance:
            raise ScenarioValidationError(path, f"stochasticity violation at {path} (row sums to {total:.12g})")
        if abs(total - 1.0) > settings.probability_tolerance:
            probabilities = [p / total for p in probabilities]
        matrix.append(tuple(probabilities))

    try:
        return DemandModel(tuple(levels), tuple(matrix))
    except ModelError as exc:
        raise ScenarioValidationError("demand", str(exc)) from exc


def _parse_reward(raw) -> RewardParams:
    raw = _expect_object(raw, "reward", REWARD_KEYS, ("max_resources",))
    values = {key: _expect_real(raw[key], f"reward.{key}") for key in REWARD_KEYS if key in raw}
    return RewardParams(**values)


def parse_scenario(document: dict, settings: SolverSettings = DEFAULT_SETTINGS) -> ProvisioningSpec:
    """Validate a decoded scenario document and build its ProvisioningSpec.

    Args:
        document: Parsed JSON object.
        settings: Supplies the default discount and row tolerance.
    Goal:
        Catch typos and inconsistent inputs before any solver runs.
    Returns:
        ProvisioningSpec satisfying every model invariant.
    Raises:
        ScenarioValidationError naming the offending JSON path.
    """
    document = _expect_object(document, "$", TOP_LEVEL_KEYS, ("nodes", "demand", "reward"))
    topology = _parse_topology(document["nodes"])
    demand = _parse_demand(document["demand"], settings)
    reward = _parse_reward(document["reward"])

    granularity = _expect_count(document.get("granularity", 1), "granularity", positive=True)
    try:
        check_granularity(topology, granularity)
    except ModelError as exc:
        raise ScenarioValidationError("granularity", str(exc)) from exc

    discount = document.get("discount", settings.discount)
    if isinstance(discount, bool) or not isinstance(discount, (int, float)) or not 0.0 <= discount < 1.0:
        raise ScenarioValidationError("discount", f"expected a number in [0, 1), got {discount!r}")

    try:
        return ProvisioningSpec(topology, demand, reward, granularity, float(discount))
    except ScenarioInfeasible as exc:
        position = demand.level_index(exc.level_id)
        raise ScenarioValidationError(f"demand.levels[{position}].required_units", str(exc)) from exc
    except ModelError as exc:
        raise ScenarioValidationError("$", str(exc)) from exc


def load_scenario(path: str | Path, settings: SolverSettings = DEFAULT_SETTINGS) -> ProvisioningSpec:
    """Read and validate a scenario file.

    Raises:
        OSError (FileNotFoundError included) when the file cannot be read.
        ScenarioValidationError for syntax or content problems.
    """
    text = Path(path).read_text(encoding="utf-8")
    try:
        document = json.loads(text)
    except json.JSONDecodeError as exc:
        raise ScenarioValidationError("$", f"syntax error at line {exc.lineno} column {exc.colno}: {exc.msg}") from exc
    return parse_scenario(document, settings)


def scenario_to_dict(spec: ProvisioningSpec) -> dict:
    """Canonical JSON-ready form of a spec; ``parse_scenario`` inverts it."""
    return {
        "nodes": [{"id": node.id, "capacity": node.capacity} for node in spec.topology.nodes],
        "granularity": spec.granularity,
        "demand": {
            "levels": [{"id": level.id, "required_units": level.required_units} for level in spec.demand_model.levels],
            "transition_matrix": [list(row) for row in spec.demand_model.transition_matrix],
        },
        "reward": {
            "max_resources": spec.reward.max_resources,
            "alpha": spec.reward.alpha,
            "beta": spec.reward.beta,
            "violation_penalty": spec.reward.violation_penalty,
        },
        "discount": spec.discount,
    }


def write_scenario(spec: ProvisioningSpec, path: str | Path) -> Path:
    """Write the canonical scenario JSON, without rounding, to ``path``."""
    target = Path(path)
    target.write_text(json.dumps(scenario_to_dict(spec), sort_keys=True, indent=2) + "\n", encoding="utf-8")
    return target


def spec_hash(spec: ProvisioningSpec) -> str:
    return stable_digest(scenario_to_dict(spec))


def describe_configuration(spec: ProvisioningSpec, config) -> dict[str, int]:
    """Full per-node lease map (zeros included) for reports."""
    return {node_id: config.units(node_id) for node_id in spec.topology.node_ids}
