"""Contract check: do scenario files validate with JSON paths, and do CLI runs write byte-identical artifacts with the right exit codes."""

from __future__ import annotations

import contextlib
import copy
import io
import json
import sys
import tempfile
from pathlib import Path

repo_root = Path(__file__).resolve().parents[2]
sys.path.insert(0, str(repo_root / "pipeline"))

from provisioner import build_mdp, build_state_index, greedy_policy, mdp_policy  # noqa: E402
from provisioning_cli import run_cli  # noqa: E402
from results_writer import RESULT_COLUMNS, write_results as write_result_files  # noqa: E402
from scenario_io import ScenarioValidationError, load_scenario, parse_scenario, scenario_to_dict, write_scenario  # noqa: E402
from sim_harness import generate_trace, simulate, summarize  # noqa: E402

STICKY = repo_root / "data" / "sticky_three_rsu.json"
STICKY_DOCUMENT = json.loads(STICKY.read_text(encoding="utf-8"))


def scenario_variant(edit) -> dict:
    document = copy.deepcopy(STICKY_DOCUMENT)
    edit(document)
    return document


def expect_validation_error(document, path: str) -> ScenarioValidationError:
    try:
        parse_scenario(document)
    except ScenarioValidationError as exc:
        assert exc.path == path, f"{exc.path} != {path}"
        return exc
    raise AssertionError(f"expected a validation error at {path}")


def invoke(*argv: str) -> tuple[int, str, str]:
    out, err = io.StringIO(), io.StringIO()
    with contextlib.redirect_stdout(out), contextlib.redirect_stderr(err):
        code = run_cli(list(argv))
    return code, out.getvalue(), err.getvalue()


def snapshot(directory: Path) -> dict[str, bytes]:
    return {path.name: path.read_bytes() for path in sorted(directory.iterdir())}


def test_sticky_scenario_shape():
    spec = load_scenario(STICKY)
    index = build_state_index(spec)
    assert index.num_configurations == 27
    assert index.num_levels == 3
    assert index.num_states == 81
    assert spec.discount == 0.95 and spec.reward.beta == 2.0


def test_bad_row_names_its_path():
    exc = expect_validation_error(
        scenario_variant(lambda d: d["demand"].update(levels=d["demand"]["levels"][:2], transition_matrix=[[0.6, 0.5], [0.5, 0.5]])),
        "demand.transition_matrix[0]",
    )
    assert "stochasticity violation at demand.transition_matrix[0]" in str(exc)


def test_nearly_stochastic_row_is_normalized():
    document = scenario_variant(lambda d: d["demand"]["transition_matrix"].__setitem__(0, [0.6, 0.2, 0.2000000005]))
    spec = parse_scenario(document)
    assert abs(sum(spec.demand_model.transition_matrix[0]) - 1.0) <= 1e-12


def test_empty_file_is_a_syntax_error():
    with tempfile.TemporaryDirectory() as tmp:
        path = Path(tmp) / "empty.json"
        path.write_text("", encoding="utf-8")
        try:
            load_scenario(path)
        except ScenarioValidationError as exc:
            assert exc.path == "$" and "syntax error" in exc.message
        else:
            raise AssertionError("empty scenario file was accepted")


def test_unknown_key_is_rejected_with_a_suggestion():
    exc = expect_validation_error(
        scenario_variant(lambda d: d["reward"].update(violation_penalt=d["reward"].pop("violation_penalty"))),
        "reward.violation_penalt",
    )
    assert 'did you mean "violation_penalty"' in str(exc)
    expect_validation_error(scenario_variant(lambda d: d.update(discout=0.9)), "discout")


def test_infeasible_level_names_its_path():
    exc = expect_validation_error(
        scenario_variant(lambda d: d["demand"]["levels"][2].update(required_units=9)),
        "demand.levels[2].required_units",
    )
    assert "scenario infeasible for level high" in str(exc)


def test_schema_errors_carry_paths():
    expect_validation_error(scenario_variant(lambda d: d["nodes"][1].update(capacity=-2)), "nodes[1].capacity")
    expect_validation_error(scenario_variant(lambda d: d.update(granularity=4)), "granularity")
    expect_validation_error(scenario_variant(lambda d: d.update(discount=1.0)), "discount")
    expect_validation_error(scenario_variant(lambda d: d.pop("reward")), "$")


def test_scenario_round_trip():
    spec = load_scenario(STICKY)
    with tempfile.TemporaryDirectory() as tmp:
        reloaded = load_scenario(write_scenario(spec, Path(tmp) / "sticky-copy.json"))
    assert reloaded == spec
    assert scenario_to_dict(reloaded) == scenario_to_dict(spec)


def simulated_results(length: int, labels=("mdp", "greedy")):
    spec = load_scenario(STICKY)
    mdp, index = build_mdp(spec)
    policies = {"mdp": mdp_policy(spec, built=(mdp, index)).policy, "greedy": greedy_policy(spec, index)}
    trace = generate_trace(spec.demand_model, length, seed=11, initial_level="low")
    return [simulate(policies[label], index, spec, trace, label=label) for label in labels]


def test_results_csv_row_counts():
    with tempfile.TemporaryDirectory() as tmp:
        single = simulated_results(3, labels=("mdp",))
        csv_path, json_path = write_result_files(single, summarize(single), Path(tmp) / "one")
        lines = csv_path.read_text(encoding="utf-8").splitlines()
        assert len(lines) == 4
        assert lines[0] == ",".join(RESULT_COLUMNS)

        pair = simulated_results(25)
        csv_path, _ = write_result_files(pair, summarize(pair), Path(tmp) / "two")
        assert len(csv_path.read_text(encoding="utf-8").splitlines()) == 2 * 25 + 1

        payload = json.loads(json_path.read_text(encoding="utf-8"))
        assert sorted(payload) == ["aggregate", "metadata", "series", "table"]
        assert payload["metadata"]["generator"].startswith("numpy.random.PCG64")


def test_results_files_are_byte_identical():
    with tempfile.TemporaryDirectory() as tmp:
        first = simulated_results(200)
        second = simulated_results(200)
        write_result_files(first, summarize(first), Path(tmp) / "a", metadata={"seed": 11}, tag="seed11")
        write_result_files(second, summarize(second), Path(tmp) / "b", metadata={"seed": 11}, tag="seed11")
        assert snapshot(Path(tmp) / "a") == snapshot(Path(tmp) / "b")


def test_compare_writes_one_result_set_per_seed():
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "out"
        code, stdout, stderr = invoke("compare", "--scenario", str(STICKY), "--seeds", "1,2,3", "--epochs", "300", "--out", str(out))
        assert code == 0, stderr
        names = sorted(path.name for path in out.iterdir())
        assert names == [
            "policy.json",
            "results-seed1.csv",
            "results-seed2.csv",
            "results-seed3.csv",
            "summary-seed1.json",
            "summary-seed2.json",
            "summary-seed3.json",
        ]
        assert all(line.startswith("[compare]") for line in stdout.splitlines())
        rows = (out / "results-seed2.csv").read_text(encoding="utf-8").splitlines()
        assert len(rows) == 2 * 300 + 1


def test_identical_invocations_are_byte_identical():
    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        for name in ("a", "b"):
            out = Path(tmp) / name
            code, _, _ = invoke("compare", "--scenario", str(STICKY), "--seeds", "4,5", "--epochs", "250", "--out", str(out), "--quiet")
            assert code == 0
            runs.append(snapshot(out))
        assert runs[0] == runs[1]


def test_worker_pool_matches_sequential_run():
    with tempfile.TemporaryDirectory() as tmp:
        runs = []
        for workers in ("1", "2"):
            out = Path(tmp) / f"workers{workers}"
            argv = ("simulate", "--scenario", str(STICKY), "--policy", "all", "--seeds", "1,2", "--epochs", "150")
            code, _, stderr = invoke(*argv, "--out", str(out), "--workers", workers, "--quiet")
            assert code == 0, stderr
            runs.append(snapshot(out))
        assert runs[0] == runs[1]
        assert "policy.json" not in runs[0]


def test_solve_writes_the_policy_table():
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "solve"
        code, stdout, _ = invoke("solve", "--scenario", str(STICKY), "--out", str(out), "--quiet")
        assert code == 0 and stdout == ""
        report = json.loads((out / "policy.json").read_text(encoding="utf-8"))
        assert len(report["states"]) == 81
        first = report["states"][0]
        assert first["configuration"] == {"rsu-1": 0, "rsu-2": 0, "rsu-3": 0}
        assert first["demand_level"] == "low"
        assert all(state["value"] >= state["greedy_value"] - 1e-6 for state in report["states"])


def test_repeated_seeds_write_one_result_set_each():
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "out"
        argv = ("simulate", "--scenario", str(STICKY), "--seeds", "1,1,2", "--epochs", "50", "--workers", "2")
        code, stdout, stderr = invoke(*argv, "--out", str(out))
        assert code == 0, stderr
        names = sorted(path.name for path in out.iterdir())
        assert names == ["results-seed1.csv", "results-seed2.csv", "summary-seed1.json", "summary-seed2.json"]
        assert sum(" seed 1 " in line for line in stdout.splitlines()) == 1
        assert "[simulate] complete (2/2)" in stdout


def test_digits_flag_rounds_json_reals():
    with tempfile.TemporaryDirectory() as tmp:
        values = {}
        for digits in ("4", None):
            out = Path(tmp) / f"digits-{digits}"
            extra = ("--digits", digits) if digits else ()
            code, _, stderr = invoke("solve", "--scenario", str(STICKY), "--out", str(out), "--quiet", *extra)
            assert code == 0, stderr
            report = json.loads((out / "policy.json").read_text(encoding="utf-8"))
            values[digits] = [state["value"] for state in report["states"]]
        assert all(value == float(f"{value:.4g}") for value in values["4"])
        assert values["4"] != values[None]
        assert all(abs(short - full) <= 1e-3 * abs(full) for short, full in zip(values["4"], values[None]))


def test_exit_codes():
    code, _, stderr = invoke("compare", "--epochs", "10")
    assert code == 1 and "usage:" in stderr

    code, _, _ = invoke("--help")
    assert code == 0

    with tempfile.TemporaryDirectory() as tmp:
        infeasible = Path(tmp) / "infeasible.json"
        infeasible.write_text(
            json.dumps(scenario_variant(lambda d: d["demand"]["levels"][1].update(required_units=7))), encoding="utf-8"
        )
        code, _, stderr = invoke("compare", "--scenario", str(infeasible), "--out", tmp, "--quiet")
        assert code == 1 and "scenario infeasible for level med" in stderr

        bad_row = Path(tmp) / "bad_row.json"
        bad_row.write_text(
            json.dumps(scenario_variant(lambda d: d["demand"]["transition_matrix"].__setitem__(1, [0.5, 0.6, 0.2]))),
            encoding="utf-8",
        )
        code, _, stderr = invoke("solve", "--scenario", str(bad_row), "--out", tmp, "--quiet")
        assert code == 1 and "demand.transition_matrix[1]" in stderr

        code, _, stderr = invoke("solve", "--scenario", str(Path(tmp) / "missing.json"), "--out", tmp)
        assert code == 2 and "I/O error" in stderr

        code, _, _ = invoke("solve", "--scenario", str(STICKY), "--gamma", "1.5", "--out", tmp)
        assert code == 1

        code, _, stderr = invoke("simulate", "--scenario", str(STICKY), "--initial-level", "surge", "--out", tmp)
        assert code == 1 and "surge" in stderr

        code, _, _ = invoke("solve", "--scenario", str(STICKY), "--state-cap", "10", "--out", tmp)
        assert code == 1


def run_test() -> dict:
    with tempfile.TemporaryDirectory() as tmp:
        out = Path(tmp) / "out"
        code, stdout, _ = invoke("compare", "--scenario", str(STICKY), "--seeds", "1,2,3", "--epochs", "1000", "--out", str(out))
        summaries = {
            path.name: json.loads(path.read_text(encoding="utf-8"))["table"] for path in sorted(out.glob("summary-*.json"))
        }
    missing_code, _, _ = invoke("compare")
    return {
        "compare_exit_code": code,
        "progress_lines": stdout.splitlines(),
        "summary_tables": summaries,
        "missing_scenario_exit_code": missing_code,
    }


def write_results(results: dict) -> None:
    results_dir = Path(__file__).resolve().parent / "results"
    results_dir.mkdir(exist_ok=True)
    with open(results_dir / "test_output.json", "w", encoding="utf-8") as f:
        json.dump(results, f, indent=2)


if __name__ == "__main__":
    summary = run_test()
    write_results(summary)
    print(f"compare exit code: {summary['compare_exit_code']}, missing --scenario exit code: {summary['missing_scenario_exit_code']}")
    for name, table in summary["summary_tables"].items():
        print(name, [(row["policy"], row["cumulative_migrations"]) for row in table])
