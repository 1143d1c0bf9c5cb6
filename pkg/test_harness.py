"""Tests for run configuration, the experiment runner, verification suites and the CLI."""
import csv
import json

import numpy as np
import pytest

from diagnostics.monitors import DiagnosticsError
from harness.config import ConfigError, Settings, load_config_file, validate_run
from harness.experiment import build_problem, compare, execute, resolve_fstar
from harness.messages import format_check
from harness.suites import ALL_SUITES, SuiteScale, run_suite
from main import EXIT_CHECK_FAILED, EXIT_OK, EXIT_USAGE, main, parse_run_spec
from problems.base import ProblemError
from problems.hard import gd_lower_bound
from solvers.schedules import ScheduleError
from storage.libsvm import make_synthetic_dataset, write_libsvm
from storage.traces import read_trace_csv

SMALL_SCALE = SuiteScale(
    projection_instances=20,
    inequality_samples=100,
    identity_problems=2,
    identity_steps=100,
    identity_max_dimension=5,
    ema_steps=100,
    beta_horizon=1000,
    rate_steps=2000,
    include_rate_runs=False,
)


def hard_run(**overrides):
    data = {"problem": {"kind": "hard", "T": 30, "c": 1.0}, "optimizer": "psg", "alpha": 0.5,
            "iterations": 40, "fstar": -1.0}
    data.update(overrides)
    return validate_run(data)


@pytest.fixture
def workspace(tmp_path, monkeypatch):
    """Run from an empty directory with traces under tmp_path/traces."""
    monkeypatch.chdir(tmp_path)
    monkeypatch.setenv("OPT_TRACE_DIR", str(tmp_path / "traces"))
    return tmp_path


@pytest.fixture
def dataset_file(tmp_path):
    path = tmp_path / "a9a.txt"
    with path.open("w", encoding="utf-8") as handle:
        write_libsvm(make_synthetic_dataset(80, 30, density=0.2, seed=3), handle)
    return path


def test_config_defaults():
    config = validate_run({"problem": {"kind": "hard"}, "optimizer": "adahb_tv", "alpha": 0.08})
    assert config.problem.T == 1000
    assert config.problem.c == 2.0
    assert config.gamma == 0.1
    assert config.delta == 1e-8
    assert config.fstar_budget == 10_000
    assert config.display_label == "adahb_tv"


@pytest.mark.parametrize(
    "overrides",
    [
        {"beta": 0.5, "optimizer": "hb_tv"},
        {"beta": 1.0, "optimizer": "hb_const"},
        {"checks": ["lemma3"]},
        {"checks": ["reformulation"], "optimizer": "hb_tv", "schedule_epoch_size": 2},
        {"checks": ["rate", "unknown"]},
        {"fixed_horizon": True, "optimizer": "hb_tv"},
        {"batch": 4},
        {"fstar_budget": 9_999},
        {"alpha": 0.0},
        {"gamma": 0.0},
        {"iterations": 0},
        {"problem": {"kind": "hard", "T": 30, "c": 0.5}},
        {"problem": {"kind": "maxlinear"}, "checks": ["floor"]},
        {"unexpected": 1},
    ],
)
def test_invalid_configs_are_rejected(overrides):
    with pytest.raises(ConfigError):
        hard_run(**overrides)


def test_load_config_file_variants(tmp_path):
    single = hard_run().model_dump(mode="json")
    (tmp_path / "one.json").write_text(json.dumps(single))
    (tmp_path / "many.json").write_text(json.dumps({"runs": [single, dict(single, optimizer="hb_tv")]}))
    (tmp_path / "summary.json").write_text(json.dumps({"config": single, "final": {}}))
    (tmp_path / "broken.json").write_text("{not json")

    assert len(load_config_file(tmp_path / "one.json")) == 1
    assert [c.optimizer.value for c in load_config_file(tmp_path / "many.json")] == ["psg", "hb_tv"]
    assert load_config_file(tmp_path / "summary.json")[0] == hard_run()
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "broken.json")
    with pytest.raises(ConfigError):
        load_config_file(tmp_path / "absent.json")


def test_build_problem_for_hinge_uses_tau_preset(dataset_file, tmp_path):
    config = validate_run({"problem": {"kind": "hinge", "dataset_path": str(dataset_file)},
                           "optimizer": "psg", "alpha": 1.0})
    problem = build_problem(config)
    assert problem.tau == 20.0
    assert problem.sample_count == 80

    unknown = tmp_path / "mystery.txt"
    unknown.write_text(dataset_file.read_text())
    with pytest.raises(ConfigError, match="tau"):
        build_problem(validate_run({"problem": {"kind": "hinge", "dataset_path": str(unknown)},
                                    "optimizer": "psg", "alpha": 1.0}))

    broken = tmp_path / "w8a.txt"
    broken.write_text("+1 1:0.5\n-1 2:x\n")
    with pytest.raises(ConfigError, match="line 2"):
        build_problem(validate_run({"problem": {"kind": "hinge", "dataset_path": str(broken)},
                                    "optimizer": "psg", "alpha": 1.0}))


def test_resolve_fstar_sources():
    config = hard_run()
    assert resolve_fstar(config, build_problem(config)) == (-1.0, "override")

    maxlinear = validate_run({"problem": {"kind": "maxlinear", "dimension": 4, "pieces": 6},
                              "optimizer": "hb_tv", "alpha": 1.0})
    problem = build_problem(maxlinear)
    value, source = resolve_fstar(maxlinear, problem)
    assert source == "solver"
    assert value <= problem.value_array(np.zeros(4)) + 1e-9


def test_resolve_fstar_solves_the_hinge_problem(workspace, dataset_file):
    config = validate_run({"problem": {"kind": "hinge", "dataset_path": str(dataset_file)},
                           "optimizer": "psg", "alpha": 1.0, "iterations": 2000})
    problem = build_problem(config)
    value, source = resolve_fstar(config, problem)
    assert source == "solver"
    assert -1e-9 <= value <= problem.value_array(np.zeros(problem.dimension))
    # A long exact run never gets below the LP optimum
    outcome = execute(config, Settings(), oracle=problem, fstar=(value, source))
    assert min(record.gap_individual for record in outcome.result.trace) >= -1e-7


def test_valley_instance_from_config():
    config = validate_run({"problem": {"kind": "maxlinear", "shape": "valley"},
                           "optimizer": "hb_tv", "alpha": 1e-3})
    problem = build_problem(config)
    assert resolve_fstar(config, problem) == (0.0, "solver")
    assert problem.value_array(np.zeros(10)) == pytest.approx(1.0, abs=1e-9)

    too_small = validate_run({"problem": {"kind": "maxlinear", "shape": "valley", "radius": 0.1},
                              "optimizer": "hb_tv", "alpha": 1e-3})
    with pytest.raises(ConfigError, match="valley"):
        build_problem(too_small)


def test_only_minibatch_runs_repeat():
    assert hard_run().seeds == [0]
    assert hard_run(seed=3, repeats=9).seeds == [3]
    hinge = {"problem": {"kind": "hinge", "dataset_path": "a9a.txt"}, "optimizer": "psg", "alpha": 1.0}
    assert validate_run({**hinge, "batch": 4, "seed": 7}).seeds == [7, 8, 9, 10, 11]
    assert validate_run({**hinge, "batch": 4, "repeats": 2}).seeds == [0, 1]
    with pytest.raises(ConfigError):
        validate_run({**hinge, "repeats": 0})


def test_execute_writes_trace_and_summary(workspace):
    config = hard_run(optimizer="adahb_tv", alpha=0.2, checks=["reformulation", "lemma3"])
    outcome = execute(config, Settings())
    assert outcome.failed == []
    assert [check.name for check in outcome.checks] == ["reformulation", "lemma3", "ema_monotonicity"]

    records = read_trace_csv(outcome.trace_path)
    assert len(records) == 40
    assert records[-1].gap_individual == pytest.approx(records[-1].f_individual + 1.0)
    assert all(record.identity_residual is not None for record in records)

    summary = json.loads(outcome.summary_path.read_text())
    assert summary["config"]["optimizer"] == "adahb_tv"
    assert summary["fstar"] == {"value": -1.0, "source": "override"}
    assert summary["final"]["t"] == 40
    assert set(summary["rate_fits"]) == {"individual", "averaged"}
    assert summary["lower_bound"] == pytest.approx(gd_lower_bound(30, 1.0))
    assert outcome.summary_path.stem == outcome.trace_path.stem


def test_execute_hinge_with_batches(workspace, dataset_file):
    config = validate_run({
        "problem": {"kind": "hinge", "dataset_path": str(dataset_file)},
        "optimizer": "adahb_const", "alpha": 0.5, "beta": 0.9, "iterations": 60,
        "batch": 8, "fstar": 0.0, "checks": ["lemma3"],
    })
    outcome = execute(config, Settings())
    assert outcome.failed == []
    assert outcome.summary["lower_bound"] is None

    too_big = config.model_copy(update={"batch": 500})
    with pytest.raises(ConfigError):
        execute(too_big, Settings())


def test_minibatch_runs_average_their_seeds(workspace, dataset_file):
    config = validate_run({
        "problem": {"kind": "hinge", "dataset_path": str(dataset_file)},
        "optimizer": "psg", "alpha": 0.5, "iterations": 25, "batch": 4, "seed": 2,
        "repeats": 3, "fstar": 0.0,
    })
    outcome = execute(config, Settings())
    repeats = outcome.summary["repeats"]
    assert repeats["seeds"] == [2, 3, 4]
    assert len(set(repeats["final_gaps"])) > 1
    assert outcome.summary["final"]["gap_individual"] == pytest.approx(np.mean(repeats["final_gaps"]))

    records = read_trace_csv(outcome.trace_path)
    assert len(records) == 25
    assert records[-1].gap_individual == pytest.approx(np.mean(repeats["final_gaps"]))

    # The mean trace is itself deterministic
    again = execute(config.model_copy(update={"trace": str(workspace / "again.csv")}), Settings())
    assert (workspace / "again.csv").read_bytes() == outcome.trace_path.read_bytes()
    assert again.summary["repeats"] == repeats


def test_negative_gaps_are_flagged(workspace, caplog):
    outcome = execute(hard_run(fstar=10.0), Settings())
    assert outcome.summary["negative_gaps"] == 40
    assert "negative gap" in caplog.text
    assert execute(hard_run(), Settings()).summary["negative_gaps"] == 0


def test_psg_floor_check_applies_automatically(workspace):
    config = validate_run({"problem": {"kind": "hard", "T": 1000, "c": 2.0}, "optimizer": "psg",
                           "alpha": 2.0, "iterations": 1000, "fstar": 0.0})
    outcome = execute(config, Settings())
    floor = [check for check in outcome.checks if check.name == "floor"]
    assert len(floor) == 1 and floor[0].passed


def test_compare_shares_fstar_and_aligns_rows(workspace):
    configs = [hard_run(), hard_run(optimizer="hb_tv", alpha=2.0), hard_run(fstar=-2.0)]
    output = workspace / "out" / "compare.csv"
    result = compare(configs, output, Settings(), workers=2)
    assert result.labels == ["psg", "hb_tv", "psg-2"]
    assert result.summary["fstar"] == {"value": -2.0, "source": "override"}
    with output.open(newline="") as handle:
        rows = list(csv.reader(handle))
    assert rows[0] == ["t", "psg_individual", "psg_averaged", "hb_tv_individual", "hb_tv_averaged",
                       "psg-2_individual", "psg-2_averaged"]
    assert len(rows) == 41
    # Same optimizer and f*: identical columns
    assert [row[1] for row in rows[1:]] == [row[5] for row in rows[1:]]


def test_compare_usage_errors(workspace):
    with pytest.raises(ConfigError):
        compare([], workspace / "c.csv", Settings())
    with pytest.raises(ConfigError):
        compare([hard_run(), hard_run(problem={"kind": "hard", "T": 31, "c": 1.0})],
                workspace / "c.csv", Settings())


@pytest.mark.parametrize("name", sorted(ALL_SUITES))
def test_suites_pass_at_small_scale(name):
    results = run_suite(name, seed=0, scale=SMALL_SCALE)
    assert results
    failed = [(item.name, item.value) for item in results if not item.passed]
    assert failed == []


def test_unknown_suite():
    with pytest.raises(ValueError):
        run_suite("everything", seed=0)


def test_format_check_escapes_markup():
    line = format_check("rate", False, 0.5, "dataset [red] tag")
    assert "FAIL" in line
    assert "\\[red]" in line


def test_parse_run_spec():
    assert parse_run_spec("hb_const:0.1:0.9") == ("hb_const", 0.1, 0.9)
    assert parse_run_spec("psg:2") == ("psg", 2.0, 0.0)
    with pytest.raises(ConfigError):
        parse_run_spec("psg")
    with pytest.raises(ConfigError):
        parse_run_spec("psg:fast")


HARD_ARGS = ["--problem", "hard", "--T", "30", "--c", "1", "--iters", "40", "--fstar", "-1"]


def test_cli_run_succeeds_with_identical_traces(workspace):
    first, second = workspace / "first.csv", workspace / "second.csv"
    for path in (first, second):
        code = main(["run", *HARD_ARGS, "--optimizer", "hb_tv", "--alpha", "2",
                     "--checks", "reformulation", "--trace", str(path)])
        assert code == EXIT_OK
    assert first.read_bytes() == second.read_bytes()
    assert len(first.read_text().splitlines()) == 41
    assert (workspace / "first.json").exists()


def test_cli_run_default_trace_location(workspace):
    assert main(["run", *HARD_ARGS, "--optimizer", "psg", "--alpha", "0.5", "--label", "baseline"]) == EXIT_OK
    assert (workspace / "traces" / "baseline-hard-seed0.csv").exists()
    assert (workspace / "traces" / "baseline-hard-seed0.json").exists()


def test_cli_run_from_saved_summary(workspace):
    assert main(["run", *HARD_ARGS, "--optimizer", "psg", "--alpha", "0.5"]) == EXIT_OK
    summary = workspace / "traces" / "psg-hard-seed0.json"
    assert main(["run", "--config", str(summary)]) == EXIT_OK


def test_cli_failed_check_exits_one(workspace):
    code = main(["run", *HARD_ARGS, "--iters", "10", "--optimizer", "psg", "--alpha", "0.5",
                 "--checks", "rate"])
    assert code == EXIT_CHECK_FAILED


@pytest.mark.parametrize(
    "argv",
    [
        ["run", *HARD_ARGS, "--optimizer", "psg"],
        ["run", *HARD_ARGS, "--alpha", "1"],
        ["run", *HARD_ARGS, "--optimizer", "hb_tv", "--alpha", "1", "--beta", "0.5"],
        ["run", *HARD_ARGS, "--optimizer", "nesterov", "--alpha", "1"],
        ["run", "--problem", "hinge", "--optimizer", "psg", "--alpha", "1"],
        ["run", "--problem", "hinge", "--dataset", "missing.txt", "--tau", "1", "--optimizer", "psg", "--alpha", "1"],
        ["run", "--config", "absent.json"],
        ["compare", *HARD_ARGS],
        ["compare", *HARD_ARGS, "--run", "psg"],
        ["make-dataset", "--output", "d.txt", "--density", "2"],
        ["verify", "nothing"],
        [],
    ],
)
def test_cli_usage_errors_exit_two(workspace, argv):
    assert main(argv) == EXIT_USAGE


@pytest.mark.parametrize(
    "error", [ProblemError("oracle failed"), DiagnosticsError("bad log"), ScheduleError("bad step")]
)
def test_failures_inside_a_valid_run_are_not_usage_errors(workspace, monkeypatch, error):
    def failing_execute(config, settings):
        raise error

    monkeypatch.setattr("main.execute", failing_execute)
    assert main(["run", *HARD_ARGS, "--optimizer", "psg", "--alpha", "0.5"]) == EXIT_CHECK_FAILED


def test_cli_compare_and_dataset(workspace):
    output = workspace / "wide.csv"
    code = main(["compare", *HARD_ARGS, "--run", "psg:0.5", "--run", "hb_tv:2", "--run", "adahb_tv:0.2",
                 "--gamma", "0.9", "--output", str(output), "--workers", "3"])
    assert code == EXIT_OK
    assert output.read_text().splitlines()[0].startswith("t,psg_individual,psg_averaged,hb_tv_individual")

    data = workspace / "data" / "synthetic.txt"
    assert main(["make-dataset", "--output", str(data), "--n", "50", "--d", "20", "--density", "0.2"]) == EXIT_OK
    assert len(data.read_text().splitlines()) == 50
    code = main(["run", "--problem", "hinge", "--dataset", str(data), "--tau", "5", "--optimizer", "adahb_tv",
                 "--alpha", "0.5", "--iters", "30", "--batch", "10", "--fstar", "0", "--checks", "lemma3"])
    assert code == EXIT_OK


def test_cli_verify_quick(workspace):
    assert main(["verify", "projections", "--quick"]) == EXIT_OK
