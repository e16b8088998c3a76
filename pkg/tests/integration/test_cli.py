# tests/integration/test_cli.py
import hashlib

import numpy as np
import pytest

from cli_io import load_config, run_experiment
from game_errors import EXIT_CONFIG, EXIT_IO, EXIT_OK, EXIT_SOLVER

from .fixtures.cases import CliCase, ConfigSource, create_parametrized_test
from .fixtures.config_writer import ConfigWriter

pytestmark = pytest.mark.integration


SOLVE_CASES = [
    CliCase(
        name="solve_scalar_bounded",
        description="LQR-synthesized scalar plant, coefficient and policy tables",
        command="solve-scalar",
        config=ConfigSource(template="scalar_bounded.json"),
        expected_exit=EXIT_OK,
        expected_output_file="solve_scalar_bounded.json",
    ),
    CliCase(
        name="solve_scalar_worked_example",
        description="one-step scalar instance with known coefficients",
        command="solve-scalar",
        config=ConfigSource(template="scalar_worked_example.json"),
        expected_exit=EXIT_OK,
        expected_output_file="solve_scalar_worked_example.json",
    ),
    CliCase(
        name="solve_nd_bounded",
        description="double integrator value matrices",
        command="solve-nd",
        config=ConfigSource(template="nd_bounded.json"),
        expected_exit=EXIT_OK,
        expected_output_file="solve_nd_bounded.json",
    ),
    CliCase(
        name="solve_finite_two_state",
        description="tabular backward induction",
        command="solve-finite",
        config=ConfigSource(template="finite_two_state.json"),
        expected_exit=EXIT_OK,
        expected_output_file="solve_finite_two_state.json",
    ),
    CliCase(
        name="simulate_finite_two_state",
        description="tabular policies driving Monte Carlo rollouts",
        command="simulate",
        config=ConfigSource(template="finite_two_state.json"),
        expected_exit=EXIT_OK,
        expected_output_file="simulate_finite_two_state.json",
    ),
]

FAILURE_CASES = [
    CliCase(
        name="zero_horizon",
        description="horizon below one is a configuration error",
        command="solve-scalar",
        config=ConfigSource(template="scalar_bounded.json", overrides={"horizon": 0}),
        expected_exit=EXIT_CONFIG,
    ),
    CliCase(
        name="two_mode_blocks",
        description="a scalar and an nd block in one file",
        command="solve-scalar",
        config=ConfigSource(
            template="scalar_bounded.json", overrides={"nd": {"Q": 1.0, "D": 0.5, "A": 0.9, "F": [[1.0]], "B": [[1.0]]}}
        ),
        expected_exit=EXIT_CONFIG,
    ),
    CliCase(
        name="mode_mismatch",
        description="solve-nd on a scalar config",
        command="solve-nd",
        config=ConfigSource(template="scalar_bounded.json"),
        expected_exit=EXIT_CONFIG,
    ),
    CliCase(
        name="unparseable_config",
        description="truncated JSON",
        command="solve-scalar",
        config=ConfigSource(raw_text='{"name": "broken",\n  "mode": "scalar",\n  "horizon": '),
        expected_exit=EXIT_CONFIG,
    ),
    CliCase(
        name="unknown_field",
        description="typos in field names are rejected",
        command="solve-scalar",
        config=ConfigSource(template="scalar_bounded.json", overrides={"horizn": 5}),
        expected_exit=EXIT_CONFIG,
    ),
    CliCase(
        name="nd_cost_not_positive_definite",
        description="an indefinite defender cost matrix is a configuration error",
        command="solve-nd",
        config=ConfigSource(template="nd_bounded.json", overrides={"nd": {"D": [[0.5, 0.0], [0.0, -0.5]]}}),
        expected_exit=EXIT_CONFIG,
    ),
    CliCase(
        name="simulate_without_simulation_block",
        description="simulate needs a simulation block",
        command="simulate",
        config=ConfigSource(template="scalar_bounded.json", overrides={"simulation": None}),
        expected_exit=EXIT_CONFIG,
    ),
    CliCase(
        name="negative_seed",
        description="seed override must be nonnegative",
        command="simulate",
        config=ConfigSource(template="scalar_bounded.json"),
        expected_exit=EXIT_CONFIG,
        extra_args=["--seed", "-1"],
    ),
    CliCase(
        name="strict_validity_violation",
        description="a step violating the mixed-equilibrium condition aborts a strict run",
        command="solve-scalar",
        config=ConfigSource(template="scalar_invalid_step.json"),
        expected_exit=EXIT_SOLVER,
        extra_args=["--strict"],
    ),
    CliCase(
        name="permissive_validity_violation",
        description="the same instance completes in permissive mode",
        command="solve-scalar",
        config=ConfigSource(template="scalar_invalid_step.json"),
        expected_exit=EXIT_OK,
        extra_args=["--permissive"],
    ),
    CliCase(
        name="output_under_regular_file",
        description="unwritable output directory",
        command="solve-scalar",
        config=ConfigSource(template="scalar_bounded.json"),
        expected_exit=EXIT_IO,
        out_under_file=True,
    ),
]

test_solve_commands = create_parametrized_test(SOLVE_CASES)
test_failure_exit_codes = create_parametrized_test(FAILURE_CASES)


def test_rerun_is_byte_identical(cli_runner, config_writer):
    config = config_writer.from_template("scalar_bounded.json", {"simulation": {"runs": 100}})
    first = cli_runner.run("simulate", config, cli_runner.out_root / "first")
    second = cli_runner.run("simulate", config, cli_runner.out_root / "second")
    assert first.exit_code == second.exit_code == EXIT_OK
    for name in ("coefficients.csv", "scalar_policy.csv", "simulation.csv"):
        assert first.raw(name) == second.raw(name)
    assert first.results()["metadata"]["config_hash"] == hashlib.sha256(config.read_bytes()).hexdigest()


def test_seed_override_changes_the_sample(cli_runner, config_writer):
    config = config_writer.from_template("scalar_bounded.json", {"simulation": {"runs": 50}})
    base = cli_runner.run("simulate", config, cli_runner.out_root / "base")
    other = cli_runner.run("simulate", config, cli_runner.out_root / "other", "--seed", "99")
    assert base.exit_code == other.exit_code == EXIT_OK
    assert base.raw("coefficients.csv") == other.raw("coefficients.csv")
    assert base.raw("simulation.csv") != other.raw("simulation.csv")


def test_csv_floats_keep_full_precision(cli_runner):
    result = cli_runner.run("solve-scalar", ConfigWriter.resolve("scalar_worked_example.json"))
    assert result.exit_code == EXIT_OK
    table = result.table("coefficients")
    assert table["p0"].iloc[0] == pytest.approx(2.14327158207, rel=1e-10)
    assert table["p0"].iloc[-1] == 1.0
    assert table["valid"].isna().iloc[-1]
    assert np.isnan(table["ptilde"].iloc[-1])


@pytest.mark.slow
def test_recovery_experiment(cli_runner, config_writer):
    config = config_writer.from_template("nd_recovery.json")
    result = cli_runner.run("simulate", config)
    assert result.exit_code == EXIT_OK
    simulation = result.table("simulation")
    assert len(simulation) == 101
    assert simulation["mean_alpha"].iloc[10] == 1.0
    assert simulation["mean_alpha"].iloc[100] < simulation["mean_alpha"].iloc[11]
    assert len(result.table("trajectories")) == 5 * 101


@pytest.mark.slow
def test_recovery_depends_on_defender_cost(cli_runner, config_writer):
    mean_alpha = {}
    for name in ("nd_recovery_short.json", "nd_recovery_equal_costs.json"):
        result = cli_runner.run("simulate", config_writer.from_template(name), cli_runner.out_root / name)
        assert result.exit_code == EXIT_OK
        alpha = result.table("simulation")["mean_alpha"]
        assert len(alpha) == 41
        assert alpha.iloc[10] == 1.0
        assert alpha.iloc[40] < alpha.iloc[11]
        mean_alpha[name] = alpha.iloc[40]
    assert abs(mean_alpha["nd_recovery_short.json"] - mean_alpha["nd_recovery_equal_costs.json"]) > 0.02


@pytest.mark.slow
def test_experiment_suite(cli_runner):
    result = cli_runner.run("experiment", None, cli_runner.out_root / "suite")
    assert result.exit_code == EXIT_OK
    names = {
        "scalar_bounded", "scalar_unbounded", "nd_bounded", "nd_unbounded", "nd_rotation_bounded",
        "nd_recovery", "nd_recovery_short", "nd_recovery_equal_costs", "finite_two_state",
    }
    assert set(result.files) == names
    for name in names:
        assert (result.out_dir / name / "results.json").exists()
        assert (result.out_dir / name / "simulation.csv").exists()


def test_run_experiment_in_memory():
    config = load_config(ConfigWriter.resolve("finite_two_state.json"))
    bundle = run_experiment(config, simulate=False)
    assert set(bundle.tables) == {"finite_values"}
    assert bundle.stats is None
    assert 0.0 <= bundle.summary["mixed_fraction"] <= 1.0
    values = bundle.tables["finite_values"]
    root = values[(values.k == 0) & (values.state == 0) & (values.alpha == 0)]["value"].iloc[0]
    assert bundle.summary["value_at_x0"] == root
