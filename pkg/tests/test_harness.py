import csv
import json
from pathlib import Path

import numpy as np
import pytest
from click.testing import CliRunner

from dzopo import harness
from dzopo.cli import main as cli_main
from dzopo.harness import ConfigError


def write_config(path, extra=""):
    path.write_text(
        "[experiment]\n"
        "name = tiny\n"
        "n_runs = 2\n"
        "base_seed = 3\n"
        f"output_dir = {path.parent / 'out'}\n"
        "[environment]\n"
        "rows = 2\n"
        "cols = 2\n"
        "[optimizer]\n"
        "n_episodes = 4\n"
        "t_max = 5\n"
        + extra
    )
    return path


class TestSpecParsing:
    def test_load_and_defaults(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        assert spec.name == "tiny"
        assert spec.n_runs == 2
        assert spec.env.rows == 2
        assert spec.optimizer.n_episodes == 4
        assert spec.env.horizon == 5  # follows t_max
        assert spec.topology == "chain"

    def test_cli_override_precedence(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"),
                                 overrides=["optimizer.n_consensus=4", "experiment.n_runs=1"])
        assert spec.optimizer.n_consensus == 4
        assert spec.n_runs == 1

    def test_unknown_key_reports_field_path(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            harness.load_spec(write_config(tmp_path / "exp.ini", extra="bogus = 1\n"))
        assert "optimizer.bogus" in str(err.value)

    def test_unparsable_value(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            harness.load_spec(write_config(tmp_path / "exp.ini"), overrides=["optimizer.delta=huge"])
        assert "optimizer.delta" in str(err.value)

    def test_bad_override_shape(self, tmp_path):
        with pytest.raises(ConfigError):
            harness.load_spec(write_config(tmp_path / "exp.ini"), overrides=["n_runs=2"])

    def test_estimator_validation(self, tmp_path):
        with pytest.raises(ConfigError) as err:
            harness.load_spec(write_config(tmp_path / "exp.ini"), overrides=["optimizer.estimator=threepoint"])
        assert "optimizer.estimator" in str(err.value)

    def test_spec_hash_stable(self, tmp_path):
        a = harness.load_spec(write_config(tmp_path / "exp.ini"))
        b = harness.load_spec(write_config(tmp_path / "exp2.ini"))
        assert a.spec_hash() == b.spec_hash()


class TestRunExperiment:
    def test_single_run_single_episode_csv(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"),
                                 overrides=["experiment.n_runs=1", "optimizer.n_episodes=1"])
        harness.run_experiment(spec)
        out = Path(spec.output_dir)
        with open(out / "run_000.csv", newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == harness.RUN_CSV_COLUMNS
        assert len(rows) == 2

    def test_rerun_identical_outputs(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        harness.run_experiment(spec)
        first = (Path(spec.output_dir) / "run_001.csv").read_bytes()
        first_summary = (Path(spec.output_dir) / "summary.csv").read_bytes()
        harness.run_experiment(spec)
        assert (Path(spec.output_dir) / "run_001.csv").read_bytes() == first
        assert (Path(spec.output_dir) / "summary.csv").read_bytes() == first_summary

    def test_manifest_round_trip(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        harness.run_experiment(spec)
        out = Path(spec.output_dir)
        data = (out / "run_000.csv").read_bytes()
        spec2 = harness.load_spec(out / "manifest.json",
                                  overrides=[f"experiment.output_dir={tmp_path / 'out2'}"])
        harness.run_experiment(spec2)
        assert (tmp_path / "out2" / "run_000.csv").read_bytes() == data

    def test_manifest_contents(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        harness.run_experiment(spec)
        with open(Path(spec.output_dir) / "manifest.json") as f:
            manifest = json.load(f)
        assert manifest["spec_hash"] == spec.spec_hash()
        assert "wall_clock_seconds" in manifest
        assert len(manifest["final_returns"]) == 2

    def test_policy_checkpoints_written(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        harness.run_experiment(spec)
        assert (Path(spec.output_dir) / "policy_000.json").exists()
        assert (Path(spec.output_dir) / "policy_001.json").exists()

    def test_unwritable_output_dir(self, tmp_path):
        target = tmp_path / "blocked"
        target.write_text("a file, not a directory")
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"),
                                 overrides=[f"experiment.output_dir={target}"])
        with pytest.raises(OSError):
            harness.run_experiment(spec)

    def test_summary_statistics_shape(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        summary = harness.run_experiment(spec)
        assert summary.median_return.shape == (4,)
        assert summary.per_run_returns.shape == (2, 4)
        assert np.all(summary.q25_return <= summary.q75_return)


class TestCompare:
    def test_self_comparison_is_a_tie(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        harness.run_experiment(spec)
        report = harness.compare(spec.output_dir, spec.output_dir)
        assert report.win_rate == 0.5
        assert np.all(report.median_difference == 0)

    def test_mismatched_experiments_rejected(self, tmp_path):
        spec_a = harness.load_spec(write_config(tmp_path / "a.ini"),
                                   overrides=[f"experiment.output_dir={tmp_path/'oa'}"])
        spec_b = harness.load_spec(write_config(tmp_path / "b.ini"),
                                   overrides=[f"experiment.output_dir={tmp_path/'ob'}",
                                              "optimizer.n_episodes=6"])
        harness.run_experiment(spec_a)
        harness.run_experiment(spec_b)
        with pytest.raises(ValueError):
            harness.compare(spec_a.output_dir, spec_b.output_dir)


class TestEstimateConstants:
    def test_zero_reward_environment(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"),
                                 overrides=["environment.amplitude_range=0,0",
                                            "environment.demand_noise_std=0"])
        est = harness.estimate_constants(spec, n_probe=5)
        assert est.j_u_hat == est.j_l_hat == 0.0
        assert est.sigma_hat == 0.0
        assert est.grad_norm_sq_hat == 0.0

    def test_noise_free_sigma_zero(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"),
                                 overrides=["environment.demand_noise_std=0"])
        est = harness.estimate_constants(spec, n_probe=5)
        assert est.sigma_hat == 0.0

    def test_default_environment_finite_estimates(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        est = harness.estimate_constants(spec, n_probe=20)
        assert est.j_l_hat <= est.j_u_hat <= 0.0
        assert est.sigma_hat >= 0.0
        assert np.isfinite(est.grad_norm_sq_hat)

    def test_probe_count_validated(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        with pytest.raises(ValueError):
            harness.estimate_constants(spec, n_probe=1)


class TestTraceDump:
    def test_trace_csv_schema(self, tmp_path):
        spec = harness.load_spec(write_config(tmp_path / "exp.ini"))
        path = tmp_path / "trace.csv"
        harness.dump_trace_csv(path, spec, seed=0)
        with open(path, newline="") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["t", "agent", "m", "d", "reward"]
        assert len(rows) == 1 + 5 * 4


class TestCli:
    def test_run_and_compare(self, tmp_path):
        runner = CliRunner()
        cfg = write_config(tmp_path / "exp.ini")
        result = runner.invoke(cli_main, ["run", str(cfg)])
        assert result.exit_code == 0, result.output
        out = tmp_path / "out"
        result = runner.invoke(cli_main, ["compare", str(out), str(out)])
        assert result.exit_code == 0
        assert "0.50" in result.output

    def test_config_error_exit_code(self, tmp_path):
        runner = CliRunner()
        cfg = write_config(tmp_path / "exp.ini")
        result = runner.invoke(cli_main, ["run", str(cfg), "--set", "optimizer.delta=-1"])
        assert result.exit_code == 2

    def test_verify_command(self):
        runner = CliRunner()
        result = runner.invoke(cli_main, ["verify"])
        assert result.exit_code == 0
        assert "PASS" in result.output and "FAIL" not in result.output

    def test_estimate_constants_command(self, tmp_path):
        runner = CliRunner()
        cfg = write_config(tmp_path / "exp.ini")
        result = runner.invoke(cli_main, ["estimate-constants", str(cfg), "--n-probe", "4"])
        assert result.exit_code == 0
        assert "J_u_hat" in result.output

    def test_output_root_env_var(self, tmp_path, monkeypatch):
        runner = CliRunner()
        cfg = (tmp_path / "exp.ini")
        cfg.write_text("[experiment]\nname = t\noutput_dir = rel_out\n"
                       "[environment]\nrows = 2\ncols = 2\n"
                       "[optimizer]\nn_episodes = 2\nt_max = 3\n")
        monkeypatch.setenv("DZOPO_OUTPUT_ROOT", str(tmp_path / "root"))
        result = runner.invoke(cli_main, ["run", str(cfg)])
        assert result.exit_code == 0, result.output
        assert (tmp_path / "root" / "rel_out" / "summary.csv").exists()
