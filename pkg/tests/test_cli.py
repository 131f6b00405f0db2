"""Tests for CLI interface."""

import json
import os
import tempfile
from unittest.mock import patch

from click.testing import CliRunner

from snipesim.cli.main import cli
from snipesim.core.settings import settings


class TestCLI:
    """Test the main CLI interface."""

    def test_cli_help(self):
        """Test CLI help output."""
        runner = CliRunner()
        result = runner.invoke(cli, ["--help"])

        assert result.exit_code == 0
        assert "snipesim - BRC20 PSBT sniping simulator" in result.output
        for command in ("run", "list", "report", "reports", "show"):
            assert command in result.output

    def test_cli_version(self):
        """Test CLI version output."""
        runner = CliRunner()
        result = runner.invoke(cli, ["--version"])

        assert result.exit_code == 0
        assert "1.0.0" in result.output

    def test_run_command_help(self):
        """Test run command help."""
        runner = CliRunner()
        result = runner.invoke(cli, ["run", "--help"])

        assert result.exit_code == 0
        for option in ("--scenario", "--seed", "--policy", "--fee-lock", "--format", "--out", "--save"):
            assert option in result.output

    def test_run_command_missing_scenario(self):
        """Test run fails without a scenario."""
        runner = CliRunner()
        result = runner.invoke(cli, ["run"])

        assert result.exit_code != 0
        assert "Missing option '--scenario'" in result.output

    def test_run_invalid_policy(self):
        """Test the policy choice is enforced."""
        runner = CliRunner()
        result = runner.invoke(cli, ["run", "--scenario", "round1", "--policy", "fifo"])

        assert result.exit_code != 0
        assert "Invalid value for '--policy'" in result.output


class TestRunCommand:
    """Test running scenarios."""

    def test_run_text(self):
        """Test the text report goes to stdout and passes."""
        runner = CliRunner()
        result = runner.invoke(cli, ["run", "--scenario", "round1"])

        assert result.exit_code == 0
        assert "scenario round1" in result.output
        assert "winner tx fee_sats=28125000" in result.output
        assert "  role=attacker-high" in result.output
        assert "result PASS" in result.output

    def test_run_json(self):
        """Test the json report is parseable."""
        runner = CliRunner()
        result = runner.invoke(cli, ["run", "--scenario", "round2", "--format", "json"])

        assert result.exit_code == 0
        document = json.loads(result.output)
        assert document["scenario"] == "round2"
        assert document["contests"][0]["winner"] == "attacker-high"

    def test_run_seed_override(self):
        """Test the seed option reaches the report."""
        runner = CliRunner()
        result = runner.invoke(cli, ["run", "--scenario", "baseline", "--seed", "5", "--format", "json"])

        assert result.exit_code == 0
        assert json.loads(result.output)["seed"] == 5

    def test_run_seed_from_environment(self):
        """Test the environment seed applies when no option is given."""
        runner = CliRunner()
        with patch.object(settings, "seed", 12):
            result = runner.invoke(cli, ["run", "--scenario", "baseline", "--format", "json"])

        assert result.exit_code == 0
        assert json.loads(result.output)["seed"] == 12

    def test_run_bad_policy_from_environment(self):
        """Test an unknown policy reaching the run exits 1 without a traceback."""
        runner = CliRunner()
        with patch.object(settings, "policy", "fifo"):
            result = runner.invoke(cli, ["run", "--scenario", "baseline"])

        assert result.exit_code == 1
        assert "✗ Unknown policy 'fifo'" in result.output
        assert "Traceback" not in result.output

    def test_run_failing_step(self):
        """Test a failing step exits 1 with its location."""
        runner = CliRunner()
        result = runner.invoke(cli, ["run", "--scenario", "round1", "--policy", "rbf"])

        assert result.exit_code == 1
        assert "✗ step 6 (snipe)" in result.output

    def test_run_failing_expectations(self):
        """Test unmet expectations exit 1 after printing the report."""
        document = {
            "name": "strict",
            "wallets": ["miner"],
            "actors": [{"action": "mine", "miner": "miner"}],
            "expectations": [{"kind": "mempool-size", "equals": 1}],
        }
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "strict.json")
            with open(path, "w") as f:
                json.dump(document, f)
            result = runner.invoke(cli, ["run", "--scenario", path])

        assert result.exit_code == 1
        assert "FAIL mempool holds 1 txs" in result.output
        assert "result FAIL" in result.output

    def test_run_unknown_scenario(self):
        """Test an unknown scenario exits 1."""
        runner = CliRunner()
        result = runner.invoke(cli, ["run", "--scenario", "round9"])

        assert result.exit_code == 1
        assert "✗ Unknown scenario" in result.output

    def test_run_out_and_report(self):
        """Test writing a json report and re-rendering it."""
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "round1.json")
            result = runner.invoke(cli, ["run", "--scenario", "round1", "--format", "json", "--out", path])

            assert result.exit_code == 0
            assert "Report written to" in result.output
            assert "Scenario round1" in result.output
            with open(path) as f:
                assert json.load(f)["scenario"] == "round1"

            rendered = runner.invoke(cli, ["report", "--in", path])
            assert rendered.exit_code == 0
            assert rendered.output.startswith("scenario round1\n")
            assert "result PASS" in rendered.output

    def test_run_save_and_reports(self):
        """Test saved reports are listed."""
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as temp_dir:
            with patch.object(settings, "report_dir", temp_dir):
                empty = runner.invoke(cli, ["reports"])
                result = runner.invoke(cli, ["run", "--scenario", "baseline", "--save"])
                listed = runner.invoke(cli, ["reports"])

            assert os.path.exists(os.path.join(temp_dir, "baseline-seed0.json"))

        assert "No saved reports" in empty.output
        assert result.exit_code == 0
        assert "Report saved to" in result.output
        assert "Saved reports (1):" in listed.output
        assert "baseline-seed0.json" in listed.output

    def test_debug_flag(self):
        """Test the debug flag is announced."""
        runner = CliRunner()
        result = runner.invoke(cli, ["--debug", "list"])

        assert result.exit_code == 0
        assert "Debug mode enabled" in result.output


class TestOtherCommands:
    """Test list, report and show."""

    def test_list(self):
        """Test built-in scenarios are listed."""
        runner = CliRunner()
        result = runner.invoke(cli, ["list"])

        assert result.exit_code == 0
        assert "Built-in scenarios" in result.output
        assert "round1" in result.output
        assert "mitigation-feelock" in result.output

    def test_report_missing_file(self):
        """Test re-rendering a missing report."""
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as temp_dir:
            result = runner.invoke(cli, ["report", "--in", os.path.join(temp_dir, "none.json")])

        assert result.exit_code == 1
        assert "✗ Error reading report" in result.output

    def test_report_not_a_report(self):
        """Test re-rendering a file that is not a report."""
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "other.json")
            with open(path, "w") as f:
                f.write('{"hello": 1}')
            result = runner.invoke(cli, ["report", "--in", path])

        assert result.exit_code == 1
        assert "Not a snipesim json report" in result.output

    def test_show(self):
        """Test a scenario document is shown."""
        runner = CliRunner()
        result = runner.invoke(cli, ["show", "--scenario", "round1"])

        assert result.exit_code == 0
        assert "Scenario round1" in result.output
        assert '"publish-psbt"' in result.output

    def test_show_export_then_run(self):
        """Test an exported scenario runs from its file."""
        runner = CliRunner()
        with tempfile.TemporaryDirectory() as temp_dir:
            path = os.path.join(temp_dir, "tiered.json")
            exported = runner.invoke(cli, ["show", "--scenario", "mitigation-tiered", "--out", path])
            result = runner.invoke(cli, ["run", "--scenario", path])

        assert exported.exit_code == 0
        assert "Scenario written to" in exported.output
        assert result.exit_code == 0
        assert "result PASS" in result.output

    def test_show_unknown(self):
        """Test showing an unknown scenario."""
        runner = CliRunner()
        result = runner.invoke(cli, ["show", "--scenario", "round9"])

        assert result.exit_code == 1
        assert "✗ Unknown scenario" in result.output
