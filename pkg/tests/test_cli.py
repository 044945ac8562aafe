#!/usr/bin/env python3
"""Test suite for nstable CLI functionality"""

import json
from pathlib import Path

import pytest
import yaml
from click.testing import CliRunner

from nstable.cli import cli

FIXTURES = Path(__file__).parent / "fixtures"


@pytest.fixture
def runner():
    """Create a CLI test runner"""
    return CliRunner()


@pytest.fixture
def single_experiment(tmp_path):
    """A config file holding one sample experiment"""
    path = tmp_path / "single.yaml"
    path.write_text(yaml.safe_dump({"command": "sample", "X": "exp1", "n": 2000, "seed": 5}))
    return path


class TestCLI:
    """Test cases for CLI functionality"""

    def test_cli_help(self, runner):
        """Test CLI help output"""
        result = runner.invoke(cli, ['--help'])
        assert result.exit_code == 0
        assert 'random-stable laws and PGF semigroups' in result.output
        for command in ('verify-stability', 'semigroup-scan', 'commute-check', 'simulate-bgw',
                        'simulate-ctbp', 'sample', 'limit-check', 'run', 'catalog'):
            assert command in result.output

    def test_command_help(self, runner):
        """Test shared experiment flags"""
        result = runner.invoke(cli, ['verify-stability', '--help'])
        assert result.exit_code == 0
        for flag in ('--N', '--X', '--L', '--c-grid', '--seed', '--threads', '--out', '--config'):
            assert flag in result.output

    def test_verify_stability(self, runner):
        """Test geometric summation of Exp(1)"""
        result = runner.invoke(cli, [
            'verify-stability', '--N', 'geometric:p=0.5', '--X', 'exp1', '--c', '2',
            '--n', '20000', '--seed', '42',
        ])
        assert result.exit_code == 0
        assert '--- Summary ---' in result.output
        assert 'ks_pvalue=' in result.output
        assert 'digest' in result.output

    def test_semigroup_scan(self, runner):
        """Test the cosh scan from the command line"""
        result = runner.invoke(cli, ['semigroup-scan', '--L', 'cosh', '--c-grid', '1..16'])
        assert result.exit_code == 0
        assert 'closure_violations=0' in result.output

    def test_failed_verdict(self, runner):
        """Test a failing verdict exits with 1"""
        result = runner.invoke(cli, ['commute-check', '--N', 'geometric:p=0.5', '--M', 'chebyshev-hitting:n=2'])
        assert result.exit_code == 1
        assert '✗' in result.output

    def test_unknown_law(self, runner):
        """Test unknown catalog names exit with 2"""
        result = runner.invoke(cli, ['verify-stability', '--N', 'poisson', '--X', 'exp1'])
        assert result.exit_code == 2
        assert 'Config error' in result.output
        assert 'geometric' in result.output

    def test_missing_flag(self, runner):
        """Test a missing required flag exits with 2"""
        result = runner.invoke(cli, ['semigroup-scan', '--L', 'cosh'])
        assert result.exit_code == 2
        assert '--c-grid' in result.output

    def test_domain_error(self, runner):
        """Test an explosive process exits with 3"""
        result = runner.invoke(cli, ['simulate-ctbp', '--H', 'theta:theta=-0.5', '--n', '10'])
        assert result.exit_code == 3
        assert 'simulate_ctbp' in result.output

    def test_out_directory(self, runner, tmp_path):
        """Test report files are written with --out"""
        out = tmp_path / "results"
        result = runner.invoke(cli, [
            'simulate-bgw', '--N', 'constant:k=2', '--generations', '4', '--n', '50', '--out', str(out),
        ])
        assert result.exit_code == 0
        assert (out / "report.json").exists()
        assert (out / "reports.jsonl").exists()
        assert (out / "samples.csv").exists()

    def test_config_with_overrides(self, runner, single_experiment, tmp_path):
        """Test a single-experiment config file with flags overriding it"""
        out = tmp_path / "results"
        result = runner.invoke(cli, [
            'sample', '--config', str(single_experiment), '--n', '20000', '--out', str(out), '-v',
        ])
        assert result.exit_code == 0
        with open(out / "report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert report["config"]["n"] == 20000
        assert report["config"]["seed"] == 5

    def test_config_with_several_experiments(self, runner):
        """Test experiment commands refuse multi-experiment files"""
        result = runner.invoke(cli, ['sample', '--config', str(FIXTURES / "minimal_suite.yaml")])
        assert result.exit_code == 2
        assert "nstable run" in result.output

    def test_missing_config_file(self, runner, tmp_path):
        """Test a missing config file exits with 2"""
        result = runner.invoke(cli, ['sample', '--config', str(tmp_path / "missing.yaml")])
        assert result.exit_code == 2

    def test_catalog(self, runner):
        """Test the catalog listing"""
        result = runner.invoke(cli, ['catalog'])
        assert result.exit_code == 0
        assert 'counting:' in result.output
        assert 'bgw-limit' in result.output
        assert 'mittag-leffler' in result.output
        assert 'implements: square scale semigroup of the Brownian exit time' in result.output
        assert result.output.count('implements:') >= 12

    def test_process_marginals_by_name(self, runner):
        """Test the yule and neveu counting names on the command line"""
        result = runner.invoke(cli, ['simulate-bgw', '--N', 'yule:t=1', '--generations', '3', '--n', '2000'])
        assert result.exit_code == 0
        assert 'Config error' not in result.output
        result = runner.invoke(cli, ['sample', '--N', 'neveu:t=0.5', '--n', '20000', '--seed', '3'])
        assert result.exit_code == 0


class TestRunCommand:
    """Test cases for the suite runner"""

    @pytest.mark.integration
    def test_run_suite(self, runner, tmp_path):
        """Test the fixture suite end to end"""
        out = tmp_path / "suite"
        result = runner.invoke(cli, ['run', '--config', str(FIXTURES / "minimal_suite.yaml"), '--out', str(out)])
        assert result.exit_code == 0
        assert 'Running 2 experiments from minimal_suite.yaml' in result.output
        with open(out / "report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert [r["experiment"] for r in report["reports"]] == ["geometric-exponential", "cosh-scan"]
        assert len(report["config"]["experiments"]) == 2

    def test_seed_override(self, runner, tmp_path):
        """Test --seed overrides every experiment"""
        out = tmp_path / "suite"
        result = runner.invoke(cli, [
            'run', '--config', str(FIXTURES / "minimal_suite.yaml"), '--seed', '9', '--out', str(out),
        ])
        assert result.exit_code == 0
        with open(out / "report.json", encoding="utf-8") as f:
            report = json.load(f)
        assert {r["seed"] for r in report["reports"]} == {9}

    def test_run_requires_config(self, runner):
        """Test run without --config"""
        result = runner.invoke(cli, ['run'])
        assert result.exit_code == 2

    def test_run_missing_config(self, runner, tmp_path):
        """Test run with a missing file"""
        result = runner.invoke(cli, ['run', '--config', str(tmp_path / "missing.json")])
        assert result.exit_code == 2
        assert 'Config error' in result.output
