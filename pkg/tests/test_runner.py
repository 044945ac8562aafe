#!/usr/bin/env python3
"""Test suite for the experiment runner and its report files"""

import csv
import json

import pytest

from nstable import __version__, runner
from nstable.config import ExperimentConfig
from nstable.runner import (
    EXIT_CONFIG,
    EXIT_DOMAIN,
    EXIT_FAIL,
    EXIT_PASS,
    SCHEMA,
    build_report,
    report_digest,
    run,
)


@pytest.fixture
def geometric_exponential():
    """verify-stability config for geometric(1/2) sums of Exp(1)"""
    return ExperimentConfig(command="verify-stability", N="geometric:p=0.5", X="exp1", n=20_000, seed=42)


@pytest.fixture
def doubling():
    """simulate-bgw config with two children each"""
    return ExperimentConfig(command="simulate-bgw", N="constant:k=2", generations=5, n=100, seed=1)


class TestCommands:
    """Test cases for the command handlers"""

    def test_verify_stability_random_sum(self, geometric_exponential):
        """Test c defaults to E[N] for the exponential law"""
        result = run(geometric_exponential)
        assert result.exit_code == EXIT_PASS
        record = result.report["reports"][0]
        assert record["statistic_name"] == "ks_pvalue"
        assert record["details"]["c"] == pytest.approx(2.0)

    def test_verify_stability_functional_equation(self):
        """Test the phi(L(u)) = L(cu) residual for negbin-kM and Gamma(1/2)"""
        config = ExperimentConfig(command="verify-stability", N="negbin-kM:p=0.5,k=2", L="gamma:shape=0.5")
        result = run(config)
        assert result.exit_code == EXIT_PASS
        record = result.report["reports"][0]
        assert record["statistic_name"] == "poincare_residual"
        assert record["details"]["c"] == pytest.approx(2.0)

    def test_infinite_mean_needs_scale(self):
        """Test an infinite-mean N with --L and no --c is a config error"""
        config = ExperimentConfig(command="verify-stability", N="sibuya:p=0.5", L="mittag-leffler")
        result = run(config)
        assert result.exit_code == EXIT_CONFIG
        assert "--c" in result.error

    def test_verify_stability_needs_law(self):
        """Test verify-stability without --X or --L"""
        assert run(ExperimentConfig(command="verify-stability", N="geometric")).exit_code == EXIT_CONFIG

    def test_semigroup_scan(self):
        """Test the cosh scan accepts the squares"""
        result = run(ExperimentConfig(command="semigroup-scan", L="cosh", c_grid="1..16"))
        assert result.exit_code == EXIT_PASS
        details = result.report["reports"][0]["details"]
        assert details["accepted"] == [1.0, 4.0, 9.0, 16.0]
        assert details["classification"] == "Squares"
        assert details["closure_violations"] == []

    def test_semigroup_scan_needs_grid(self):
        """Test a missing --c-grid is a config error"""
        result = run(ExperimentConfig(command="semigroup-scan", L="cosh"))
        assert result.exit_code == EXIT_CONFIG
        assert "--c-grid" in result.error

    def test_commuting_pair(self):
        """Test geometric PGFs commute"""
        config = ExperimentConfig(command="commute-check", N="geometric:p=0.5", M="geometric:p=0.25")
        assert run(config).exit_code == EXIT_PASS

    def test_non_commuting_pair(self):
        """Test geometric and hitting-time PGFs do not commute"""
        config = ExperimentConfig(command="commute-check", N="geometric:p=0.5", M="chebyshev-hitting:n=2")
        result = run(config)
        assert result.exit_code == EXIT_FAIL
        assert result.report["reports"][0]["verdict"] == "fail"

    def test_commuting_mapped_pgfs(self):
        """Test the mapped PGFs of one transform commute"""
        config = ExperimentConfig(command="commute-check", L="cosh", c_grid="4,9")
        assert run(config).exit_code == EXIT_PASS

    def test_simulate_bgw(self, doubling):
        """Test mean and extinction checks for a deterministic brood"""
        result = run(doubling)
        assert result.exit_code == EXIT_PASS
        names = [r["statistic_name"] for r in result.report["reports"]]
        assert names == ["branching_identity_z", "extinction_z"]

    def test_simulate_ctbp(self):
        """Test E[N(t)] = e^t for binary splitting"""
        config = ExperimentConfig(command="simulate-ctbp", H="yule", t_end=1.0, n=5000, seed=2)
        assert run(config).exit_code == EXIT_PASS

    def test_explosive_process(self):
        """Test a domain error exits with code 3"""
        config = ExperimentConfig(command="simulate-ctbp", H="theta:theta=-0.5,q=0", n=10)
        result = run(config)
        assert result.exit_code == EXIT_DOMAIN
        assert "simulate_ctbp" in result.error

    def test_unexpected_error_names_operation(self, monkeypatch):
        """Test a failure outside the toolkit errors exits with 3 and names the command"""

        def broken(config, watch):
            raise FloatingPointError("overflow in exp")

        monkeypatch.setitem(runner.HANDLERS, "sample", broken)
        result = run(ExperimentConfig(command="sample", X="exp1"))
        assert result.exit_code == EXIT_DOMAIN
        assert result.error == "sample: FloatingPointError: overflow in exp"
        assert result.report is None

    def test_sample_law(self):
        """Test Exp(1) draws against their Laplace transform"""
        result = run(ExperimentConfig(command="sample", X="exp1", n=20_000, seed=3))
        assert result.exit_code == EXIT_PASS
        assert result.report["reports"][0]["statistic_name"] == "laplace_gap"

    def test_sample_counting_law(self):
        """Test hitting-time masses against the series coefficients"""
        result = run(ExperimentConfig(command="sample", N="chebyshev-hitting:n=2", n=20_000, seed=3))
        assert result.exit_code == EXIT_PASS
        assert result.report["reports"][0]["statistic_name"] == "mass_z"

    def test_limit_check_transform(self):
        """Test the scaling limit of the exponential transform at c = 1000"""
        result = run(ExperimentConfig(command="limit-check", L="exponential", c_grid="1000"))
        assert result.exit_code == EXIT_PASS
        assert result.report["reports"][0]["threshold"] == pytest.approx(1000 ** -0.5)

    def test_limit_check_median_norming(self):
        """Test infinite-mean offspring are reported as a median-normed diagnostic"""
        config = ExperimentConfig(command="limit-check", N="sibuya:p=0.8", generations=2, n=500)
        record = run(config).report["reports"][0]
        assert record["statistic_name"] == "median_constant"
        assert record["details"]["norming"] == "median"


class TestReport:
    """Test cases for report.json and its digest"""

    def test_report_fields(self, doubling):
        """Test schema, version and provenance"""
        report = run(doubling).report
        assert report["schema"] == SCHEMA
        assert report["toolkit_version"] == __version__
        assert report["config"]["N"] == "constant:k=2"
        assert "threads" not in report["config"]
        assert report["digest"] == report_digest(report)

    def test_digest_ignores_runtime(self, doubling):
        """Test runtime_ms does not enter the digest"""
        report = run(doubling).report
        report["reports"][0]["runtime_ms"] += 1000
        assert report_digest(report) == report["digest"]

    def test_digest_is_deterministic(self, doubling):
        """Test the same config and seed give the same digest"""
        assert run(doubling).report["digest"] == run(doubling).report["digest"]

    def test_digest_ignores_threads(self):
        """Test the digest is the same for any thread count"""
        base = ExperimentConfig(command="simulate-bgw", N="geometric:p=0.5", generations=6, n=5000, seed=7)
        one = run(base).report["digest"]
        four = run(base.override(threads=4)).report["digest"]
        assert one == four

    def test_digest_depends_on_seed(self, doubling):
        """Test a different seed changes the digest"""
        assert run(doubling).report["digest"] != run(doubling.override(seed=2)).report["digest"]

    def test_suite_provenance(self, doubling):
        """Test suite reports list every experiment config"""
        other = doubling.override(name="second")
        report = build_report([doubling, other], [])
        assert [c.get("name") for c in report["config"]["experiments"]] == [None, "second"]

    def test_output_files(self, doubling, tmp_path):
        """Test report.json, reports.jsonl and samples.csv"""
        result = run(doubling, out=tmp_path / "out")
        assert set(result.paths) == {"report", "records", "samples"}
        with open(result.paths["report"], encoding="utf-8") as f:
            assert json.load(f)["digest"] == result.report["digest"]
        with open(result.paths["records"], encoding="utf-8") as f:
            lines = [json.loads(line) for line in f]
        assert len(lines) == 2
        with open(result.paths["samples"], newline="", encoding="utf-8") as f:
            rows = list(csv.reader(f))
        assert rows[0] == ["simulate-bgw:N_k"]
        assert len(rows) == 101
        assert rows[1] == ["32"]

    def test_no_output_without_out(self, doubling):
        """Test nothing is written when no output directory is given"""
        assert run(doubling).paths == {}

    def test_empty_run(self):
        """Test running nothing is a config error"""
        assert run([]).exit_code == EXIT_CONFIG
